//! Dataset directories: one `.net` file per network plus `manifest.tsv`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ludbfp_core::netmodel::{generate, parse_network, serialize_network, GeneratorConfig, ServerGraph, Topology};

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// Default training ranges.
    Train,
    /// Larger evaluation ranges.
    Eval,
    /// Small tandems, quick to analyze exhaustively.
    Small,
}

pub fn profile_config(profile: Profile, seed: u64) -> GeneratorConfig {
    match profile {
        Profile::Train => GeneratorConfig::train(seed),
        Profile::Eval => GeneratorConfig::eval(seed),
        Profile::Small => GeneratorConfig {
            topology: Topology::Tandem,
            servers: 3..=6,
            flows: 3..=8,
            path_len: 2..=5,
            utilization: (0.1, 0.9),
            seed,
        },
    }
}

/// Writes `count` networks drawn with seeds `seed, seed+1, …`.
pub fn write_dataset(dir: &Path, base: &GeneratorConfig, count: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = String::from("file\tseed\tservers\tflows\n");
    let mut files = Vec::with_capacity(count);
    for i in 0..count {
        let seed = base.seed.wrapping_add(i as u64);
        let net = generate(&GeneratorConfig { seed, ..base.clone() })
            .map_err(|e| crate::UsageError(format!("network {i}: {e}")))?;
        let name = format!("net-{i:05}.net");
        fs::write(dir.join(&name), serialize_network(&net))?;
        manifest.push_str(&format!("{name}\t{seed}\t{}\t{}\n", net.servers.len(), net.flows.len()));
        files.push(dir.join(name));
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(files)
}

/// Networks of a dataset directory in file-name order, or a single file.
pub fn load(path: &Path) -> Result<Vec<(String, ServerGraph)>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "net"))
            .collect();
        v.sort();
        v
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        bail!(crate::UsageError(format!("no such dataset: {}", path.display())));
    };
    files
        .into_iter()
        .map(|f| {
            let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
            let net = parse_network(&text).map_err(|e| crate::UsageError(format!("{}: {e}", f.display())))?;
            let id = f.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            Ok((id, net))
        })
        .collect()
}
