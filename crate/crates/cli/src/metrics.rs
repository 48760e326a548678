//! Metrics files: tab-separated, one row per (network, flow, method).
//!
//! ```text
//! network foi flows method success delay delay_f64 gap latency_improvement burstiness_improvement explored failures error
//! ```
//!
//! `gap` and `latency_improvement` are `(ludb-ff − method)/ludb-ff` on the
//! delay bound; `burstiness_improvement` is the same on the output burst.
//! Failed rows leave the numeric columns as `-`. Wall times go to the
//! `<file>.timing` sidecar (`network foi method wall_s`) so the main file is
//! reproducible byte for byte.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const HEADER: &str = "network\tfoi\tflows\tmethod\tsuccess\tdelay\tdelay_f64\tgap\tlatency_improvement\tburstiness_improvement\texplored\tfailures\terror";
pub const TIMING_HEADER: &str = "network\tfoi\tmethod\twall_s";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub network: String,
    pub foi: String,
    pub flows: usize,
    pub method: String,
    pub success: bool,
    /// Exact bound as `p/q`.
    pub delay: Option<String>,
    pub delay_f64: Option<f64>,
    pub gap: Option<f64>,
    pub latency_improvement: Option<f64>,
    pub burstiness_improvement: Option<f64>,
    pub explored: usize,
    pub failures: usize,
    pub error: Option<String>,
    pub wall_s: f64,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".into(), T::to_string)
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.9}"))
}

impl MetricsRecord {
    pub fn key(&self) -> (String, String, String) {
        (self.network.clone(), self.foi.clone(), self.method.clone())
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.network,
            self.foi,
            self.flows,
            self.method,
            self.success as u8,
            opt(&self.delay),
            num(self.delay_f64),
            num(self.gap),
            num(self.latency_improvement),
            num(self.burstiness_improvement),
            self.explored,
            self.failures,
            self.error.as_deref().unwrap_or("-").replace(['\t', '\n'], " "),
        )
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != 13 {
            bail!("expected 13 columns, got {}", c.len());
        }
        let f = |s: &str| -> Result<Option<f64>> { Ok(if s == "-" { None } else { Some(s.parse()?) }) };
        let s = |s: &str| (s != "-").then(|| s.to_string());
        Ok(MetricsRecord {
            network: c[0].into(),
            foi: c[1].into(),
            flows: c[2].parse()?,
            method: c[3].into(),
            success: c[4] == "1",
            delay: s(c[5]),
            delay_f64: f(c[6])?,
            gap: f(c[7])?,
            latency_improvement: f(c[8])?,
            burstiness_improvement: f(c[9])?,
            explored: c[10].parse()?,
            failures: c[11].parse()?,
            error: s(c[12]),
            wall_s: 0.0,
        })
    }
}

pub fn timing_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".timing");
    PathBuf::from(s)
}

/// Keys already present in a metrics file.
pub fn existing_keys(path: &Path) -> Result<BTreeSet<(String, String, String)>> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    Ok(read(path)?.into_iter().map(|r| r.key()).collect())
}

/// Appends rows, writing headers to new files.
pub fn append(path: &Path, rows: &[MetricsRecord]) -> Result<()> {
    let open = |p: &Path, header: &str| -> Result<fs::File> {
        let new = !p.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .with_context(|| format!("opening {}", p.display()))?;
        if new {
            writeln!(f, "{header}")?;
        }
        Ok(f)
    };
    let mut main = open(path, HEADER)?;
    let mut timing = open(&timing_path(path), TIMING_HEADER)?;
    for r in rows {
        writeln!(main, "{}", r.to_line())?;
        writeln!(timing, "{}\t{}\t{}\t{:.6}", r.network, r.foi, r.method, r.wall_s)?;
    }
    Ok(())
}

/// Reads a metrics file, with wall times from its sidecar when present.
pub fn read(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        rows.push(MetricsRecord::from_line(line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    if let Ok(t) = fs::read_to_string(timing_path(path)) {
        let walls: std::collections::BTreeMap<(String, String, String), f64> = t
            .lines()
            .skip(1)
            .filter_map(|l| {
                let c: Vec<&str> = l.split('\t').collect();
                (c.len() == 4).then(|| ((c[0].into(), c[1].into(), c[2].into()), c[3].parse().unwrap_or(0.0)))
            })
            .collect();
        for r in &mut rows {
            r.wall_s = walls.get(&r.key()).copied().unwrap_or(0.0);
        }
    }
    Ok(rows)
}
