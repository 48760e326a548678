//! Checkpoint files: a text header followed by the parameters as
//! little-endian `f64` in [`Layout`] order.
//!
//! ```text
//! ludbfp-gnn 1
//! features 13
//! hidden 128
//! blocks w_init=1664 b_init=128 ...
//! episode 0
//! rng - 0
//! data
//! <8 · total bytes>
//! ```

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::model::{Layout, Params};

const MAGIC: &str = "ludbfp-gnn 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Params,
    /// Episodes trained so far.
    pub episode: u64,
    /// Seed and word position of the training RNG, for resuming.
    pub rng: Option<([u8; 32], u128)>,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
}

fn blocks(l: &Layout) -> String {
    let h = l.hidden;
    let parts = [
        ("w_init", l.b_init - l.w_init),
        ("b_init", h),
        ("w_msg", h * h),
        ("w_gru", 3 * h * h),
        ("u_gru", 3 * h * h),
        ("b_z", h),
        ("b_n", h),
        ("a1", 2 * h * h),
        ("a1_b", h),
        ("a2", h),
        ("a2_b", 1),
        ("o1", h * h),
        ("o1_b", h),
        ("o2", h),
        ("o2_b", 1),
    ];
    parts.iter().map(|(n, s)| format!("{n}={s}")).collect::<Vec<_>>().join(" ")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

impl Checkpoint {
    pub fn new(params: Params) -> Self {
        Checkpoint {
            params,
            episode: 0,
            rng: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let l = &self.params.layout;
        let rng = match &self.rng {
            Some((seed, pos)) => format!("{} {pos}", hex(seed)),
            None => "- 0".into(),
        };
        let header = format!(
            "{MAGIC}\nfeatures {}\nhidden {}\nblocks {}\nepisode {}\nrng {rng}\ndata\n",
            l.features,
            l.hidden,
            blocks(l),
            self.episode
        );
        let mut out = header.into_bytes();
        for v in &self.params.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let bad = |m: &str| CheckpointError::Format(m.into());
        let marker = b"\ndata\n";
        let split = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or_else(|| bad("missing data section"))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not text"))?;
        let body = &bytes[split + marker.len()..];
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("unknown format or version"));
        }
        let mut field = |name: &str| -> Result<String, CheckpointError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| CheckpointError::Format(format!("expected {name}")))
        };
        let features: usize = field("features")?.parse().map_err(|_| bad("features"))?;
        let hidden: usize = field("hidden")?.parse().map_err(|_| bad("hidden"))?;
        let layout = Layout::new(features, hidden);
        if field("blocks")? != blocks(&layout) {
            return Err(bad("block shapes do not match"));
        }
        let episode = field("episode")?.parse().map_err(|_| bad("episode"))?;
        let rng_line = field("rng")?;
        let (seed, pos) = rng_line.split_once(' ').ok_or_else(|| bad("rng"))?;
        let rng = if seed == "-" {
            None
        } else {
            Some((unhex(seed).ok_or_else(|| bad("rng seed"))?, pos.parse().map_err(|_| bad("rng position"))?))
        };
        if body.len() != 8 * layout.total {
            return Err(bad("parameter count does not match the header"));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Checkpoint {
            params: Params { layout, data },
            episode,
            rng,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
