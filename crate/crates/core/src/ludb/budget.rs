//! Time and memory limits for one analysis.
//!
//! Memory is not measured; the builder charges a fixed estimate per term
//! node it allocates, which is a proxy for the real footprint.

use std::cell::Cell;
use std::time::{Duration, Instant};

use super::AnalysisError;

#[derive(Debug)]
pub struct Budget {
    deadline: Option<Instant>,
    memory_cap: Option<usize>,
    used: Cell<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            deadline: None,
            memory_cap: None,
            used: Cell::new(0),
        }
    }

    pub fn new(timeout: Option<Duration>, memory_cap_bytes: Option<usize>) -> Self {
        Budget {
            deadline: timeout.map(|t| Instant::now() + t),
            memory_cap: memory_cap_bytes,
            used: Cell::new(0),
        }
    }

    pub fn check(&self) -> Result<(), AnalysisError> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(AnalysisError::Timeout),
            _ => Ok(()),
        }
    }

    pub fn charge(&self, bytes: usize) -> Result<(), AnalysisError> {
        let used = self.used.get() + bytes;
        self.used.set(used);
        match self.memory_cap {
            Some(cap) if used > cap => Err(AnalysisError::OutOfMemory),
            _ => self.check(),
        }
    }

    pub fn used_bytes(&self) -> usize {
        self.used.get()
    }
}
