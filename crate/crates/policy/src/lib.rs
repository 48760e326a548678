//! Graph neural network policy that proposes flow prolongations, with its
//! REINFORCE training loop.

pub mod checkpoint;
pub mod graph;
pub mod importance;
pub mod model;
pub mod topk;
pub mod train;

use ludbfp_core::netmodel::ServerGraph;
use ludbfp_core::prolong::{Prolongation, ProlongationPredictor};

pub use checkpoint::{Checkpoint, CheckpointError};
pub use graph::{transform_graph, AnalysisGraph, FEATURES};
pub use model::{forward, Params, PolicyOutput};
pub use topk::select_top_k;

/// A trained policy used as a prolongation predictor.
#[derive(Clone, Debug)]
pub struct GnnPredictor {
    pub params: Params,
    /// Message-passing rounds; the graph diameter when `None`.
    pub iterations: Option<usize>,
}

impl GnnPredictor {
    pub fn new(params: Params) -> Self {
        GnnPredictor { params, iterations: None }
    }
}

impl ProlongationPredictor for GnnPredictor {
    fn top_k(&self, net: &ServerGraph, k: usize) -> Vec<Prolongation> {
        let Ok(g) = transform_graph(net) else {
            return Vec::new();
        };
        let iters = self.iterations.unwrap_or_else(|| model::default_iterations(&g));
        let policy = forward(&g, &self.params, iters);
        select_top_k(&policy, k).iter().map(|picks| g.assignment(picks)).collect()
    }
}
