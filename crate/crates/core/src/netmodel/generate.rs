//! Seeded random networks: tandems, in-trees and Erdős–Rényi DAGs.

use std::ops::RangeInclusive;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Flow, Server, ServerGraph};
use crate::{rat, to_f64, Rational};

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    Tandem,
    /// Every server but the root links to a random lower-indexed parent;
    /// flows travel towards the root.
    Tree,
    /// `G(n, p)` with every edge oriented from the lower to the higher index.
    ErdosRenyi { p: f64 },
    /// Picks one of tandem, tree and Erdős–Rényi per network with the given
    /// weights.
    Mixed { weights: [f64; 3], p: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub topology: Topology,
    pub servers: RangeInclusive<usize>,
    pub flows: RangeInclusive<usize>,
    pub path_len: RangeInclusive<usize>,
    /// Range for the utilization of the most loaded server.
    pub utilization: (f64, f64),
    pub seed: u64,
}

impl GeneratorConfig {
    /// Sizes of the training set: 5–15 servers, 12–40 flows, paths of 3–6
    /// hops.
    pub fn train(seed: u64) -> Self {
        GeneratorConfig {
            topology: Topology::Mixed {
                weights: [1.0, 1.0, 1.0],
                p: 0.3,
            },
            servers: 5..=15,
            flows: 12..=40,
            path_len: 3..=6,
            utilization: (0.1, 0.9),
            seed,
        }
    }

    /// Larger networks as in the evaluation set: up to 30 servers, up to 493
    /// flows and 14 hops.
    pub fn eval(seed: u64) -> Self {
        GeneratorConfig {
            servers: 5..=30,
            flows: 5..=493,
            path_len: 3..=14,
            ..Self::train(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not satisfy the configuration after {0} attempts")]
    Unsatisfiable(usize),
}

const TOPOLOGY_ATTEMPTS: usize = 50;
const PATH_ATTEMPTS: usize = 2000;

fn unit(rng: &mut ChaCha8Rng) -> Rational {
    rat(rng.gen_range(1..=1000), 1000)
}

fn links(topology: &Topology, n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    match topology {
        Topology::Tandem => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        Topology::Tree => (1..n).map(|i| (i, rng.gen_range(0..i))).collect(),
        Topology::ErdosRenyi { p } => {
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(p.clamp(0.0, 1.0)) {
                        out.push((i, j));
                    }
                }
            }
            out
        }
        Topology::Mixed { weights, p } => {
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen_range(0.0..total);
            let mut pick = 2;
            for (i, w) in weights.iter().enumerate() {
                if x < *w {
                    pick = i;
                    break;
                }
                x -= w;
            }
            let t = match pick {
                0 => Topology::Tandem,
                1 => Topology::Tree,
                _ => Topology::ErdosRenyi { p: *p },
            };
            links(&t, n, rng)
        }
    }
}

fn random_path(succ: &[Vec<usize>], lens: &RangeInclusive<usize>, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let n = succ.len();
    for _ in 0..PATH_ATTEMPTS {
        let len = rng.gen_range(lens.clone());
        let mut path = vec![rng.gen_range(0..n)];
        while path.len() < len {
            let here = *path.last().expect("nonempty");
            match succ[here].choose(rng) {
                Some(&next) => path.push(next),
                None => break,
            }
        }
        if path.len() == len {
            return Some(path);
        }
    }
    None
}

/// Draws a network. Equal configurations give identical networks.
///
/// The flow of interest is set to the first flow with the longest path.
pub fn generate(cfg: &GeneratorConfig) -> Result<ServerGraph, GenerateError> {
    if cfg.servers.is_empty() || cfg.flows.is_empty() || cfg.path_len.is_empty() {
        return Err(GenerateError::Config("empty range".into()));
    }
    if *cfg.servers.start() == 0 || *cfg.path_len.start() == 0 || *cfg.flows.start() == 0 {
        return Err(GenerateError::Config("counts must be positive".into()));
    }
    let (ulo, uhi) = cfg.utilization;
    if !(0.0 < ulo && ulo <= uhi && uhi < 1.0) {
        return Err(GenerateError::Config("utilization must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    'topology: for _ in 0..TOPOLOGY_ATTEMPTS {
        let n = rng.gen_range(cfg.servers.clone());
        let links = links(&cfg.topology, n, &mut rng);
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in &links {
            succ[a].push(b);
        }
        let servers: Vec<Server> = (0..n)
            .map(|i| Server {
                id: format!("s{i}"),
                rate: unit(&mut rng),
                latency: unit(&mut rng),
            })
            .collect();
        let m = rng.gen_range(cfg.flows.clone());
        let mut paths = Vec::with_capacity(m);
        for _ in 0..m {
            match random_path(&succ, &cfg.path_len, &mut rng) {
                Some(p) => paths.push(p),
                None => continue 'topology,
            }
        }

        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.001..=1.0)).collect();
        let target = rng.gen_range(ulo..=uhi);
        let mut load = vec![0.0; n];
        for (p, r) in paths.iter().zip(&raw) {
            for &s in p {
                load[s] += r;
            }
        }
        let scale = (0..n)
            .filter(|&s| load[s] > 0.0)
            .map(|s| target * to_f64(&servers[s].rate) / load[s])
            .fold(f64::INFINITY, f64::min);
        let flows: Vec<Flow> = paths
            .into_iter()
            .zip(&raw)
            .enumerate()
            .map(|(i, (path, r))| {
                let k = ((r * scale * 10_000.0).floor() as i64).clamp(1, 10_000);
                Flow {
                    id: format!("f{i}"),
                    rate: rat(k, 10_000),
                    burst: unit(&mut rng),
                    path,
                }
            })
            .collect();
        let foi = (0..m).max_by_key(|&i| (flows[i].path.len(), std::cmp::Reverse(i)));
        let net = ServerGraph {
            servers,
            links,
            flows,
            foi,
        };
        let stable = net
            .load()
            .iter()
            .zip(&net.servers)
            .all(|(l, s)| l.is_zero() || *l < s.rate);
        if stable && net.validate().is_ok() {
            return Ok(net);
        }
    }
    Err(GenerateError::Unsatisfiable(TOPOLOGY_ATTEMPTS))
}
