//! REINFORCE training of the prolongation policy against the analysis.
//!
//! Each episode picks an instance from the current curriculum phase, samples
//! one prolongation per cross-flow (ε-greedy), analyzes the prolonged
//! network and rewards the relative improvement over the plain analysis.

use std::time::Duration;

use ludbfp_core::ludb::{analyze_feedforward, AnalysisConfig, AnalysisError, Budget, Objective, ThetaMode};
use ludbfp_core::netmodel::{Flow, Server, ServerGraph};
use ludbfp_core::prolong::{evaluate_alternatives, Prolongation};
use ludbfp_core::{rat, to_f64, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checkpoint::Checkpoint;
use crate::graph::{transform_graph, AnalysisGraph, GraphError};
use crate::model::{backward, default_iterations, forward, Params, PolicyOutput};
use crate::topk::select_top_k;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the plain bound must be positive, got {0}")]
    NonpositiveBound(Rational),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("empty training pool")]
    EmptyPool,
}

/// `(FIFO − FP) / FIFO`.
pub fn compute_reward(fifo: &Rational, fp: &Rational) -> Result<f64, TrainError> {
    if *fifo <= rat(0, 1) {
        return Err(TrainError::NonpositiveBound(fifo.clone()));
    }
    Ok(to_f64(&((fifo - fp) / fifo)))
}

/// Per-flow option indices: with probability `epsilon` every flow picks
/// uniformly, otherwise every flow samples its distribution.
pub fn sample_action(policy: &PolicyOutput, epsilon: f64, rng: &mut impl Rng) -> Vec<usize> {
    let uniform = rng.gen_bool(epsilon.clamp(0.0, 1.0));
    policy
        .probs
        .iter()
        .map(|p| {
            if uniform {
                return rng.gen_range(0..p.len());
            }
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        })
        .collect()
}

/// Ascent step on `reward · log π(picks)`. Returns false, leaving `params`
/// untouched, if the gradient is not finite.
pub fn reinforce_step(
    params: &mut Params,
    graph: &AnalysisGraph,
    iterations: usize,
    picks: &[usize],
    reward: f64,
    lr: f64,
) -> bool {
    let (grad, _) = backward(graph, params, iterations, picks, reward);
    if grad.iter().any(|g| !g.is_finite()) {
        return false;
    }
    params.add_scaled(&grad, lr);
    true
}

/// A network with its flow of interest, policy graph and plain bound.
#[derive(Clone, Debug)]
pub struct Instance {
    pub net: ServerGraph,
    pub graph: AnalysisGraph,
    pub fifo: Rational,
    /// foi path length × number of prolongable cross-flows.
    pub difficulty: usize,
}

pub fn analysis_config() -> AnalysisConfig {
    AnalysisConfig {
        mode: ThetaMode::Auto { limit: 48 },
        ..Default::default()
    }
}

impl Instance {
    pub fn new(net: ServerGraph, cfg: &AnalysisConfig, budget: &Budget) -> Result<Self, TrainError> {
        let graph = transform_graph(&net)?;
        let fifo = analyze_feedforward(&net, cfg, budget)?.delay;
        let path = net.foi.map_or(0, |f| net.flows[f].path.len());
        let prolongable = graph.groups.iter().filter(|g| g.positions.len() > 1).count();
        Ok(Instance {
            net,
            graph,
            fifo,
            difficulty: path * prolongable,
        })
    }

    /// Delay bound of the network prolonged as `picks` says.
    pub fn bound(&self, picks: &[usize], cfg: &AnalysisConfig, budget: &Budget) -> Result<Rational, AnalysisError> {
        let alt = self.graph.assignment(picks);
        Ok(evaluate_alternatives(&self.net, [alt], cfg, budget, Objective::Delay)?.result.delay)
    }
}

/// The five-server example with random rates, latencies and bursts, scaled
/// into `(0, 1]` like generated networks. Every cross-flow keeps its path,
/// so the pool has the same 12 alternatives.
pub fn five_server_family(seed: u64) -> ServerGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: i64, hi: i64, scale: i64| rat(rng.gen_range(lo..=hi), scale);
    let servers: Vec<Server> = (1..=5)
        .map(|i| Server {
            id: format!("s{i}"),
            rate: draw(20_000, 60_000, 64_000),
            latency: draw(10, 1000, 1000),
        })
        .collect();
    let min_rate = servers.iter().map(|s| s.rate.clone()).min().expect("five servers");
    // four flows cross s3; keep each below a quarter of the slowest rate
    let mut flow = |id: &str, path: &[usize]| Flow {
        id: id.into(),
        rate: &min_rate * draw(25, 240, 1000),
        burst: draw(10, 5000, 64_000),
        path: path.to_vec(),
    };
    ServerGraph {
        servers,
        links: vec![(0, 1), (1, 2), (2, 3), (3, 4)],
        flows: vec![
            flow("foi", &[1, 2, 3, 4]),
            flow("f1", &[0, 1, 2, 3]),
            flow("f2", &[0, 1, 2]),
            flow("f3", &[2, 3]),
        ],
        foi: Some(0),
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub lr: f64,
    pub episodes: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the episodes over which ε decays linearly.
    pub eps_decay: f64,
    pub seed: u64,
    pub hidden: usize,
    /// Message-passing rounds; the graph diameter when `None`.
    pub iterations: Option<usize>,
    /// Subtract a moving average of past rewards.
    pub baseline: bool,
    pub episode_timeout: Option<Duration>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            episodes: 2000,
            eps_start: 0.5,
            eps_end: 0.05,
            eps_decay: 0.5,
            seed: 0,
            hidden: 32,
            iterations: None,
            baseline: false,
            episode_timeout: Some(Duration::from_secs(30)),
        }
    }
}

impl TrainConfig {
    pub fn epsilon(&self, episode: u64) -> f64 {
        let span = (self.episodes as f64 * self.eps_decay).max(1.0);
        let frac = (episode as f64 / span).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Instance indices split into four phases of nondecreasing difficulty.
pub fn curriculum(pool: &[Instance]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.sort_by_key(|&i| (pool[i].difficulty, i));
    let n = idx.len();
    (0..4).map(|q| idx[q * n / 4..(q + 1) * n / 4].to_vec()).filter(|p| !p.is_empty()).collect()
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: u64,
    pub difficulty: usize,
    pub reward: f64,
    pub fifo: f64,
    pub fp: f64,
    pub epsilon: f64,
    pub skipped: bool,
}

impl EpisodeLog {
    pub const HEADER: &'static str = "episode\tdifficulty\treward\tfifo\tfp\tepsilon\tskipped";

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{}",
            self.episode, self.difficulty, self.reward, self.fifo, self.fp, self.epsilon, self.skipped as u8
        )
    }
}

/// Trains on `pool`, starting from `resume` if given, until episode
/// `until` (default `cfg.episodes`) is done. `on_episode` sees every
/// episode. Stopping early and resuming with the same `cfg` gives the same
/// parameters as an uninterrupted run unless `cfg.baseline` is set, whose
/// running average is not checkpointed.
pub fn train(
    cfg: &TrainConfig,
    pool: &[Instance],
    analysis: &AnalysisConfig,
    resume: Option<Checkpoint>,
    until: Option<u64>,
    mut on_episode: impl FnMut(&EpisodeLog, &Params),
) -> Result<Checkpoint, TrainError> {
    let phases = curriculum(pool);
    if phases.is_empty() {
        return Err(TrainError::EmptyPool);
    }
    let mut ck = match resume {
        Some(c) => c,
        None => {
            let mut c = Checkpoint::new(Params::init(cfg.hidden, cfg.seed));
            c.rng = Some((ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed).get_seed(), 0));
            c
        }
    };
    let (seed, pos) = ck.rng.expect("training checkpoints carry their rng");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_word_pos(pos);
    let mut avg = 0.0;
    let until = until.unwrap_or(cfg.episodes).min(cfg.episodes);
    while ck.episode < until {
        let ep = ck.episode;
        let phase = &phases[((ep * phases.len() as u64) / cfg.episodes.max(1)) as usize];
        let inst = &pool[phase[rng.gen_range(0..phase.len())]];
        let eps = cfg.epsilon(ep);
        let iters = cfg.iterations.unwrap_or_else(|| default_iterations(&inst.graph));
        let policy = forward(&inst.graph, &ck.params, iters);
        let picks = sample_action(&policy, eps, &mut rng);
        let budget = Budget::new(cfg.episode_timeout, None);
        let mut log = EpisodeLog {
            episode: ep,
            difficulty: inst.difficulty,
            reward: 0.0,
            fifo: to_f64(&inst.fifo),
            fp: f64::NAN,
            epsilon: eps,
            skipped: true,
        };
        if let Ok(fp) = inst.bound(&picks, analysis, &budget) {
            let reward = compute_reward(&inst.fifo, &fp)?;
            let weight = if cfg.baseline { reward - avg } else { reward };
            avg = 0.95 * avg + 0.05 * reward;
            log.reward = reward;
            log.fp = to_f64(&fp);
            log.skipped = !reinforce_step(&mut ck.params, &inst.graph, iters, &picks, weight, cfg.lr);
        }
        ck.episode += 1;
        ck.rng = Some((seed, rng.get_word_pos()));
        on_episode(&log, &ck.params);
    }
    Ok(ck)
}

/// Greedy choice: the most likely option of every flow.
pub fn greedy_picks(inst: &Instance, params: &Params, iterations: Option<usize>) -> Vec<usize> {
    let iters = iterations.unwrap_or_else(|| default_iterations(&inst.graph));
    let policy = forward(&inst.graph, params, iters);
    select_top_k(&policy, 1).pop().expect("at least one assignment")
}

/// Best bound over every alternative, and the plain bound's identity
/// prolongation for reference.
pub fn exhaustive_best(inst: &Instance, cfg: &AnalysisConfig, budget: &Budget) -> Result<(Prolongation, Rational), AnalysisError> {
    let view = ludbfp_core::netmodel::TandemView::for_foi(&inst.net).map_err(|_| AnalysisError::NoFoi)?;
    let ev = evaluate_alternatives(&inst.net, ludbfp_core::prolong::enumerate_all(&view), cfg, budget, Objective::Delay)?;
    Ok((ev.best, ev.result.delay))
}
