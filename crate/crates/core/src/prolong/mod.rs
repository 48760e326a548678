//! Flow prolongation: which cross-flows to extend along the path of the
//! flow of interest, and how far.
//!
//! Extending a cross-flow past its sink never shortens the worst-case delay
//! of the flow of interest, so a bound on any prolonged network also holds
//! for the original one. Some extensions turn a non-nested tandem into a
//! nested one and avoid cuts. This module generates candidate extensions
//! (exhaustive, heuristic, random, predicted) and evaluates them with the
//! analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ludb::{analyze_feedforward, AnalysisConfig, AnalysisError, AnalysisResult, Budget, Objective};
use crate::minplus::TokenBucket;
use crate::netmodel::{ServerGraph, TandemView};
use crate::Rational;

/// New exit positions on the path of the flow of interest, for the flows
/// that are extended. The empty map is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prolongation {
    pub exits: BTreeMap<usize, usize>,
}

impl Prolongation {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.exits.is_empty()
    }

    fn with(mut self, flow: usize, exit: usize, current: usize) -> Self {
        if exit > current {
            self.exits.insert(flow, exit);
        } else {
            self.exits.remove(&flow);
        }
        self
    }
}

/// The options of one cross-flow: its last exit on the path and every
/// position it may be extended to (its own exit first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowChoice {
    pub flow: usize,
    pub exit: usize,
    pub options: Vec<usize>,
}

/// One entry per flow crossing the path of the flow of interest, in flow
/// order. Flows that continue elsewhere after their last segment have a
/// single option.
pub fn choices(view: &TandemView) -> Vec<FlowChoice> {
    let mut last: BTreeMap<usize, &crate::netmodel::Segment> = BTreeMap::new();
    for s in &view.segments {
        last.insert(s.flow, s);
    }
    last.into_values()
        .map(|s| FlowChoice {
            flow: s.flow,
            exit: s.exit,
            options: if s.prolongable {
                (s.exit..view.len()).collect()
            } else {
                vec![s.exit]
            },
        })
        .collect()
}

/// Size of the exhaustive pool, `Π (n − exit)` over prolongable flows.
pub fn exhaustive_count(view: &TandemView) -> u128 {
    choices(view)
        .iter()
        .map(|c| c.options.len() as u128)
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// Every combination of extensions, identity first, in lexicographic order
/// of the per-flow option indices (lowest flow index most significant).
pub fn enumerate_all(view: &TandemView) -> Exhaustive {
    let choices: Vec<FlowChoice> = choices(view).into_iter().filter(|c| c.options.len() > 1).collect();
    Exhaustive {
        idx: vec![0; choices.len()],
        choices,
        done: false,
    }
}

/// Lazy iterator behind [`enumerate_all`]; the pool can be far too large to
/// hold in memory.
pub struct Exhaustive {
    choices: Vec<FlowChoice>,
    idx: Vec<usize>,
    done: bool,
}

impl Iterator for Exhaustive {
    type Item = Prolongation;

    fn next(&mut self) -> Option<Prolongation> {
        if self.done {
            return None;
        }
        let mut p = Prolongation::identity();
        for (c, &i) in self.choices.iter().zip(&self.idx) {
            p = p.with(c.flow, c.options[i], c.exit);
        }
        let mut d = self.idx.len();
        loop {
            if d == 0 {
                self.done = true;
                break;
            }
            d -= 1;
            self.idx[d] += 1;
            if self.idx[d] < self.choices[d].options.len() {
                break;
            }
            self.idx[d] = 0;
        }
        Some(p)
    }
}

/// Which exit an interleaving pattern is resolved to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HfpReading {
    /// The latest exit of the two interleaved flows.
    #[default]
    LatestInvolved,
    /// The latest exit of any flow overlapping either of them.
    LatestOverlapping,
}

/// Patterns beyond this many distinct moves are ignored; the pool is every
/// subset of moves.
pub const MAX_HFP_MOVES: usize = 12;

fn hfp_moves(view: &TandemView, reading: HfpReading) -> Vec<Prolongation> {
    let mut moves: Vec<Prolongation> = Vec::new();
    for (i, j) in view.interleaved_pairs() {
        let (a, b) = (&view.segments[i], &view.segments[j]);
        let target = match reading {
            HfpReading::LatestInvolved => a.exit.max(b.exit),
            HfpReading::LatestOverlapping => view
                .segments
                .iter()
                .filter(|s| s.overlaps(a) || s.overlaps(b))
                .map(|s| s.exit)
                .max()
                .expect("the pair itself overlaps"),
        };
        let mut m = Prolongation::identity();
        for s in [a, b] {
            if s.prolongable && s.exit < target {
                m = m.with(s.flow, target, s.exit);
            }
        }
        if !m.is_identity() && !moves.contains(&m) {
            moves.push(m);
        }
    }
    moves.truncate(MAX_HFP_MOVES);
    moves
}

/// Heuristic pool: for each interleaved pair, the move that extends both
/// flows to the pair's latest exit; every subset of moves is combined,
/// taking the farthest exit per flow. Identity first, no duplicates.
pub fn hfp_alternatives(view: &TandemView) -> Vec<Prolongation> {
    hfp_alternatives_with(view, HfpReading::default())
}

pub fn hfp_alternatives_with(view: &TandemView, reading: HfpReading) -> Vec<Prolongation> {
    let moves = hfp_moves(view, reading);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << moves.len()) {
        let mut p = Prolongation::identity();
        for (k, m) in moves.iter().enumerate() {
            if mask & (1 << k) != 0 {
                for (&f, &e) in &m.exits {
                    let cur = p.exits.get(&f).copied().unwrap_or(0);
                    if e > cur {
                        p.exits.insert(f, e);
                    }
                }
            }
        }
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

/// Whether the two readings of the heuristic give different pools.
pub fn hfp_readings_differ(view: &TandemView) -> bool {
    hfp_moves(view, HfpReading::LatestInvolved) != hfp_moves(view, HfpReading::LatestOverlapping)
}

/// `k` distinct elements of `pool` drawn uniformly without replacement. The
/// first `k` draws do not depend on `k`.
pub fn random_select(pool: &[Prolongation], k: usize, seed: u64) -> Vec<Prolongation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    order.into_iter().take(k).map(|i| pool[i].clone()).collect()
}

/// `k` distinct uniform draws from the exhaustive pool without building it.
pub fn random_exhaustive(view: &TandemView, k: usize, seed: u64) -> Vec<Prolongation> {
    let total = exhaustive_count(view);
    if (k as u128) >= total {
        let pool: Vec<Prolongation> = enumerate_all(view).collect();
        return random_select(&pool, k, seed);
    }
    let cs: Vec<FlowChoice> = choices(view).into_iter().filter(|c| c.options.len() > 1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut p = Prolongation::identity();
        for c in &cs {
            let e = c.options[rng.gen_range(0..c.options.len())];
            p = p.with(c.flow, e, c.exit);
        }
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProlongError {
    #[error("flow {0} does not cross the path of the flow of interest")]
    NotCrossing(usize),
    #[error("flow {0} cannot be extended to position {1}")]
    NotProlongable(usize, usize),
    #[error(transparent)]
    View(#[from] crate::netmodel::ViewError),
}

/// The network with the extensions of `p` applied. Extended flows follow
/// the path of the flow of interest after their old sink.
pub fn apply_assignment(net: &ServerGraph, p: &Prolongation) -> Result<ServerGraph, ProlongError> {
    if p.is_identity() {
        return Ok(net.clone());
    }
    let view = TandemView::for_foi(net)?;
    let cs = choices(&view);
    let mut out = net.clone();
    for (&f, &e) in &p.exits {
        let c = cs.iter().find(|c| c.flow == f).ok_or(ProlongError::NotCrossing(f))?;
        if !c.options.contains(&e) {
            return Err(ProlongError::NotProlongable(f, e));
        }
        out.flows[f].path.extend_from_slice(&view.path[c.exit + 1..=e]);
    }
    Ok(out)
}

/// One line per alternative, `flow->server` pairs, for audits.
pub fn format_alternative(net: &ServerGraph, p: &Prolongation) -> String {
    if p.is_identity() {
        return "identity".into();
    }
    let Some(path) = net.foi.map(|f| &net.flows[f].path) else {
        return "?".into();
    };
    p.exits
        .iter()
        .map(|(&f, &e)| format!("{}->{}", net.flows[f].id, net.servers[path[e]].id))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Outcome of analyzing a set of alternatives.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub best: Prolongation,
    pub best_index: usize,
    pub result: AnalysisResult,
    /// Per alternative in input order: the objective value, or `None` if
    /// that analysis failed.
    pub values: Vec<Option<Rational>>,
}

impl Evaluation {
    pub fn explored(&self) -> usize {
        self.values.len()
    }

    pub fn failures(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

fn fatal(e: &AnalysisError) -> bool {
    matches!(e, AnalysisError::Timeout | AnalysisError::OutOfMemory)
}

/// Analyzes every alternative and keeps the best (first on ties). Failing
/// alternatives are recorded; running out of budget aborts.
pub fn evaluate_alternatives(
    net: &ServerGraph,
    alternatives: impl IntoIterator<Item = Prolongation>,
    cfg: &AnalysisConfig,
    budget: &Budget,
    objective: Objective,
) -> Result<Evaluation, AnalysisError> {
    let mut values = Vec::new();
    let mut best: Option<(Rational, usize, Prolongation, AnalysisResult)> = None;
    let mut last_err = None;
    for (i, alt) in alternatives.into_iter().enumerate() {
        budget.check()?;
        let prolonged = match apply_assignment(net, &alt) {
            Ok(n) => n,
            Err(e) => {
                last_err = Some(AnalysisError::MinPlus(crate::minplus::MinPlusError::Domain(e.to_string())));
                values.push(None);
                continue;
            }
        };
        match analyze_feedforward(&prolonged, cfg, budget) {
            Ok(r) => {
                let v = match objective {
                    Objective::Delay => r.delay.clone(),
                    Objective::Output => r.output.numeric_burst().cloned().expect("numeric output burst"),
                };
                if best.as_ref().map_or(true, |(b, ..)| v < *b) {
                    best = Some((v.clone(), i, alt, r));
                }
                values.push(Some(v));
            }
            Err(e) if fatal(&e) => return Err(e),
            Err(e) => {
                last_err = Some(e);
                values.push(None);
            }
        }
    }
    match best {
        Some((_, best_index, best, result)) => Ok(Evaluation {
            best,
            best_index,
            result,
            values,
        }),
        None => Err(last_err.unwrap_or(AnalysisError::NoFoi)),
    }
}

/// Ranks prolongation alternatives for a flow of interest, e.g. a trained
/// graph neural network.
pub trait ProlongationPredictor {
    /// At most `k` alternatives, most promising first.
    fn top_k(&self, net: &ServerGraph, k: usize) -> Vec<Prolongation>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    LudbFf,
    FpExhaustive,
    FpHeuristic,
    RndFp(usize),
    RndHfp(usize),
    DeepFp(usize),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::LudbFf => "ludb-ff",
            Method::FpExhaustive => "fp-exhaustive",
            Method::FpHeuristic => "fp-heuristic",
            Method::RndFp(_) => "rnd-fp",
            Method::RndHfp(_) => "rnd-hfp",
            Method::DeepFp(_) => "deepfp",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            Method::RndFp(k) | Method::RndHfp(k) | Method::DeepFp(k) => Some(*k),
            _ => None,
        }
    }

    /// Parses a method name together with its budget.
    pub fn parse(name: &str, k: usize) -> Result<Method, MethodError> {
        let m = match name {
            "ludb-ff" => Method::LudbFf,
            "fp-exhaustive" => Method::FpExhaustive,
            "fp-heuristic" => Method::FpHeuristic,
            "rnd-fp" => Method::RndFp(k),
            "rnd-hfp" => Method::RndHfp(k),
            "deepfp" => Method::DeepFp(k),
            other => return Err(MethodError::Unknown(other.into())),
        };
        if m.k() == Some(0) {
            return Err(MethodError::ZeroBudget);
        }
        Ok(m)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.k() {
            Some(k) => write!(f, "{}({k})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Method {
    type Err = MethodError;

    /// `name` or `name(k)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('(') {
            Some((name, rest)) => {
                let k = rest
                    .strip_suffix(')')
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| MethodError::Unknown(s.into()))?;
                Method::parse(name, k)
            }
            None => Method::parse(s, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MethodError {
    #[error("unknown method {0}")]
    Unknown(String),
    #[error("k must be at least 1")]
    ZeroBudget,
    #[error("deepfp needs a predictor")]
    NoPredictor,
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub method: Method,
    pub delay: Rational,
    pub output: TokenBucket,
    pub best: Prolongation,
    /// Alternatives handed to the analysis.
    pub explored: usize,
    pub failures: usize,
    pub wall_time: Duration,
}

/// Runs `method` on the flow of interest of `net` within `budget`.
pub fn run_method(
    net: &ServerGraph,
    method: Method,
    seed: u64,
    predictor: Option<&dyn ProlongationPredictor>,
    cfg: &AnalysisConfig,
    budget: &Budget,
) -> Result<MethodOutcome, AnalysisError> {
    let start = Instant::now();
    let view = TandemView::for_foi(net).map_err(|_| AnalysisError::NoFoi)?;
    let eval = |alts: Vec<Prolongation>| evaluate_alternatives(net, alts, cfg, budget, Objective::Delay);
    let ev = match method {
        Method::LudbFf => eval(vec![Prolongation::identity()])?,
        Method::FpExhaustive => evaluate_alternatives(net, enumerate_all(&view), cfg, budget, Objective::Delay)?,
        Method::FpHeuristic => eval(hfp_alternatives(&view))?,
        Method::RndFp(k) => eval(random_exhaustive(&view, k, seed))?,
        Method::RndHfp(k) => eval(random_select(&hfp_alternatives(&view), k, seed))?,
        Method::DeepFp(k) => {
            let p = predictor.ok_or_else(|| {
                AnalysisError::MinPlus(crate::minplus::MinPlusError::Domain(MethodError::NoPredictor.to_string()))
            })?;
            let alts = p.top_k(net, k);
            budget.check()?;
            eval(alts)?
        }
    };
    Ok(MethodOutcome {
        method,
        delay: ev.result.delay.clone(),
        output: ev.result.output.clone(),
        explored: ev.explored(),
        failures: ev.failures(),
        best: ev.best,
        wall_time: start.elapsed(),
    })
}
