//! LUDB-FF: delay bounds for a flow of interest in a feedforward FIFO
//! network.
//!
//! The tandem along the flow of interest is cut into nested sub-tandems
//! (one term per minimal cut set), every nesting level becomes a FIFO
//! left-over curve with its own θ, and cross traffic entering the tandem is
//! bounded by recursively analyzing the path it shares upstream. The θs of a
//! term are then optimized by an exact LP.

pub mod budget;
pub mod cuts;
mod optimize;
pub mod term;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::minplus::{MinPlusError, ThetaId, TokenBucket};
use crate::netmodel::{Segment, ServerGraph, TandemView, Violation};
use crate::Rational;

pub use budget::Budget;
pub use cuts::{build_nesting_tree, enumerate_all_cut_sets, enumerate_cut_sets, CutSet, NestingNode, NestingTree};
pub use optimize::{
    default_range, evaluate, grid_search, in_domain, optimize_delay, optimize_output, program, theta_grid_refine, GridSpec,
    Objective, Optimum,
};
pub use term::{Arrival, Service};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("invalid network: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("no flow of interest")]
    NoFoi,
    #[error(transparent)]
    MinPlus(#[from] MinPlusError),
    #[error("time budget exhausted")]
    Timeout,
    #[error("memory budget exhausted")]
    OutOfMemory,
    #[error("θ limit reached while building a joint term")]
    ThetaLimit,
}

/// How θ parameters of cross-traffic bounds are optimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaMode {
    /// One LP over all θs of a term, including those inside arrival bounds.
    Joint,
    /// Every arrival bound is fixed by its own LP before it is used.
    Separate,
    /// Joint while a term stays below the given number of θs.
    Auto { limit: usize },
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub mode: ThetaMode,
    pub max_cut_sets: usize,
    /// Try every valid cut set instead of the minimal ones.
    pub exhaustive_cuts: bool,
    /// Also minimize the output burst of the flow of interest.
    pub output_bound: bool,
    /// Tighten each delay LP with a θ grid of this many points per θ.
    pub theta_grid: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            mode: ThetaMode::Auto { limit: 48 },
            max_cut_sets: 16,
            exhaustive_cuts: false,
            output_bound: false,
            theta_grid: None,
        }
    }
}

/// Bound obtained for one cut set.
#[derive(Clone, Debug)]
pub struct CutResult {
    pub cuts: CutSet,
    pub thetas: usize,
    pub delay: Rational,
    pub output_burst: Option<Rational>,
}

#[derive(Clone, Debug)]
pub struct AnalysisResult {
    pub delay: Rational,
    /// Output arrival curve of the flow of interest; the burst is the best
    /// over cut sets when output bounds were requested, else the one at the
    /// delay-optimal θ.
    pub output: TokenBucket,
    pub per_cut: Vec<CutResult>,
    pub separate: bool,
    pub wall_time: Duration,
}

/// Builds terms for one network. Arrival bounds are memoized per set of
/// flows and entry server.
pub struct TermBuilder<'a> {
    net: &'a ServerGraph,
    cfg: &'a AnalysisConfig,
    budget: &'a Budget,
    separate: bool,
    next: u32,
    theta_limit: Option<u32>,
    memo: HashMap<(Vec<usize>, usize), Rc<Arrival>>,
    servers: Vec<Option<Rc<Service>>>,
    sources: Vec<Option<Rc<Arrival>>>,
}

const NODE_BYTES: usize = 256;

impl<'a> TermBuilder<'a> {
    pub fn new(net: &'a ServerGraph, cfg: &'a AnalysisConfig, budget: &'a Budget, separate: bool) -> Self {
        let theta_limit = match (separate, cfg.mode) {
            (false, ThetaMode::Auto { limit }) => Some(limit as u32),
            _ => None,
        };
        TermBuilder {
            net,
            cfg,
            budget,
            separate,
            next: 0,
            theta_limit,
            memo: HashMap::new(),
            servers: vec![None; net.servers.len()],
            sources: vec![None; net.flows.len()],
        }
    }

    pub fn thetas_allocated(&self) -> u32 {
        self.next
    }

    fn fresh(&mut self) -> Result<ThetaId, AnalysisError> {
        if let Some(limit) = self.theta_limit {
            if self.next >= limit {
                return Err(AnalysisError::ThetaLimit);
            }
        }
        self.budget.charge(NODE_BYTES)?;
        let id = ThetaId(self.next);
        self.next += 1;
        Ok(id)
    }

    /// A θ id not used by any term built so far.
    pub fn spare_theta(&self) -> ThetaId {
        ThetaId(self.next)
    }

    fn server(&mut self, s: usize) -> Rc<Service> {
        self.servers[s]
            .get_or_insert_with(|| {
                let srv = &self.net.servers[s];
                Rc::new(Service::Server {
                    label: srv.id.clone(),
                    curve: srv.curve(),
                })
            })
            .clone()
    }

    fn source(&mut self, f: usize) -> Rc<Arrival> {
        self.sources[f]
            .get_or_insert_with(|| {
                let flow = &self.net.flows[f];
                Rc::new(Arrival::Source {
                    label: flow.id.clone(),
                    curve: flow.arrival(),
                })
            })
            .clone()
    }

    /// Arrival of `flows` at `server`: sources for flows starting there,
    /// recursive bounds for groups sharing a predecessor.
    fn arrival_at(&mut self, flows: &[(usize, Option<usize>)], server: usize) -> Result<Rc<Arrival>, AnalysisError> {
        let mut by_pred: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
        for &(f, pred) in flows {
            by_pred.entry(pred).or_default().push(f);
        }
        let mut parts = Vec::new();
        for (pred, group) in by_pred {
            match pred {
                None => parts.extend(group.iter().map(|&f| self.source(f))),
                Some(_) => parts.push(self.arrival_bound(&group.into_iter().collect(), server)?),
            }
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Rc::new(Arrival::Sum(parts))
        })
    }

    /// Left-over service along `view.path` for its main flows, cutting at
    /// `cuts`.
    pub fn tandem_service(&mut self, view: &TandemView, cuts: &[usize]) -> Result<Rc<Service>, AnalysisError> {
        self.budget.check()?;
        let mut parts = Vec::new();
        for (lo, hi, segs) in cuts::split(&view.path, &view.segments, cuts) {
            let tree = build_nesting_tree(view.len(), &segs).map_err(|_| {
                MinPlusError::Domain("cut set leaves a sub-tandem that is not nested".into())
            })?;
            parts.push(self.span(view, lo, hi, &tree.children, &segs)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Rc::new(Service::Convolve(parts))
        })
    }

    fn span(
        &mut self,
        view: &TandemView,
        lo: usize,
        hi: usize,
        children: &[NestingNode],
        segs: &[Segment],
    ) -> Result<Rc<Service>, AnalysisError> {
        let mut parts = Vec::new();
        let mut pos = lo;
        while pos <= hi {
            if let Some(child) = children.iter().find(|c| c.entry == pos) {
                parts.push(self.node(view, child, segs)?);
                pos = child.exit + 1;
            } else {
                parts.push(self.server(view.path[pos]));
                pos += 1;
            }
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Rc::new(Service::Convolve(parts))
        })
    }

    fn node(&mut self, view: &TandemView, node: &NestingNode, segs: &[Segment]) -> Result<Rc<Service>, AnalysisError> {
        let inner = self.span(view, node.entry, node.exit, &node.children, segs)?;
        let flows: Vec<(usize, Option<usize>)> = node.segments.iter().map(|&i| (segs[i].flow, segs[i].pred)).collect();
        let cross = self.arrival_at(&flows, view.path[node.entry])?;
        let theta = self.fresh()?;
        Ok(Rc::new(Service::Leftover {
            service: inner,
            cross,
            theta,
        }))
    }

    /// Output bound of the aggregate `flows` where it enters `server`, from
    /// an analysis of the longest path all of them share right before it.
    pub fn arrival_bound(&mut self, flows: &BTreeSet<usize>, server: usize) -> Result<Rc<Arrival>, AnalysisError> {
        let key = (flows.iter().copied().collect::<Vec<_>>(), server);
        if let Some(a) = self.memo.get(&key) {
            return Ok(a.clone());
        }
        self.budget.check()?;
        let fl: Vec<&crate::netmodel::Flow> = flows.iter().map(|&f| &self.net.flows[f]).collect();
        let pred = fl[0]
            .predecessor_of(server)
            .expect("arrival bound requested for a flow starting at the server");
        debug_assert!(fl.iter().all(|f| f.predecessor_of(server) == Some(pred)));
        let mut path = vec![pred];
        loop {
            let first = path[0];
            let q = fl[0].predecessor_of(first);
            if q.is_some() && fl.iter().all(|f| f.predecessor_of(first) == q) {
                path.insert(0, q.expect("checked"));
            } else {
                break;
            }
        }
        let view = TandemView::along(self.net, &path, flows);
        let entering: Vec<(usize, Option<usize>)> =
            flows.iter().map(|&f| (f, self.net.flows[f].predecessor_of(path[0]))).collect();
        let arrival = self.arrival_at(&entering, path[0])?;

        let service = if view.is_nested() {
            self.tandem_service(&view, &[])?
        } else {
            let mut best: Option<(Rational, Rc<Service>)> = None;
            for cuts in self.cut_sets(&view) {
                let candidate = self.tandem_service(&view, &cuts)?;
                let opt = optimize_output(&candidate, &arrival, self.spare_theta(), self.budget)?;
                if best.as_ref().map_or(true, |(v, _)| opt.value < *v) {
                    best = Some((opt.value, candidate));
                }
            }
            best.expect("a non-nested tandem has at least one cut set").1
        };

        let label = {
            let names: Vec<&str> = fl.iter().map(|f| f.id.as_str()).collect();
            format!("{}@{}", names.join("+"), self.net.servers[server].id)
        };
        let bound = if self.separate {
            let opt = optimize_output(&service, &arrival, self.spare_theta(), self.budget)?;
            let rate = fl.iter().map(|f| f.rate.clone()).sum::<Rational>();
            Rc::new(Arrival::Fixed {
                label,
                curve: TokenBucket::new(rate, opt.value),
            })
        } else {
            Rc::new(Arrival::Output { arrival, service })
        };
        self.budget.charge(NODE_BYTES)?;
        self.memo.insert(key, bound.clone());
        Ok(bound)
    }

    pub fn cut_sets(&self, view: &TandemView) -> Vec<CutSet> {
        if view.is_nested() {
            vec![Vec::new()]
        } else if self.cfg.exhaustive_cuts {
            enumerate_all_cut_sets(view)
        } else {
            enumerate_cut_sets(view, self.cfg.max_cut_sets)
        }
    }
}

/// Terms of the flow of interest, one per cut set.
pub fn foi_terms(
    builder: &mut TermBuilder<'_>,
    net: &ServerGraph,
) -> Result<Vec<(CutSet, Rc<Service>)>, AnalysisError> {
    let view = TandemView::for_foi(net).map_err(|_| AnalysisError::NoFoi)?;
    let mut out = Vec::new();
    for cuts in builder.cut_sets(&view) {
        let term = builder.tandem_service(&view, &cuts)?;
        out.push((cuts, term));
    }
    Ok(out)
}

fn analyze_with(
    net: &ServerGraph,
    cfg: &AnalysisConfig,
    budget: &Budget,
    separate: bool,
) -> Result<AnalysisResult, AnalysisError> {
    let start = Instant::now();
    let foi = net.foi.ok_or(AnalysisError::NoFoi)?;
    let alpha = net.flows[foi].arrival();
    let foi_arrival = Rc::new(Arrival::Source {
        label: net.flows[foi].id.clone(),
        curve: alpha.clone(),
    });
    let mut builder = TermBuilder::new(net, cfg, budget, separate);
    let terms = foi_terms(&mut builder, net)?;
    let spare = builder.spare_theta();
    let mut per_cut = Vec::with_capacity(terms.len());
    let mut best: Option<(Rational, Rational)> = None;
    let mut best_output: Option<Rational> = None;
    for (cuts, service) in terms {
        let thetas = term::thetas(&service).len();
        let opt = optimize_delay(&service, &foi_arrival, spare, budget)?;
        let delay = match cfg.theta_grid {
            Some(points) => theta_grid_refine(&service, &foi_arrival, &GridSpec::uniform(points), &opt, budget)?,
            None => opt.value.clone(),
        };
        let output_at_opt = opt.output_burst.clone();
        let output_burst = if cfg.output_bound {
            let o = optimize_output(&service, &foi_arrival, spare, budget)?;
            if best_output.as_ref().map_or(true, |b| o.value < *b) {
                best_output = Some(o.value.clone());
            }
            Some(o.value)
        } else {
            None
        };
        if best.as_ref().map_or(true, |(d, _)| delay < *d) {
            best = Some((delay.clone(), output_at_opt));
        }
        per_cut.push(CutResult {
            cuts,
            thetas,
            delay,
            output_burst,
        });
    }
    let (delay, burst_at_opt) = best.expect("at least one term");
    let burst = best_output.unwrap_or(burst_at_opt);
    Ok(AnalysisResult {
        delay,
        output: TokenBucket::new(alpha.rate.clone(), burst),
        per_cut,
        separate,
        wall_time: start.elapsed(),
    })
}

/// Analyzes the flow of interest of `net`.
pub fn analyze_feedforward(
    net: &ServerGraph,
    cfg: &AnalysisConfig,
    budget: &Budget,
) -> Result<AnalysisResult, AnalysisError> {
    net.validate().map_err(AnalysisError::Invalid)?;
    match cfg.mode {
        ThetaMode::Joint => analyze_with(net, cfg, budget, false),
        ThetaMode::Separate => analyze_with(net, cfg, budget, true),
        ThetaMode::Auto { .. } => match analyze_with(net, cfg, budget, false) {
            Err(AnalysisError::ThetaLimit) => analyze_with(net, cfg, budget, true),
            other => other,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::tests::{five_server_line, five_server_default};
    use crate::rat;

    fn joint() -> AnalysisConfig {
        AnalysisConfig {
            mode: ThetaMode::Joint,
            ..Default::default()
        }
    }

    #[test]
    fn five_server_theta_bookkeeping() {
        let net = five_server_default();
        let cfg = joint();
        let budget = Budget::unlimited();
        let mut b = TermBuilder::new(&net, &cfg, &budget, false);
        let terms = foi_terms(&mut b, &net).unwrap();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].0, vec![0]);
        assert_eq!(term::thetas(&terms[0].1).len(), 7);
        assert_eq!(term::thetas(&terms[1].1).len(), 9);

        let mut fp = five_server_default();
        fp.flows[2].path.push(3);
        let mut b = TermBuilder::new(&fp, &cfg, &budget, false);
        let terms = foi_terms(&mut b, &fp).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(term::thetas(&terms[0].1).len(), 2);
    }

    #[test]
    fn no_cross_traffic_is_closed_form() {
        let mut net = five_server_line(rat(40, 1), rat(1, 10), rat(10, 1), rat(3, 1));
        net.flows.truncate(1);
        net.servers[2].rate = rat(20, 1);
        let r = analyze_feedforward(&net, &joint(), &Budget::unlimited()).unwrap();
        assert_eq!(r.delay, rat(4, 10) + rat(3, 20));
    }

    #[test]
    fn single_server_bound() {
        let mut net = five_server_line(rat(40, 1), rat(2, 1), rat(10, 1), rat(10, 1));
        net.servers.truncate(1);
        net.links.clear();
        net.flows = vec![crate::netmodel::Flow {
            path: vec![0],
            ..net.flows[0].clone()
        }];
        let r = analyze_feedforward(&net, &joint(), &Budget::unlimited()).unwrap();
        assert_eq!(r.delay, rat(9, 4));
    }

    #[test]
    fn separate_mode_never_beats_joint() {
        let net = five_server_default();
        let j = analyze_feedforward(&net, &joint(), &Budget::unlimited()).unwrap();
        let s = analyze_feedforward(
            &net,
            &AnalysisConfig {
                mode: ThetaMode::Separate,
                ..Default::default()
            },
            &Budget::unlimited(),
        )
        .unwrap();
        assert!(j.delay <= s.delay, "{} vs {}", j.delay, s.delay);
    }

    #[test]
    fn prolongation_helps_on_five_server_line() {
        let net = five_server_default();
        let plain = analyze_feedforward(&net, &joint(), &Budget::unlimited()).unwrap();
        let mut fp = net.clone();
        fp.flows[2].path.push(3);
        let better = analyze_feedforward(&fp, &joint(), &Budget::unlimited()).unwrap();
        assert!(better.delay < plain.delay, "{} vs {}", better.delay, plain.delay);
    }
}
