//! Server graphs, flows, validation, the text file format and the random
//! network generator.

mod format;
mod generate;
mod view;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::minplus::{PseudoAffineCurve, TokenBucket};
use crate::{rat, Rational};

pub use format::{format_rational, parse_network, parse_rational, serialize_network, FormatError};
pub use generate::{generate, GenerateError, GeneratorConfig, Topology};
pub use view::{Segment, TandemView, ViewError};

/// A rate-latency server `β_{R,T}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Server {
    pub id: String,
    pub rate: Rational,
    pub latency: Rational,
}

impl Server {
    pub fn curve(&self) -> PseudoAffineCurve {
        PseudoAffineCurve::rate_latency(self.rate.clone(), self.latency.clone())
    }
}

/// A unicast flow with a token-bucket arrival curve and a fixed path of
/// server indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flow {
    pub id: String,
    pub rate: Rational,
    pub burst: Rational,
    pub path: Vec<usize>,
}

impl Flow {
    pub fn arrival(&self) -> TokenBucket {
        TokenBucket::new(self.rate.clone(), self.burst.clone())
    }

    pub fn source(&self) -> usize {
        self.path[0]
    }

    pub fn sink(&self) -> usize {
        *self.path.last().expect("flow path is nonempty")
    }

    /// The server visited right before `server`, if any.
    pub fn predecessor_of(&self, server: usize) -> Option<usize> {
        let pos = self.path.iter().position(|s| *s == server)?;
        (pos > 0).then(|| self.path[pos - 1])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServerGraph {
    pub servers: Vec<Server>,
    pub links: Vec<(usize, usize)>,
    pub flows: Vec<Flow>,
    pub foi: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("duplicate server id {0}")]
    DuplicateServer(String),
    #[error("duplicate flow id {0}")]
    DuplicateFlow(String),
    #[error("server {0}: nonpositive rate")]
    NonpositiveRate(String),
    #[error("server {0}: negative latency")]
    NegativeLatency(String),
    #[error("link {0}->{1} references an unknown server")]
    UnknownLinkEndpoint(usize, usize),
    #[error("links contain a cycle")]
    Cyclic,
    #[error("flow {0}: empty path")]
    EmptyPath(String),
    #[error("flow {0}: unknown server in path")]
    UnknownPathServer(String),
    #[error("flow {0}: path against link direction at {1}->{2}")]
    AgainstLinkDirection(String, String, String),
    #[error("flow {0}: no link {1}->{2}")]
    MissingLink(String, String, String),
    #[error("flow {0}: path visits a server twice")]
    RepeatedServer(String),
    #[error("flow {0}: negative rate or burst")]
    NegativeArrival(String),
    #[error("server {0}: unstable, flow rates sum to {1} against rate {2}")]
    Unstable(String, Rational, Rational),
    #[error("flow of interest {0} does not exist")]
    UnknownFoi(usize),
}

impl ServerGraph {
    pub fn server_index(&self, id: &str) -> Option<usize> {
        self.servers.iter().position(|s| s.id == id)
    }

    pub fn flow_index(&self, id: &str) -> Option<usize> {
        self.flows.iter().position(|f| f.id == id)
    }

    pub fn has_link(&self, a: usize, b: usize) -> bool {
        self.links.contains(&(a, b))
    }

    pub fn successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.links.iter().filter(move |l| l.0 == s).map(|l| l.1)
    }

    /// Indices of flows crossing `server`.
    pub fn flows_at(&self, server: usize) -> impl Iterator<Item = usize> + '_ {
        self.flows
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.path.contains(&server))
            .map(|(i, _)| i)
    }

    /// Total arrival rate at every server.
    pub fn load(&self) -> Vec<Rational> {
        let mut load = vec![Rational::zero(); self.servers.len()];
        for f in &self.flows {
            for &s in &f.path {
                if s < load.len() {
                    load[s] += &f.rate;
                }
            }
        }
        load
    }

    /// Topological order of the servers, or `None` if the links are cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.servers.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.links {
            if b < n {
                indeg[b] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(s) = ready.pop_first() {
            order.push(s);
            for t in self.successors(s).collect::<Vec<_>>() {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.insert(t);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        let n = self.servers.len();
        let mut seen = BTreeSet::new();
        for s in &self.servers {
            if !seen.insert(&s.id) {
                v.push(Violation::DuplicateServer(s.id.clone()));
            }
            if !s.rate.is_positive() {
                v.push(Violation::NonpositiveRate(s.id.clone()));
            }
            if s.latency.is_negative() {
                v.push(Violation::NegativeLatency(s.id.clone()));
            }
        }
        let mut links_ok = true;
        for &(a, b) in &self.links {
            if a >= n || b >= n {
                v.push(Violation::UnknownLinkEndpoint(a, b));
                links_ok = false;
            }
        }
        if links_ok && self.topological_order().is_none() {
            v.push(Violation::Cyclic);
        }
        let mut seen = BTreeSet::new();
        for f in &self.flows {
            if !seen.insert(&f.id) {
                v.push(Violation::DuplicateFlow(f.id.clone()));
            }
            if f.rate.is_negative() || f.burst.is_negative() {
                v.push(Violation::NegativeArrival(f.id.clone()));
            }
            if f.path.is_empty() {
                v.push(Violation::EmptyPath(f.id.clone()));
                continue;
            }
            if f.path.iter().any(|&s| s >= n) {
                v.push(Violation::UnknownPathServer(f.id.clone()));
                continue;
            }
            let distinct: BTreeSet<_> = f.path.iter().collect();
            if distinct.len() != f.path.len() {
                v.push(Violation::RepeatedServer(f.id.clone()));
            }
            for w in f.path.windows(2) {
                if self.has_link(w[0], w[1]) {
                    continue;
                }
                let (a, b) = (self.servers[w[0]].id.clone(), self.servers[w[1]].id.clone());
                if self.has_link(w[1], w[0]) {
                    v.push(Violation::AgainstLinkDirection(f.id.clone(), a, b));
                } else {
                    v.push(Violation::MissingLink(f.id.clone(), a, b));
                }
            }
        }
        for (s, load) in self.load().into_iter().enumerate() {
            let server = &self.servers[s];
            if server.rate.is_positive() && load >= server.rate {
                v.push(Violation::Unstable(server.id.clone(), load, server.rate.clone()));
            }
        }
        if let Some(foi) = self.foi {
            if foi >= self.flows.len() {
                v.push(Violation::UnknownFoi(foi));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn with_foi(&self, foi: usize) -> ServerGraph {
        let mut net = self.clone();
        net.foi = Some(foi);
        net
    }

    /// Servers from which some server of `targets` is reachable, including
    /// the targets themselves.
    pub fn upstream_of(&self, targets: &[usize]) -> BTreeSet<usize> {
        let mut preds: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in &self.links {
            preds.entry(b).or_default().push(a);
        }
        let mut out: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = targets.to_vec();
        while let Some(s) = stack.pop() {
            if out.insert(s) {
                stack.extend(preds.get(&s).into_iter().flatten().copied());
            }
        }
        out
    }
}

impl fmt::Display for ServerGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_network(self))
    }
}

/// Five servers s1..s5 in a line; foi s2→s5, f1 s1→s4, f2 s1→s3,
/// f3 s3→s4.
pub fn five_server_line(rate: Rational, latency: Rational, flow_rate: Rational, burst: Rational) -> ServerGraph {
    let servers = (1..=5)
        .map(|i| Server {
            id: format!("s{i}"),
            rate: rate.clone(),
            latency: latency.clone(),
        })
        .collect();
    let flow = |id: &str, path: &[usize]| Flow {
        id: id.into(),
        rate: flow_rate.clone(),
        burst: burst.clone(),
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

/// The line with rate 40, latency 0.1 and token buckets γ(2.5, 0.1).
pub fn five_server_default() -> ServerGraph {
    five_server_line(rat(40, 1), rat(1, 10), rat(10, 4), rat(1, 10))
}
