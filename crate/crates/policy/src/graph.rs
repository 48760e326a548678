//! The network as a graph for the policy: server, flow and prolongation
//! nodes.
//!
//! Every cross-flow gets one prolongation node per server it may be
//! extended to, its current sink included, wired to the flow and to that
//! server. Only the part of the network upstream of the flow of interest's
//! path is kept.
//!
//! Feature layout (width [`FEATURES`]):
//!
//! | index | server | flow | prolongation |
//! |-------|--------|------|--------------|
//! | 0..3  | one-hot kind | | |
//! | 3     | rate | rate | 0 |
//! | 4     | latency | burst | 0 |
//! | 5     | hops to the foi sink / foi path length | 0 | path position + 1 / foi path length |
//! | 6     | 0 | 1 for the foi | 0 |
//! | 7..13 | zero padding | | |

use std::collections::{BTreeMap, VecDeque};

use ludbfp_core::netmodel::{ServerGraph, TandemView};
use ludbfp_core::prolong::{choices, Prolongation};
use ludbfp_core::to_f64;
use thiserror::Error;

pub const FEATURES: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Server(usize),
    Flow(usize),
    /// Flow index and position on the foi path.
    Prolongation(usize, usize),
}

/// The prolongation nodes of one cross-flow, in path order. The first one
/// is the flow's current exit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowGroup {
    pub flow: usize,
    pub exit: usize,
    pub nodes: Vec<usize>,
    pub positions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisGraph {
    pub kinds: Vec<NodeKind>,
    pub features: Vec<[f64; FEATURES]>,
    /// Undirected, each edge listed once.
    pub edges: Vec<(usize, usize)>,
    pub groups: Vec<FlowGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("network has no flow of interest")]
    NoFoi,
}

impl AnalysisGraph {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Longest shortest path over all connected pairs, at least 1.
    pub fn diameter(&self) -> usize {
        let adj = self.neighbors();
        let mut best = 1;
        for s in 0..self.len() {
            let mut dist = vec![usize::MAX; self.len()];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &w in &adj[v] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        best = best.max(dist[w]);
                        q.push_back(w);
                    }
                }
            }
        }
        best
    }

    /// The prolongation selecting, per group, the option at the given index.
    pub fn assignment(&self, picks: &[usize]) -> Prolongation {
        let mut p = Prolongation::identity();
        for (g, &i) in self.groups.iter().zip(picks) {
            if g.positions[i] > g.exit {
                p.exits.insert(g.flow, g.positions[i]);
            }
        }
        p
    }

    /// Index of each group's option in `p`, or `None` if `p` uses an option
    /// that is not in the graph.
    pub fn picks_of(&self, p: &Prolongation) -> Option<Vec<usize>> {
        self.groups
            .iter()
            .map(|g| {
                let target = p.exits.get(&g.flow).copied().unwrap_or(g.exit);
                g.positions.iter().position(|&x| x == target)
            })
            .collect()
    }
}

/// Builds the policy graph of `net` for its flow of interest.
pub fn transform_graph(net: &ServerGraph) -> Result<AnalysisGraph, GraphError> {
    let view = TandemView::for_foi(net).map_err(|_| GraphError::NoFoi)?;
    let foi = net.foi.ok_or(GraphError::NoFoi)?;
    let plen = view.len() as f64;
    let relevant = net.upstream_of(&view.path);
    let sink = net.flows[foi].sink();

    // hop distance to the foi sink against link direction
    let mut hops: BTreeMap<usize, usize> = BTreeMap::from([(sink, 0)]);
    let mut q = VecDeque::from([sink]);
    while let Some(s) = q.pop_front() {
        for &(a, b) in &net.links {
            if b == s && !hops.contains_key(&a) {
                hops.insert(a, hops[&s] + 1);
                q.push_back(a);
            }
        }
    }

    let mut g = AnalysisGraph {
        kinds: Vec::new(),
        features: Vec::new(),
        edges: Vec::new(),
        groups: Vec::new(),
    };
    let mut server_node = BTreeMap::new();
    for &s in &relevant {
        let srv = &net.servers[s];
        let mut x = [0.0; FEATURES];
        x[0] = 1.0;
        x[3] = to_f64(&srv.rate);
        x[4] = to_f64(&srv.latency);
        x[5] = hops.get(&s).map_or(0.0, |&h| h as f64 / plen);
        server_node.insert(s, g.kinds.len());
        g.kinds.push(NodeKind::Server(s));
        g.features.push(x);
    }
    for &(a, b) in &net.links {
        if let (Some(&x), Some(&y)) = (server_node.get(&a), server_node.get(&b)) {
            g.edges.push((x, y));
        }
    }
    let mut flow_node = BTreeMap::new();
    for (fi, flow) in net.flows.iter().enumerate() {
        if !flow.path.iter().any(|s| relevant.contains(s)) {
            continue;
        }
        let mut x = [0.0; FEATURES];
        x[1] = 1.0;
        x[3] = to_f64(&flow.rate);
        x[4] = to_f64(&flow.burst);
        x[6] = if fi == foi { 1.0 } else { 0.0 };
        let id = g.kinds.len();
        flow_node.insert(fi, id);
        g.kinds.push(NodeKind::Flow(fi));
        g.features.push(x);
        for s in &flow.path {
            if let Some(&sn) = server_node.get(s) {
                g.edges.push((id, sn));
            }
        }
    }
    for c in choices(&view) {
        let f = flow_node[&c.flow];
        let mut group = FlowGroup {
            flow: c.flow,
            exit: c.exit,
            nodes: Vec::new(),
            positions: c.options.clone(),
        };
        for &pos in &c.options {
            let mut x = [0.0; FEATURES];
            x[2] = 1.0;
            x[5] = (pos + 1) as f64 / plen;
            let id = g.kinds.len();
            g.kinds.push(NodeKind::Prolongation(c.flow, pos));
            g.features.push(x);
            g.edges.push((f, id));
            g.edges.push((id, server_node[&view.path[pos]]));
            group.nodes.push(id);
        }
        g.groups.push(group);
    }
    Ok(g)
}
