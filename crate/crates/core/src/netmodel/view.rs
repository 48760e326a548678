//! The network as seen along one path.

use std::collections::BTreeSet;

use thiserror::Error;

use super::ServerGraph;

/// A maximal piece of a flow's path that runs along consecutive servers of
/// the viewed path. Positions are 0-based indices into that path.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Segment {
    pub flow: usize,
    pub entry: usize,
    pub exit: usize,
    /// Server the flow visits right before entering, `None` at its source.
    pub pred: Option<usize>,
    /// The flow ends at `exit`, so it may be extended along the path.
    pub prolongable: bool,
}

impl Segment {
    pub fn overlaps(&self, other: &Segment) -> bool {
        self.entry <= other.exit && other.entry <= self.exit
    }

    pub fn contains(&self, other: &Segment) -> bool {
        self.entry <= other.entry && other.exit <= self.exit
    }

    /// Overlapping without either containing the other.
    pub fn interleaves(&self, other: &Segment) -> bool {
        self.overlaps(other) && !self.contains(other) && !other.contains(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TandemView {
    /// Server indices of the viewed path.
    pub path: Vec<usize>,
    /// Flows that run along the whole path and are not cross traffic.
    pub main: BTreeSet<usize>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("no flow of interest")]
    NoFoi,
    #[error("flow {0} does not exist")]
    UnknownFlow(usize),
}

impl TandemView {
    /// The tandem along the path of the flow of interest.
    pub fn for_foi(net: &ServerGraph) -> Result<Self, ViewError> {
        let foi = net.foi.ok_or(ViewError::NoFoi)?;
        Self::for_flow(net, foi)
    }

    pub fn for_flow(net: &ServerGraph, flow: usize) -> Result<Self, ViewError> {
        let f = net.flows.get(flow).ok_or(ViewError::UnknownFlow(flow))?;
        Ok(Self::along(net, &f.path, &BTreeSet::from([flow])))
    }

    /// Segments of every flow outside `main` on `path`.
    pub fn along(net: &ServerGraph, path: &[usize], main: &BTreeSet<usize>) -> Self {
        let pos_of = |s: usize| path.iter().position(|p| *p == s);
        let mut segments = Vec::new();
        for (fi, flow) in net.flows.iter().enumerate() {
            if main.contains(&fi) {
                continue;
            }
            let mut current: Option<Segment> = None;
            let mut flow_segs: Vec<Segment> = Vec::new();
            for (k, &s) in flow.path.iter().enumerate() {
                let pos = pos_of(s);
                match (&mut current, pos) {
                    (Some(seg), Some(p)) if p == seg.exit + 1 => seg.exit = p,
                    (_, Some(p)) => {
                        if let Some(seg) = current.take() {
                            flow_segs.push(seg);
                        }
                        current = Some(Segment {
                            flow: fi,
                            entry: p,
                            exit: p,
                            pred: (k > 0).then(|| flow.path[k - 1]),
                            prolongable: false,
                        });
                    }
                    (_, None) => {
                        if let Some(seg) = current.take() {
                            flow_segs.push(seg);
                        }
                    }
                }
            }
            if let Some(seg) = current.take() {
                flow_segs.push(seg);
            }
            if let Some(last) = flow_segs.last_mut() {
                last.prolongable = path[last.exit] == flow.sink() && last.exit + 1 < path.len();
            }
            segments.extend(flow_segs);
        }
        TandemView {
            path: path.to_vec(),
            main: main.clone(),
            segments,
        }
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// Index pairs of interleaved segments.
    pub fn interleaved_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.segments.len() {
            for j in i + 1..self.segments.len() {
                if self.segments[i].interleaves(&self.segments[j]) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_nested(&self) -> bool {
        self.interleaved_pairs().is_empty()
    }

    pub fn prolongable(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.prolongable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::tests::five_server_default;

    fn intervals(v: &TandemView) -> Vec<(usize, usize, usize)> {
        v.segments.iter().map(|s| (s.flow, s.entry, s.exit)).collect()
    }

    #[test]
    fn five_server_line_intervals() {
        let net = five_server_default();
        let v = TandemView::for_foi(&net).unwrap();
        assert_eq!(v.path, vec![1, 2, 3, 4]);
        // 1-based: f1 [1,3], f2 [1,2], f3 [2,3]
        assert_eq!(intervals(&v), vec![(1, 0, 2), (2, 0, 1), (3, 1, 2)]);
        assert!(v.segments.iter().all(|s| s.prolongable));
        assert_eq!(v.segments[0].pred, Some(0));
        assert_eq!(v.segments[2].pred, None);
        assert_eq!(v.interleaved_pairs(), vec![(1, 2)]);
    }

    #[test]
    fn no_cross_flows() {
        let mut net = five_server_default();
        net.flows.truncate(1);
        let v = TandemView::for_foi(&net).unwrap();
        assert!(v.segments.is_empty());
        assert!(v.is_nested());
    }

    #[test]
    fn prolonged_flow_is_nested() {
        let mut net = five_server_default();
        net.flows[2].path.push(3);
        let v = TandemView::for_foi(&net).unwrap();
        assert_eq!(intervals(&v)[1], (2, 0, 2));
        assert!(v.is_nested());
    }

    #[test]
    fn flows_leaving_and_rejoining_are_split() {
        let mut net = five_server_default();
        net.servers.push(crate::netmodel::Server {
            id: "x".into(),
            rate: crate::rat(1, 1),
            latency: crate::rat(0, 1),
        });
        net.links.extend([(1, 5), (5, 3)]);
        net.flows[2].path = vec![0, 1, 5, 3];
        let v = TandemView::for_foi(&net).unwrap();
        let f2: Vec<_> = v.segments.iter().filter(|s| s.flow == 2).collect();
        assert_eq!(f2.len(), 2);
        assert_eq!((f2[0].entry, f2[0].exit, f2[0].prolongable), (0, 0, false));
        assert_eq!((f2[1].entry, f2[1].exit, f2[1].pred), (2, 2, Some(5)));
        assert!(f2[1].prolongable);
    }

    #[test]
    fn missing_foi() {
        let mut net = five_server_default();
        net.foi = None;
        assert_eq!(TandemView::for_foi(&net), Err(ViewError::NoFoi));
    }
}
