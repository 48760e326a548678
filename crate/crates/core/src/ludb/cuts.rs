//! Nesting trees and cut sets of a tandem.
//!
//! A cut at position `p` separates path positions `p` and `p + 1`. Two
//! interleaved segments `[a1, b1]`, `[a2, b2]` with `a1 < a2 ≤ b1 < b2` stay
//! interleaved in some sub-tandem unless a cut lies in `[a2 − 1, b1]`, and
//! one cut there is enough. Valid cut sets are therefore exactly the
//! hitting sets of these intervals.

use std::collections::BTreeSet;

use crate::netmodel::{Segment, TandemView};

/// Sorted cut positions.
pub type CutSet = Vec<usize>;

/// Segments sharing one interval, and the nodes nested strictly inside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestingNode {
    pub entry: usize,
    pub exit: usize,
    /// Indices into the segment list the tree was built from.
    pub segments: Vec<usize>,
    pub children: Vec<NestingNode>,
}

/// Root covering the whole path; its children are the maximal nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestingTree {
    pub len: usize,
    pub children: Vec<NestingNode>,
}

impl NestingTree {
    pub fn node_count(&self) -> usize {
        fn count(n: &NestingNode) -> usize {
            1 + n.children.iter().map(count).sum::<usize>()
        }
        self.children.iter().map(count).sum()
    }
}

fn interleaved(segs: &[Segment]) -> Option<(usize, usize)> {
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            if segs[i].interleaves(&segs[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Nesting tree of `segments` over a path of `len` servers, or the first
/// interleaved pair found.
pub fn build_nesting_tree(len: usize, segments: &[Segment]) -> Result<NestingTree, (usize, usize)> {
    if let Some(pair) = interleaved(segments) {
        return Err(pair);
    }
    let mut groups: Vec<NestingNode> = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        match groups.iter_mut().find(|g| g.entry == s.entry && g.exit == s.exit) {
            Some(g) => g.segments.push(i),
            None => groups.push(NestingNode {
                entry: s.entry,
                exit: s.exit,
                segments: vec![i],
                children: Vec::new(),
            }),
        }
    }
    // widest first, so parents are placed before their children
    groups.sort_by_key(|g| (std::cmp::Reverse(g.exit - g.entry), g.entry));
    let mut roots: Vec<NestingNode> = Vec::new();
    for g in groups {
        insert(&mut roots, g);
    }
    sort_nodes(&mut roots);
    Ok(NestingTree { len, children: roots })
}

fn insert(level: &mut Vec<NestingNode>, node: NestingNode) {
    for parent in level.iter_mut() {
        if parent.entry <= node.entry && node.exit <= parent.exit {
            insert(&mut parent.children, node);
            return;
        }
    }
    level.push(node);
}

fn sort_nodes(level: &mut [NestingNode]) {
    level.sort_by_key(|n| n.entry);
    for n in level {
        sort_nodes(&mut n.children);
    }
}

pub fn nesting_tree(view: &TandemView) -> Result<NestingTree, (usize, usize)> {
    build_nesting_tree(view.len(), &view.segments)
}

/// Cut-position intervals that each need at least one cut.
pub fn cut_requirements(view: &TandemView) -> Vec<(usize, usize)> {
    let mut req: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, j) in view.interleaved_pairs() {
        let (a, b) = (&view.segments[i], &view.segments[j]);
        let (first, second) = if (a.entry, a.exit) < (b.entry, b.exit) { (a, b) } else { (b, a) };
        req.insert((second.entry - 1, first.exit));
    }
    req.into_iter().collect()
}

fn hits(cuts: &[usize], req: &[(usize, usize)]) -> bool {
    req.iter().all(|&(lo, hi)| cuts.iter().any(|&c| lo <= c && c <= hi))
}

fn is_minimal(cuts: &[usize], req: &[(usize, usize)]) -> bool {
    (0..cuts.len()).all(|skip| {
        let rest: Vec<usize> = cuts
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != skip)
            .map(|(_, c)| *c)
            .collect();
        !hits(&rest, req)
    })
}

fn canonical_order(sets: &mut [CutSet]) {
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
}

/// Minimal cut sets, at most `cap` of them, ordered by size and then
/// lexicographically. Empty for nested views.
pub fn enumerate_cut_sets(view: &TandemView, cap: usize) -> Vec<CutSet> {
    let req = cut_requirements(view);
    if req.is_empty() {
        return Vec::new();
    }
    let mut sorted = req.clone();
    sorted.sort_by_key(|&(lo, hi)| (hi, lo));
    let mut found: BTreeSet<CutSet> = BTreeSet::new();
    let mut stack = Vec::new();
    branch(&sorted, &mut stack, &mut found, cap.max(1) * 8);
    let mut out: Vec<CutSet> = found.into_iter().filter(|c| is_minimal(c, &req)).collect();
    canonical_order(&mut out);
    out.truncate(cap.max(1));
    out
}

fn branch(req: &[(usize, usize)], chosen: &mut Vec<usize>, found: &mut BTreeSet<CutSet>, limit: usize) {
    if found.len() >= limit {
        return;
    }
    let open = req
        .iter()
        .find(|&&(lo, hi)| !chosen.iter().any(|&c| lo <= c && c <= hi));
    let Some(&(lo, hi)) = open else {
        let mut set = chosen.clone();
        set.sort_unstable();
        found.insert(set);
        return;
    };
    for c in lo..=hi {
        chosen.push(c);
        branch(req, chosen, found, limit);
        chosen.pop();
    }
}

/// Every valid cut set, minimal or not; meant for small tandems only.
pub fn enumerate_all_cut_sets(view: &TandemView) -> Vec<CutSet> {
    let req = cut_requirements(view);
    if req.is_empty() {
        return Vec::new();
    }
    let positions = view.len().saturating_sub(1);
    assert!(positions < 24, "exhaustive cut enumeration on a long tandem");
    let mut out: Vec<CutSet> = (1u32..(1 << positions))
        .map(|mask| (0..positions).filter(|p| mask & (1 << p) != 0).collect::<CutSet>())
        .filter(|c| hits(c, &req))
        .collect();
    canonical_order(&mut out);
    out
}

/// Splits the segments of a tandem along `path` at `cuts`. Each part is
/// `(first position, last position, clipped segments)`. Positions stay
/// relative to the whole path; a segment clipped at its front gets the
/// server before the cut as predecessor.
pub fn split(path: &[usize], segments: &[Segment], cuts: &[usize]) -> Vec<(usize, usize, Vec<Segment>)> {
    let len = path.len();
    let mut bounds = Vec::new();
    let mut start = 0;
    for &c in cuts {
        bounds.push((start, c));
        start = c + 1;
    }
    bounds.push((start, len - 1));
    bounds
        .into_iter()
        .map(|(lo, hi)| {
            let parts = segments
                .iter()
                .filter(|s| s.entry <= hi && lo <= s.exit)
                .map(|s| {
                    let entry = s.entry.max(lo);
                    Segment {
                        entry,
                        exit: s.exit.min(hi),
                        pred: if entry > s.entry { Some(path[entry - 1]) } else { s.pred },
                        ..s.clone()
                    }
                })
                .collect();
            (lo, hi, parts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::tests::five_server_default;
    use std::collections::BTreeSet;

    fn seg(flow: usize, entry: usize, exit: usize) -> Segment {
        Segment {
            flow,
            entry,
            exit,
            pred: None,
            prolongable: false,
        }
    }

    fn view(len: usize, segs: Vec<Segment>) -> TandemView {
        TandemView {
            path: (0..len).collect(),
            main: BTreeSet::new(),
            segments: segs,
        }
    }

    #[test]
    fn five_server_line_is_not_nested() {
        let v = TandemView::for_foi(&five_server_default()).unwrap();
        assert_eq!(nesting_tree(&v), Err((1, 2)));
        assert_eq!(enumerate_cut_sets(&v, 16), vec![vec![0], vec![1]]);
    }

    #[test]
    fn prolonged_five_server_line_tree() {
        let mut net = five_server_default();
        net.flows[2].path.push(3);
        let v = TandemView::for_foi(&net).unwrap();
        let tree = nesting_tree(&v).unwrap();
        assert_eq!(tree.children.len(), 1);
        let top = &tree.children[0];
        assert_eq!((top.entry, top.exit, top.segments.clone()), (0, 2, vec![0, 1]));
        assert_eq!(top.children.len(), 1);
        assert_eq!((top.children[0].entry, top.children[0].exit), (1, 2));
        assert!(enumerate_cut_sets(&v, 16).is_empty());
    }

    #[test]
    fn empty_view_is_a_bare_root() {
        let tree = build_nesting_tree(4, &[]).unwrap();
        assert_eq!(tree.node_count(), 0);
    }

    #[test]
    fn chain_has_three_single_cuts() {
        let v = view(4, vec![seg(0, 0, 2), seg(1, 1, 3)]);
        assert_eq!(enumerate_cut_sets(&v, 16), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn splitting_resolves_interleaving() {
        let v = view(4, vec![seg(0, 0, 2), seg(1, 1, 3)]);
        for cuts in enumerate_all_cut_sets(&v) {
            for (lo, hi, part) in split(&v.path, &v.segments, &cuts) {
                assert!(build_nesting_tree(hi - lo + 1, &part).is_ok(), "{cuts:?}");
            }
        }
    }
}
