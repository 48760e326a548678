//! The `k` most likely joint prolongation choices under a factorized
//! policy.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::model::PolicyOutput;

#[derive(PartialEq)]
struct Cand {
    logp: f64,
    /// Option index per flow, in original option order.
    picks: Vec<usize>,
    ranks: Vec<usize>,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.logp
            .total_cmp(&other.logp)
            .then_with(|| other.picks.cmp(&self.picks))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search over per-flow options sorted by probability. Returns
/// option indices per flow, most likely first; ties go to the smaller
/// option indices.
pub fn select_top_k(policy: &PolicyOutput, k: usize) -> Vec<Vec<usize>> {
    let sorted: Vec<Vec<usize>> = policy
        .probs
        .iter()
        .map(|p| {
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let make = |ranks: Vec<usize>| {
        let picks: Vec<usize> = ranks.iter().zip(&sorted).map(|(&r, s)| s[r]).collect();
        let logp = picks.iter().zip(&policy.probs).map(|(&i, p)| p[i].ln()).sum();
        Cand { logp, picks, ranks }
    };
    let mut heap = BinaryHeap::from([make(vec![0; sorted.len()])]);
    let mut seen = BTreeSet::from([vec![0; sorted.len()]]);
    let mut out = Vec::new();
    while out.len() < k {
        let Some(c) = heap.pop() else { break };
        for f in 0..c.ranks.len() {
            if c.ranks[f] + 1 < sorted[f].len() {
                let mut r = c.ranks.clone();
                r[f] += 1;
                if seen.insert(r.clone()) {
                    heap.push(make(r));
                }
            }
        }
        out.push(c.picks);
    }
    out
}
