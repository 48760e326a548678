//! Aggregate reports over metrics files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::metrics::MetricsRecord;

/// Nearest-rank percentile of sorted values, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

const SIZE_BUCKETS: [(usize, usize); 5] = [(1, 10), (11, 20), (21, 50), (51, 100), (101, usize::MAX)];

pub struct Report {
    pub methods: Vec<String>,
    /// Flows with a successful row for every method.
    pub common: BTreeSet<(String, String)>,
    pub all_flows: usize,
    pub mean_gap: BTreeMap<String, f64>,
    pub text: String,
}

pub fn report(rows: &[MetricsRecord]) -> Report {
    let mut methods: Vec<String> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let flows: BTreeSet<(String, String)> = rows.iter().map(|r| (r.network.clone(), r.foi.clone())).collect();
    let ok: BTreeSet<(String, String, String)> = rows
        .iter()
        .filter(|r| r.success && r.gap.is_some())
        .map(|r| (r.network.clone(), r.foi.clone(), r.method.clone()))
        .collect();
    let common: BTreeSet<(String, String)> = flows
        .iter()
        .filter(|(n, f)| methods.iter().all(|m| ok.contains(&(n.clone(), f.clone(), m.clone()))))
        .cloned()
        .collect();

    let mut t = String::new();
    let _ = writeln!(t, "# common flows\t{}\tof\t{}", common.len(), flows.len());
    let _ = writeln!(
        t,
        "# gaps\nmethod\trows\tsuccess_ratio\tmean_gap\tmedian_gap\tp10_gap\tp90_gap\tnegative_share\tmean_burstiness_improvement\tmean_explored"
    );
    let mut mean_gap = BTreeMap::new();
    for m in &methods {
        let mine: Vec<&MetricsRecord> = rows.iter().filter(|r| &r.method == m).collect();
        let succ = mine.iter().filter(|r| r.success).count();
        let on_common: Vec<&&MetricsRecord> = mine
            .iter()
            .filter(|r| r.success && common.contains(&(r.network.clone(), r.foi.clone())))
            .collect();
        let gaps = sorted(on_common.iter().filter_map(|r| r.gap).collect());
        let bursts: Vec<f64> = on_common.iter().filter_map(|r| r.burstiness_improvement).collect();
        let explored: Vec<f64> = on_common.iter().map(|r| r.explored as f64).collect();
        let neg = gaps.iter().filter(|g| **g < 0.0).count() as f64 / gaps.len().max(1) as f64;
        mean_gap.insert(m.clone(), mean(&gaps));
        let _ = writeln!(
            t,
            "{m}\t{}\t{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{:.6}\t{:.2}",
            mine.len(),
            succ as f64 / mine.len().max(1) as f64,
            mean(&gaps),
            percentile(&gaps, 0.5),
            percentile(&gaps, 0.1),
            percentile(&gaps, 0.9),
            neg,
            mean(&bursts),
            mean(&explored),
        );
    }
    let _ = writeln!(t, "# success by network size\nmethod\tflows_min\tflows_max\trows\tsuccess_ratio");
    for m in &methods {
        for (lo, hi) in SIZE_BUCKETS {
            let b: Vec<&MetricsRecord> = rows
                .iter()
                .filter(|r| &r.method == m && r.flows >= lo && r.flows <= hi)
                .collect();
            if b.is_empty() {
                continue;
            }
            let hi = if hi == usize::MAX { "-".into() } else { hi.to_string() };
            let ratio = b.iter().filter(|r| r.success).count() as f64 / b.len() as f64;
            let _ = writeln!(t, "{m}\t{lo}\t{hi}\t{}\t{ratio:.4}", b.len());
        }
    }
    let _ = writeln!(t, "# wall time (s)\nmethod\tmedian\tp90\tmax");
    for m in &methods {
        let w = sorted(rows.iter().filter(|r| &r.method == m).map(|r| r.wall_s).collect());
        let _ = writeln!(
            t,
            "{m}\t{:.6}\t{:.6}\t{:.6}",
            percentile(&w, 0.5),
            percentile(&w, 0.9),
            w.last().copied().unwrap_or(f64::NAN)
        );
    }
    let _ = writeln!(t, "# gap cdf\nmethod\tquantile\tgap");
    for m in &methods {
        let gaps = sorted(
            rows.iter()
                .filter(|r| &r.method == m && r.success && common.contains(&(r.network.clone(), r.foi.clone())))
                .filter_map(|r| r.gap)
                .collect(),
        );
        for i in 0..=10 {
            let q = i as f64 / 10.0;
            let _ = writeln!(t, "{m}\t{q:.1}\t{:.6}", percentile(&gaps, q));
        }
    }
    Report {
        methods,
        all_flows: flows.len(),
        common,
        mean_gap,
        text: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(net: &str, foi: &str, method: &str, gap: Option<f64>) -> MetricsRecord {
        MetricsRecord {
            network: net.into(),
            foi: foi.into(),
            flows: 4,
            method: method.into(),
            success: gap.is_some(),
            delay: None,
            delay_f64: None,
            gap,
            latency_improvement: gap,
            burstiness_improvement: gap,
            explored: 1,
            failures: 0,
            error: None,
            wall_s: 0.5,
        }
    }

    #[test]
    fn mean_gap_per_method_on_common_flows() {
        let fifo = 10.0;
        let rows = vec![
            row("n", "a", "ludb-ff", Some(0.0)),
            row("n", "b", "ludb-ff", Some(0.0)),
            row("n", "c", "ludb-ff", Some(0.0)),
            row("n", "a", "fp-heuristic", Some((fifo - 8.79) / fifo)),
            row("n", "b", "fp-heuristic", Some(0.0)),
            row("n", "c", "fp-heuristic", None),
        ];
        let r = report(&rows);
        assert_eq!(r.common.len(), 2);
        assert_eq!(r.all_flows, 3);
        assert_eq!(r.mean_gap["ludb-ff"], 0.0);
        assert!((r.mean_gap["fp-heuristic"] - 0.0605).abs() < 1e-12);
        assert!(r.text.contains("# common flows\t2\tof\t3"));
        assert!(((fifo - 8.79) / fifo - 0.121).abs() < 1e-12);
    }

    #[test]
    fn percentiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert!(percentile(&[], 0.5).is_nan());
    }
}
