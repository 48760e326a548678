//! Per-flow analysis of a dataset with one method.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ludbfp_core::ludb::{analyze_feedforward, AnalysisConfig, AnalysisError, Budget};
use ludbfp_core::netmodel::ServerGraph;
use ludbfp_core::prolong::{run_method, Method, ProlongationPredictor};
use ludbfp_core::{to_f64, Rational};
use ludbfp_policy::GnnPredictor;

use crate::metrics::MetricsRecord;

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub method: Method,
    pub seed: u64,
    pub timeout: Option<Duration>,
    pub mem_cap_bytes: Option<usize>,
    pub workers: usize,
    pub theta_grid: Option<usize>,
    pub predictor: Option<GnnPredictor>,
}

impl AnalyzeOptions {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            theta_grid: self.theta_grid,
            ..Default::default()
        }
    }

    fn budget(&self) -> Budget {
        Budget::new(self.timeout, self.mem_cap_bytes)
    }
}

fn ratio(base: &Rational, other: &Rational) -> Option<f64> {
    (*base > Rational::from_integer(0.into())).then(|| to_f64(&((base - other) / base)))
}

fn describe(e: &AnalysisError) -> String {
    match e {
        AnalysisError::Timeout => "timeout".into(),
        AnalysisError::OutOfMemory => "memory".into(),
        other => other.to_string(),
    }
}

/// Analyzes flow `foi` of `net` with the configured method and with
/// LUDB-FF as the reference for the gap.
pub fn analyze_flow(network: &str, net: &ServerGraph, foi: usize, opts: &AnalyzeOptions) -> MetricsRecord {
    let net = net.with_foi(foi);
    let cfg = opts.config();
    let seed = opts.seed.wrapping_add(foi as u64);
    let mut row = MetricsRecord {
        network: network.into(),
        foi: net.flows[foi].id.clone(),
        flows: net.flows.len(),
        method: opts.method.to_string(),
        success: false,
        delay: None,
        delay_f64: None,
        gap: None,
        latency_improvement: None,
        burstiness_improvement: None,
        explored: 0,
        failures: 0,
        error: None,
        wall_s: 0.0,
    };
    let predictor = opts.predictor.as_ref().map(|p| p as &dyn ProlongationPredictor);
    let start = Instant::now();
    let outcome = run_method(&net, opts.method, seed, predictor, &cfg, &opts.budget());
    row.wall_s = start.elapsed().as_secs_f64();
    let out = match outcome {
        Ok(o) => o,
        Err(e) => {
            row.error = Some(describe(&e));
            return row;
        }
    };
    row.success = true;
    row.delay = Some(out.delay.to_string());
    row.delay_f64 = Some(to_f64(&out.delay));
    row.explored = out.explored;
    row.failures = out.failures;
    let reference = if opts.method == Method::LudbFf {
        Ok((out.delay.clone(), out.output.burst.constant_part().clone()))
    } else {
        analyze_feedforward(&net, &cfg, &opts.budget()).map(|r| (r.delay, r.output.burst.constant_part().clone()))
    };
    match reference {
        Ok((delay, burst)) => {
            row.gap = ratio(&delay, &out.delay);
            row.latency_improvement = row.gap;
            row.burstiness_improvement = ratio(&burst, out.output.burst.constant_part());
        }
        Err(e) => row.error = Some(format!("reference: {}", describe(&e))),
    }
    row
}

/// All flows of all networks, in input order, on `opts.workers` threads.
pub fn analyze_all(nets: &[(String, ServerGraph)], opts: &AnalyzeOptions, skip: impl Fn(&str, &str) -> bool) -> Vec<MetricsRecord> {
    let jobs: Vec<(usize, usize)> = nets
        .iter()
        .enumerate()
        .flat_map(|(n, (id, net))| {
            (0..net.flows.len())
                .filter(|&f| !skip(id, &net.flows[f].id))
                .map(move |f| (n, f))
        })
        .collect();
    let results: Mutex<Vec<Option<MetricsRecord>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..opts.workers.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, f)) = jobs.get(i) else { break };
                let row = analyze_flow(&nets[n].0, &nets[n].1, f, opts);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}
