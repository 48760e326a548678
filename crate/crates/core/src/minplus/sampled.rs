//! Brute-force evaluation of curve operations on sampled piecewise-linear
//! curves.
//!
//! Everything here works straight from the definitions (infimum, supremum,
//! pseudo-inverse by bisection) in `f64`, so it shares no code path with the
//! closed forms and can serve as an oracle for them.

use super::{Assignment, MinPlusError, PseudoAffineCurve, ThetaId, TokenBucket};
use crate::to_f64;

/// Piecewise-linear curve given by breakpoints. A repeated time encodes a
/// jump; the value at the jump is the first of the repeated points
/// (left-continuous), the right limit the last.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve {
    pub points: Vec<(f64, f64)>,
    pub horizon: f64,
}

impl SampledCurve {
    /// # Panics
    /// If `points` is empty or not sorted by time.
    pub fn new(points: Vec<(f64, f64)>, horizon: f64) -> Self {
        assert!(!points.is_empty(), "sampled curve without points");
        assert!(
            points.windows(2).all(|w| w[0].0 <= w[1].0),
            "breakpoints must be sorted by time"
        );
        SampledCurve { points, horizon }
    }

    fn interpolate(&self, idx: usize, t: f64) -> f64 {
        let n = self.points.len();
        let (a, b) = if idx == 0 {
            if n == 1 {
                return self.points[0].1;
            }
            (self.points[0], self.points[1])
        } else if idx >= n {
            if n == 1 {
                return self.points[0].1;
            }
            (self.points[n - 2], self.points[n - 1])
        } else {
            (self.points[idx - 1], self.points[idx])
        };
        if b.0 == a.0 {
            return b.1;
        }
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 < t);
        if idx < self.points.len() && self.points[idx].0 == t {
            return self.points[idx].1;
        }
        self.interpolate(idx, t)
    }

    pub fn right_limit(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 <= t);
        if idx > 0 && self.points[idx - 1].0 == t {
            return self.points[idx - 1].1;
        }
        self.value(t)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12)
    }
}

/// Relative comparison used throughout the oracle checks.
pub fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step).ceil() as usize;
    let mut out: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(horizon)).collect();
    out.dedup();
    out
}

fn merge(mut times: Vec<f64>) -> Vec<f64> {
    times.retain(|t| t.is_finite() && *t >= 0.0);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Samples `γ_{r,b}` on `[0, horizon]`.
pub fn sample_token_bucket(rate: f64, burst: f64, horizon: f64, step: f64) -> SampledCurve {
    let mut pts = vec![(0.0, 0.0), (0.0, burst)];
    for t in grid(horizon, step).into_iter().skip(1) {
        pts.push((t, burst + rate * t));
    }
    SampledCurve::new(pts, horizon)
}

/// Samples `δ_D ⊗ min_x γ_{σx,ρx}` directly from its definition, with every
/// point where the active stage changes added as a breakpoint.
pub fn sample_pseudo_affine(latency: f64, stages: &[(f64, f64)], horizon: f64, step: f64) -> SampledCurve {
    let eval = |t: f64| -> f64 {
        if t <= latency {
            0.0
        } else {
            stages
                .iter()
                .map(|(s, r)| s + r * (t - latency))
                .fold(f64::INFINITY, f64::min)
        }
    };
    let mut times = grid(horizon, step);
    times.push(latency);
    for (i, (s1, r1)) in stages.iter().enumerate() {
        for (s2, r2) in &stages[i + 1..] {
            if r1 != r2 {
                times.push(latency + (s2 - s1) / (r1 - r2));
            }
        }
    }
    let mut pts = Vec::new();
    for t in merge(times) {
        pts.push((t, eval(t)));
        if t == latency {
            let jump = stages.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            pts.push((t, jump));
        }
    }
    SampledCurve::new(pts, horizon)
}

/// `1{t>θ} · sup_{θ<z≤t} [β(z) − α(z−θ)]⁺` on sampled operands.
pub fn sample_leftover(beta: &SampledCurve, alpha: &SampledCurve, theta: f64) -> SampledCurve {
    let horizon = beta.horizon;
    let mut times: Vec<f64> = beta.times().collect();
    times.extend(alpha.times().map(|t| t + theta));
    times.push(theta);
    times.push(horizon);
    let times: Vec<f64> = merge(times).into_iter().filter(|t| *t <= horizon).collect();

    let bracket = |z: f64| beta.value(z) - alpha.value(z - theta);
    let bracket_right = |z: f64| beta.right_limit(z) - alpha.right_limit(z - theta);

    let mut pts = Vec::new();
    let mut best = 0.0_f64;
    let mut prev: Option<f64> = None;
    for &t in &times {
        if t <= theta {
            pts.push((t, 0.0));
            if t == theta {
                best = best.max(bracket_right(t));
                if best > 0.0 {
                    pts.push((t, best));
                }
            }
            prev = Some(t);
            continue;
        }
        if let Some(p) = prev {
            // the bracket is linear on (p, t); it may overtake the running
            // maximum inside the segment
            let a = bracket_right(p);
            let b = bracket(t);
            if b > best && a < best {
                let cross = p + (best - a) / (b - a) * (t - p);
                if cross > p && cross < t {
                    pts.push((cross, best));
                }
            }
            best = best.max(b);
        }
        pts.push((t, best));
        let r = bracket_right(t);
        if r > best {
            best = r;
            pts.push((t, best));
        }
        prev = Some(t);
    }
    SampledCurve::new(pts, horizon)
}

/// `(f ⊗ g)(t) = inf_{0≤s≤t} f(t−s) + g(s)` at each requested time. The
/// infimum of two nondecreasing left-continuous piecewise-linear functions
/// is attained at a breakpoint of either operand.
pub fn convolve_at(f: &SampledCurve, g: &SampledCurve, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            let mut cands: Vec<f64> = g.times().filter(|s| *s <= t).collect();
            cands.extend(f.times().map(|u| t - u).filter(|s| *s >= 0.0));
            cands.push(0.0);
            cands.push(t);
            cands
                .into_iter()
                .map(|s| f.value(t - s) + g.value(s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `(α ⊘ β)(t) = sup_{u≥0} α(t+u) − β(u)`, searched over `u ∈ [0, horizon]`.
pub fn deconvolve_at(alpha: &SampledCurve, beta: &SampledCurve, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            let mut cands: Vec<f64> = beta.times().collect();
            cands.extend(alpha.times().map(|a| a - t).filter(|u| *u >= 0.0));
            cands.push(0.0);
            cands
                .into_iter()
                .filter(|u| *u <= beta.horizon)
                .map(|u| {
                    let at = alpha.value(t + u) - beta.value(u);
                    let right = alpha.right_limit(t + u) - beta.right_limit(u);
                    at.max(right)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `sup_t α(t) − β(t)`.
pub fn vdev_sampled(alpha: &SampledCurve, beta: &SampledCurve) -> f64 {
    let cands = merge(alpha.times().chain(beta.times()).collect());
    cands
        .into_iter()
        .map(|t| {
            (alpha.value(t) - beta.value(t)).max(alpha.right_limit(t) - beta.right_limit(t))
        })
        .fold(0.0, f64::max)
}

/// `sup_t inf{d ≥ 0 : α(t) ≤ β(t+d)}`, each infimum found by bisection.
/// Where α keeps rising right after a breakpoint `t`, the supremum is
/// approached from the right, giving `inf{s : β(s) > α(t+)} − t`.
pub fn hdev_sampled(alpha: &SampledCurve, beta: &SampledCurve) -> f64 {
    let cands = merge(alpha.times().chain(beta.times()).collect());
    let limit = beta.horizon * 4.0;
    // smallest s with β(s) ≥ y, or β(s) > y when `strict`; β is nondecreasing
    let first_reach = |y: f64, strict: bool| -> f64 {
        let reached = |s: f64| if strict { beta.value(s) > y } else { beta.value(s) >= y };
        if reached(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0_f64, limit);
        while !reached(hi) {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let mut best = 0.0_f64;
    for (i, &t) in cands.iter().enumerate() {
        for y in [alpha.value(t), alpha.right_limit(t)] {
            if y > 0.0 {
                best = best.max(first_reach(y, false) - t);
            }
        }
        let rising = cands.get(i + 1).is_some_and(|&n| alpha.value(n) > alpha.right_limit(t));
        if rising {
            best = best.max(first_reach(alpha.right_limit(t), true) - t);
        }
    }
    best
}

/// A curve or a FIFO left-over term to sample.
#[derive(Clone, Copy, Debug)]
pub enum SampleTerm<'a> {
    Arrival(&'a TokenBucket),
    Service(&'a PseudoAffineCurve),
    Leftover {
        beta: &'a PseudoAffineCurve,
        cross: &'a TokenBucket,
        theta: ThetaId,
    },
}

/// Default horizon: four times the total latency plus the time to serve the
/// total burst at the smallest rate.
pub fn default_horizon(latency: f64, burst: f64, min_rate: f64) -> f64 {
    let h = 4.0 * (latency + burst / min_rate);
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

fn substituted(beta: &PseudoAffineCurve, asg: &Assignment) -> Result<(f64, Vec<(f64, f64)>), MinPlusError> {
    let b = beta.substitute(asg);
    if !b.latency.is_constant() || b.stages().iter().any(|s| !s.burst.is_constant()) {
        return Err(MinPlusError::Domain("unassigned θ".into()));
    }
    let d = to_f64(b.latency.constant_part());
    let stages: Vec<(f64, f64)> = b
        .stages()
        .iter()
        .map(|s| (to_f64(s.burst.constant_part()), to_f64(&s.rate)))
        .collect();
    if d < 0.0 || stages.iter().any(|s| s.0 < 0.0) {
        return Err(MinPlusError::Domain("curve is not in F0 at this θ".into()));
    }
    Ok((d, stages))
}

fn arrival(tb: &TokenBucket, asg: &Assignment) -> Result<(f64, f64), MinPlusError> {
    let b = tb.burst.substitute(asg);
    if !b.is_constant() {
        return Err(MinPlusError::Domain("unassigned θ".into()));
    }
    let burst = to_f64(b.constant_part());
    if burst < 0.0 {
        return Err(MinPlusError::Domain("negative burst".into()));
    }
    Ok((to_f64(&tb.rate), burst))
}

/// Samples `term` under `asg` on `[0, horizon]` with grid `step`.
pub fn sample_curve(
    term: SampleTerm<'_>,
    asg: &Assignment,
    horizon: f64,
    step: f64,
) -> Result<SampledCurve, MinPlusError> {
    if !(horizon > 0.0 && step > 0.0) {
        return Err(MinPlusError::Domain("horizon and step must be positive".into()));
    }
    match term {
        SampleTerm::Arrival(tb) => {
            let (r, b) = arrival(tb, asg)?;
            Ok(sample_token_bucket(r, b, horizon, step))
        }
        SampleTerm::Service(beta) => {
            let (d, stages) = substituted(beta, asg)?;
            Ok(sample_pseudo_affine(d, &stages, horizon, step))
        }
        SampleTerm::Leftover { beta, cross, theta } => {
            let th = asg
                .get(&theta)
                .map(to_f64)
                .ok_or_else(|| MinPlusError::Domain(format!("{theta} unassigned")))?;
            if th < 0.0 {
                return Err(MinPlusError::Domain(format!("{theta} is negative")));
            }
            let (d, stages) = substituted(beta, asg)?;
            let (r, b) = arrival(cross, asg)?;
            let beta_s = sample_pseudo_affine(d, &stages, horizon, step);
            let alpha_s = sample_token_bucket(r, b, horizon, step);
            Ok(sample_leftover(&beta_s, &alpha_s, th))
        }
    }
}
