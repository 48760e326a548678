//! Operations on θ-free pseudo-affine curves.
//!
//! Here the FIFO left-over curve is evaluated from its definition
//! `1{t>θ} · sup_{θ<z≤t} [β(z) − α(z−θ)]⁺` for any θ ≥ 0, not only inside the
//! region covered by the constraints of [`fifo_leftover`](super::fifo_leftover).
//! For a θ-free pseudo-affine β with nonnegative bursts the result is again
//! pseudo-affine, so these operations stay exact.

use num_traits::{Signed, Zero};

use super::curve::{PseudoAffineCurve, Stage, TokenBucket};
use super::{AffineExpr, MinPlusError};
use crate::Rational;

fn numeric(e: &AffineExpr, what: &str) -> Result<Rational, MinPlusError> {
    if e.is_constant() {
        Ok(e.constant_part().clone())
    } else {
        Err(MinPlusError::Domain(format!("{what} still depends on θ: {e}")))
    }
}

/// Latency and stages of a θ-free curve with nonnegative bursts.
fn parts(beta: &PseudoAffineCurve) -> Result<(Rational, Vec<(Rational, Rational)>), MinPlusError> {
    let d = numeric(&beta.latency, "latency")?;
    let mut stages = Vec::with_capacity(beta.stages().len());
    for s in beta.stages() {
        let sigma = numeric(&s.burst, "stage burst")?;
        if sigma.is_negative() {
            return Err(MinPlusError::Domain(format!("negative stage burst {sigma}")));
        }
        stages.push((sigma, s.rate.clone()));
    }
    Ok((d, stages))
}

fn numeric_burst(alpha: &TokenBucket) -> Result<Rational, MinPlusError> {
    numeric(&alpha.burst, "arrival burst")
}

impl PseudoAffineCurve {
    /// Value at `t` of a θ-free curve: 0 up to the latency, then the minimum
    /// of the stages.
    pub fn value_at(&self, t: &Rational) -> Result<Rational, MinPlusError> {
        let (d, stages) = parts(self)?;
        if *t <= d {
            return Ok(Rational::zero());
        }
        let dt = t - &d;
        Ok(stages
            .iter()
            .map(|(s, r)| s + r * &dt)
            .min()
            .expect("nonempty stages"))
    }
}

/// `β ⊖_θ α` for a fixed θ ≥ 0.
///
/// Past `L = max(θ, D)` the bracket `β(z) − b − r(z−θ)` is concave and
/// increasing, so the closure is the bracket itself clamped at zero. The
/// result is `δ_{L'} ⊗ min γ` where `L'` is the first time the bracket is
/// nonnegative.
pub fn leftover_at(
    beta: &PseudoAffineCurve,
    cross: &TokenBucket,
    theta: &Rational,
) -> Result<PseudoAffineCurve, MinPlusError> {
    if theta.is_negative() {
        return Err(MinPlusError::Domain(format!("negative θ {theta}")));
    }
    let (d, stages) = parts(beta)?;
    let b = numeric_burst(cross)?;
    let r = &cross.rate;
    if r >= beta.min_rate() {
        return Err(MinPlusError::Unstable {
            arrival_rate: r.clone(),
            service_rate: beta.min_rate().clone(),
        });
    }
    let l = if *theta > d { theta.clone() } else { d.clone() };
    // bracket of stage x at time t: σx + ρx(t−D) − b − r(t−θ)
    let at = |t: &Rational, sigma: &Rational, rho: &Rational| -> Rational {
        sigma + rho * (t - &d) - &b - r * (t - theta)
    };
    let mut start = l.clone();
    for (sigma, rho) in &stages {
        let v = at(&l, sigma, rho);
        if v.is_negative() {
            let zero = &l - v / (rho - r);
            if zero > start {
                start = zero;
            }
        }
    }
    let new_stages = stages
        .iter()
        .map(|(sigma, rho)| Stage {
            burst: AffineExpr::constant(at(&start, sigma, rho)),
            rate: rho - r,
        })
        .collect();
    Ok(PseudoAffineCurve::new(AffineExpr::constant(start), new_stages))
}

/// Burst of `α ⊘ β`, which is again a token bucket of rate `r`.
pub fn deconvolve_burst(alpha: &TokenBucket, beta: &PseudoAffineCurve) -> Result<Rational, MinPlusError> {
    let (d, _) = parts(beta)?;
    if alpha.rate > *beta.min_rate() {
        return Err(MinPlusError::Unstable {
            arrival_rate: alpha.rate.clone(),
            service_rate: beta.min_rate().clone(),
        });
    }
    Ok(numeric_burst(alpha)? + &alpha.rate * d)
}

pub fn hdev_value(alpha: &TokenBucket, beta: &PseudoAffineCurve) -> Result<Rational, MinPlusError> {
    let (d, stages) = parts(beta)?;
    if alpha.rate > *beta.min_rate() {
        return Err(MinPlusError::Unstable {
            arrival_rate: alpha.rate.clone(),
            service_rate: beta.min_rate().clone(),
        });
    }
    let b = numeric_burst(alpha)?;
    let extra = stages
        .iter()
        .map(|(s, r)| (&b - s) / r)
        .fold(Rational::zero(), |a, x| if x > a { x } else { a });
    Ok(d + extra)
}
