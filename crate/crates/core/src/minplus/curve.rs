//! Token buckets, pseudo-affine service curves and the closed-form
//! operations on them.
//!
//! A pseudo-affine curve is `δ_D ⊗ min_x γ_{σx,ρx}`: zero up to the latency
//! `D`, then the minimum of a family of token buckets started at `D`. Both the
//! latency and the bursts are affine in free θ parameters, the rates are
//! plain rationals. The class is closed under convolution and under the FIFO
//! left-over operation, which is all the LUDB analysis needs.

use std::fmt;

use num_traits::{Signed, Zero};

use super::affine::{AffineExpr, Assignment, ThetaId};
use super::MinPlusError;
use crate::Rational;

/// `γ_{r,b}`: zero at the origin, `b + r·t` for `t > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenBucket {
    pub rate: Rational,
    pub burst: AffineExpr,
}

impl TokenBucket {
    pub fn new(rate: Rational, burst: impl Into<AffineExpr>) -> Self {
        TokenBucket {
            rate,
            burst: burst.into(),
        }
    }

    pub fn zero() -> Self {
        TokenBucket::new(Rational::zero(), Rational::zero())
    }

    pub fn substitute(&self, assignment: &Assignment) -> TokenBucket {
        TokenBucket {
            rate: self.rate.clone(),
            burst: self.burst.substitute(assignment),
        }
    }

    /// The burst, if it no longer depends on any θ.
    pub fn numeric_burst(&self) -> Option<&Rational> {
        self.burst
            .is_constant()
            .then(|| self.burst.constant_part())
    }
}

impl fmt::Display for TokenBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "γ[r={}, b={}]", self.rate, self.burst)
    }
}

/// One token-bucket stage `γ_{σ,ρ}` of a pseudo-affine curve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub burst: AffineExpr,
    pub rate: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoAffineCurve {
    pub latency: AffineExpr,
    stages: Vec<Stage>,
}

impl PseudoAffineCurve {
    /// # Panics
    /// If `stages` is empty or a stage rate is not positive.
    pub fn new(latency: AffineExpr, stages: Vec<Stage>) -> Self {
        assert!(!stages.is_empty(), "pseudo-affine curve without stages");
        assert!(
            stages.iter().all(|s| s.rate.is_positive()),
            "stage rates must be positive"
        );
        PseudoAffineCurve { latency, stages }
    }

    /// `β_{R,T}`.
    pub fn rate_latency(rate: Rational, latency: Rational) -> Self {
        Self::new(
            AffineExpr::constant(latency),
            vec![Stage {
                burst: AffineExpr::zero(),
                rate,
            }],
        )
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn min_rate(&self) -> &Rational {
        self.stages
            .iter()
            .map(|s| &s.rate)
            .min()
            .expect("nonempty stages")
    }

    pub fn thetas(&self) -> Vec<ThetaId> {
        let mut out: Vec<ThetaId> = self
            .latency
            .thetas()
            .chain(self.stages.iter().flat_map(|s| s.burst.thetas()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn substitute(&self, assignment: &Assignment) -> PseudoAffineCurve {
        PseudoAffineCurve {
            latency: self.latency.substitute(assignment),
            stages: self
                .stages
                .iter()
                .map(|s| Stage {
                    burst: s.burst.substitute(assignment),
                    rate: s.rate.clone(),
                })
                .collect(),
        }
    }

    /// Drops stages that are dominated everywhere: another stage with a rate
    /// no larger and a burst smaller by a θ-independent nonnegative amount.
    /// Only such syntactic dominance is used, so the denoted function never
    /// changes, whatever θ is chosen later.
    pub fn prune(&self) -> PseudoAffineCurve {
        let mut keep: Vec<Stage> = Vec::with_capacity(self.stages.len());
        'outer: for (i, cand) in self.stages.iter().enumerate() {
            for (j, other) in self.stages.iter().enumerate() {
                if i == j {
                    continue;
                }
                let diff = &cand.burst - &other.burst;
                if other.rate <= cand.rate && diff.is_constant() && !diff.constant_part().is_negative()
                {
                    // identical stages: keep the first occurrence only
                    let identical = other.rate == cand.rate && diff.constant_part().is_zero();
                    if !identical || j < i {
                        continue 'outer;
                    }
                }
            }
            keep.push(cand.clone());
        }
        PseudoAffineCurve {
            latency: self.latency.clone(),
            stages: keep,
        }
    }
}

impl fmt::Display for PseudoAffineCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "δ[{}] ⊗ min{{", self.latency)?;
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "γ[{}, {}]", s.rate, s.burst)?;
        }
        write!(f, "}}")
    }
}

/// Affine expressions that must all be nonnegative.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    items: Vec<AffineExpr>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `expr ≥ 0`; duplicates and trivially true constants are skipped.
    pub fn push(&mut self, expr: AffineExpr) {
        if expr.is_constant() && !expr.constant_part().is_negative() {
            return;
        }
        if !self.items.contains(&expr) {
            self.items.push(expr);
        }
    }

    pub fn extend(&mut self, other: &ConstraintSet) {
        for c in &other.items {
            self.push(c.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &AffineExpr> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        self.items
            .iter()
            .all(|c| !c.eval(assignment).is_negative())
    }
}

/// `base + max(0, max(max_terms))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayExpr {
    pub base: AffineExpr,
    pub max_terms: Vec<AffineExpr>,
}

impl DelayExpr {
    pub fn eval(&self, assignment: &Assignment) -> Rational {
        let extra = self
            .max_terms
            .iter()
            .map(|t| t.eval(assignment))
            .fold(Rational::zero(), |a, b| if b > a { b } else { a });
        self.base.eval(assignment) + extra
    }
}

/// Sum of token buckets.
pub fn tb_aggregate(flows: &[TokenBucket]) -> Result<TokenBucket, MinPlusError> {
    let (first, rest) = flows.split_first().ok_or(MinPlusError::EmptyAggregate)?;
    let mut out = first.clone();
    for f in rest {
        out.rate += &f.rate;
        out.burst += &f.burst;
    }
    Ok(out)
}

/// Convolution: latencies add, stages are the union of both families.
pub fn pa_convolve(a: &PseudoAffineCurve, b: &PseudoAffineCurve) -> PseudoAffineCurve {
    let mut stages = a.stages.clone();
    stages.extend(b.stages.iter().cloned());
    PseudoAffineCurve {
        latency: &a.latency + &b.latency,
        stages,
    }
}

/// Convolution of any number of curves. `None` stands for the neutral
/// element `δ_0`.
pub fn pa_convolve_all<'a>(
    curves: impl IntoIterator<Item = &'a PseudoAffineCurve>,
) -> Option<PseudoAffineCurve> {
    curves.into_iter().fold(None, |acc, c| match acc {
        None => Some(c.clone()),
        Some(a) => Some(pa_convolve(&a, c)),
    })
}

fn check_stable(arrival_rate: &Rational, beta: &PseudoAffineCurve, strict: bool) -> Result<(), MinPlusError> {
    let min = beta.min_rate();
    let ok = if strict {
        arrival_rate < min
    } else {
        arrival_rate <= min
    };
    if ok {
        Ok(())
    } else {
        Err(MinPlusError::Unstable {
            arrival_rate: arrival_rate.clone(),
            service_rate: min.clone(),
        })
    }
}

/// FIFO left-over service `β ⊖_θ α` restricted to the region `θ ≥ D` and
/// nonnegative resulting bursts, where it equals
/// `δ_θ ⊗ min_x γ_{σx + ρx(θ−D) − b, ρx − r}` exactly. The returned
/// constraints describe that region.
pub fn fifo_leftover(
    beta: &PseudoAffineCurve,
    cross: &TokenBucket,
    theta: ThetaId,
) -> Result<(PseudoAffineCurve, ConstraintSet), MinPlusError> {
    check_stable(&cross.rate, beta, true)?;
    let th = AffineExpr::theta(theta);
    let slack = &th - &beta.latency;
    let mut constraints = ConstraintSet::new();
    constraints.push(slack.clone());
    let stages: Vec<Stage> = beta
        .stages
        .iter()
        .map(|s| {
            let burst = &(&s.burst + &slack.scale(&s.rate)) - &cross.burst;
            constraints.push(burst.clone());
            Stage {
                burst,
                rate: &s.rate - &cross.rate,
            }
        })
        .collect();
    Ok((
        PseudoAffineCurve {
            latency: th,
            stages,
        },
        constraints,
    ))
}

/// Output arrival curve `α ⊘ β = γ_{r, b + r·D}`; valid wherever all stage
/// bursts are nonnegative.
pub fn tb_deconvolve(alpha: &TokenBucket, beta: &PseudoAffineCurve) -> Result<TokenBucket, MinPlusError> {
    check_stable(&alpha.rate, beta, false)?;
    Ok(TokenBucket {
        rate: alpha.rate.clone(),
        burst: &alpha.burst + &beta.latency.scale(&alpha.rate),
    })
}

/// Horizontal deviation: `D + max(0, max_x (b − σx)/ρx)`.
pub fn hdev(alpha: &TokenBucket, beta: &PseudoAffineCurve) -> Result<DelayExpr, MinPlusError> {
    check_stable(&alpha.rate, beta, false)?;
    let max_terms = beta
        .stages
        .iter()
        .map(|s| (&alpha.burst - &s.burst).scale(&s.rate.recip()))
        .collect();
    Ok(DelayExpr {
        base: beta.latency.clone(),
        max_terms,
    })
}

/// Vertical deviation `(α ⊘ β)(0) = b + r·D`.
pub fn vdev(alpha: &TokenBucket, beta: &PseudoAffineCurve) -> Result<AffineExpr, MinPlusError> {
    Ok(tb_deconvolve(alpha, beta)?.burst)
}
