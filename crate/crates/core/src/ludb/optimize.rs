//! θ optimization of built terms: one exact LP over the constrained region,
//! exact evaluation at concrete θ, and grid searches over the full θ range.

use std::collections::BTreeSet;
use std::rc::Rc;

use num_traits::{One, Zero};

use super::budget::Budget;
use super::term::{self, Arrival, Compiler, Evaluator, Service};
use super::AnalysisError;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::minplus::exact::{deconvolve_burst, hdev_value};
use crate::minplus::{hdev, vdev, AffineExpr, Assignment, MinPlusError, ThetaId};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Delay of the arrival through the service.
    Delay,
    /// Burst of the output arrival curve.
    Output,
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub value: Rational,
    pub assignment: Assignment,
    /// Output burst of the arrival at `assignment`.
    pub output_burst: Rational,
    /// False when the LP failed and a grid search produced the value.
    pub from_lp: bool,
}

/// Grid for [`theta_grid_refine`]: `points` values per θ on `[0, range]`.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub points: usize,
    /// Upper end of every θ range; derived from the term when `None`.
    pub range: Option<Rational>,
}

impl GridSpec {
    pub fn uniform(points: usize) -> Self {
        GridSpec { points, range: None }
    }
}

fn all_thetas(service: &Rc<Service>, arrival: &Rc<Arrival>) -> Vec<ThetaId> {
    let mut t: BTreeSet<ThetaId> = term::thetas(service);
    t.extend(term::arrival_thetas(arrival));
    t.into_iter().collect()
}

/// The LP minimizing `objective` over the region where the compiled term is
/// exact. `z` must not occur in the term; it is the epigraph variable of the
/// delay's max.
pub fn program(
    service: &Rc<Service>,
    arrival: &Rc<Arrival>,
    objective: Objective,
    z: ThetaId,
) -> Result<LinearProgram, MinPlusError> {
    let mut c = Compiler::new();
    let beta = c.service(service)?;
    let alpha = c.arrival(arrival)?;
    let mut lp = match objective {
        Objective::Delay => {
            let d = hdev(&alpha, &beta)?;
            let zx = AffineExpr::theta(z);
            let mut lp = LinearProgram::new(&d.base + &zx);
            for m in &d.max_terms {
                lp.add_constraint(&zx - m);
            }
            lp
        }
        Objective::Output => LinearProgram::new(vdev(&alpha, &beta)?),
    };
    for con in c.constraints.iter() {
        lp.add_constraint(con.clone());
    }
    Ok(lp)
}

/// Whether `assignment` lies in the region where the compiled term is exact.
pub fn in_domain(service: &Rc<Service>, arrival: &Rc<Arrival>, assignment: &Assignment) -> Result<bool, MinPlusError> {
    let mut c = Compiler::new();
    c.service(service)?;
    c.arrival(arrival)?;
    Ok(c.constraints.is_satisfied_by(assignment))
}

/// Exact value of `objective` at a concrete θ assignment, including θ
/// outside the LP region.
pub fn evaluate(
    service: &Rc<Service>,
    arrival: &Rc<Arrival>,
    objective: Objective,
    assignment: &Assignment,
) -> Result<Rational, MinPlusError> {
    let mut ev = Evaluator::new(assignment);
    let beta = ev.service(service)?;
    let alpha = ev.arrival(arrival)?;
    match objective {
        Objective::Delay => hdev_value(&alpha, &beta),
        Objective::Output => deconvolve_burst(&alpha, &beta),
    }
}

fn optimize(
    service: &Rc<Service>,
    arrival: &Rc<Arrival>,
    objective: Objective,
    z: ThetaId,
    budget: &Budget,
) -> Result<Optimum, AnalysisError> {
    budget.check()?;
    let thetas = all_thetas(service, arrival);
    let finish = |value: Rational, assignment: Assignment, from_lp: bool| -> Result<Optimum, AnalysisError> {
        let output_burst = match objective {
            Objective::Output => value.clone(),
            Objective::Delay => evaluate(service, arrival, Objective::Output, &assignment)?,
        };
        Ok(Optimum {
            value,
            assignment,
            output_burst,
            from_lp,
        })
    };
    if thetas.is_empty() {
        let v = evaluate(service, arrival, objective, &Assignment::new())?;
        return finish(v, Assignment::new(), true);
    }
    let lp = program(service, arrival, objective, z)?;
    let sol = lp::solve(&lp);
    budget.check()?;
    if sol.status == LpStatus::Optimal {
        let mut asg: Assignment = thetas.iter().map(|t| (*t, Rational::zero())).collect();
        for (k, v) in sol.assignment {
            if k != z {
                asg.insert(k, v);
            }
        }
        let exact = evaluate(service, arrival, objective, &asg)?;
        let value = if exact < sol.value { exact } else { sol.value };
        return finish(value, asg, true);
    }
    let hi = default_range(service, arrival);
    let ranges = vec![(Rational::zero(), hi); thetas.len()];
    let (value, asg) = grid_search(&thetas, &ranges, budget, |a| evaluate(service, arrival, objective, a))?;
    finish(value, asg, false)
}

/// Minimal delay bound of `arrival` through `service`.
pub fn optimize_delay(
    service: &Rc<Service>,
    arrival: &Rc<Arrival>,
    z: ThetaId,
    budget: &Budget,
) -> Result<Optimum, AnalysisError> {
    optimize(service, arrival, Objective::Delay, z, budget)
}

/// Minimal output burst of `arrival` after `service`.
pub fn optimize_output(
    service: &Rc<Service>,
    arrival: &Rc<Arrival>,
    z: ThetaId,
    budget: &Budget,
) -> Result<Optimum, AnalysisError> {
    optimize(service, arrival, Objective::Output, z, budget)
}

/// `Σ latencies + 10 · Σ bursts / min rate` over the servers and sources of
/// a term; large enough to cover every useful θ.
pub fn default_range(service: &Rc<Service>, arrival: &Rc<Arrival>) -> Rational {
    #[derive(Default)]
    struct Acc {
        seen: BTreeSet<usize>,
        latency: Rational,
        burst: Rational,
        min_rate: Option<Rational>,
    }
    fn svc(s: &Rc<Service>, acc: &mut Acc) {
        if !acc.seen.insert(Rc::as_ptr(s) as *const u8 as usize) {
            return;
        }
        match &**s {
            Service::Server { curve, .. } => {
                acc.latency += curve.latency.constant_part();
                let r = curve.min_rate().clone();
                if acc.min_rate.as_ref().map_or(true, |m| r < *m) {
                    acc.min_rate = Some(r);
                }
            }
            Service::Convolve(parts) => parts.iter().for_each(|p| svc(p, acc)),
            Service::Leftover { service, cross, .. } => {
                svc(service, acc);
                arr(cross, acc);
            }
        }
    }
    fn arr(a: &Rc<Arrival>, acc: &mut Acc) {
        if !acc.seen.insert(Rc::as_ptr(a) as *const u8 as usize) {
            return;
        }
        match &**a {
            Arrival::Source { curve, .. } | Arrival::Fixed { curve, .. } => {
                acc.burst += curve.burst.constant_part();
            }
            Arrival::Sum(parts) => parts.iter().for_each(|p| arr(p, acc)),
            Arrival::Output { arrival, service } => {
                arr(arrival, acc);
                svc(service, acc);
            }
        }
    }
    let mut acc = Acc::default();
    svc(service, &mut acc);
    arr(arrival, &mut acc);
    let rate = acc.min_rate.unwrap_or_else(Rational::one);
    let hi = acc.latency + Rational::from_integer(10.into()) * acc.burst / rate;
    if hi.is_zero() {
        Rational::one()
    } else {
        hi
    }
}

const GRID_POINTS: i64 = 32;
const ZOOM_ROUNDS: usize = 3;

/// Coordinate-wise search with exact evaluation: 32 steps per θ, then the
/// range shrinks to three steps around the best point, three times over.
/// Points where `f` fails are skipped.
pub fn grid_search(
    thetas: &[ThetaId],
    ranges: &[(Rational, Rational)],
    budget: &Budget,
    mut f: impl FnMut(&Assignment) -> Result<Rational, MinPlusError>,
) -> Result<(Rational, Assignment), AnalysisError> {
    let mut ranges = ranges.to_vec();
    let mut cur: Assignment = thetas.iter().zip(&ranges).map(|(t, (lo, _))| (*t, lo.clone())).collect();
    let mut best = f(&cur).ok();
    for _ in 0..=ZOOM_ROUNDS {
        for (i, t) in thetas.iter().enumerate() {
            let (lo, hi) = ranges[i].clone();
            let step = (&hi - &lo) / Rational::from_integer(GRID_POINTS.into());
            for k in 0..=GRID_POINTS {
                budget.check()?;
                let mut cand = cur.clone();
                cand.insert(*t, &lo + &step * Rational::from_integer(k.into()));
                if let Ok(v) = f(&cand) {
                    if best.as_ref().map_or(true, |b| v < *b) {
                        best = Some(v);
                        cur = cand;
                    }
                }
            }
            let three = &step * Rational::from_integer(3.into());
            let c = &cur[t];
            let nlo = c - &three;
            ranges[i] = (if nlo < lo { lo } else { nlo }, if c + &three > hi { hi } else { c + &three });
        }
    }
    let value = best.ok_or_else(|| MinPlusError::Domain("no grid point could be evaluated".into()))?;
    Ok((value, cur))
}

const FULL_GRID_LIMIT: usize = 4096;

/// Exact delay bound minimized over a θ grid that also contains the LP
/// optimum's coordinates; returns the smaller of that and the LP value.
pub fn theta_grid_refine(
    service: &Rc<Service>,
    arrival: &Rc<Arrival>,
    spec: &GridSpec,
    lp_optimum: &Optimum,
    budget: &Budget,
) -> Result<Rational, AnalysisError> {
    let thetas = all_thetas(service, arrival);
    if thetas.is_empty() {
        return Ok(lp_optimum.value.clone());
    }
    let hi = spec.range.clone().unwrap_or_else(|| default_range(service, arrival));
    let points = spec.points.max(2);
    let axes: Vec<Vec<Rational>> = thetas
        .iter()
        .map(|t| {
            let mut axis: Vec<Rational> = (0..points)
                .map(|k| &hi * Rational::new((k as i64).into(), ((points - 1) as i64).into()))
                .collect();
            if let Some(v) = lp_optimum.assignment.get(t) {
                axis.push(v.clone());
            }
            axis.sort();
            axis.dedup();
            axis
        })
        .collect();
    let mut best = lp_optimum.value.clone();
    let eval = |asg: &Assignment, best: &mut Rational| -> Result<(), AnalysisError> {
        budget.check()?;
        if let Ok(v) = evaluate(service, arrival, Objective::Delay, asg) {
            if v < *best {
                *best = v;
            }
        }
        Ok(())
    };
    let total = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
    if total.is_some_and(|n| n <= FULL_GRID_LIMIT) {
        let mut idx = vec![0usize; thetas.len()];
        loop {
            let asg: Assignment = thetas
                .iter()
                .zip(&idx)
                .enumerate()
                .map(|(i, (t, k))| (*t, axes[i][*k].clone()))
                .collect();
            eval(&asg, &mut best)?;
            let mut d = 0;
            while d < idx.len() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == idx.len() {
                break;
            }
        }
    } else {
        let mut cur = lp_optimum.assignment.clone();
        for (i, t) in thetas.iter().enumerate() {
            let mut local: Option<(Rational, Rational)> = None;
            for v in &axes[i] {
                let mut cand = cur.clone();
                cand.insert(*t, v.clone());
                budget.check()?;
                if let Ok(x) = evaluate(service, arrival, Objective::Delay, &cand) {
                    if local.as_ref().map_or(true, |(b, _)| x < *b) {
                        local = Some((x, v.clone()));
                    }
                }
            }
            if let Some((x, v)) = local {
                cur.insert(*t, v);
                if x < best {
                    best = x;
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minplus::{PseudoAffineCurve, TokenBucket};
    use crate::rat;

    fn server(r: i64, t: Rational) -> Rc<Service> {
        Rc::new(Service::Server {
            label: "s".into(),
            curve: PseudoAffineCurve::rate_latency(rat(r, 1), t),
        })
    }

    fn source(r: i64, b: i64) -> Rc<Arrival> {
        Rc::new(Arrival::Source {
            label: "f".into(),
            curve: TokenBucket::new(rat(r, 1), rat(b, 1)),
        })
    }

    #[test]
    fn no_theta_is_plain_hdev() {
        let opt = optimize_delay(&server(40, rat(2, 1)), &source(10, 10), ThetaId(0), &Budget::unlimited()).unwrap();
        assert_eq!(opt.value, rat(9, 4));
        assert_eq!(opt.output_burst, rat(30, 1));
    }

    #[test]
    fn single_leftover_optimum() {
        // (β_{40,1} ⊖θ γ_{10,2}) against γ_{5,1}: θ* = 1 + 1/40
        let term = Rc::new(Service::Leftover {
            service: server(40, rat(1, 1)),
            cross: source(10, 2),
            theta: ThetaId(0),
        });
        let foi = source(5, 1);
        let budget = Budget::unlimited();
        let opt = optimize_delay(&term, &foi, ThetaId(1), &budget).unwrap();
        assert!(opt.from_lp);
        assert_eq!(opt.value, rat(1, 1) + rat(3, 40));
        let refined = theta_grid_refine(&term, &foi, &GridSpec::uniform(50), &opt, &budget).unwrap();
        assert_eq!(refined, opt.value);
        let at = evaluate(&term, &foi, Objective::Delay, &opt.assignment).unwrap();
        assert_eq!(at, opt.value);
    }

    #[test]
    fn grid_search_finds_a_valid_bound() {
        let term = Rc::new(Service::Leftover {
            service: server(40, rat(1, 1)),
            cross: source(10, 2),
            theta: ThetaId(0),
        });
        let foi = source(5, 1);
        let (v, _) = grid_search(
            &[ThetaId(0)],
            &[(rat(0, 1), rat(10, 1))],
            &Budget::unlimited(),
            |a| evaluate(&term, &foi, Objective::Delay, a),
        )
        .unwrap();
        let lp = optimize_delay(&term, &foi, ThetaId(1), &Budget::unlimited()).unwrap();
        assert!(v >= lp.value);
        assert!(v - &lp.value < rat(1, 100));
    }

    #[test]
    fn program_text_lists_constraints() {
        let term = Rc::new(Service::Leftover {
            service: server(40, rat(1, 1)),
            cross: source(10, 2),
            theta: ThetaId(0),
        });
        let lp = program(&term, &source(5, 1), Objective::Delay, ThetaId(1)).unwrap();
        let text = lp.to_text();
        assert!(text.starts_with("minimize"));
        assert!(text.contains("t0 >= 0"));
    }
}
