//! Min-plus terms built by the analysis.
//!
//! A term is a DAG of service and arrival nodes. It compiles to a
//! pseudo-affine curve with θ constraints for the LP, or evaluates to a
//! θ-free curve at a concrete assignment, with the exact left-over
//! semantics also outside the LP region.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::minplus::exact::{deconvolve_burst, leftover_at};
use crate::minplus::{
    fifo_leftover, pa_convolve_all, tb_aggregate, tb_deconvolve, Assignment, ConstraintSet, MinPlusError,
    PseudoAffineCurve, ThetaId, TokenBucket,
};

#[derive(Debug)]
pub enum Service {
    Server { label: String, curve: PseudoAffineCurve },
    Convolve(Vec<Rc<Service>>),
    Leftover { service: Rc<Service>, cross: Rc<Arrival>, theta: ThetaId },
}

#[derive(Debug)]
pub enum Arrival {
    Source { label: String, curve: TokenBucket },
    Sum(Vec<Rc<Arrival>>),
    /// `arrival ⊘ service`
    Output { arrival: Rc<Arrival>, service: Rc<Service> },
    /// A bound computed beforehand, e.g. by a separate LP.
    Fixed { label: String, curve: TokenBucket },
}

fn key<T>(rc: &Rc<T>) -> usize {
    Rc::as_ptr(rc) as usize
}

/// θ ids of every left-over node reachable from `service`.
pub fn thetas(service: &Rc<Service>) -> BTreeSet<ThetaId> {
    let mut seen = BTreeSet::new();
    let mut out = BTreeSet::new();
    collect_service(service, &mut seen, &mut out);
    out
}

pub fn arrival_thetas(arrival: &Rc<Arrival>) -> BTreeSet<ThetaId> {
    let mut seen = BTreeSet::new();
    let mut out = BTreeSet::new();
    collect_arrival(arrival, &mut seen, &mut out);
    out
}

fn collect_service(s: &Rc<Service>, seen: &mut BTreeSet<usize>, out: &mut BTreeSet<ThetaId>) {
    if !seen.insert(key(s)) {
        return;
    }
    match &**s {
        Service::Server { .. } => {}
        Service::Convolve(parts) => parts.iter().for_each(|p| collect_service(p, seen, out)),
        Service::Leftover { service, cross, theta } => {
            out.insert(*theta);
            collect_service(service, seen, out);
            collect_arrival(cross, seen, out);
        }
    }
}

fn collect_arrival(a: &Rc<Arrival>, seen: &mut BTreeSet<usize>, out: &mut BTreeSet<ThetaId>) {
    if !seen.insert(key(a)) {
        return;
    }
    match &**a {
        Arrival::Source { .. } | Arrival::Fixed { .. } => {}
        Arrival::Sum(parts) => parts.iter().for_each(|p| collect_arrival(p, seen, out)),
        Arrival::Output { arrival, service } => {
            collect_arrival(arrival, seen, out);
            collect_service(service, seen, out);
        }
    }
}

/// Number of distinct nodes, a rough size measure.
pub fn node_count(service: &Rc<Service>) -> usize {
    fn s(x: &Rc<Service>, seen: &mut BTreeSet<usize>) {
        if !seen.insert(key(x)) {
            return;
        }
        match &**x {
            Service::Server { .. } => {}
            Service::Convolve(p) => p.iter().for_each(|y| s(y, seen)),
            Service::Leftover { service, cross, .. } => {
                s(service, seen);
                a(cross, seen);
            }
        }
    }
    fn a(x: &Rc<Arrival>, seen: &mut BTreeSet<usize>) {
        if !seen.insert(key(x)) {
            return;
        }
        match &**x {
            Arrival::Source { .. } | Arrival::Fixed { .. } => {}
            Arrival::Sum(p) => p.iter().for_each(|y| a(y, seen)),
            Arrival::Output { arrival, service } => {
                a(arrival, seen);
                s(service, seen);
            }
        }
    }
    let mut seen = BTreeSet::new();
    s(service, &mut seen);
    seen.len()
}

/// Symbolic compilation with shared sub-terms compiled once.
#[derive(Default)]
pub struct Compiler {
    services: HashMap<usize, PseudoAffineCurve>,
    arrivals: HashMap<usize, TokenBucket>,
    pub constraints: ConstraintSet,
}

impl Compiler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn service(&mut self, s: &Rc<Service>) -> Result<PseudoAffineCurve, MinPlusError> {
        if let Some(c) = self.services.get(&key(s)) {
            return Ok(c.clone());
        }
        let curve = match &**s {
            Service::Server { curve, .. } => curve.clone(),
            Service::Convolve(parts) => {
                let curves = parts
                    .iter()
                    .map(|p| self.service(p))
                    .collect::<Result<Vec<_>, _>>()?;
                pa_convolve_all(&curves).expect("convolution of at least one curve")
            }
            Service::Leftover { service, cross, theta } => {
                let beta = self.service(service)?;
                let alpha = self.arrival(cross)?;
                let (lo, cons) = fifo_leftover(&beta, &alpha, *theta)?;
                self.constraints.extend(&cons);
                lo
            }
        };
        self.services.insert(key(s), curve.clone());
        Ok(curve)
    }

    pub fn arrival(&mut self, a: &Rc<Arrival>) -> Result<TokenBucket, MinPlusError> {
        if let Some(c) = self.arrivals.get(&key(a)) {
            return Ok(c.clone());
        }
        let curve = match &**a {
            Arrival::Source { curve, .. } | Arrival::Fixed { curve, .. } => curve.clone(),
            Arrival::Sum(parts) => {
                let tbs = parts
                    .iter()
                    .map(|p| self.arrival(p))
                    .collect::<Result<Vec<_>, _>>()?;
                tb_aggregate(&tbs)?
            }
            Arrival::Output { arrival, service } => {
                let alpha = self.arrival(arrival)?;
                let beta = self.service(service)?;
                tb_deconvolve(&alpha, &beta)?
            }
        };
        self.arrivals.insert(key(a), curve.clone());
        Ok(curve)
    }
}

/// Numeric evaluation at a full θ assignment.
pub struct Evaluator<'a> {
    assignment: &'a Assignment,
    services: HashMap<usize, PseudoAffineCurve>,
    arrivals: HashMap<usize, TokenBucket>,
}

impl<'a> Evaluator<'a> {
    pub fn new(assignment: &'a Assignment) -> Self {
        Evaluator {
            assignment,
            services: HashMap::new(),
            arrivals: HashMap::new(),
        }
    }

    pub fn service(&mut self, s: &Rc<Service>) -> Result<PseudoAffineCurve, MinPlusError> {
        if let Some(c) = self.services.get(&key(s)) {
            return Ok(c.clone());
        }
        let curve = match &**s {
            Service::Server { curve, .. } => curve.clone(),
            Service::Convolve(parts) => {
                let curves = parts
                    .iter()
                    .map(|p| self.service(p))
                    .collect::<Result<Vec<_>, _>>()?;
                pa_convolve_all(&curves).expect("convolution of at least one curve")
            }
            Service::Leftover { service, cross, theta } => {
                let beta = self.service(service)?;
                let alpha = self.arrival(cross)?;
                let th = self
                    .assignment
                    .get(theta)
                    .ok_or_else(|| MinPlusError::Domain(format!("{theta} unassigned")))?;
                leftover_at(&beta, &alpha, th)?
            }
        };
        self.services.insert(key(s), curve.clone());
        Ok(curve)
    }

    pub fn arrival(&mut self, a: &Rc<Arrival>) -> Result<TokenBucket, MinPlusError> {
        if let Some(c) = self.arrivals.get(&key(a)) {
            return Ok(c.clone());
        }
        let curve = match &**a {
            Arrival::Source { curve, .. } | Arrival::Fixed { curve, .. } => curve.clone(),
            Arrival::Sum(parts) => {
                let tbs = parts
                    .iter()
                    .map(|p| self.arrival(p))
                    .collect::<Result<Vec<_>, _>>()?;
                tb_aggregate(&tbs)?
            }
            Arrival::Output { arrival, service } => {
                let alpha = self.arrival(arrival)?;
                let beta = self.service(service)?;
                let b = deconvolve_burst(&alpha, &beta)?;
                TokenBucket::new(alpha.rate.clone(), b)
            }
        };
        self.arrivals.insert(key(a), curve.clone());
        Ok(curve)
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Service::Server { label, .. } => write!(f, "β{label}"),
            Service::Convolve(parts) => {
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ⊗ ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Service::Leftover { service, cross, theta } => write!(f, "({service} ⊖{theta} {cross})"),
        }
    }
}

impl fmt::Display for Arrival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arrival::Source { label, .. } => write!(f, "α{label}"),
            Arrival::Fixed { label, curve } => write!(f, "α{label}[{}]", curve.burst),
            Arrival::Sum(parts) => {
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Arrival::Output { arrival, service } => write!(f, "({arrival} ⊘ {service})"),
        }
    }
}
