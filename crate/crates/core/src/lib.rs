//! Delay bounds for flows in feedforward FIFO networks.
//!
//! The analysis (LUDB-FF) turns the network seen by a flow of interest into
//! a min-plus term over pseudo-affine curves with free θ parameters and
//! minimizes the resulting delay bound with an exact rational LP. Flow
//! prolongation rewrites the network before the analysis; the alternatives
//! to try come from [`prolong`].

pub mod ludb;
pub mod lp;
pub mod minplus;
pub mod netmodel;
pub mod prolong;
pub mod sim;

pub type Rational = num_rational::BigRational;

/// `n/d` as a [`Rational`].
///
/// # Panics
/// If `d` is zero.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
