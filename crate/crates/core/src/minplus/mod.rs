//! Min-plus algebra on token buckets and pseudo-affine service curves.
//!
//! [`curve`] holds the symbolic closed forms used to build LP terms,
//! [`exact`] evaluates the FIFO left-over curve for concrete θ values
//! anywhere (also outside the region where the closed form holds), and
//! [`sampled`] is a brute-force evaluator on sampled curves used to check
//! both.

pub mod affine;
pub mod curve;
pub mod exact;
pub mod sampled;

use thiserror::Error;

use crate::Rational;

pub use affine::{AffineExpr, Assignment, ThetaId};
pub use curve::{
    fifo_leftover, hdev, pa_convolve, pa_convolve_all, tb_aggregate, tb_deconvolve, vdev,
    ConstraintSet, DelayExpr, PseudoAffineCurve, Stage, TokenBucket,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MinPlusError {
    #[error("cannot aggregate an empty set of arrival curves")]
    EmptyAggregate,
    #[error("unstable: arrival rate {arrival_rate} against service rate {service_rate}")]
    Unstable {
        arrival_rate: Rational,
        service_rate: Rational,
    },
    #[error("domain error: {0}")]
    Domain(String),
}
