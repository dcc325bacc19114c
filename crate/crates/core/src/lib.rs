//! Tail behaviour of the maximum of a random walk reflected at a general
//! barrier.
//!
//! The walk `S_n` with i.i.d. increments of negative mean is reflected at a
//! nonpositive barrier `g`: `W_n = max(W_{n-1} + X_n, g(n))`. This crate
//! computes the adjustment coefficient `theta*`, decides whether
//! `M = sup_n W_n` is finite, estimates `P(M > u)` by importance sampling,
//! naive simulation and exact lattice dynamic programming, evaluates the
//! asymptotic constant `E*[exp(theta* D)] E*[exp(-theta* B)]`, and applies the
//! machinery to loop-penalized RNA stack scoring.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`.

// negated comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod barrier;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod mc;
pub mod model;
pub mod rna;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
pub use mc::McConfig;
pub use rng::{RandomStream, StreamFamily};
pub use scalar::Real;

pub type IncrementModel = model::IncrementModel<f64>;
pub type TiltedModel = model::TiltedModel<f64>;
pub type Barrier = barrier::Barrier<f64>;
pub type FinitenessVerdict = barrier::FinitenessVerdict<f64>;
pub type Trajectory = walk::Trajectory<f64>;
pub type PassageRecord = walk::PassageRecord<f64>;
pub type TailEstimate = estimators::TailEstimate<f64>;
pub type DDistribution = estimators::DDistribution<f64>;
pub type LadderSummary = asymptotics::LadderSummary<f64>;
pub type TailConstants = asymptotics::TailConstants<f64>;
pub type ScoreFunction = rna::ScoreFunction<f64>;
pub type PenaltyFunction = rna::PenaltyFunction<f64>;
pub type ScanResult = rna::ScanResult<f64>;
pub type SignificanceReport = rna::SignificanceReport<f64>;

/// `f32` instantiations.
pub mod f32 {
    pub type IncrementModel = crate::model::IncrementModel<f32>;
    pub type TiltedModel = crate::model::TiltedModel<f32>;
    pub type Barrier = crate::barrier::Barrier<f32>;
    pub type Trajectory = crate::walk::Trajectory<f32>;
    pub type TailEstimate = crate::estimators::TailEstimate<f32>;
    pub type ScoreFunction = crate::rna::ScoreFunction<f32>;
    pub type PenaltyFunction = crate::rna::PenaltyFunction<f32>;
}
