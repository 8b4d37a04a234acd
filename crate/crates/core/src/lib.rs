//! CMA-ES for objectives defined over an ensemble of realizations, with
//! neighborhood-based estimation that reuses archived simulations instead of
//! simulating every candidate on every realization.
//!
//! - [`optimizer`]: ask/tell CMA-ES and the Mahalanobis metric of its covariance.
//! - [`archive`]: the database of performed simulations and radius-bounded
//!   neighbor retrieval.
//! - [`estimators`]: aggregators and the mean-of-samples, one-realization and
//!   neighborhood strategies.
//! - [`problems`]: shifted-sphere ensembles and a well-placement NPV proxy over
//!   Gaussian random fields.
//! - [`harness`]: budgeted campaigns with verification and strategy comparison.
//!
//! The crate is `no_std` and needs only `alloc`.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod archive;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod optimizer;
pub mod problems;
pub mod seed;

pub use archive::{Archive, EvaluationRecord, NeighborSet};
pub use error::{Error, Result};
pub use estimators::{EstimateResult, EstimatorConfig, Strategy};
pub use harness::{run_campaign, RunConfig, RunTrace, VerificationPolicy};
pub use optimizer::{DesignPoint, DistanceScaling, MahalanobisMetric, OptimizerState};
pub use problems::{Problem, ProblemSpec};
