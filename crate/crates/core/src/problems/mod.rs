//! Deterministic multi-realization test problems.

mod field;
mod proxy;
mod sphere;

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use field::{generate_field, FieldParams, RealizationField};
pub use proxy::{npv_proxy, Economics, NpvProxy, ProxyParams, WellLayout};
pub use sphere::ShiftedSphere;

/// An objective with one deterministic value per `(point, realization)`.
pub trait Problem: Sync {
    fn dimension(&self) -> usize;

    fn n_realizations(&self) -> usize;

    /// Simulates `x` on the one-based realization `realization_id`.
    fn evaluate(&self, x: &[f64], realization_id: u32) -> Result<f64>;

    /// Suggested initial mean.
    fn default_start(&self) -> Vec<f64>;

    /// Suggested initial step size.
    fn default_sigma(&self) -> f64;

    /// Mean over all realizations in realization order, computed exactly as
    /// [`aggregate_mean`](crate::estimators::aggregate_mean) does.
    fn ensemble_mean(&self, x: &[f64]) -> Result<f64> {
        let values = (1..=self.n_realizations() as u32)
            .map(|id| self.evaluate(x, id))
            .collect::<Result<Vec<f64>>>()?;
        crate::estimators::aggregate_mean(&values)
    }
}

/// Axis-aligned feasible box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// `||x - proj(x)||^2`
    pub fn violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| {
                let d = v - v.clamp(*lo, *hi);
                d * d
            })
            .sum()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// Everything needed to rebuild a problem bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    ShiftedSphere {
        dimension: usize,
        n_realizations: usize,
        shift_scale: f64,
        seed: u64,
    },
    NpvProxy(ProxyParams),
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::ShiftedSphere { .. } => "shifted_sphere",
            ProblemSpec::NpvProxy(_) => "npv_proxy",
        }
    }

    pub fn n_realizations(&self) -> usize {
        match self {
            ProblemSpec::ShiftedSphere { n_realizations, .. } => *n_realizations,
            ProblemSpec::NpvProxy(p) => p.n_realizations,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ProblemSpec::ShiftedSphere { dimension, .. } => *dimension,
            ProblemSpec::NpvProxy(p) => p.layout.dimension(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Problem + Send>> {
        Ok(match self {
            ProblemSpec::ShiftedSphere {
                dimension,
                n_realizations,
                shift_scale,
                seed,
            } => Box::new(ShiftedSphere::new(
                *dimension,
                *n_realizations,
                *shift_scale,
                *seed,
            )?),
            ProblemSpec::NpvProxy(p) => Box::new(NpvProxy::new(p.clone())?),
        })
    }
}

pub(crate) fn check_realization(id: u32, n_r: usize) -> Result<usize> {
    if id == 0 || id as usize > n_r {
        return Err(Error::Simulation(alloc::format!(
            "realization {id} outside 1..={n_r}"
        )));
    }
    Ok(id as usize - 1)
}
