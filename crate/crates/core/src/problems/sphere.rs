use alloc::vec::Vec;

use rand::Rng;

use super::{check_realization, Problem};
use crate::error::{invalid, Error, Result};
use crate::seed::{self, tag};

/// `f(x, i) = -||x - o_i||^2` with shifts `o_i` uniform in `[-s, s]^n`.
///
/// The ensemble mean is `-||x - o_bar||^2 - v_bar`, where `o_bar` is the shift
/// centroid and `v_bar` the mean squared spread of the shifts, so the ensemble
/// optimum is `o_bar` with value `-v_bar`.
#[derive(Debug, Clone)]
pub struct ShiftedSphere {
    shifts: Vec<Vec<f64>>,
    centroid: Vec<f64>,
    spread: f64,
}

impl ShiftedSphere {
    pub fn new(n: usize, n_realizations: usize, shift_scale: f64, seed: u64) -> Result<Self> {
        if n == 0 || n_realizations == 0 {
            return Err(invalid("shifted sphere needs n >= 1 and N_r >= 1"));
        }
        if !(shift_scale >= 0.0) || !shift_scale.is_finite() {
            return Err(invalid("shift scale must be non-negative"));
        }
        let mut rng = seed::stream(seed, &[tag::SHIFTS]);
        let shifts: Vec<Vec<f64>> = (0..n_realizations)
            .map(|_| {
                (0..n)
                    .map(|_| shift_scale * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect()
            })
            .collect();
        Ok(Self::from_shifts(shifts))
    }

    pub fn from_shifts(shifts: Vec<Vec<f64>>) -> Self {
        let n = shifts[0].len();
        let n_r = shifts.len() as f64;
        let centroid: Vec<f64> = (0..n)
            .map(|k| shifts.iter().map(|o| o[k]).sum::<f64>() / n_r)
            .collect();
        let spread = shifts.iter().map(|o| sq_dist(o, &centroid)).sum::<f64>() / n_r;
        ShiftedSphere {
            shifts,
            centroid,
            spread,
        }
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    /// The ensemble optimum `o_bar`.
    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    /// `v_bar`; the ensemble optimum value is `-v_bar`.
    pub fn mean_spread(&self) -> f64 {
        self.spread
    }

    pub fn optimum_value(&self) -> f64 {
        -self.spread
    }

    /// Closed-form ensemble mean `-||x - o_bar||^2 - v_bar`.
    pub fn closed_form_mean(&self, x: &[f64]) -> f64 {
        -sq_dist(x, &self.centroid) - self.spread
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Problem for ShiftedSphere {
    fn dimension(&self) -> usize {
        self.centroid.len()
    }

    fn n_realizations(&self) -> usize {
        self.shifts.len()
    }

    fn evaluate(&self, x: &[f64], realization_id: u32) -> Result<f64> {
        let idx = check_realization(realization_id, self.shifts.len())?;
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(-sq_dist(x, &self.shifts[idx]))
    }

    fn default_start(&self) -> Vec<f64> {
        alloc::vec![3.0; self.dimension()]
    }

    fn default_sigma(&self) -> f64 {
        2.0
    }
}
