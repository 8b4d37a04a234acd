use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::seed::{self, tag};

/// Grid and log-normal parameters of a synthetic permeability field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldParams {
    pub nx: usize,
    pub ny: usize,
    /// Meters per cell side.
    pub cell_size: f64,
    /// Standard deviation of the smoothing kernel, in cells.
    pub correlation_cells: f64,
    pub log_mean: f64,
    pub log_std: f64,
}

impl Default for FieldParams {
    /// 38 x 56 cells of 90 m (a 3420 m x 5040 m extent), correlation length
    /// 12 cells (1080 m), median permeability 100 mD.
    fn default() -> Self {
        FieldParams {
            nx: 38,
            ny: 56,
            cell_size: 90.0,
            correlation_cells: 12.0,
            log_mean: libm::log(100.0),
            log_std: 1.0,
        }
    }
}

impl FieldParams {
    pub fn extent(&self) -> (f64, f64) {
        (
            self.nx as f64 * self.cell_size,
            self.ny as f64 * self.cell_size,
        )
    }
}

/// One realization of a positive property field (millidarcy), row-major in y.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationField {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    pub realization_id: u32,
    pub values: Vec<f64>,
}

impl RealizationField {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Bilinear interpolation between cell centers; positions outside the
    /// grid are clamped to the outermost centers.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (i0, i1, tx) = axis(x / self.cell_size - 0.5, self.nx);
        let (j0, j1, ty) = axis(y / self.cell_size - 0.5, self.ny);
        let bottom = self.at(i0, j0) * (1.0 - tx) + self.at(i1, j0) * tx;
        let top = self.at(i0, j1) * (1.0 - tx) + self.at(i1, j1) * tx;
        bottom * (1.0 - ty) + top * ty
    }
}

fn axis(f: f64, n: usize) -> (usize, usize, f64) {
    let f = f.clamp(0.0, (n - 1) as f64);
    let i0 = libm::floor(f) as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, f - i0 as f64)
}

/// White Gaussian noise smoothed by a Gaussian kernel (std `correlation_cells`,
/// truncated at three standard deviations, scaled to unit output variance),
/// then mapped through `exp(log_mean + log_std * g)`.
///
/// Noise is drawn on a grid padded by the kernel radius so every output cell
/// sees a full kernel. Deterministic per `(seed, realization_id)`.
pub fn generate_field(
    params: &FieldParams,
    seed: u64,
    realization_id: u32,
) -> Result<RealizationField> {
    let FieldParams {
        nx,
        ny,
        cell_size,
        correlation_cells: corr,
        log_mean,
        log_std,
    } = *params;
    if nx == 0 || ny == 0 {
        return Err(invalid("field grid must be non-empty"));
    }
    if !(corr >= 1.0) {
        return Err(invalid("correlation length must be at least one cell"));
    }
    if !(cell_size > 0.0) {
        return Err(invalid("cell size must be positive"));
    }

    let cutoff = 3.0 * corr;
    let radius = libm::ceil(cutoff) as usize;
    let width = 2 * radius + 1;
    let mut kernel = vec![0.0; width * width];
    for dy in 0..width {
        for dx in 0..width {
            let (ox, oy) = (dx as f64 - radius as f64, dy as f64 - radius as f64);
            let r2 = ox * ox + oy * oy;
            if r2 <= cutoff * cutoff {
                kernel[dy * width + dx] = libm::exp(-r2 / (2.0 * corr * corr));
            }
        }
    }
    let norm = libm::sqrt(kernel.iter().map(|w| w * w).sum::<f64>());
    kernel.iter_mut().for_each(|w| *w /= norm);

    let (px, py) = (nx + 2 * radius, ny + 2 * radius);
    let mut rng = seed::stream(seed, &[tag::FIELD, realization_id as u64]);
    let noise: Vec<f64> = (0..px * py)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();

    let mut values = vec![0.0; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let mut g = 0.0;
            for dy in 0..width {
                let row = (iy + dy) * px + ix;
                let krow = dy * width;
                for dx in 0..width {
                    g += kernel[krow + dx] * noise[row + dx];
                }
            }
            values[iy * nx + ix] = libm::exp(log_mean + log_std * g);
        }
    }
    Ok(RealizationField {
        nx,
        ny,
        cell_size,
        realization_id,
        values,
    })
}
