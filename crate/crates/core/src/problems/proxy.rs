use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{check_realization, generate_field, Bounds, FieldParams, Problem, RealizationField};
use crate::error::{invalid, Error, Result};

/// How a design vector encodes the injector/producer pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WellLayout {
    /// `(inj_x, inj_y, prod_x, prod_y)`.
    Vertical,
    /// Two straight wells, each `(heel_x, heel_y, heel_z, toe_x, toe_y, toe_z)`.
    /// Depth only enters through the box; the field is read along the
    /// vertical projection of each segment.
    Segments { thickness: f64 },
}

impl WellLayout {
    pub fn dimension(&self) -> usize {
        match self {
            WellLayout::Vertical => 4,
            WellLayout::Segments { .. } => 12,
        }
    }

    fn well_len(&self) -> usize {
        self.dimension() / 2
    }

    /// Per-well box: planar extent, plus `[0, thickness]` for depth coordinates.
    fn well_bounds(&self, extent: (f64, f64)) -> Bounds {
        match *self {
            WellLayout::Vertical => Bounds {
                lower: alloc::vec![0.0, 0.0],
                upper: alloc::vec![extent.0, extent.1],
            },
            WellLayout::Segments { thickness } => Bounds {
                lower: alloc::vec![0.0; 6],
                upper: alloc::vec![extent.0, extent.1, thickness, extent.0, extent.1, thickness],
            },
        }
    }
}

/// Static economics of the proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct Economics {
    /// Currency per millidarcy of path permeability at the reference spacing.
    pub price: f64,
    /// Well spacing (m) at which the production term peaks.
    pub reference_spacing: f64,
    pub well_cost: f64,
    /// Currency per squared meter of box violation.
    pub penalty: f64,
    /// Field samples along each path.
    pub path_samples: usize,
}

impl Default for Economics {
    fn default() -> Self {
        Economics {
            price: 8.0e7,
            reference_spacing: 1500.0,
            well_cost: 5.0e8,
            penalty: 1.0e6,
            path_samples: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyParams {
    pub layout: WellLayout,
    pub field: FieldParams,
    pub n_realizations: usize,
    pub economics: Economics,
    pub seed: u64,
}

impl Default for ProxyParams {
    fn default() -> Self {
        ProxyParams {
            layout: WellLayout::Vertical,
            field: FieldParams::default(),
            n_realizations: 20,
            economics: Economics::default(),
            seed: 0,
        }
    }
}

/// Synthetic well-placement NPV over an ensemble of property fields.
#[derive(Debug, Clone)]
pub struct NpvProxy {
    params: ProxyParams,
    fields: Vec<RealizationField>,
    bounds: Bounds,
}

impl NpvProxy {
    pub fn new(params: ProxyParams) -> Result<Self> {
        if params.n_realizations == 0 {
            return Err(invalid("proxy needs at least one realization"));
        }
        if params.economics.path_samples < 2 {
            return Err(invalid("path needs at least two samples"));
        }
        let fields = (1..=params.n_realizations as u32)
            .map(|id| generate_field(&params.field, params.seed, id))
            .collect::<Result<Vec<_>>>()?;
        let well = params.layout.well_bounds(params.field.extent());
        let bounds = Bounds {
            lower: [well.lower.as_slice(), well.lower.as_slice()].concat(),
            upper: [well.upper.as_slice(), well.upper.as_slice()].concat(),
        };
        Ok(NpvProxy {
            params,
            fields,
            bounds,
        })
    }

    pub fn params(&self) -> &ProxyParams {
        &self.params
    }

    pub fn fields(&self) -> &[RealizationField] {
        &self.fields
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

impl Problem for NpvProxy {
    fn dimension(&self) -> usize {
        self.params.layout.dimension()
    }

    fn n_realizations(&self) -> usize {
        self.fields.len()
    }

    fn evaluate(&self, x: &[f64], realization_id: u32) -> Result<f64> {
        let idx = check_realization(realization_id, self.fields.len())?;
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(npv_proxy(
            x,
            &self.fields[idx],
            &self.params.economics,
            self.params.layout,
        ))
    }

    fn default_start(&self) -> Vec<f64> {
        self.bounds.center()
    }

    fn default_sigma(&self) -> f64 {
        let (ex, ey) = self.params.field.extent();
        0.3 * ex.min(ey)
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

struct PathSum {
    inverse_total: f64,
    count: usize,
}

impl PathSum {
    fn add_segment(&mut self, field: &RealizationField, a: (f64, f64), b: (f64, f64), m: usize) {
        for j in 0..m {
            let t = j as f64 / (m - 1) as f64;
            let k = field.sample(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            self.inverse_total += 1.0 / k;
        }
        self.count += m;
    }

    fn harmonic_mean(&self) -> f64 {
        self.count as f64 / self.inverse_total
    }
}

/// NPV of one well pair on one realization:
///
/// `price * k_path * (D / D0) * exp(1 - D / D0) - 2 * well_cost - penalty * ||x - proj(x)||^2`
///
/// `D` is the planar injector-producer spacing (between segment midpoints for
/// segment wells) and `k_path` the harmonic mean of the field sampled at
/// equispaced points on the connecting segment, plus along each projected
/// well segment. Wells are put in a canonical order first, so swapping
/// injector and producer leaves the value bit-identical.
pub fn npv_proxy(
    x: &[f64],
    field: &RealizationField,
    economics: &Economics,
    layout: WellLayout,
) -> f64 {
    let extent = (
        field.nx as f64 * field.cell_size,
        field.ny as f64 * field.cell_size,
    );
    let well_bounds = layout.well_bounds(extent);
    let len = layout.well_len();
    let (first, second) = x.split_at(len);
    let (a, b) = if lexicographic(first, second).is_le() {
        (first, second)
    } else {
        (second, first)
    };
    let violation = well_bounds.violation(a) + well_bounds.violation(b);
    let (pa, pb) = (well_bounds.project(a), well_bounds.project(b));

    let m = economics.path_samples;
    let mut path = PathSum {
        inverse_total: 0.0,
        count: 0,
    };
    let (ca, cb) = match layout {
        WellLayout::Vertical => ((pa[0], pa[1]), (pb[0], pb[1])),
        WellLayout::Segments { .. } => {
            let mid = |w: &[f64]| (0.5 * (w[0] + w[3]), 0.5 * (w[1] + w[4]));
            path.add_segment(field, (pa[0], pa[1]), (pa[3], pa[4]), m);
            path.add_segment(field, (pb[0], pb[1]), (pb[3], pb[4]), m);
            (mid(&pa), mid(&pb))
        }
    };
    path.add_segment(field, ca, cb, m);

    let (dx, dy) = (cb.0 - ca.0, cb.1 - ca.1);
    let ratio = libm::sqrt(dx * dx + dy * dy) / economics.reference_spacing;
    let production = economics.price * path.harmonic_mean() * ratio * libm::exp(1.0 - ratio);
    production - 2.0 * economics.well_cost - economics.penalty * violation
}
