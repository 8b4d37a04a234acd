//! Generation-based CMA-ES with an ask/tell interface.
//!
//! Sampling follows `x_i = m + sigma * B * D * z_i` with `C = B D^2 B^T` and
//! `z_i ~ N(0, I)`. The update cycle is the standard one of Hansen and
//! Ostermeier with positive recombination weights over the `mu = lambda / 2`
//! best points:
//!
//! ```text
//! w'_i   = ln((lambda + 1) / 2) - ln(i),  w_i = w'_i / sum(w')     i = 1..mu
//! mu_eff = 1 / sum(w_i^2)
//! c_s    = (mu_eff + 2) / (n + mu_eff + 5)
//! d_s    = 1 + 2 max(0, sqrt((mu_eff - 1) / (n + 1)) - 1) + c_s
//! c_c    = (4 + mu_eff / n) / (n + 4 + 2 mu_eff / n)
//! c_1    = 2 / ((n + 1.3)^2 + mu_eff)
//! c_mu   = min(1 - c_1, 2 (mu_eff - 2 + 1 / mu_eff) / ((n + 2)^2 + mu_eff))
//! chi_n  = sqrt(n) (1 - 1 / (4n) + 1 / (21 n^2))
//!
//! y_w    = sum_i w_i (x_{i:lambda} - m) / sigma
//! m     <- m + sigma y_w
//! p_s   <- (1 - c_s) p_s + sqrt(c_s (2 - c_s) mu_eff) C^{-1/2} y_w
//! h_s    = |p_s| / sqrt(1 - (1 - c_s)^{2(g+1)}) < (1.4 + 2 / (n + 1)) chi_n
//! p_c   <- (1 - c_c) p_c + h_s sqrt(c_c (2 - c_c) mu_eff) y_w
//! C     <- (1 - c_1 - c_mu) C + c_1 (p_c p_c^T + (1 - h_s) c_c (2 - c_c) C)
//!          + c_mu sum_i w_i y_i y_i^T
//! sigma <- sigma exp((c_s / d_s) (|p_s| / chi_n - 1))
//! ```
//!
//! The eigendecomposition is refreshed after every `tell`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Lower bound applied to the step size after each update.
pub const MIN_SIGMA: f64 = 1e-300;
/// Largest covariance condition number accepted by [`OptimizerState::metric`].
pub const MAX_CONDITION: f64 = 1e14;
/// Relative eigenvalue floor used when inverting the covariance.
pub const EIGEN_FLOOR: f64 = 1e-20;

/// A candidate solution in the problem's parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint(Vec<f64>);

impl DesignPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(bad));
        }
        Ok(DesignPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DesignPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Which matrix the Mahalanobis distance is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceScaling {
    /// The covariance matrix `C` alone.
    #[default]
    Covariance,
    /// The sampling covariance `sigma^2 C`.
    ScaledCovariance,
}

/// Strategy constants derived from the dimension and the population size.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl StrategyParams {
    pub fn defaults(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| libm::log((lambda as f64 + 1.0) / 2.0) - libm::log(i as f64))
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma =
            1.0 + 2.0 * f64::max(0.0, libm::sqrt((mu_eff - 1.0) / (nf + 1.0)) - 1.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3) * (nf + 1.3) + mu_eff);
        let c_mu = f64::min(
            1.0 - c_1,
            2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0) * (nf + 2.0) + mu_eff),
        );
        let chi_n = libm::sqrt(nf) * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        StrategyParams {
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

#[derive(Debug, Clone)]
struct Eigen {
    /// Columns are orthonormal eigenvectors of `C`.
    basis: DMatrix<f64>,
    values: Vec<f64>,
}

impl Eigen {
    fn of(cov: &DMatrix<f64>) -> Option<Self> {
        if cov.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let n = cov.nrows();
        let eig = SymmetricEigen::try_new(cov.clone(), f64::EPSILON, 100 * n * n + 100)?;
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return None;
        }
        Some(Eigen {
            basis: eig.eigenvectors,
            values,
        })
    }

    fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// CMA-ES distribution state plus its private sampling stream.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    dim: usize,
    lambda: usize,
    mean: Vec<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: Vec<f64>,
    path_c: Vec<f64>,
    generation: u64,
    params: StrategyParams,
    rng: ChaCha8Rng,
    distance_scaling: DistanceScaling,
    eigen: Option<Eigen>,
}

impl OptimizerState {
    /// Creates a state with identity covariance, zero evolution paths and the
    /// default strategy constants for `(n, lambda)`.
    pub fn new(n: usize, m0: &[f64], sigma0: f64, lambda: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if m0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m0.len(),
            });
        }
        if let Some(&bad) = m0.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(bad));
        }
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(invalid("initial step size must be positive and finite"));
        }
        if lambda < 2 {
            return Err(invalid("population size must be at least 2"));
        }
        let cov = DMatrix::identity(n, n);
        let eigen = Eigen::of(&cov);
        Ok(OptimizerState {
            dim: n,
            lambda,
            mean: m0.to_vec(),
            sigma: sigma0,
            cov,
            path_sigma: vec![0.0; n],
            path_c: vec![0.0; n],
            generation: 0,
            params: StrategyParams::defaults(n, lambda),
            rng: ChaCha8Rng::seed_from_u64(seed),
            distance_scaling: DistanceScaling::Covariance,
            eigen,
        })
    }

    pub fn with_distance_scaling(mut self, scaling: DistanceScaling) -> Self {
        self.distance_scaling = scaling;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn population_size(&self) -> usize {
        self.lambda
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }

    pub fn distance_scaling(&self) -> DistanceScaling {
        self.distance_scaling
    }

    /// Covariance entry `C[i][j]`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }

    /// Eigenvalues of the current covariance, if the last decomposition succeeded.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigen.as_ref().map(|e| e.values.as_slice())
    }

    /// Replaces the covariance, e.g. to start from an anisotropic prior.
    /// The matrix is given row-major and must be symmetric positive definite.
    pub fn set_covariance(&mut self, row_major: &[f64]) -> Result<()> {
        let n = self.dim;
        if row_major.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: row_major.len(),
            });
        }
        let cov = DMatrix::from_row_slice(n, n, row_major);
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (cov[(i, j)], cov[(j, i)]);
                if (a - b).abs() > 1e-12 * f64::max(1.0, a.abs()) {
                    return Err(invalid("covariance must be symmetric"));
                }
            }
        }
        let eigen = Eigen::of(&cov).ok_or(Error::DegenerateCovariance)?;
        self.cov = cov;
        self.eigen = Some(eigen);
        Ok(())
    }

    /// Sets the step size directly. Values below [`MIN_SIGMA`] are clamped.
    pub fn set_sigma(&mut self, sigma: f64) -> Result<()> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("step size must be non-negative and finite"));
        }
        self.sigma = sigma.max(MIN_SIGMA);
        Ok(())
    }

    /// Samples `lambda` candidates from `N(m, sigma^2 C)`.
    pub fn ask(&mut self) -> Result<Vec<DesignPoint>> {
        let eigen = self.eigen.as_ref().ok_or(Error::DegenerateCovariance)?;
        let n = self.dim;
        let scales: Vec<f64> = eigen.values.iter().map(|v| libm::sqrt(*v)).collect();
        let mut population = Vec::with_capacity(self.lambda);
        let mut z = vec![0.0; n];
        for _ in 0..self.lambda {
            for (zk, dk) in z.iter_mut().zip(&scales) {
                let draw: f64 = StandardNormal.sample(&mut self.rng);
                *zk = draw * dk;
            }
            let coords: Vec<f64> = (0..n)
                .map(|i| {
                    let step: f64 = (0..n).map(|k| eigen.basis[(i, k)] * z[k]).sum();
                    self.mean[i] + self.sigma * step
                })
                .collect();
            population.push(DesignPoint::new(coords)?);
        }
        Ok(population)
    }

    /// Updates the distribution from the fitnesses of the last sampled population.
    ///
    /// Ranking is a stable sort on fitness (descending when `maximize`), so equal
    /// fitnesses keep their sampling order.
    pub fn tell(&mut self, points: &[DesignPoint], fitness: &[f64], maximize: bool) -> Result<()> {
        let n = self.dim;
        if points.len() != self.lambda {
            return Err(Error::DimensionMismatch {
                expected: self.lambda,
                found: points.len(),
            });
        }
        if fitness.len() != self.lambda {
            return Err(Error::DimensionMismatch {
                expected: self.lambda,
                found: fitness.len(),
            });
        }
        if let Some(&bad) = fitness.iter().find(|f| !f.is_finite()) {
            return Err(Error::NonFiniteValue(bad));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        let eigen = self.eigen.as_ref().ok_or(Error::DegenerateCovariance)?;

        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| {
            let ord = fitness[a].partial_cmp(&fitness[b]).expect("finite fitness");
            if maximize {
                ord.reverse()
            } else {
                ord
            }
        });

        let p = &self.params;
        let selected: Vec<Vec<f64>> = order[..p.mu]
            .iter()
            .map(|&idx| {
                points[idx]
                    .iter()
                    .zip(&self.mean)
                    .map(|(x, m)| (x - m) / self.sigma)
                    .collect()
            })
            .collect();
        let mut y_w = vec![0.0; n];
        for (w, y) in p.weights.iter().zip(&selected) {
            for (acc, yi) in y_w.iter_mut().zip(y) {
                *acc += w * yi;
            }
        }

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let projected: Vec<f64> = (0..n)
            .map(|k| {
                let dot: f64 = (0..n).map(|i| eigen.basis[(i, k)] * y_w[i]).sum();
                dot / libm::sqrt(eigen.values[k])
            })
            .collect();
        let whitened: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| eigen.basis[(i, k)] * projected[k]).sum())
            .collect();

        for (m, y) in self.mean.iter_mut().zip(&y_w) {
            *m += self.sigma * y;
        }

        let cs_norm = libm::sqrt(p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff);
        for (ps, wy) in self.path_sigma.iter_mut().zip(&whitened) {
            *ps = (1.0 - p.c_sigma) * *ps + cs_norm * wy;
        }
        let ps_norm = libm::sqrt(self.path_sigma.iter().map(|v| v * v).sum::<f64>());
        let decay = libm::pow(1.0 - p.c_sigma, 2.0 * (self.generation as f64 + 1.0));
        let h_sigma = ps_norm / libm::sqrt(1.0 - decay) / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };

        let cc_norm = libm::sqrt(p.c_c * (2.0 - p.c_c) * p.mu_eff);
        for (pc, y) in self.path_c.iter_mut().zip(&y_w) {
            *pc = (1.0 - p.c_c) * *pc + h * cc_norm * y;
        }

        let keep = 1.0 - p.c_1 - p.c_mu + p.c_1 * (1.0 - h) * p.c_c * (2.0 - p.c_c);
        for i in 0..n {
            for j in i..n {
                let rank_mu: f64 = p
                    .weights
                    .iter()
                    .zip(&selected)
                    .map(|(w, y)| w * y[i] * y[j])
                    .sum();
                let v = keep * self.cov[(i, j)]
                    + p.c_1 * self.path_c[i] * self.path_c[j]
                    + p.c_mu * rank_mu;
                self.cov[(i, j)] = v;
                self.cov[(j, i)] = v;
            }
        }

        self.sigma *= libm::exp((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0));
        self.sigma = self.sigma.max(MIN_SIGMA);
        self.generation += 1;
        self.eigen = Eigen::of(&self.cov);
        Ok(())
    }

    /// Snapshot of the distance function for the current covariance.
    ///
    /// Fails when the condition number of `C` exceeds [`MAX_CONDITION`].
    pub fn metric(&self) -> Result<MahalanobisMetric> {
        let eigen = self.eigen.as_ref().ok_or(Error::DegenerateCovariance)?;
        let (lo, hi) = eigen.min_max();
        let condition = hi / lo;
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        let scale = match self.distance_scaling {
            DistanceScaling::Covariance => 1.0,
            DistanceScaling::ScaledCovariance => self.sigma * self.sigma,
        };
        let floor = EIGEN_FLOOR * hi;
        let n = self.dim;
        let mut transform = vec![0.0; n * n];
        for (k, v) in eigen.values.iter().enumerate() {
            let inv_scale = 1.0 / libm::sqrt(v.max(floor) * scale);
            for i in 0..n {
                transform[k * n + i] = eigen.basis[(i, k)] * inv_scale;
            }
        }
        Ok(MahalanobisMetric { dim: n, transform })
    }

    /// `sqrt((z1 - z2)^T C^{-1} (z1 - z2))` under the current covariance.
    pub fn mahalanobis(&self, z1: &[f64], z2: &[f64]) -> Result<f64> {
        for z in [z1, z2] {
            if z.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: z.len(),
                });
            }
        }
        Ok(self.metric()?.distance(z1, z2))
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            dimension: self.dim,
            population_size: self.lambda,
            generation: self.generation,
            sigma: self.sigma,
            mean: self.mean.clone(),
            covariance: (0..self.dim * self.dim)
                .map(|k| self.cov[(k / self.dim, k % self.dim)])
                .collect(),
            path_sigma: self.path_sigma.clone(),
            path_c: self.path_c.clone(),
            params: self.params.clone(),
            distance_scaling: self.distance_scaling,
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    /// Rebuilds a state from a snapshot. The eigendecomposition is recomputed,
    /// which is deterministic, so a restored state continues bit-identically.
    pub fn from_snapshot(s: StateSnapshot) -> Result<Self> {
        let n = s.dimension;
        if n == 0 || s.population_size < 2 {
            return Err(invalid("snapshot has invalid dimension or population size"));
        }
        for (name, len, want) in [
            ("mean", s.mean.len(), n),
            ("covariance", s.covariance.len(), n * n),
            ("path_sigma", s.path_sigma.len(), n),
            ("path_c", s.path_c.len(), n),
            ("weights", s.params.weights.len(), s.params.mu),
        ] {
            if len != want {
                return Err(invalid(alloc::format!(
                    "snapshot field {name} has length {len}, expected {want}"
                )));
            }
        }
        if !(s.sigma > 0.0) {
            return Err(invalid("snapshot step size must be positive"));
        }
        let cov = DMatrix::from_row_slice(n, n, &s.covariance);
        let eigen = Eigen::of(&cov);
        let mut rng = ChaCha8Rng::from_seed(s.rng_seed);
        rng.set_stream(s.rng_stream);
        rng.set_word_pos(s.rng_word_pos);
        Ok(OptimizerState {
            dim: n,
            lambda: s.population_size,
            mean: s.mean,
            sigma: s.sigma,
            cov,
            path_sigma: s.path_sigma,
            path_c: s.path_c,
            generation: s.generation,
            params: s.params,
            rng,
            distance_scaling: s.distance_scaling,
            eigen,
        })
    }
}

/// Mahalanobis distance frozen at one covariance, evaluated as the Euclidean
/// distance between whitened points `W x` with `W = D^{-1} B^T` (times `1 / sigma`
/// under [`DistanceScaling::ScaledCovariance`]).
#[derive(Debug, Clone)]
pub struct MahalanobisMetric {
    dim: usize,
    /// Row-major `W`.
    transform: Vec<f64>,
}

impl MahalanobisMetric {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Appends `W x` to `out`.
    pub fn whiten_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let n = self.dim;
        out.extend((0..n).map(|k| self.whitened_coord(k, x)));
    }

    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        self.whiten_into(x, &mut out);
        out
    }

    #[inline]
    fn whitened_coord(&self, k: usize, x: &[f64]) -> f64 {
        let row = &self.transform[k * self.dim..(k + 1) * self.dim];
        row.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Bit-identical to [`whitened_distance`] on the whitened points, and
    /// exactly symmetric in its arguments.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let acc: f64 = (0..self.dim)
            .map(|k| {
                let d = self.whitened_coord(k, a) - self.whitened_coord(k, b);
                d * d
            })
            .sum();
        libm::sqrt(acc)
    }
}

/// Euclidean distance between two points already mapped by [`MahalanobisMetric::whiten`].
#[inline]
pub fn whitened_distance(a: &[f64], b: &[f64]) -> f64 {
    let acc: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    libm::sqrt(acc)
}

/// Plain-data image of an [`OptimizerState`], for checkpointing.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub dimension: usize,
    pub population_size: usize,
    pub generation: u64,
    pub sigma: f64,
    pub mean: Vec<f64>,
    /// Row-major `n * n`.
    pub covariance: Vec<f64>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub params: StrategyParams,
    pub distance_scaling: DistanceScaling,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}
