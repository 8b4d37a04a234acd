//! Estimated-objective strategies: how a candidate's fitness is built from
//! fresh simulations and, optionally, archived neighbors.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::archive::{Archive, EvaluationRecord};
use crate::error::{invalid, Error, Result};
use crate::problems::Problem;

/// Arithmetic mean, accumulated as offsets from the first value so that a
/// constant list returns exactly that constant.
pub fn aggregate_mean(values: &[f64]) -> Result<f64> {
    let Some(&anchor) = values.first() else {
        return Err(invalid("cannot aggregate an empty list"));
    };
    let mut offset = 0.0;
    for v in values {
        offset += v - anchor;
    }
    Ok(anchor + offset / values.len() as f64)
}

/// `mean + r * sigma` with the population standard deviation (divisor `N`).
pub fn aggregate_risk(values: &[f64], risk_factor: f64) -> Result<f64> {
    let mean = aggregate_mean(values)?;
    if risk_factor == 0.0 {
        return Ok(mean);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    Ok(mean + risk_factor * libm::sqrt(var))
}

/// Empirical quantile of ascending `sorted` values, interpolating linearly
/// between order statistics at one-based position `1 + p (N - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// `w10 q(0.1) + w50 q(0.5) + w90 q(0.9)`. `(0, 1, 0)` is risk neutral.
pub fn aggregate_percentile(values: &[f64], weights: PercentileWeights) -> Result<f64> {
    if values.len() < 2 {
        return Err(invalid("percentile aggregation needs at least two values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(weights.p10 * quantile(&sorted, 0.1)
        + weights.p50 * quantile(&sorted, 0.5)
        + weights.p90 * quantile(&sorted, 0.9))
}

/// Neighbor weight `(1 - (d / d_max)^2)^2`, zero beyond `d_max`.
pub fn neighbor_weight(distance: f64, d_max: f64) -> f64 {
    if distance >= d_max {
        return 0.0;
    }
    let u = distance / d_max;
    let s = 1.0 - u * u;
    s * s
}

/// Weighted average of fresh values (weight 1 each) and neighbor values
/// (weight [`neighbor_weight`]), with the weighted population standard
/// deviation around it.
pub fn weighted_estimate(
    fresh: &[f64],
    neighbors: &[(f64, f64)],
    d_max: f64,
) -> Result<(f64, f64)> {
    if fresh.is_empty() {
        return Err(invalid("at least one fresh simulation is required"));
    }
    let anchor = fresh[0];
    let mut offset = 0.0;
    let mut weights = fresh.len() as f64;
    for v in fresh {
        offset += v - anchor;
    }
    let neighbor_terms: Vec<(f64, f64)> = neighbors
        .iter()
        .map(|&(v, d)| (v, neighbor_weight(d, d_max)))
        .collect();
    for (v, w) in &neighbor_terms {
        offset += w * (v - anchor);
        weights += w;
    }
    let mean = anchor + offset / weights;
    let mut spread = fresh.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    for (v, w) in &neighbor_terms {
        spread += w * (v - mean) * (v - mean);
    }
    Ok((mean, libm::sqrt(spread / weights)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileWeights {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl PercentileWeights {
    pub const NEUTRAL: PercentileWeights = PercentileWeights {
        p10: 0.0,
        p50: 1.0,
        p90: 0.0,
    };
}

/// How the mean-of-samples strategy folds its `N_r` values into one fitness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Mean,
    Risk,
    Percentile,
}

/// Candidate evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every candidate is simulated on all realizations.
    MeanOfSamples,
    /// One simulation on a uniformly drawn realization.
    OneRealization,
    /// Few fresh simulations plus weighted archived neighbors.
    Neighborhood,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MeanOfSamples => "mean_of_samples",
            Strategy::OneRealization => "one_realization",
            Strategy::Neighborhood => "neighborhood",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean_of_samples" => Some(Strategy::MeanOfSamples),
            "one_realization" => Some(Strategy::OneRealization),
            "neighborhood" => Some(Strategy::Neighborhood),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub n_realizations: usize,
    /// Archive size below which only fresh simulations are used.
    pub bootstrap_threshold: u64,
    pub bootstrap_samples: usize,
    pub main_samples: usize,
    pub max_neighbors: usize,
    pub selection_distance: f64,
    pub risk_factor: f64,
    pub percentile_weights: PercentileWeights,
    /// Adds `risk_factor * sigma_E` to the neighborhood estimate.
    pub use_std_term: bool,
    pub aggregator: Aggregator,
}

impl EstimatorConfig {
    /// `N_n,max = N_sim = 2 N_r`, `N_s1 = N_s2 = 1`.
    pub fn typical(n_realizations: usize, selection_distance: f64) -> Self {
        EstimatorConfig {
            n_realizations,
            bootstrap_threshold: 2 * n_realizations as u64,
            bootstrap_samples: 1,
            main_samples: 1,
            max_neighbors: 2 * n_realizations,
            selection_distance,
            risk_factor: 0.0,
            percentile_weights: PercentileWeights::NEUTRAL,
            use_std_term: false,
            aggregator: Aggregator::Mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n_r = self.n_realizations;
        if n_r == 0 {
            return Err(invalid("N_r must be at least 1"));
        }
        if self.bootstrap_threshold == 0 {
            return Err(invalid("N_sim must be at least 1"));
        }
        if self.bootstrap_samples == 0 || self.bootstrap_samples > n_r {
            return Err(invalid("N_s1 must lie in [1, N_r]"));
        }
        if self.main_samples == 0 || self.main_samples > n_r {
            return Err(invalid("N_s2 must lie in [1, N_r]"));
        }
        if self.max_neighbors == 0 {
            return Err(invalid("N_n,max must be at least 1"));
        }
        if !(self.selection_distance > 0.0) || !self.selection_distance.is_finite() {
            return Err(invalid("d_max must be positive"));
        }
        if !self.risk_factor.is_finite() {
            return Err(invalid("risk factor must be finite"));
        }
        if self.aggregator == Aggregator::Percentile && n_r < 2 {
            return Err(invalid("percentile aggregation needs N_r >= 2"));
        }
        Ok(())
    }
}

/// Outcome of estimating one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimate: f64,
    pub fresh_simulations: usize,
    pub neighbors_used: usize,
    pub std_estimate: Option<f64>,
}

/// An estimate together with the simulations it performed, not yet archived.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub result: EstimateResult,
    /// `(realization_id, value)` in simulation order.
    pub fresh: Vec<(u32, f64)>,
}

impl Evaluation {
    /// Archives the fresh simulations of `point`.
    pub fn commit(
        self,
        archive: &mut Archive,
        point: &[f64],
        generation: u64,
    ) -> Result<EstimateResult> {
        for &(id, value) in &self.fresh {
            archive.insert(point, id, value, generation)?;
        }
        Ok(self.result)
    }
}

fn simulate(problem: &dyn Problem, point: &[f64], ids: &[u32]) -> Result<Vec<(u32, f64)>> {
    ids.iter()
        .map(|&id| {
            let v = problem.evaluate(point, id)?;
            if !v.is_finite() {
                return Err(Error::Simulation(alloc::format!(
                    "non-finite value {v} on realization {id}"
                )));
            }
            Ok((id, v))
        })
        .collect()
}

fn draw_distinct<R: Rng + ?Sized>(rng: &mut R, n_r: usize, k: usize) -> Vec<u32> {
    index::sample(rng, n_r, k)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect()
}

fn check_problem(problem: &dyn Problem, config: &EstimatorConfig) -> Result<()> {
    config.validate()?;
    if problem.n_realizations() != config.n_realizations {
        return Err(Error::DimensionMismatch {
            expected: config.n_realizations,
            found: problem.n_realizations(),
        });
    }
    Ok(())
}

/// Simulates on every realization and aggregates (mean by default).
pub fn evaluate_mean_of_samples(
    point: &[f64],
    problem: &dyn Problem,
    config: &EstimatorConfig,
) -> Result<Evaluation> {
    check_problem(problem, config)?;
    let ids: Vec<u32> = (1..=config.n_realizations as u32).collect();
    let fresh = simulate(problem, point, &ids)?;
    let values: Vec<f64> = fresh.iter().map(|f| f.1).collect();
    let estimate = match config.aggregator {
        Aggregator::Mean => aggregate_mean(&values)?,
        Aggregator::Risk => aggregate_risk(&values, config.risk_factor)?,
        Aggregator::Percentile => aggregate_percentile(&values, config.percentile_weights)?,
    };
    Ok(Evaluation {
        result: EstimateResult {
            estimate,
            fresh_simulations: fresh.len(),
            neighbors_used: 0,
            std_estimate: None,
        },
        fresh,
    })
}

/// One simulation on a realization drawn uniformly from `1..=N_r`.
pub fn evaluate_one_realization<R: Rng + ?Sized>(
    point: &[f64],
    problem: &dyn Problem,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<Evaluation> {
    check_problem(problem, config)?;
    let id = rng.gen_range(1..=config.n_realizations as u32);
    let fresh = simulate(problem, point, &[id])?;
    Ok(Evaluation {
        result: EstimateResult {
            estimate: fresh[0].1,
            fresh_simulations: 1,
            neighbors_used: 0,
            std_estimate: None,
        },
        fresh,
    })
}

/// Two-phase neighborhood estimate.
///
/// While the archive holds fewer than `N_sim` simulations, the estimate is the
/// mean of `N_s1` fresh simulations on distinct random realizations. After
/// that, `N_s2` fresh simulations are combined with at most `N_n,max` archived
/// records within `d_max` under `distance`, each weighted by
/// [`neighbor_weight`]. `distance_to` gives the distance from `point` to an
/// archived record. The archive is read before this point's own simulations
/// are inserted.
pub fn evaluate_neighborhood<R, F>(
    point: &[f64],
    problem: &dyn Problem,
    archive: &Archive,
    config: &EstimatorConfig,
    distance_to: F,
    rng: &mut R,
) -> Result<Evaluation>
where
    R: Rng + ?Sized,
    F: FnMut(&EvaluationRecord) -> f64,
{
    check_problem(problem, config)?;
    let bootstrap = archive.count_simulations() < config.bootstrap_threshold;
    let samples = if bootstrap {
        config.bootstrap_samples
    } else {
        config.main_samples
    };
    let ids = draw_distinct(rng, config.n_realizations, samples);
    let fresh = simulate(problem, point, &ids)?;
    let values: Vec<f64> = fresh.iter().map(|f| f.1).collect();

    if bootstrap {
        return Ok(Evaluation {
            result: EstimateResult {
                estimate: aggregate_mean(&values)?,
                fresh_simulations: fresh.len(),
                neighbors_used: 0,
                std_estimate: None,
            },
            fresh,
        });
    }

    let neighbors =
        archive.nearest_by(distance_to, config.selection_distance, config.max_neighbors)?;
    let pairs: Vec<(f64, f64)> = neighbors
        .entries
        .iter()
        .map(|(r, d)| (r.value, *d))
        .collect();
    let (mean, std) = weighted_estimate(&values, &pairs, config.selection_distance)?;
    let (estimate, std_estimate) = if config.use_std_term {
        (mean + config.risk_factor * std, Some(std))
    } else {
        (mean, None)
    };
    Ok(Evaluation {
        result: EstimateResult {
            estimate,
            fresh_simulations: fresh.len(),
            neighbors_used: pairs.len(),
            std_estimate,
        },
        fresh,
    })
}

/// [`evaluate_mean_of_samples`] followed by archiving.
pub fn estimate_mean_of_samples(
    point: &[f64],
    problem: &dyn Problem,
    archive: &mut Archive,
    config: &EstimatorConfig,
    generation: u64,
) -> Result<EstimateResult> {
    evaluate_mean_of_samples(point, problem, config)?.commit(archive, point, generation)
}

/// [`evaluate_one_realization`] followed by archiving.
pub fn estimate_one_realization<R: Rng + ?Sized>(
    point: &[f64],
    problem: &dyn Problem,
    archive: &mut Archive,
    config: &EstimatorConfig,
    generation: u64,
    rng: &mut R,
) -> Result<EstimateResult> {
    evaluate_one_realization(point, problem, config, rng)?.commit(archive, point, generation)
}

/// [`evaluate_neighborhood`] under a point-to-point distance, followed by
/// archiving (insert after estimate).
pub fn estimate_neighborhood<R, F>(
    point: &[f64],
    problem: &dyn Problem,
    archive: &mut Archive,
    config: &EstimatorConfig,
    mut distance: F,
    generation: u64,
    rng: &mut R,
) -> Result<EstimateResult>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &[f64]) -> f64,
{
    evaluate_neighborhood(
        point,
        problem,
        archive,
        config,
        |r| distance(point, &r.point),
        rng,
    )?
    .commit(archive, point, generation)
}
