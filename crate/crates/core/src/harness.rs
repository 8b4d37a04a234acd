//! Optimization campaigns: CMA-ES driven by an estimated objective, with
//! verification of promising points on the full ensemble and simulation
//! accounting.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::archive::Archive;
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    aggregate_mean, evaluate_mean_of_samples, evaluate_neighborhood, evaluate_one_realization,
    Aggregator, EstimatorConfig, Evaluation, Strategy,
};
use crate::optimizer::{
    whitened_distance, DesignPoint, DistanceScaling, MahalanobisMetric, OptimizerState,
};
use crate::problems::{Problem, ProblemSpec};
use crate::seed::{self, tag};

struct WhitenedArchive {
    metric: MahalanobisMetric,
    coords: Vec<f64>,
}

impl WhitenedArchive {
    fn build(metric: MahalanobisMetric, archive: &Archive) -> Self {
        let mut coords = Vec::with_capacity(archive.len() * metric.dimension());
        for (k, r) in archive.records().iter().enumerate() {
            debug_assert_eq!(r.record_id, k as u64);
            metric.whiten_into(&r.point, &mut coords);
        }
        WhitenedArchive { metric, coords }
    }

    fn extend(&mut self, point: &[f64], copies: usize) {
        let n = self.metric.dimension();
        let start = self.coords.len();
        self.metric.whiten_into(point, &mut self.coords);
        for _ in 1..copies {
            self.coords.extend_from_within(start..start + n);
        }
    }

    fn point(&self, record_id: u64) -> &[f64] {
        let n = self.metric.dimension();
        let k = record_id as usize * n;
        &self.coords[k..k + n]
    }
}

/// Which candidates are evaluated on all realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerificationPolicy {
    /// The generation's best estimate, when it strictly beats every earlier estimate.
    #[default]
    OnNewBest,
    /// The generation's best estimate, every generation.
    EveryGeneration,
}

impl VerificationPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            VerificationPolicy::OnNewBest => "on_new_best",
            VerificationPolicy::EveryGeneration => "every_generation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "on_new_best" => Some(VerificationPolicy::OnNewBest),
            "every_generation" => Some(VerificationPolicy::EveryGeneration),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub strategy: Strategy,
    pub estimator: EstimatorConfig,
    pub lambda: usize,
    /// Defaults to the problem's suggested start.
    pub m0: Option<Vec<f64>>,
    /// Defaults to the problem's suggested step size.
    pub sigma0: Option<f64>,
    pub budget_simulations: u64,
    pub n_runs: usize,
    pub master_seed: u64,
    pub verification: VerificationPolicy,
    pub distance_scaling: DistanceScaling,
    /// Whether points estimated earlier in a generation are visible as
    /// neighbors to later points of the same generation.
    pub intra_generation_visibility: bool,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, strategy: Strategy, selection_distance: f64) -> Self {
        let n_r = problem.n_realizations();
        RunConfig {
            problem,
            strategy,
            estimator: EstimatorConfig::typical(n_r, selection_distance),
            lambda: 40,
            m0: None,
            sigma0: None,
            budget_simulations: 10_000,
            n_runs: 1,
            master_seed: 0,
            verification: VerificationPolicy::OnNewBest,
            distance_scaling: DistanceScaling::Covariance,
            intra_generation_visibility: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        let n_r = self.problem.n_realizations();
        if self.estimator.n_realizations != n_r {
            return Err(invalid("estimator N_r differs from the problem's"));
        }
        if self.budget_simulations < n_r as u64 {
            return Err(invalid(
                "budget must cover at least one verification (N_r simulations)",
            ));
        }
        if self.lambda < 2 {
            return Err(invalid("lambda must be at least 2"));
        }
        if self.n_runs == 0 {
            return Err(invalid("at least one run is required"));
        }
        if let Some(m0) = &self.m0 {
            if m0.len() != self.problem.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: self.problem.dimension(),
                    found: m0.len(),
                });
            }
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0) {
                return Err(invalid("sigma0 must be positive"));
            }
        }
        Ok(())
    }

    /// Short name used to group runs in summaries.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Neighborhood => {
                alloc::format!("neighborhood@{}", self.estimator.selection_distance)
            }
            s => s.name().to_string(),
        }
    }

    /// Verification value is the estimate itself: no extra simulations.
    fn estimate_is_true_objective(&self) -> bool {
        self.strategy == Strategy::MeanOfSamples && self.estimator.aggregator == Aggregator::Mean
    }
}

/// One row per completed generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: usize,
    pub generation: u64,
    pub cumulative_estimation_sims: u64,
    pub cumulative_verification_sims: u64,
    pub best_estimate: f64,
    pub best_verified: Option<f64>,
    pub sigma: f64,
    pub neighbors_used_mean: f64,
}

impl TraceRow {
    pub fn total_sims(&self) -> u64 {
        self.cumulative_estimation_sims + self.cumulative_verification_sims
    }
}

/// A full-ensemble evaluation performed during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub generation: u64,
    pub point: Vec<f64>,
    pub estimate: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub run_id: usize,
    pub run_seed: u64,
    pub rows: Vec<TraceRow>,
    pub verifications: Vec<Verification>,
    /// Point with the best estimate seen.
    pub best_estimated_point: Option<Vec<f64>>,
    /// Point with the best verified ensemble mean.
    pub best_verified_point: Option<Vec<f64>>,
    /// `None` when the run finished; the failure message otherwise.
    pub failure: Option<String>,
}

impl RunTrace {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_best_verified(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.best_verified)
    }

    pub fn total_sims(&self) -> u64 {
        self.rows.last().map_or(0, TraceRow::total_sims)
    }

    /// Total simulations at the end of the first generation whose best
    /// verified value reaches `threshold`.
    pub fn first_crossing(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.best_verified.is_some_and(|v| v >= threshold))
            .map(TraceRow::total_sims)
    }
}

/// A finished run with the archive it built.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub archive: Archive,
}

/// Seed of run `run_id` under `master_seed`.
pub fn run_seed(master_seed: u64, run_id: usize) -> u64 {
    seed::derive(master_seed, &[tag::RUN, run_id as u64])
}

struct RunState {
    est_sims: u64,
    ver_sims: u64,
    best_estimate: Option<f64>,
    best_verified: Option<f64>,
    trace: RunTrace,
}

/// Runs every configured run in sequence and returns their traces.
pub fn run_campaign(config: &RunConfig) -> Result<Vec<RunTrace>> {
    config.validate()?;
    let problem = config.problem.build()?;
    (0..config.n_runs)
        .map(|run_id| run_once(config, problem.as_ref(), run_id).map(|o| o.trace))
        .collect()
}

/// Executes one run. Configuration problems are errors; failures during the
/// run (simulator, degenerate covariance) end it early with a trace marked
/// incomplete.
pub fn run_once(config: &RunConfig, problem: &dyn Problem, run_id: usize) -> Result<RunOutcome> {
    config.validate()?;
    if problem.dimension() != config.problem.dimension()
        || problem.n_realizations() != config.problem.n_realizations()
    {
        return Err(Error::ProblemMismatch(
            "problem instance does not match its descriptor".to_string(),
        ));
    }
    let seed = run_seed(config.master_seed, run_id);
    let m0 = config.m0.clone().unwrap_or_else(|| problem.default_start());
    let sigma0 = config.sigma0.unwrap_or_else(|| problem.default_sigma());
    let mut optimizer = OptimizerState::new(
        problem.dimension(),
        &m0,
        sigma0,
        config.lambda,
        seed::derive(seed, &[tag::SAMPLING]),
    )?
    .with_distance_scaling(config.distance_scaling);

    let mut archive = Archive::new();
    let mut st = RunState {
        est_sims: 0,
        ver_sims: 0,
        best_estimate: None,
        best_verified: None,
        trace: RunTrace {
            run_id,
            run_seed: seed,
            rows: Vec::new(),
            verifications: Vec::new(),
            best_estimated_point: None,
            best_verified_point: None,
            failure: None,
        },
    };

    while st.est_sims + st.ver_sims < config.budget_simulations {
        if let Err(e) = generation(config, problem, &mut optimizer, &mut archive, &mut st, seed) {
            st.trace.failure = Some(e.to_string());
            break;
        }
    }
    debug_assert_eq!(archive.count_simulations(), st.est_sims + st.ver_sims);
    Ok(RunOutcome {
        trace: st.trace,
        archive,
    })
}

fn generation(
    config: &RunConfig,
    problem: &dyn Problem,
    optimizer: &mut OptimizerState,
    archive: &mut Archive,
    st: &mut RunState,
    run_seed: u64,
) -> Result<()> {
    let g = optimizer.generation();
    let population = optimizer.ask()?;
    // whitened archive points under this generation's metric, indexed by record id
    let mut whitened = match config.strategy {
        Strategy::Neighborhood => Some(WhitenedArchive::build(optimizer.metric()?, archive)),
        _ => None,
    };

    let mut estimates = Vec::with_capacity(population.len());
    let mut staged: Vec<Evaluation> = Vec::new();
    let mut neighbors_total = 0usize;
    for (i, x) in population.iter().enumerate() {
        let mut rng = seed::stream(run_seed, &[tag::REALIZATION_DRAW, g, i as u64]);
        let eval = match config.strategy {
            Strategy::MeanOfSamples => evaluate_mean_of_samples(x, problem, &config.estimator)?,
            Strategy::OneRealization => {
                evaluate_one_realization(x, problem, &config.estimator, &mut rng)?
            }
            Strategy::Neighborhood => {
                let cache = whitened.as_ref().expect("built for neighborhood");
                let query = cache.metric.whiten(x);
                evaluate_neighborhood(
                    x,
                    problem,
                    archive,
                    &config.estimator,
                    |r| whitened_distance(&query, cache.point(r.record_id)),
                    &mut rng,
                )?
            }
        };
        st.est_sims += eval.result.fresh_simulations as u64;
        neighbors_total += eval.result.neighbors_used;
        estimates.push(eval.result.estimate);
        if config.intra_generation_visibility {
            let added = eval.fresh.len();
            eval.commit(archive, x, g)?;
            if let Some(cache) = whitened.as_mut() {
                cache.extend(x, added);
            }
        } else {
            staged.push(eval);
        }
    }
    for (eval, x) in staged.into_iter().zip(&population) {
        eval.commit(archive, x, g)?;
    }

    optimizer.tell(&population, &estimates, true)?;

    let leader = estimates.iter().enumerate().fold(
        0,
        |best, (i, v)| if *v > estimates[best] { i } else { best },
    );
    let improved = st.best_estimate.is_none_or(|b| estimates[leader] > b);
    if improved {
        st.best_estimate = Some(estimates[leader]);
        st.trace.best_estimated_point = Some(population[leader].to_vec());
    }
    let verify = match config.verification {
        VerificationPolicy::OnNewBest => improved,
        VerificationPolicy::EveryGeneration => true,
    };
    if verify {
        verify_point(
            config,
            problem,
            archive,
            st,
            &population[leader],
            estimates[leader],
            g,
        )?;
    }

    st.trace.rows.push(TraceRow {
        run_id: st.trace.run_id,
        generation: g,
        cumulative_estimation_sims: st.est_sims,
        cumulative_verification_sims: st.ver_sims,
        best_estimate: st.best_estimate.expect("set on the first generation"),
        best_verified: st.best_verified,
        sigma: optimizer.sigma(),
        neighbors_used_mean: neighbors_total as f64 / population.len() as f64,
    });
    Ok(())
}

fn verify_point(
    config: &RunConfig,
    problem: &dyn Problem,
    archive: &mut Archive,
    st: &mut RunState,
    point: &DesignPoint,
    estimate: f64,
    g: u64,
) -> Result<()> {
    let value = if config.estimate_is_true_objective() {
        estimate
    } else {
        let n_r = problem.n_realizations() as u32;
        let mut values = Vec::with_capacity(n_r as usize);
        for id in 1..=n_r {
            let v = problem.evaluate(point, id)?;
            archive.insert(point, id, v, g)?;
            st.ver_sims += 1;
            values.push(v);
        }
        aggregate_mean(&values)?
    };
    st.trace.verifications.push(Verification {
        generation: g,
        point: point.to_vec(),
        estimate,
        value,
    });
    if st.best_verified.is_none_or(|b| value > b) {
        st.best_verified = Some(value);
        st.trace.best_verified_point = Some(point.to_vec());
    }
    Ok(())
}

/// One line of a strategy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub threshold: f64,
    pub runs: usize,
    pub runs_reaching: usize,
    pub fraction_reaching: f64,
    /// Mean simulations at first crossing over the runs that crossed.
    pub mean_sims_at_crossing: Option<f64>,
    /// Median over all runs, counting runs that never crossed as infinite;
    /// `None` when that median is infinite.
    pub median_sims_at_crossing: Option<f64>,
}

/// Median where `None` sorts above every number.
pub fn censored_median(values: &[Option<u64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

pub fn summarize(label: &str, traces: &[RunTrace], thresholds: &[f64]) -> Vec<SummaryRow> {
    thresholds
        .iter()
        .map(|&threshold| {
            let crossings: Vec<Option<u64>> =
                traces.iter().map(|t| t.first_crossing(threshold)).collect();
            let reached: Vec<u64> = crossings.iter().flatten().copied().collect();
            let mean = (!reached.is_empty())
                .then(|| reached.iter().sum::<u64>() as f64 / reached.len() as f64);
            SummaryRow {
                label: label.to_string(),
                threshold,
                runs: traces.len(),
                runs_reaching: reached.len(),
                fraction_reaching: if traces.is_empty() {
                    0.0
                } else {
                    reached.len() as f64 / traces.len() as f64
                },
                mean_sims_at_crossing: mean,
                median_sims_at_crossing: censored_median(&crossings),
            }
        })
        .collect()
}

/// Runs each configuration and tabulates threshold crossings per strategy.
pub fn compare_strategies(configs: &[RunConfig], thresholds: &[f64]) -> Result<Vec<SummaryRow>> {
    let Some(first) = configs.first() else {
        return Ok(Vec::new());
    };
    if let Some(other) = configs.iter().find(|c| c.problem != first.problem) {
        return Err(Error::ProblemMismatch(alloc::format!(
            "{} vs {}",
            first.problem.name(),
            other.problem.name()
        )));
    }
    let mut rows = Vec::new();
    for config in configs {
        let traces = run_campaign(config)?;
        rows.extend(summarize(&config.label(), &traces, thresholds));
    }
    Ok(rows)
}
