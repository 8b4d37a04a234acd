//! `RunConfig` as flat `key=value` text.
//!
//! Every field has a key. Keys that do not apply to the selected problem or
//! layout are rejected, as are unknown keys. When `problem_seed` is absent it
//! is derived from `seed`, so each master seed gets its own problem instance.
//!
//! ```text
//! problem=npv_proxy
//! strategy=neighborhood
//! dmax=4000
//! budget=8000
//! verify=every_generation
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use ensemble_cma::estimators::{Aggregator, PercentileWeights};
use ensemble_cma::problems::{Economics, FieldParams, ProxyParams, WellLayout};
use ensemble_cma::seed::{self, tag};
use ensemble_cma::{
    DistanceScaling, EstimatorConfig, ProblemSpec, RunConfig, Strategy, VerificationPolicy,
};

use crate::{fmt_f64, kv, Result, ToolError};

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn text(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ToolError::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn flag(&mut self, key: &str) -> Result<Option<bool>> {
        match self.0.remove(key).as_deref() {
            None => Ok(None),
            Some("true" | "on" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "off" | "no" | "0") => Ok(Some(false)),
            Some(v) => Err(ToolError::Config(format!(
                "{key}: expected a boolean, got {v:?}"
            ))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            None => Ok(()),
            Some(k) => Err(ToolError::Config(format!(
                "unknown or inapplicable key {k}"
            ))),
        }
    }
}

fn bad(key: &str, value: &str) -> ToolError {
    ToolError::Config(format!("{key}: unsupported value {value:?}"))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ToolError::Config(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn problem_from(f: &mut Fields, master_seed: u64) -> Result<ProblemSpec> {
    let problem_seed = f
        .get("problem_seed")?
        .unwrap_or_else(|| seed::derive(master_seed, &[tag::PROBLEM]));
    let name = f.text("problem").unwrap_or_else(|| "shifted_sphere".into());
    Ok(match name.as_str() {
        "shifted_sphere" => ProblemSpec::ShiftedSphere {
            dimension: f.get("dimension")?.unwrap_or(12),
            n_realizations: f.get("n_realizations")?.unwrap_or(20),
            shift_scale: f.get("shift_scale")?.unwrap_or(1.0),
            seed: problem_seed,
        },
        "npv_proxy" => {
            let d = ProxyParams::default();
            let layout = match f.text("layout").as_deref().unwrap_or("vertical") {
                "vertical" => WellLayout::Vertical,
                "segments" => WellLayout::Segments {
                    thickness: f.get("thickness")?.unwrap_or(90.0),
                },
                other => return Err(bad("layout", other)),
            };
            let field = FieldParams {
                nx: f.get("nx")?.unwrap_or(d.field.nx),
                ny: f.get("ny")?.unwrap_or(d.field.ny),
                cell_size: f.get("cell_size")?.unwrap_or(d.field.cell_size),
                correlation_cells: f
                    .get("correlation_cells")?
                    .unwrap_or(d.field.correlation_cells),
                log_mean: f.get("log_mean")?.unwrap_or(d.field.log_mean),
                log_std: f.get("log_std")?.unwrap_or(d.field.log_std),
            };
            let economics = Economics {
                price: f.get("price")?.unwrap_or(d.economics.price),
                reference_spacing: f
                    .get("reference_spacing")?
                    .unwrap_or(d.economics.reference_spacing),
                well_cost: f.get("well_cost")?.unwrap_or(d.economics.well_cost),
                penalty: f.get("penalty")?.unwrap_or(d.economics.penalty),
                path_samples: f.get("path_samples")?.unwrap_or(d.economics.path_samples),
            };
            ProblemSpec::NpvProxy(ProxyParams {
                layout,
                field,
                n_realizations: f.get("n_realizations")?.unwrap_or(d.n_realizations),
                economics,
                seed: problem_seed,
            })
        }
        other => return Err(bad("problem", other)),
    })
}

/// Builds and validates a configuration from key/value pairs.
pub fn from_map(map: BTreeMap<String, String>) -> Result<RunConfig> {
    let mut f = Fields(map);
    let master_seed = f.get("seed")?.unwrap_or(0);
    let problem = problem_from(&mut f, master_seed)?;

    let strategy = match f.text("strategy") {
        None => Strategy::Neighborhood,
        Some(s) => Strategy::parse(&s).ok_or_else(|| bad("strategy", &s))?,
    };
    let default_dmax = match problem {
        ProblemSpec::ShiftedSphere { .. } => 8.0,
        ProblemSpec::NpvProxy(_) => 4000.0,
    };
    let dmax = f.get("dmax")?.unwrap_or(default_dmax);
    let mut config = RunConfig::new(problem, strategy, dmax);
    config.master_seed = master_seed;

    let est: &mut EstimatorConfig = &mut config.estimator;
    if let Some(v) = f.get("ns1")? {
        est.bootstrap_samples = v;
    }
    if let Some(v) = f.get("ns2")? {
        est.main_samples = v;
    }
    if let Some(v) = f.get("nsim")? {
        est.bootstrap_threshold = v;
    }
    if let Some(v) = f.get("nnmax")? {
        est.max_neighbors = v;
    }
    if let Some(v) = f.get("risk")? {
        est.risk_factor = v;
    }
    if let Some(v) = f.flag("use_std_term")? {
        est.use_std_term = v;
    }
    if let Some(v) = f.text("aggregator") {
        est.aggregator = match v.as_str() {
            "mean" => Aggregator::Mean,
            "risk" => Aggregator::Risk,
            "percentile" => Aggregator::Percentile,
            other => return Err(bad("aggregator", other)),
        };
    }
    let neutral = PercentileWeights::NEUTRAL;
    est.percentile_weights = PercentileWeights {
        p10: f.get("r10")?.unwrap_or(neutral.p10),
        p50: f.get("r50")?.unwrap_or(neutral.p50),
        p90: f.get("r90")?.unwrap_or(neutral.p90),
    };

    if let Some(v) = f.get("lambda")? {
        config.lambda = v;
    }
    config.m0 = match f.text("m0") {
        None => None,
        Some(v) if v == "default" => None,
        Some(v) => Some(parse_list("m0", &v)?),
    };
    config.sigma0 = match f.text("sigma0") {
        None => None,
        Some(v) if v == "default" => None,
        Some(v) => Some(
            v.parse()
                .map_err(|_| ToolError::Config(format!("sigma0: cannot parse {v:?}")))?,
        ),
    };
    if let Some(v) = f.get("budget")? {
        config.budget_simulations = v;
    }
    if let Some(v) = f.get("runs")? {
        config.n_runs = v;
    }
    if let Some(v) = f.text("verify") {
        config.verification = VerificationPolicy::parse(&v).ok_or_else(|| bad("verify", &v))?;
    }
    if let Some(v) = f.text("distance_scaling") {
        config.distance_scaling = match v.as_str() {
            "C" => DistanceScaling::Covariance,
            "sigma2C" => DistanceScaling::ScaledCovariance,
            other => return Err(bad("distance_scaling", other)),
        };
    }
    if let Some(v) = f.flag("intra_generation_visibility")? {
        config.intra_generation_visibility = v;
    }
    f.finish()?;
    config
        .validate()
        .map_err(|e| ToolError::Config(e.to_string()))?;
    Ok(config)
}

/// Parses config text, applies `overrides` on top and builds the result.
pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut map = kv::to_map(kv::parse(text)?);
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    from_map(map)
}

/// Every field of `config`, in a fixed order, such that
/// `from_map(to_pairs(c))` reproduces `c`.
pub fn to_pairs(config: &RunConfig) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| out.push((k.to_string(), v));
    put("problem", config.problem.name().to_string());
    match &config.problem {
        ProblemSpec::ShiftedSphere {
            dimension,
            n_realizations,
            shift_scale,
            seed,
        } => {
            put("problem_seed", seed.to_string());
            put("dimension", dimension.to_string());
            put("n_realizations", n_realizations.to_string());
            put("shift_scale", fmt_f64(*shift_scale));
        }
        ProblemSpec::NpvProxy(p) => {
            put("problem_seed", p.seed.to_string());
            match p.layout {
                WellLayout::Vertical => put("layout", "vertical".into()),
                WellLayout::Segments { thickness } => {
                    put("layout", "segments".into());
                    put("thickness", fmt_f64(thickness));
                }
            }
            put("n_realizations", p.n_realizations.to_string());
            put("nx", p.field.nx.to_string());
            put("ny", p.field.ny.to_string());
            put("cell_size", fmt_f64(p.field.cell_size));
            put("correlation_cells", fmt_f64(p.field.correlation_cells));
            put("log_mean", fmt_f64(p.field.log_mean));
            put("log_std", fmt_f64(p.field.log_std));
            put("price", fmt_f64(p.economics.price));
            put("reference_spacing", fmt_f64(p.economics.reference_spacing));
            put("well_cost", fmt_f64(p.economics.well_cost));
            put("penalty", fmt_f64(p.economics.penalty));
            put("path_samples", p.economics.path_samples.to_string());
        }
    }
    put("strategy", config.strategy.name().to_string());
    put("lambda", config.lambda.to_string());
    put(
        "m0",
        config.m0.as_ref().map_or("default".into(), |m| {
            m.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
        }),
    );
    put("sigma0", config.sigma0.map_or("default".into(), fmt_f64));
    put("budget", config.budget_simulations.to_string());
    put("runs", config.n_runs.to_string());
    put("seed", config.master_seed.to_string());
    put("verify", config.verification.name().to_string());
    let e = &config.estimator;
    put("dmax", fmt_f64(e.selection_distance));
    put("ns1", e.bootstrap_samples.to_string());
    put("ns2", e.main_samples.to_string());
    put("nsim", e.bootstrap_threshold.to_string());
    put("nnmax", e.max_neighbors.to_string());
    put("risk", fmt_f64(e.risk_factor));
    put("use_std_term", e.use_std_term.to_string());
    put(
        "aggregator",
        match e.aggregator {
            Aggregator::Mean => "mean",
            Aggregator::Risk => "risk",
            Aggregator::Percentile => "percentile",
        }
        .into(),
    );
    put("r10", fmt_f64(e.percentile_weights.p10));
    put("r50", fmt_f64(e.percentile_weights.p50));
    put("r90", fmt_f64(e.percentile_weights.p90));
    put(
        "distance_scaling",
        match config.distance_scaling {
            DistanceScaling::Covariance => "C",
            DistanceScaling::ScaledCovariance => "sigma2C",
        }
        .into(),
    );
    put(
        "intra_generation_visibility",
        config.intra_generation_visibility.to_string(),
    );
    out
}
