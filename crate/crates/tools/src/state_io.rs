//! Checkpoint text for [`OptimizerState`].
//!
//! A `key=value` file (see [`crate::kv`]) with these keys, floats in
//! shortest round-trip form and vectors comma-separated:
//!
//! | key | value |
//! |-----|-------|
//! | `format` | `ensemble-cma-state/1` |
//! | `dimension`, `population_size`, `generation` | integers |
//! | `sigma` | step size |
//! | `mean`, `path_sigma`, `path_c` | `n` values each |
//! | `covariance` | `n * n` values, row-major |
//! | `mu`, `weights`, `mu_eff`, `c_sigma`, `d_sigma`, `c_c`, `c_1`, `c_mu`, `chi_n` | strategy constants |
//! | `distance_scaling` | `C` or `sigma2C` |
//! | `rng_seed` | 64 hex digits |
//! | `rng_stream`, `rng_word_pos` | integers |
//!
//! Restoring continues the run bit-identically.

use std::collections::BTreeMap;
use std::str::FromStr;

use ensemble_cma::optimizer::{StateSnapshot, StrategyParams};
use ensemble_cma::{DistanceScaling, OptimizerState};

use crate::{fmt_f64, kv, Result, ToolError};

const FORMAT: &str = "ensemble-cma-state/1";

fn list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn to_text(state: &OptimizerState) -> String {
    let s = state.snapshot();
    let p = &s.params;
    let seed: String = s.rng_seed.iter().map(|b| format!("{b:02x}")).collect();
    let pairs: Vec<(&str, String)> = vec![
        ("format", FORMAT.into()),
        ("dimension", s.dimension.to_string()),
        ("population_size", s.population_size.to_string()),
        ("generation", s.generation.to_string()),
        ("sigma", fmt_f64(s.sigma)),
        ("mean", list(&s.mean)),
        ("covariance", list(&s.covariance)),
        ("path_sigma", list(&s.path_sigma)),
        ("path_c", list(&s.path_c)),
        ("mu", p.mu.to_string()),
        ("weights", list(&p.weights)),
        ("mu_eff", fmt_f64(p.mu_eff)),
        ("c_sigma", fmt_f64(p.c_sigma)),
        ("d_sigma", fmt_f64(p.d_sigma)),
        ("c_c", fmt_f64(p.c_c)),
        ("c_1", fmt_f64(p.c_1)),
        ("c_mu", fmt_f64(p.c_mu)),
        ("chi_n", fmt_f64(p.chi_n)),
        (
            "distance_scaling",
            match s.distance_scaling {
                DistanceScaling::Covariance => "C",
                DistanceScaling::ScaledCovariance => "sigma2C",
            }
            .into(),
        ),
        ("rng_seed", seed),
        ("rng_stream", s.rng_stream.to_string()),
        ("rng_word_pos", s.rng_word_pos.to_string()),
    ];
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn raw(&mut self, key: &str) -> Result<String> {
        self.0
            .remove(key)
            .ok_or_else(|| ToolError::Format(format!("state: missing key {key}")))
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| ToolError::Format(format!("state: {key}: cannot parse {v:?}")))
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| ToolError::Format(format!("state: {key}: cannot parse {s:?}")))
            })
            .collect()
    }
}

fn parse_seed(hex: &str) -> Result<[u8; 32]> {
    let bad = || {
        ToolError::Format(format!(
            "state: rng_seed must be 64 hex digits, got {hex:?}"
        ))
    };
    if hex.len() != 64 || !hex.is_ascii() {
        return Err(bad());
    }
    let mut out = [0u8; 32];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    Ok(out)
}

pub fn from_text(text: &str) -> Result<OptimizerState> {
    let pairs = kv::parse(text).map_err(|e| ToolError::Format(e.to_string()))?;
    let mut k = Keys(kv::to_map(pairs));
    let format = k.raw("format")?;
    if format != FORMAT {
        return Err(ToolError::Format(format!(
            "state: unsupported format {format:?}"
        )));
    }
    let snapshot = StateSnapshot {
        dimension: k.get("dimension")?,
        population_size: k.get("population_size")?,
        generation: k.get("generation")?,
        sigma: k.get("sigma")?,
        mean: k.list("mean")?,
        covariance: k.list("covariance")?,
        path_sigma: k.list("path_sigma")?,
        path_c: k.list("path_c")?,
        params: StrategyParams {
            mu: k.get("mu")?,
            weights: k.list("weights")?,
            mu_eff: k.get("mu_eff")?,
            c_sigma: k.get("c_sigma")?,
            d_sigma: k.get("d_sigma")?,
            c_c: k.get("c_c")?,
            c_1: k.get("c_1")?,
            c_mu: k.get("c_mu")?,
            chi_n: k.get("chi_n")?,
        },
        distance_scaling: match k.raw("distance_scaling")?.as_str() {
            "C" => DistanceScaling::Covariance,
            "sigma2C" => DistanceScaling::ScaledCovariance,
            other => {
                return Err(ToolError::Format(format!(
                    "state: unknown distance_scaling {other:?}"
                )))
            }
        },
        rng_seed: parse_seed(&k.raw("rng_seed")?)?,
        rng_stream: k.get("rng_stream")?,
        rng_word_pos: k.get("rng_word_pos")?,
    };
    if let Some(extra) = k.0.keys().next() {
        return Err(ToolError::Format(format!("state: unknown key {extra}")));
    }
    Ok(OptimizerState::from_snapshot(snapshot)?)
}
