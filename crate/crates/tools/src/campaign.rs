//! Campaigns with runs spread over threads, and summaries of saved traces.
//!
//! Each run draws only from its own seeded streams, so results do not depend
//! on how runs are scheduled.

use std::io::Write;

use rayon::prelude::*;

use ensemble_cma::harness::{run_once, summarize, RunOutcome, SummaryRow};
use ensemble_cma::{Problem, RunConfig};

use crate::trace_io::TraceFile;
use crate::{config, fmt_f64, Result, ToolError};

/// Builds the problem and fills in the start point and step size it suggests.
pub fn resolve(config: &RunConfig) -> Result<(RunConfig, Box<dyn Problem + Send>)> {
    config
        .validate()
        .map_err(|e| ToolError::Config(e.to_string()))?;
    let problem = config.problem.build()?;
    let mut resolved = config.clone();
    if resolved.m0.is_none() {
        resolved.m0 = Some(problem.default_start());
    }
    if resolved.sigma0.is_none() {
        resolved.sigma0 = Some(problem.default_sigma());
    }
    Ok((resolved, problem))
}

/// Runs all configured runs in parallel; outcomes come back in run order.
pub fn run_parallel(config: &RunConfig, problem: &dyn Problem) -> Result<Vec<RunOutcome>> {
    (0..config.n_runs)
        .into_par_iter()
        .map(|run_id| run_once(config, problem, run_id).map_err(ToolError::from))
        .collect()
}

fn problem_key(config: &RunConfig) -> String {
    let pairs = config::to_pairs(config);
    let end = pairs
        .iter()
        .position(|(k, _)| k == "strategy")
        .unwrap_or(pairs.len());
    pairs[..end]
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Groups traces by strategy label and tabulates threshold crossings.
///
/// Every group must cover the same problem instances, so that comparisons
/// are paired.
pub fn summarize_traces(files: &[TraceFile], thresholds: &[f64]) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<(String, Vec<String>, Vec<ensemble_cma::RunTrace>)> = Vec::new();
    for f in files {
        let cfg = f.config()?;
        let label = cfg.label();
        let trace = f.to_run_trace()?;
        let key = problem_key(&cfg);
        match groups.iter_mut().find(|g| g.0 == label) {
            Some(g) => {
                g.1.push(key);
                g.2.push(trace);
            }
            None => groups.push((label, vec![key], vec![trace])),
        }
    }
    for g in &mut groups {
        g.1.sort();
    }
    if let Some(other) = groups.iter().find(|g| g.1 != groups[0].1) {
        return Err(ToolError::Config(format!(
            "{} and {} were run on different problems",
            groups[0].0, other.0
        )));
    }
    Ok(groups
        .iter()
        .flat_map(|(label, _, traces)| summarize(label, traces, thresholds))
        .collect())
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(
        out,
        "label,threshold,runs,runs_reaching,fraction_reaching,mean_sims_at_crossing,median_sims_at_crossing"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.label,
            fmt_f64(r.threshold),
            r.runs,
            r.runs_reaching,
            fmt_f64(r.fraction_reaching),
            r.mean_sims_at_crossing.map_or("".into(), fmt_f64),
            r.median_sims_at_crossing.map_or("inf".into(), fmt_f64),
        )?;
    }
    Ok(())
}
