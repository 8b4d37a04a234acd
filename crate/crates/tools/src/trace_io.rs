//! Run traces as CSV.
//!
//! ```text
//! # format=ensemble-cma-trace/1
//! # problem=shifted_sphere          resolved configuration, one key per line
//! # ...
//! # run_id=0
//! # run_seed=...
//! run_id,generation,cumulative_estimation_sims,cumulative_verification_sims,best_estimate,best_verified,sigma,neighbors_used_mean
//! 0,0,40,20,-53.1,-60.2,1.7,0.0
//! ...
//! # p_max_E=x0;x1;...                point with the best estimate
//! # p_max_R=x0;x1;...                point with the best verified value
//! # verifications=12
//! # complete=true
//! ```
//!
//! `best_verified` is empty before the first verification; `p_max_*` are
//! empty when no such point exists. An incomplete run adds a `failure` line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use ensemble_cma::harness::{RunOutcome, TraceRow};
use ensemble_cma::{RunConfig, RunTrace};

use crate::{config, fmt_f64, Result, ToolError};

pub const FORMAT: &str = "ensemble-cma-trace/1";

pub const COLUMNS: [&str; 8] = [
    "run_id",
    "generation",
    "cumulative_estimation_sims",
    "cumulative_verification_sims",
    "best_estimate",
    "best_verified",
    "sigma",
    "neighbors_used_mean",
];

/// Header keys that describe the run rather than the configuration.
const RUN_KEYS: [&str; 3] = ["format", "run_id", "run_seed"];

fn point_text(p: Option<&Vec<f64>>) -> String {
    p.map_or(String::new(), |p| {
        p.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";")
    })
}

pub fn write_trace<W: Write>(mut out: W, config: &RunConfig, trace: &RunTrace) -> Result<()> {
    writeln!(out, "# format={FORMAT}")?;
    for (k, v) in config::to_pairs(config) {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "# run_id={}", trace.run_id)?;
    writeln!(out, "# run_seed={}", trace.run_seed)?;
    writeln!(out, "{}", COLUMNS.join(","))?;
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.run_id,
            r.generation,
            r.cumulative_estimation_sims,
            r.cumulative_verification_sims,
            fmt_f64(r.best_estimate),
            r.best_verified.map_or(String::new(), fmt_f64),
            fmt_f64(r.sigma),
            fmt_f64(r.neighbors_used_mean),
        )?;
    }
    writeln!(
        out,
        "# p_max_E={}",
        point_text(trace.best_estimated_point.as_ref())
    )?;
    writeln!(
        out,
        "# p_max_R={}",
        point_text(trace.best_verified_point.as_ref())
    )?;
    writeln!(out, "# verifications={}", trace.verifications.len())?;
    writeln!(out, "# complete={}", trace.is_complete())?;
    if let Some(msg) = &trace.failure {
        writeln!(out, "# failure={}", msg.replace(['\r', '\n'], " "))?;
    }
    Ok(())
}

/// A trace read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: Vec<(String, String)>,
    pub rows: Vec<TraceRow>,
    pub footer: Vec<(String, String)>,
}

fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn parse_point(s: &str) -> Result<Option<Vec<f64>>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.split(';')
        .map(|v| {
            v.parse()
                .map_err(|_| ToolError::Format(format!("trace: bad coordinate {v:?}")))
        })
        .collect::<Result<Vec<f64>>>()
        .map(Some)
}

impl TraceFile {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        lookup(&self.header, key)
    }

    pub fn footer_value(&self, key: &str) -> Option<&str> {
        lookup(&self.footer, key)
    }

    /// The configuration echoed in the header.
    pub fn config(&self) -> Result<RunConfig> {
        let map: BTreeMap<String, String> = self
            .header
            .iter()
            .filter(|(k, _)| !RUN_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        config::from_map(map)
    }

    pub fn p_max_e(&self) -> Result<Option<Vec<f64>>> {
        parse_point(self.footer_value("p_max_E").unwrap_or(""))
    }

    pub fn p_max_r(&self) -> Result<Option<Vec<f64>>> {
        parse_point(self.footer_value("p_max_R").unwrap_or(""))
    }

    pub fn is_complete(&self) -> bool {
        self.footer_value("complete") == Some("true")
    }

    /// Rows and best points as a [`RunTrace`]; individual verification
    /// events are not stored in the file and come back empty.
    pub fn to_run_trace(&self) -> Result<RunTrace> {
        let num = |key: &str| -> Result<u64> {
            self.header_value(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ToolError::Format(format!("trace: header lacks {key}")))
        };
        Ok(RunTrace {
            run_id: num("run_id")? as usize,
            run_seed: num("run_seed")?,
            rows: self.rows.clone(),
            verifications: Vec::new(),
            best_estimated_point: self.p_max_e()?,
            best_verified_point: self.p_max_r()?,
            failure: if self.is_complete() {
                None
            } else {
                Some(
                    self.footer_value("failure")
                        .unwrap_or("incomplete")
                        .to_string(),
                )
            },
        })
    }
}

fn comment_pair(line: &str) -> Result<(String, String)> {
    let body = line.trim_start_matches('#').trim();
    body.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| ToolError::Format(format!("trace: comment is not key=value: {line:?}")))
}

fn parse_row(line: &str, lineno: usize) -> Result<TraceRow> {
    let cells: Vec<&str> = line.split(',').collect();
    if cells.len() != COLUMNS.len() {
        return Err(ToolError::Format(format!(
            "trace line {lineno}: {} cells, expected {}",
            cells.len(),
            COLUMNS.len()
        )));
    }
    fn cell<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
        s.parse()
            .map_err(|_| ToolError::Format(format!("trace line {lineno}: bad value {s:?}")))
    }
    Ok(TraceRow {
        run_id: cell(cells[0], lineno)?,
        generation: cell(cells[1], lineno)?,
        cumulative_estimation_sims: cell(cells[2], lineno)?,
        cumulative_verification_sims: cell(cells[3], lineno)?,
        best_estimate: cell(cells[4], lineno)?,
        best_verified: if cells[5].is_empty() {
            None
        } else {
            Some(cell(cells[5], lineno)?)
        },
        sigma: cell(cells[6], lineno)?,
        neighbors_used_mean: cell(cells[7], lineno)?,
    })
}

pub fn read_trace<R: BufRead>(input: R) -> Result<TraceFile> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    let mut seen_columns = false;
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let pair = comment_pair(&line)?;
            if seen_columns {
                footer.push(pair);
            } else {
                header.push(pair);
            }
        } else if !seen_columns {
            if line.trim() != COLUMNS.join(",") {
                return Err(ToolError::Format(format!(
                    "trace line {lineno}: unexpected columns"
                )));
            }
            seen_columns = true;
        } else if !footer.is_empty() {
            return Err(ToolError::Format(format!(
                "trace line {lineno}: row after footer"
            )));
        } else {
            rows.push(parse_row(line.trim(), lineno)?);
        }
    }
    if !seen_columns {
        return Err(ToolError::Format("trace has no column line".into()));
    }
    if lookup(&header, "format") != Some(FORMAT) {
        return Err(ToolError::Format(
            "trace format line missing or unsupported".into(),
        ));
    }
    Ok(TraceFile {
        header,
        rows,
        footer,
    })
}

pub fn trace_file_name(run_id: usize) -> String {
    format!("run_{run_id:03}.csv")
}

/// Writes one trace file per run into `dir`, creating it if needed.
pub fn write_campaign(
    dir: &Path,
    config: &RunConfig,
    outcomes: &[RunOutcome],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    outcomes
        .iter()
        .map(|o| {
            let path = dir.join(trace_file_name(o.trace.run_id));
            let mut buf = Vec::new();
            write_trace(&mut buf, config, &o.trace)?;
            fs::write(&path, buf)?;
            Ok(path)
        })
        .collect()
}

/// Reads every `run_*.csv` in `dir`, in file-name order.
pub fn read_dir(dir: &Path) -> Result<Vec<TraceFile>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ToolError::Format(format!(
            "{}: no run_*.csv traces",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| read_trace(std::io::BufReader::new(fs::File::open(p)?)))
        .collect()
}
