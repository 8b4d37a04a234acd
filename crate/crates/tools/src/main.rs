use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ensemble_cma::problems::{generate_field, ProblemSpec};
use ensemble_cma_tools::{archive_io, campaign, config, field_io, trace_io, Result, ToolError};

/// CMA-ES over realization ensembles with neighborhood estimation.
#[derive(Parser)]
#[command(name = "ensemble-cma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write one trace per run.
    Run(Box<RunArgs>),
    /// Summarize threshold crossings over trace directories.
    Compare(CompareArgs),
    /// Export one realization of the proxy's property field as a CSV grid.
    Field(FieldArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    base: ConfigArgs,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    dmax: Option<String>,
    #[arg(long)]
    ns1: Option<String>,
    #[arg(long)]
    ns2: Option<String>,
    #[arg(long)]
    nsim: Option<String>,
    #[arg(long)]
    nnmax: Option<String>,
    #[arg(long)]
    risk: Option<String>,
    /// on_new_best or every_generation.
    #[arg(long)]
    verify: Option<String>,
    /// Output directory for traces.
    #[arg(long)]
    out: PathBuf,
    /// Also dump each run's archive as archive_NNN.csv.
    #[arg(long)]
    dump_archive: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Directories holding run_*.csv traces.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Comma-separated thresholds on best_verified.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    thresholds: Vec<f64>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// One-based realization index.
    #[arg(long, default_value_t = 1)]
    realization: u32,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(
    base: &ConfigArgs,
    flags: Vec<(&str, Option<&String>)>,
) -> Result<ensemble_cma::RunConfig> {
    let text = match &base.config {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| ToolError::Config(format!("{}: {e}", p.display())))?
        }
        None => String::new(),
    };
    let mut overrides = Vec::new();
    for s in &base.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| ToolError::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in flags {
        if let Some(v) = v {
            overrides.push((k.to_string(), v.clone()));
        }
    }
    config::from_text(&text, &overrides)
}

fn run(args: RunArgs) -> Result<bool> {
    let flags = vec![
        ("strategy", args.strategy.as_ref()),
        ("seed", args.seed.as_ref()),
        ("runs", args.runs.as_ref()),
        ("budget", args.budget.as_ref()),
        ("lambda", args.lambda.as_ref()),
        ("dmax", args.dmax.as_ref()),
        ("ns1", args.ns1.as_ref()),
        ("ns2", args.ns2.as_ref()),
        ("nsim", args.nsim.as_ref()),
        ("nnmax", args.nnmax.as_ref()),
        ("risk", args.risk.as_ref()),
        ("verify", args.verify.as_ref()),
    ];
    let cfg = load_config(&args.base, flags)?;
    let (cfg, problem) = campaign::resolve(&cfg)?;
    let outcomes = campaign::run_parallel(&cfg, problem.as_ref())?;
    trace_io::write_campaign(&args.out, &cfg, &outcomes)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut complete = true;
    for o in &outcomes {
        let t = &o.trace;
        if args.dump_archive {
            let path = args.out.join(format!("archive_{:03}.csv", t.run_id));
            archive_io::write_archive(BufWriter::new(fs::File::create(path)?), &o.archive)?;
        }
        writeln!(
            out,
            "run {}: generations={} simulations={} best_verified={}",
            t.run_id,
            t.rows.len(),
            t.total_sims(),
            t.final_best_verified()
                .map_or("none".into(), |v| v.to_string()),
        )?;
        if let Some(msg) = &t.failure {
            eprintln!("run {} stopped early: {msg}", t.run_id);
            complete = false;
        }
    }
    Ok(complete)
}

fn compare(args: CompareArgs) -> Result<bool> {
    let mut files = Vec::new();
    for dir in &args.dirs {
        files.extend(trace_io::read_dir(dir)?);
    }
    let rows = campaign::summarize_traces(&files, &args.thresholds)?;
    match &args.out {
        Some(p) => campaign::write_summary(BufWriter::new(fs::File::create(p)?), &rows)?,
        None => campaign::write_summary(io::stdout().lock(), &rows)?,
    }
    Ok(true)
}

fn field(args: FieldArgs) -> Result<bool> {
    let cfg = load_config(&args.base, Vec::new())?;
    let ProblemSpec::NpvProxy(p) = &cfg.problem else {
        return Err(ToolError::Config(
            "field export needs problem=npv_proxy".into(),
        ));
    };
    if args.realization == 0 || args.realization as usize > p.n_realizations {
        return Err(ToolError::Config(format!(
            "realization must lie in 1..={}",
            p.n_realizations
        )));
    }
    let f = generate_field(&p.field, p.seed, args.realization)?;
    field_io::write_field(BufWriter::new(fs::File::create(&args.out)?), &f)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(*a),
        Command::Compare(a) => compare(a),
        Command::Field(a) => field(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
