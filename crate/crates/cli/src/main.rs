use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use ane_core::benchmarks::{self, BenchmarkCase};
use ane_core::driver::{ane_run_with, dual_run, RunMode};
use ane_core::{emit_artifacts, AneConfig, RunReport, RunStop, StageReport};

#[derive(Parser)]
#[command(name = "ane", version, about = "Adaptive neuron enhancement solver for elliptic PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// poisson1d, lshape, kellogg or dual
    #[arg(long)]
    case: String,
    /// JSON file whose fields override the case defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out/<case>)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive method until the estimator tolerance or a budget is reached
    Solve(RunArgs),
    /// Train a single network with a fixed number of uniformly placed neurons
    Fixed {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        neurons: usize,
    },
    /// Print every built-in case and its default configuration as JSON
    ListBenchmarks,
    /// Check the exact solutions of the built-in cases
    ValidateFixtures,
}

/// Recursively overlay `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn load_case(args: &RunArgs) -> Result<(BenchmarkCase, AneConfig)> {
    let Some(case) = benchmarks::by_name(&args.case) else {
        bail!(
            "unknown case '{}'; expected one of poisson1d, lshape, kellogg, dual",
            args.case
        );
    };
    let mut cfg = case.config.clone();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut base = serde_json::to_value(&cfg)?;
        merge(&mut base, patch);
        cfg = serde_json::from_value(base).with_context(|| format!("invalid config in {}", path.display()))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok((case, cfg))
}

fn progress(st: &StageReport) {
    let err = st
        .errors
        .map(|e| format!(", rel energy error {:.6}", e.rel_energy))
        .unwrap_or_default();
    eprintln!(
        "stage {}: {} neurons, {} iterations, loss {:.6e}, xi_rel {:.6}{err}, marked {}, {:.1}s",
        st.stage,
        st.neurons,
        st.train.iterations,
        st.loss,
        st.indicators.relative,
        st.indicators.marked.len(),
        st.wall_time_secs
    );
}

fn run(args: &RunArgs, mode: RunMode, neurons: Option<usize>) -> Result<RunReport> {
    let (case, mut cfg) = load_case(args)?;
    if let Some(n) = neurons {
        if n == 0 {
            bail!("--neurons must be at least 1");
        }
        cfg.start_neurons = n;
        cfg.max_stages = 1;
        cfg.max_neurons = cfg.max_neurons.max(n);
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("out").join(case.name));
    let report = ane_run_with(case.name, &case.problem, &cfg, mode, &mut progress)?;
    if let Some(e) = &report.error {
        eprintln!("run stopped early: {e}");
    }
    if !report.stages.is_empty() {
        let files = emit_artifacts(&report, &out)?;
        eprintln!("wrote {} files to {}", files.len(), out.display());
    }
    if let (RunMode::Adaptive, Some(settings)) = (mode, case.dual) {
        let dual = dual_run(&case.problem, &settings, &cfg)?;
        let path = out.join("dual.json");
        fs::create_dir_all(&out)?;
        fs::write(&path, serde_json::to_string_pretty(&dual)?).with_context(|| format!("writing {}", path.display()))?;
        if let Some(e) = dual.rel_flux_error {
            eprintln!("dual solve: {} neurons, relative flux error {e:.6}", dual.neurons);
        }
    }
    Ok(report)
}

fn exit_code(report: &RunReport) -> ExitCode {
    match report.stop_reason {
        RunStop::ToleranceMet => ExitCode::SUCCESS,
        RunStop::MaxStages | RunStop::MaxNeurons => ExitCode::from(2),
        RunStop::Diverged => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run(&args, RunMode::Adaptive, None).map(|r| exit_code(&r)),
        Command::Fixed { run: args, neurons } => run(&args, RunMode::Fixed, Some(neurons)).map(|r| exit_code(&r)),
        Command::ListBenchmarks => {
            let all: Vec<Value> = benchmarks::all().iter().map(BenchmarkCase::describe).collect();
            serde_json::to_string_pretty(&all)
                .map(|s| {
                    println!("{s}");
                    ExitCode::SUCCESS
                })
                .map_err(Into::into)
        }
        Command::ValidateFixtures => {
            let checks = benchmarks::validate_fixtures();
            for c in &checks {
                println!(
                    "{} {}: {}: {:e} (tolerance {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.case,
                    c.check,
                    c.value,
                    c.tolerance
                );
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
