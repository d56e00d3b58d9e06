//! `aaa`: run the aggregator over recorded traces, generate synthetic
//! traces, and analyze or sweep the results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aaa_core::harness::{
    analyze, generate_adversarial, load_trace, parse_grid, read_json, run_report, theta_sweep,
    write_atomic, write_json_atomic, DEFAULT_GRID,
};
use aaa_core::{EngineConfig, LossMode, RunReport, SyntheticScenario, Trace};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

/// Directory used for outputs when `--out`/`--report` is omitted.
const OUT_DIR_ENV: &str = "AAA_OUT_DIR";

#[derive(Parser)]
#[command(name = "aaa", version, about = "Adaptive aggregation of online trackers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Expected,
    Sampled,
}

impl From<Mode> for LossMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Expected => LossMode::Expected,
            Mode::Sampled => LossMode::Sampled,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the aggregator over one trace and write a run report.
    Run {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0.69)]
        theta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "expected")]
        mode: Mode,
        /// Constant `c` of the regret bound.
        #[arg(long, default_value_t = 1.0)]
        bound_constant: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic adversarial trace.
    Simulate {
        /// Scenario as a JSON file path or an inline JSON object.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-sequence regret and outperformance analysis of run reports.
    Analyze {
        /// Run report files, or directories containing them.
        #[arg(long, required = true, num_args = 1..)]
        decisions: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        bound_constant: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep θ over a directory of traces with ground truth.
    Sweep {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value = DEFAULT_GRID)]
        grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_path(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(name)
    })
}

fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.to_string_lossy().ends_with(suffix) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn load(path: &Path) -> Result<Trace> {
    load_trace(path).with_context(|| format!("loading trace {}", path.display()))
}

fn parse_scenario(arg: &str) -> Result<SyntheticScenario> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading scenario {arg}"))?
    };
    serde_json::from_str(&text).context("parsing scenario")
}

/// Run reports from explicit files, plus every `kind: "run"` JSON document
/// found in the given directories.
fn collect_runs(inputs: &[PathBuf]) -> Result<Vec<RunReport>> {
    let mut runs = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for path in files_with_suffix(input, ".json")? {
                let value: serde_json::Value = read_json(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                if value.get("kind").and_then(|k| k.as_str()) == Some("run") {
                    runs.push(
                        serde_json::from_value(value)
                            .with_context(|| format!("parsing run report {}", path.display()))?,
                    );
                }
            }
        } else {
            runs.push(
                read_json(input).with_context(|| format!("reading run report {}", input.display()))?,
            );
        }
    }
    if runs.is_empty() {
        bail!("no run reports found");
    }
    Ok(runs)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            trace,
            theta,
            seed,
            mode,
            bound_constant,
            out,
        } => {
            let trace = load(&trace)?;
            let report = run_report(&trace, EngineConfig { theta, seed }, mode.into(), bound_constant)?;
            let path = default_path(out, &format!("{}.run.json", report.sequence_id));
            write_json_atomic(&path, &report)?;
            let r = &report.summary.regret_pseudo_gt;
            println!(
                "{}: {} frames, {} anchors, regret {:.4} (bound {:.4}), written to {}",
                report.sequence_id,
                report.frames,
                report.anchors.len(),
                r.regret,
                r.bound_theorem1,
                path.display()
            );
        }
        Command::Simulate { scenario, out } => {
            let scn = parse_scenario(&scenario)?;
            let trace = generate_adversarial(&scn)?;
            let path = default_path(out, &format!("{}.jsonl", trace.header.sequence_id));
            write_atomic(&path, &trace.to_bytes()?)?;
            println!("{}: {} frames written to {}", trace.header.sequence_id, trace.frames.len(), path.display());
        }
        Command::Analyze {
            decisions,
            bound_constant,
            report,
        } => {
            let runs = collect_runs(&decisions)?;
            let analysis = analyze(&runs, bound_constant)?;
            let path = default_path(report, "analysis.json");
            write_json_atomic(&path, &analysis)?;
            let p = &analysis.proposition_pseudo_gt;
            println!(
                "{} sequences, mean regret {:.4}, condition {}, outperforms {}, written to {}",
                p.sequences,
                analysis.mean_regret_pseudo_gt,
                p.condition_holds,
                p.outperforms,
                path.display()
            );
        }
        Command::Sweep {
            traces,
            grid,
            seed,
            out,
        } => {
            let grid = parse_grid(&grid)?;
            let files = files_with_suffix(&traces, ".jsonl")?;
            if files.is_empty() {
                bail!("no .jsonl traces in {}", traces.display());
            }
            let traces: Vec<Trace> = files.iter().map(|f| load(f)).collect::<Result<_>>()?;
            let report = theta_sweep(&traces, &grid, seed)?;
            let path = default_path(out, "sweep.json");
            write_json_atomic(&path, &report)?;
            println!("theta\tauc\tanchor_ratio");
            for row in &report.rows {
                let mark = if row.best { "\t*" } else { "" };
                println!("{:.4}\t{:.6}\t{:.6}{mark}", row.theta, row.auc, row.anchor_ratio);
            }
            println!("best theta {} written to {}", report.best_theta, path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
