//! `shelab`: run one configured experiment and write its artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use shelab::config::{parse_config, ExperimentConfig};
use shelab::harness::{run_experiment, Assertion, Executor, Report, Table};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_OUT: &str = "shelab-out";

#[derive(Debug, Parser)]
#[command(name = "shelab", version, about = "Monte Carlo checks for the stable-noise heat equation and its dual")]
struct Args {
    /// JSON experiment config, or a manifest from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's replica count.
    #[arg(long)]
    replicas: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(shelab::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 3,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    seed: u64,
    /// How replica streams are derived from the seed.
    streams: &'a str,
    workers: usize,
    wall_time_seconds: f64,
    passed: bool,
    assertions: &'a [Assertion],
    config: &'a ExperimentConfig,
}

const STREAMS: &str = "ChaCha8 keyed by seed; Y replica r uses stream r, Z replica r for the j-th n uses \
                       stream ((j+1)<<32)|r, auxiliary samplers use streams with the top 32 bits set";

fn load_config(args: &Args) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(io_err(format!("reading {}", args.config.display())))?;
    let mut config = parse_config(&text).map_err(CliError::Config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replicas {
        config.replicas = r;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.display().to_string());
    }
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

/// CSV text: `#` header lines with version, seed and the effective config,
/// then the experiment's table. The output directory is left out of the
/// echo so that a re-run elsewhere produces the same bytes.
fn render_csv(config: &ExperimentConfig, table: &Table) -> Result<Vec<u8>, CliError> {
    let echo = ExperimentConfig { out: None, ..config.clone() };
    let json = serde_json::to_string(&echo).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut bytes = format!(
        "# shelab {VERSION}\n# experiment: {}\n# seed: {}\n# config: {json}\n",
        config.experiment.name(),
        config.seed
    )
    .into_bytes();
    let mut w = csv::Writer::from_writer(&mut bytes);
    let csv_err = |e: csv::Error| CliError::Runtime(format!("writing csv: {e}"));
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err("writing csv"))?;
    drop(w);
    Ok(bytes)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(format!("writing {}", path.display())))
}

fn run(args: &Args) -> Result<bool, CliError> {
    let config = load_config(args)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let exec = Executor::new(workers).map_err(CliError::Config)?;
    let out = PathBuf::from(config.out.clone().unwrap_or_else(|| DEFAULT_OUT.to_string()));
    std::fs::create_dir_all(&out).map_err(io_err(format!("creating {}", out.display())))?;

    let start = Instant::now();
    let report: Report = run_experiment(&config, &exec).map_err(|e| CliError::Runtime(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();

    write(&out.join("results.csv"), &render_csv(&config, &report.table())?)?;
    let report_json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    write(&out.join("report.json"), report_json.as_bytes())?;
    let passed = report.passed();
    let manifest = Manifest {
        version: VERSION,
        seed: config.seed,
        streams: STREAMS,
        workers: exec.workers(),
        wall_time_seconds: wall,
        passed,
        assertions: report.assertions(),
        config: &config,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    write(&out.join("manifest.json"), manifest_json.as_bytes())?;

    for a in report.assertions() {
        println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
