//! Command-line front end: run one scenario, sweep parameter axes, or
//! report over previously written aggregates.
//!
//! Exit codes: 0 success, 1 configuration error, 2 run failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manetsim_core::harness::{
    self, ExperimentOptions, ExperimentResult, HarnessError,
};
use manetsim_core::ScenarioConfig;

#[derive(Parser)]
#[command(name = "manetsim", version, about = "MANET forwarding-scheme simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Output directory (falls back to $MANETSIM_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario: N seeded runs plus an aggregate row.
    Run {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's run count.
        #[arg(long)]
        runs: Option<u32>,
        #[command(flatten)]
        out: OutArg,
        /// Write a per-run event log (time,node,event,detail,size,hops).
        #[arg(long)]
        event_log: bool,
        /// Write a per-run position trace (time,node,x,y).
        #[arg(long)]
        trace_positions: bool,
    },
    /// Cross-product sweep over one or more parameter axes.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Axis name; repeat together with --values for a cross product.
        #[arg(long, required = true)]
        axis: Vec<String>,
        /// Comma-separated values, one --values per --axis.
        #[arg(long, required = true)]
        values: Vec<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Print a table over the aggregate CSVs in a directory and write
    /// a combined report.csv.
    Report {
        /// Directory containing aggregate CSV files.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn resolve_out(arg: OutArg) -> Result<PathBuf, String> {
    arg.out
        .or_else(|| std::env::var_os("MANETSIM_OUT").map(PathBuf::from))
        .ok_or_else(|| "no output directory: pass --out or set MANETSIM_OUT".to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("run failure: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Config(String),
    Run(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            runs,
            out,
            event_log,
            trace_positions,
        } => {
            let out_dir = resolve_out(out).map_err(CliError::Config)?;
            let mut cfg =
                ScenarioConfig::load(&scenario).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if let Some(runs) = runs {
                if runs == 0 {
                    return Err(CliError::Config("runs must be at least 1".into()));
                }
                cfg.runs = runs;
            }
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Run(e.to_string()))?;
            let opts = ExperimentOptions {
                event_log,
                position_trace: trace_positions,
                out_dir: Some(out_dir.clone()),
            };
            let result = harness::run_experiment(&cfg, &opts)?;
            let (runs_path, agg_path) = harness::write_experiment_files(&out_dir, &[&result])?;
            println!("wrote {} and {}", runs_path.display(), agg_path.display());
            print_aggregates(&[&result]);
            Ok(())
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => {
            let out_dir = resolve_out(out).map_err(CliError::Config)?;
            if axis.len() != values.len() {
                return Err(CliError::Config(
                    "each --axis needs a matching --values".into(),
                ));
            }
            let cfg =
                ScenarioConfig::load(&scenario).map_err(|e| CliError::Config(e.to_string()))?;
            let axes: Vec<(String, Vec<String>)> = axis
                .into_iter()
                .zip(values)
                .map(|(a, v)| (a, v.split(',').map(str::to_string).collect()))
                .collect();
            let results = harness::sweep(&cfg, &axes, &ExperimentOptions::default())?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Run(e.to_string()))?;
            let refs: Vec<&ExperimentResult> = results.iter().collect();
            let (runs_path, agg_path) = harness::write_experiment_files(&out_dir, &refs)?;
            println!("wrote {} and {}", runs_path.display(), agg_path.display());
            print_aggregates(&refs);
            Ok(())
        }
        Command::Report { input } => {
            let rows = harness::read_aggregate_rows(&input)?;
            if rows.is_empty() {
                return Err(CliError::Config(format!(
                    "no aggregate CSV files under {}",
                    input.display()
                )));
            }
            print!("{}", harness::render_report(&rows));
            let report_path = input.join("report.csv");
            let mut text = String::from(harness::AGGREGATE_CSV_HEADER);
            text.push('\n');
            for row in &rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            std::fs::write(&report_path, text).map_err(|e| CliError::Run(e.to_string()))?;
            println!("wrote {}", report_path.display());
            Ok(())
        }
    }
}

fn print_aggregates(results: &[&ExperimentResult]) {
    let mut rows = Vec::new();
    for r in results {
        let mut buf = Vec::new();
        harness::write_aggregate_csv(&mut buf, &[r]).expect("in-memory write");
        let text = String::from_utf8(buf).expect("utf8");
        for line in text.lines().skip(1) {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    print!("{}", harness::render_report(&rows));
}
