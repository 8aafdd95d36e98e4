//! Multi-run orchestration, aggregation over runs, sweeps and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::error::{ConfigError, SimError};
use crate::metrics::{write_event_log, RunMetrics};
use crate::scenario::{ScenarioConfig, Scheme};
use crate::world::run_single;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("run {run} failed: {source}")]
    Run { run: u32, source: SimError },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub event_log: bool,
    pub position_trace: bool,
    /// Directory for per-run trace files, when the flags above are set.
    pub out_dir: Option<PathBuf>,
}

/// Mean and sample standard deviation of one metric across runs; absent
/// when no run produced a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    fn over(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat {
                mean: None,
                std: None,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        };
        Stat {
            mean: Some(mean),
            std: Some(std),
        }
    }
}

/// Config echo plus per-metric statistics over the completed runs.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub nodes: usize,
    pub speed: f64,
    pub pattern: crate::scenario::Pattern,
    pub cs: usize,
    pub rtx: u32,
    pub rate: f64,
    pub runs: u32,
    pub esr: Stat,
    pub latency_s: Stat,
    pub tx_events_per_data: Stat,
    pub avg_hops: Stat,
    pub tx_bytes_per_data: Stat,
    pub total_tx: Stat,
    pub total_tx_bytes: Stat,
    pub total_retrieved: Stat,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub per_run: Vec<RunMetrics>,
    pub aggregate: AggregateRow,
}

/// Execute the scenario's runs (in parallel) with seeds derived from the
/// master seed and run index, then aggregate.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    opts: &ExperimentOptions,
) -> Result<ExperimentResult, HarnessError> {
    let per_run: Vec<RunMetrics> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| -> Result<RunMetrics, HarnessError> {
            let out = run_single(cfg.run_config(i, opts.position_trace))
                .map_err(|e| HarnessError::Run { run: i, source: e })?;
            if let Some(dir) = &opts.out_dir {
                if opts.event_log {
                    let mut w = BufWriter::new(File::create(dir.join(format!(
                        "run{i}_events.csv"
                    )))?);
                    write_event_log(&out.log, &mut w)?;
                }
                if opts.position_trace {
                    let mut w = BufWriter::new(File::create(dir.join(format!(
                        "run{i}_positions.csv"
                    )))?);
                    writeln!(w, "time,node,x,y")?;
                    for (t, node, x, y) in &out.position_trace {
                        writeln!(w, "{t:.3},{node},{x:.3},{y:.3}")?;
                    }
                }
            }
            Ok(out.metrics)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(cfg, &per_run);
    Ok(ExperimentResult {
        config: cfg.clone(),
        per_run,
        aggregate,
    })
}

pub fn aggregate(cfg: &ScenarioConfig, per_run: &[RunMetrics]) -> AggregateRow {
    let collect = |f: &dyn Fn(&RunMetrics) -> Option<f64>| -> Vec<f64> {
        per_run.iter().filter_map(f).collect()
    };
    AggregateRow {
        scheme: cfg.scheme,
        nodes: cfg.nodes,
        speed: cfg.speed,
        pattern: cfg.pattern,
        cs: cfg.effective_cs(),
        rtx: cfg.rtx_max,
        rate: cfg.request_rate,
        runs: per_run.len() as u32,
        esr: Stat::over(&collect(&|m| Some(m.esr))),
        latency_s: Stat::over(&collect(&|m| m.avg_latency)),
        tx_events_per_data: Stat::over(&collect(&|m| m.tx_events_per_data)),
        avg_hops: Stat::over(&collect(&|m| m.avg_hops)),
        tx_bytes_per_data: Stat::over(&collect(&|m| m.tx_bytes_per_data)),
        total_tx: Stat::over(&collect(&|m| Some(m.total_tx_events as f64))),
        total_tx_bytes: Stat::over(&collect(&|m| Some(m.total_tx_bytes as f64))),
        total_retrieved: Stat::over(&collect(&|m| Some(m.total_retrieved as f64))),
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

pub const SWEEP_AXES: &[&str] = &[
    "speed",
    "nodes",
    "cs_capacity",
    "rtx_max",
    "request_rate",
    "scheme",
];

/// Set one sweepable key on a scenario.
pub fn apply_axis(cfg: &mut ScenarioConfig, axis: &str, value: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::BadAxisValue {
        axis: axis.to_string(),
        value: value.to_string(),
    };
    match axis {
        "speed" => {
            let v: f64 = value.parse().map_err(|_| bad())?;
            if !(0.0..=8.0).contains(&v) {
                return Err(ConfigError::invalid("speed", "must be within 0-8 m/s"));
            }
            cfg.speed = v;
        }
        "nodes" => {
            let v: usize = value.parse().map_err(|_| bad())?;
            let area = crate::geom::AreaSpec::for_node_count(v)
                .ok_or_else(|| ConfigError::invalid("nodes", "sweep values need a preset"))?;
            cfg.nodes = v;
            cfg.area = area;
        }
        "cs_capacity" | "cs" => {
            let v: usize = value.parse().map_err(|_| bad())?;
            if cfg.scheme == Scheme::Aodv && v != 0 && !cfg.allow_cs_with_aodv {
                return Err(ConfigError::invalid(
                    "cs_capacity",
                    "content store applies only to NDN schemes",
                ));
            }
            cfg.cs_capacity = v;
        }
        "rtx_max" | "rtx" => {
            let v: u32 = value.parse().map_err(|_| bad())?;
            if v > 2 {
                return Err(ConfigError::invalid("rtx_max", "must be 0, 1 or 2"));
            }
            cfg.rtx_max = v;
        }
        "request_rate" | "rate" => {
            let v: f64 = value.parse().map_err(|_| bad())?;
            if v <= 0.0 {
                return Err(ConfigError::invalid("request_rate", "must be positive"));
            }
            cfg.request_rate = v;
        }
        "scheme" => {
            cfg.scheme = Scheme::parse(value).ok_or_else(bad)?;
        }
        other => return Err(ConfigError::UnknownAxis(other.to_string())),
    }
    Ok(())
}

/// Cross-product of the axis values applied to the base scenario, one
/// experiment per combination, in axis-major order.
pub fn sweep(
    base: &ScenarioConfig,
    axes: &[(String, Vec<String>)],
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentResult>, HarnessError> {
    let mut combos: Vec<ScenarioConfig> = vec![base.clone()];
    for (axis, values) in axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for cfg in &combos {
            for value in values {
                let mut c = cfg.clone();
                apply_axis(&mut c, axis, value)?;
                next.push(c);
            }
        }
        combos = next;
    }
    combos
        .iter()
        .map(|cfg| run_experiment(cfg, opts))
        .collect()
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

pub const RUNS_CSV_HEADER: &str = "scheme,nodes,speed,pattern,cs,rtx,rate,run,esr,latency_s,\
     tx_events_per_data,avg_hops,tx_bytes_per_data,total_tx,total_retrieved";

pub const AGGREGATE_CSV_HEADER: &str = "scheme,nodes,speed,pattern,cs,rtx,rate,runs,\
     esr_mean,esr_std,latency_s_mean,latency_s_std,\
     tx_events_per_data_mean,tx_events_per_data_std,avg_hops_mean,avg_hops_std,\
     tx_bytes_per_data_mean,tx_bytes_per_data_std,\
     total_tx_mean,total_tx_std,total_tx_bytes_mean,total_tx_bytes_std,\
     total_retrieved_mean,total_retrieved_std";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

pub fn write_runs_csv<W: Write>(out: &mut W, results: &[&ExperimentResult]) -> std::io::Result<()> {
    writeln!(out, "{RUNS_CSV_HEADER}")?;
    for r in results {
        let c = &r.config;
        for (i, m) in r.per_run.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.scheme,
                c.nodes,
                c.speed,
                c.pattern,
                c.effective_cs(),
                c.rtx_max,
                c.request_rate,
                i,
                format_args!("{:.6}", m.esr),
                fmt_opt(m.avg_latency),
                fmt_opt(m.tx_events_per_data),
                fmt_opt(m.avg_hops),
                fmt_opt(m.tx_bytes_per_data),
                m.total_tx_events,
                m.total_retrieved,
            )?;
        }
    }
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(
    out: &mut W,
    results: &[&ExperimentResult],
) -> std::io::Result<()> {
    writeln!(out, "{AGGREGATE_CSV_HEADER}")?;
    for r in results {
        let a = &r.aggregate;
        let cells = [
            a.scheme.to_string(),
            a.nodes.to_string(),
            a.speed.to_string(),
            a.pattern.to_string(),
            a.cs.to_string(),
            a.rtx.to_string(),
            a.rate.to_string(),
            a.runs.to_string(),
            fmt_opt(a.esr.mean),
            fmt_opt(a.esr.std),
            fmt_opt(a.latency_s.mean),
            fmt_opt(a.latency_s.std),
            fmt_opt(a.tx_events_per_data.mean),
            fmt_opt(a.tx_events_per_data.std),
            fmt_opt(a.avg_hops.mean),
            fmt_opt(a.avg_hops.std),
            fmt_opt(a.tx_bytes_per_data.mean),
            fmt_opt(a.tx_bytes_per_data.std),
            fmt_opt(a.total_tx.mean),
            fmt_opt(a.total_tx.std),
            fmt_opt(a.total_tx_bytes.mean),
            fmt_opt(a.total_tx_bytes.std),
            fmt_opt(a.total_retrieved.mean),
            fmt_opt(a.total_retrieved.std),
        ];
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Write `runs.csv` and `aggregate.csv` under `dir`.
pub fn write_experiment_files(
    dir: &Path,
    results: &[&ExperimentResult],
) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let runs_path = dir.join("runs.csv");
    let agg_path = dir.join("aggregate.csv");
    let mut runs = BufWriter::new(File::create(&runs_path)?);
    write_runs_csv(&mut runs, results)?;
    runs.flush()?;
    let mut agg = BufWriter::new(File::create(&agg_path)?);
    write_aggregate_csv(&mut agg, results)?;
    agg.flush()?;
    Ok((runs_path, agg_path))
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Rows of every aggregate CSV found under `dir` (non-recursive), as
/// strings, header excluded.
pub fn read_aggregate_rows(dir: &Path) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut rows = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && std::fs::read_to_string(p)
                    .map(|t| t.starts_with(AGGREGATE_CSV_HEADER))
                    .unwrap_or(false)
        })
        .collect();
    paths.sort();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        for line in text.lines().skip(1) {
            if !line.is_empty() {
                rows.push(line.split(',').map(str::to_string).collect());
            }
        }
    }
    Ok(rows)
}

/// Plain-text table of selected aggregate columns.
pub fn render_report(rows: &[Vec<String>]) -> String {
    let header = [
        "scheme", "nodes", "speed", "pattern", "cs", "rtx", "rate", "runs", "esr", "latency_s",
        "tx/data", "hops", "bytes/data",
    ];
    // Column indexes into the aggregate CSV (means only).
    let picks = [0usize, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        table.push(
            picks
                .iter()
                .map(|&i| row.get(i).cloned().unwrap_or_default())
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        for (c, cell) in row.iter().enumerate() {
            out.push_str(&format!("{cell:>width$}  ", width = widths[c]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Pattern;

    fn tiny_scenario() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default_for(Scheme::Daf);
        cfg.runs = 2;
        cfg.requests_per_consumer = 5;
        cfg.pattern = Pattern::ManyToOne;
        cfg
    }

    #[test]
    fn experiment_is_reproducible_and_aggregates_match() {
        let cfg = tiny_scenario();
        let opts = ExperimentOptions::default();
        let a = run_experiment(&cfg, &opts).unwrap();
        let b = run_experiment(&cfg, &opts).unwrap();
        assert_eq!(a.per_run, b.per_run, "same seeds, same metrics");

        // Independent recomputation of the aggregate.
        let esr: Vec<f64> = a.per_run.iter().map(|m| m.esr).collect();
        let mean = esr.iter().sum::<f64>() / esr.len() as f64;
        assert!((a.aggregate.esr.mean.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn single_run_has_zero_stddev() {
        let mut cfg = tiny_scenario();
        cfg.runs = 1;
        let r = run_experiment(&cfg, &ExperimentOptions::default()).unwrap();
        assert_eq!(r.aggregate.esr.std, Some(0.0));
    }

    #[test]
    fn csv_schema_is_stable() {
        // Golden column sets; changing them is a breaking schema change.
        assert_eq!(
            RUNS_CSV_HEADER,
            "scheme,nodes,speed,pattern,cs,rtx,rate,run,esr,latency_s,\
             tx_events_per_data,avg_hops,tx_bytes_per_data,total_tx,total_retrieved"
        );
        assert!(AGGREGATE_CSV_HEADER.starts_with("scheme,nodes,speed,pattern,cs,rtx,rate,runs,"));

        let cfg = tiny_scenario();
        let r = run_experiment(&cfg, &ExperimentOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &[&r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RUNS_CSV_HEADER));
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), RUNS_CSV_HEADER.split(',').count());
        assert!(first.starts_with("daf,50,0,many-to-one,200,0,5,0,"));
    }

    #[test]
    fn rerun_writes_identical_bytes() {
        let cfg = tiny_scenario();
        let opts = ExperimentOptions::default();
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        let ra = run_experiment(&cfg, &opts).unwrap();
        let rb = run_experiment(&cfg, &opts).unwrap();
        write_runs_csv(&mut bytes_a, &[&ra]).unwrap();
        write_runs_csv(&mut bytes_b, &[&rb]).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn sweep_cross_product_and_unknown_axis() {
        let mut cfg = tiny_scenario();
        cfg.runs = 1;
        let axes = vec![
            ("speed".to_string(), vec!["0".to_string(), "4".to_string()]),
            (
                "scheme".to_string(),
                vec!["daf".to_string(), "aodv".to_string()],
            ),
        ];
        let results = sweep(&cfg, &axes, &ExperimentOptions::default()).unwrap();
        assert_eq!(results.len(), 4);
        assert_eq!(results[0].config.scheme, Scheme::Daf);
        assert_eq!(results[1].config.scheme, Scheme::Aodv);
        assert_eq!(results[1].config.effective_cs(), 0, "cs inert under aodv");
        assert_eq!(results[2].config.speed, 4.0);

        let mut bad = tiny_scenario();
        assert!(matches!(
            apply_axis(&mut bad, "bogus", "1"),
            Err(ConfigError::UnknownAxis(_))
        ));
    }

    #[test]
    fn report_renders_rows() {
        let cfg = tiny_scenario();
        let r = run_experiment(&cfg, &ExperimentOptions::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("manetsim-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        write_experiment_files(&dir, &[&r]).unwrap();
        let rows = read_aggregate_rows(&dir).unwrap();
        assert_eq!(rows.len(), 1);
        let table = render_report(&rows);
        assert!(table.contains("daf"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
