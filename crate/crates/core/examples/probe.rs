//! Scratch diagnostics: per-run internals for one scenario.
//! Usage: probe <scheme> [speed] [runs] [pattern]

use manetsim_core::harness;
use manetsim_core::metrics::LogEvent;
use manetsim_core::scenario::{Pattern, ScenarioConfig, Scheme};
use manetsim_core::world::run_single;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let scheme = Scheme::parse(args.get(1).map(String::as_str).unwrap_or("daf")).unwrap();
    let speed: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let runs: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let pattern = match args.get(4).map(String::as_str) {
        Some("m2m") => Pattern::ManyToMany,
        Some("m21") => Pattern::ManyToOne,
        _ => Pattern::OneToOne,
    };

    let mut cfg = ScenarioConfig::default_for(scheme);
    cfg.speed = speed;
    cfg.pattern = pattern;
    cfg.runs = runs;

    println!(
        "scheme={} speed={} pattern={:?} runs={}",
        scheme, speed, pattern, runs
    );
    for i in 0..runs {
        let out = run_single(cfg.run_config(i, false)).unwrap();
        let m = &out.metrics;
        let mut kinds: std::collections::BTreeMap<&str, u64> = Default::default();
        for e in &out.log.events {
            if let LogEvent::Tx { kind, .. } = e {
                *kinds.entry(kind).or_default() += 1;
            }
        }
        let mut per_consumer: std::collections::BTreeMap<usize, u32> = Default::default();
        for e in &out.log.events {
            if let LogEvent::Retrieval { consumer, .. } = e {
                *per_consumer.entry(*consumer).or_default() += 1;
            }
        }
        println!(
            "run {i}: esr={:.2} lat={:?} tx/data={:?} hops={:?} collisions={} bc={} uc={} fib_to={} clock={:.1} kinds={:?}",
            m.esr,
            m.avg_latency.map(|v| (v * 1e3).round() / 1e3),
            m.tx_events_per_data.map(|v| v.round()),
            m.avg_hops.map(|v| (v * 100.0).round() / 100.0),
            out.collisions,
            out.broadcast_tx,
            out.unicast_tx,
            out.fib_timeouts,
            out.final_clock,
            kinds
        );
        println!("   per-consumer: {per_consumer:?}");
    }
    let agg = harness::run_experiment(&cfg, &Default::default()).unwrap();
    println!(
        "aggregate esr={:?}+-{:?}",
        agg.aggregate.esr.mean.map(|v| (v * 100.0).round() / 100.0),
        agg.aggregate.esr.std.map(|v| (v * 100.0).round() / 100.0)
    );
}
