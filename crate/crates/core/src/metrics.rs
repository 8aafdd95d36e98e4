//! Run log and the four-metric computation.
//!
//! The log is the ground truth for a run: every frame transmission,
//! unique request and counted retrieval. Metrics are a pure function of
//! the log, so a persisted log recomputes to exactly the in-run values.

use std::io::{BufRead, Write};

use crate::packet::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum LogEvent {
    /// One frame transmission by one node (never per receiver).
    Tx {
        time: f64,
        node: NodeId,
        kind: &'static str,
        bytes: usize,
    },
    /// A consumer issued (or re-issued) a request. `rtx` = 0 on first send.
    Request {
        time: f64,
        consumer: NodeId,
        seq: u32,
        rtx: u32,
    },
    /// First response for a seq that arrived within its deadline.
    Retrieval {
        time: f64,
        consumer: NodeId,
        seq: u32,
        latency: f64,
        hops: u32,
    },
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub consumer_count: usize,
    pub requests_per_consumer: u32,
    pub events: Vec<LogEvent>,
}

impl RunLog {
    pub fn new(consumer_count: usize, requests_per_consumer: u32) -> Self {
        RunLog {
            consumer_count,
            requests_per_consumer,
            events: Vec::new(),
        }
    }

    pub fn tx(&mut self, time: f64, node: NodeId, kind: &'static str, bytes: usize) {
        self.events.push(LogEvent::Tx {
            time,
            node,
            kind,
            bytes,
        });
    }

    pub fn request(&mut self, time: f64, consumer: NodeId, seq: u32, rtx: u32) {
        self.events.push(LogEvent::Request {
            time,
            consumer,
            seq,
            rtx,
        });
    }

    pub fn retrieval(&mut self, time: f64, consumer: NodeId, seq: u32, latency: f64, hops: u32) {
        self.events.push(LogEvent::Retrieval {
            time,
            consumer,
            seq,
            latency,
            hops,
        });
    }
}

/// Per-run result record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Retrieved data as a percentage of unique requests issued
    /// (the denominator is fixed at requests-per-consumer x consumers).
    pub esr: f64,
    /// Mean round-trip time over counted retrievals, first-request based.
    pub avg_latency: Option<f64>,
    pub tx_events_per_data: Option<f64>,
    pub avg_hops: Option<f64>,
    pub tx_bytes_per_data: Option<f64>,
    pub total_tx_events: u64,
    pub total_tx_bytes: u64,
    pub total_retrieved: u64,
    pub unique_requests: u64,
}

/// Pure recomputation of the metric suite from a run log.
pub fn compute_metrics(log: &RunLog) -> RunMetrics {
    let mut tx_events = 0u64;
    let mut tx_bytes = 0u64;
    let mut retrieved = 0u64;
    let mut latency_sum = 0.0;
    let mut hops_sum = 0u64;
    for ev in &log.events {
        match ev {
            LogEvent::Tx { bytes, .. } => {
                tx_events += 1;
                tx_bytes += *bytes as u64;
            }
            LogEvent::Request { .. } => {}
            LogEvent::Retrieval { latency, hops, .. } => {
                retrieved += 1;
                latency_sum += *latency;
                hops_sum += u64::from(*hops);
            }
        }
    }
    let unique_requests = log.consumer_count as u64 * u64::from(log.requests_per_consumer);
    let ratio = |num: f64| -> Option<f64> {
        if retrieved > 0 {
            Some(num / retrieved as f64)
        } else {
            None
        }
    };
    RunMetrics {
        esr: if unique_requests > 0 {
            100.0 * retrieved as f64 / unique_requests as f64
        } else {
            0.0
        },
        avg_latency: ratio(latency_sum),
        tx_events_per_data: ratio(tx_events as f64),
        avg_hops: ratio(hops_sum as f64),
        tx_bytes_per_data: ratio(tx_bytes as f64),
        total_tx_events: tx_events,
        total_tx_bytes: tx_bytes,
        total_retrieved: retrieved,
        unique_requests,
    }
}

/// Event-log CSV schema: `time,node,event,detail,size,hops`. Floats use
/// Rust's shortest round-trip formatting so a reloaded log recomputes to
/// bit-identical metrics.
pub fn write_event_log<W: Write>(log: &RunLog, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "time,node,event,detail,size,hops")?;
    writeln!(
        out,
        "0,0,meta,consumers={};per={},0,0",
        log.consumer_count, log.requests_per_consumer
    )?;
    for ev in &log.events {
        match ev {
            LogEvent::Tx {
                time,
                node,
                kind,
                bytes,
            } => writeln!(out, "{time},{node},tx,{kind},{bytes},0")?,
            LogEvent::Request {
                time,
                consumer,
                seq,
                rtx,
            } => writeln!(out, "{time},{consumer},request,{seq},{rtx},0")?,
            LogEvent::Retrieval {
                time,
                consumer,
                seq,
                latency,
                hops,
            } => writeln!(out, "{time},{consumer},retrieval,{seq}:{latency},0,{hops}")?,
        }
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> std::io::Result<RunLog> {
    let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let mut log = RunLog::new(0, 0);
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if idx == 0 || line.is_empty() {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad("event log rows have 6 fields"));
        }
        let time: f64 = fields[0].parse().map_err(|_| bad("bad time"))?;
        let node: NodeId = fields[1].parse().map_err(|_| bad("bad node"))?;
        match fields[2] {
            "meta" => {
                for part in fields[3].split(';') {
                    if let Some(v) = part.strip_prefix("consumers=") {
                        log.consumer_count = v.parse().map_err(|_| bad("bad consumers"))?;
                    } else if let Some(v) = part.strip_prefix("per=") {
                        log.requests_per_consumer = v.parse().map_err(|_| bad("bad per"))?;
                    }
                }
            }
            "tx" => {
                let kind = match fields[3] {
                    "interest" => "interest",
                    "data" => "data",
                    "ip_request" => "ip_request",
                    "ip_response" => "ip_response",
                    "rreq" => "rreq",
                    "rrep" => "rrep",
                    "rerr" => "rerr",
                    "hello" => "hello",
                    _ => "other",
                };
                let bytes: usize = fields[4].parse().map_err(|_| bad("bad size"))?;
                log.tx(time, node, kind, bytes);
            }
            "request" => {
                let seq: u32 = fields[3].parse().map_err(|_| bad("bad seq"))?;
                let rtx: u32 = fields[4].parse().map_err(|_| bad("bad rtx"))?;
                log.request(time, node, seq, rtx);
            }
            "retrieval" => {
                let (seq, latency) = fields[3]
                    .split_once(':')
                    .ok_or_else(|| bad("bad retrieval detail"))?;
                let seq: u32 = seq.parse().map_err(|_| bad("bad seq"))?;
                let latency: f64 = latency.parse().map_err(|_| bad("bad latency"))?;
                let hops: u32 = fields[5].parse().map_err(|_| bad("bad hops"))?;
                log.retrieval(time, node, seq, latency, hops);
            }
            other => return Err(bad(&format!("unknown event `{other}`"))),
        }
    }
    Ok(log)
}
