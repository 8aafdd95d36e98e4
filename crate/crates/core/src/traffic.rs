//! Constant-bit-rate request-response applications.
//!
//! Each requester issues a fixed number of uniquely numbered requests at
//! a constant rate, arms a 2-second application timeout per request, and
//! optionally retransmits on expiry. Latency is always measured against
//! the first transmission of a sequence number; a response arriving
//! after the final timeout no longer counts toward the success rate.

use std::collections::{HashMap, HashSet};

use crate::events::Ev;
use crate::kernel::{EventHandle, Scheduler};
use crate::metrics::RunLog;
use crate::packet::NodeId;

/// Application-level retransmission timeout.
pub const APP_TIMEOUT_S: f64 = 2.0;

/// What a consumer asks for: a content prefix (NDN) or a responder
/// address (IP).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Prefix(String),
    Addr(NodeId),
}

#[derive(Debug, Clone, Copy)]
pub struct Outstanding {
    pub first_send: f64,
    pub rtx_count: u32,
    pub timer: EventHandle,
}

/// A request the node's forwarding plane should emit now.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestEmission {
    pub seq: u32,
    pub rtx: u32,
}

#[derive(Debug, PartialEq, Eq)]
pub enum TimeoutAction {
    Retransmit(RequestEmission),
    GiveUp,
    /// Timer raced a response that already resolved the seq; nothing to do.
    Stale,
}

#[derive(Debug, PartialEq, Eq)]
pub enum ResponseOutcome {
    Counted,
    Duplicate,
    /// Response for an abandoned or never-issued seq; ignored.
    Ignored,
}

#[derive(Debug)]
pub struct ConsumerState {
    pub node: NodeId,
    pub target: Target,
    pub next_seq: u32,
    pub total: u32,
    pub interval: f64,
    pub rtx_max: u32,
    pub start_time: f64,
    pub outstanding: HashMap<u32, Outstanding>,
    pub received: HashSet<u32>,
    pub abandoned: u32,
    pub anomalies: u32,
}

impl ConsumerState {
    pub fn new(
        node: NodeId,
        target: Target,
        total: u32,
        rate_per_second: f64,
        rtx_max: u32,
        start_time: f64,
    ) -> Self {
        ConsumerState {
            node,
            target,
            next_seq: 1,
            total,
            interval: 1.0 / rate_per_second,
            rtx_max,
            start_time,
            outstanding: HashMap::new(),
            received: HashSet::new(),
            abandoned: 0,
            anomalies: 0,
        }
    }

    /// Emit the next request, arm its timeout, and schedule the next tick.
    pub fn tick(
        &mut self,
        now: f64,
        sched: &mut Scheduler<Ev>,
        log: &mut RunLog,
    ) -> Option<RequestEmission> {
        if self.next_seq > self.total {
            return None;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let timer = sched
            .schedule(
                now + APP_TIMEOUT_S,
                Ev::AppTimeout {
                    node: self.node,
                    seq,
                },
            )
            .expect("future");
        self.outstanding.insert(
            seq,
            Outstanding {
                first_send: now,
                rtx_count: 0,
                timer,
            },
        );
        log.request(now, self.node, seq, 0);
        if self.next_seq <= self.total {
            sched
                .schedule(now + self.interval, Ev::ConsumerSend { node: self.node })
                .expect("future");
        }
        Some(RequestEmission { seq, rtx: 0 })
    }

    pub fn on_timeout(
        &mut self,
        seq: u32,
        now: f64,
        sched: &mut Scheduler<Ev>,
        log: &mut RunLog,
    ) -> TimeoutAction {
        let Some(o) = self.outstanding.get_mut(&seq) else {
            return TimeoutAction::Stale;
        };
        if o.rtx_count < self.rtx_max {
            o.rtx_count += 1;
            o.timer = sched
                .schedule(
                    now + APP_TIMEOUT_S,
                    Ev::AppTimeout {
                        node: self.node,
                        seq,
                    },
                )
                .expect("future");
            let rtx = o.rtx_count;
            log.request(now, self.node, seq, rtx);
            TimeoutAction::Retransmit(RequestEmission { seq, rtx })
        } else {
            self.outstanding.remove(&seq);
            self.abandoned += 1;
            TimeoutAction::GiveUp
        }
    }

    /// First arrival within the deadline counts; duplicates and late
    /// arrivals do not.
    pub fn on_response(
        &mut self,
        seq: u32,
        hops: u32,
        now: f64,
        sched: &mut Scheduler<Ev>,
        log: &mut RunLog,
    ) -> ResponseOutcome {
        if self.received.contains(&seq) {
            return ResponseOutcome::Duplicate;
        }
        match self.outstanding.remove(&seq) {
            Some(o) => {
                sched.cancel(o.timer);
                self.received.insert(seq);
                log.retrieval(now, self.node, seq, now - o.first_send, hops);
                ResponseOutcome::Counted
            }
            None => {
                self.anomalies += 1;
                ResponseOutcome::Ignored
            }
        }
    }

    /// All requests issued and every seq resolved (received or abandoned).
    pub fn done(&self) -> bool {
        self.next_seq > self.total && self.outstanding.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(rtx_max: u32) -> (ConsumerState, Scheduler<Ev>, RunLog) {
        let c = ConsumerState::new(0, Target::Prefix("A".into()), 500, 5.0, rtx_max, 1.7);
        (c, Scheduler::new(), RunLog::new(1, 500))
    }

    fn advance(sched: &mut Scheduler<Ev>, t: f64) {
        sched.schedule(t, Ev::MobilityTick).unwrap();
        while let Some((time, _)) = sched.pop() {
            if time >= t {
                break;
            }
        }
    }

    #[test]
    fn cadence_is_five_per_second_from_start() {
        let (mut c, mut sched, mut log) = fixture(0);
        advance(&mut sched, 1.7);
        let mut send_times = Vec::new();
        for _ in 0..3 {
            let now = sched.now();
            send_times.push(now);
            c.tick(now, &mut sched, &mut log).unwrap();
            // Next ConsumerSend is the earliest scheduled event after the
            // 2 s timeout only when within 0.2 s; drain to it.
            loop {
                let (t, ev) = sched.pop().unwrap();
                if matches!(ev, Ev::ConsumerSend { .. }) {
                    assert_eq!(sched.now(), t);
                    break;
                }
            }
        }
        assert!((send_times[0] - 1.7).abs() < 1e-12);
        assert!((send_times[1] - 1.9).abs() < 1e-12);
        assert!((send_times[2] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn stops_after_total_requests() {
        let (mut c, mut sched, mut log) = fixture(0);
        c.next_seq = 500;
        assert!(c.tick(0.0, &mut sched, &mut log).is_some());
        assert!(c.tick(0.2, &mut sched, &mut log).is_none());
        assert_eq!(c.next_seq, 501);
    }

    #[test]
    fn rtx_disabled_gives_up_after_one_window() {
        let (mut c, mut sched, mut log) = fixture(0);
        c.tick(1.7, &mut sched, &mut log);
        assert_eq!(c.on_timeout(1, 3.7, &mut sched, &mut log), TimeoutAction::GiveUp);
        assert_eq!(c.abandoned, 1);
        assert!(!c.outstanding.contains_key(&1));
    }

    #[test]
    fn rtx_two_retransmits_then_abandons() {
        let (mut c, mut sched, mut log) = fixture(2);
        c.tick(10.0, &mut sched, &mut log);
        assert_eq!(
            c.on_timeout(1, 12.0, &mut sched, &mut log),
            TimeoutAction::Retransmit(RequestEmission { seq: 1, rtx: 1 })
        );
        assert_eq!(
            c.on_timeout(1, 14.0, &mut sched, &mut log),
            TimeoutAction::Retransmit(RequestEmission { seq: 1, rtx: 2 })
        );
        assert_eq!(c.on_timeout(1, 16.0, &mut sched, &mut log), TimeoutAction::GiveUp);
    }

    #[test]
    fn latency_counts_from_first_send() {
        let (mut c, mut sched, mut log) = fixture(2);
        c.tick(10.0, &mut sched, &mut log);
        c.on_timeout(1, 12.0, &mut sched, &mut log);
        assert_eq!(
            c.on_response(1, 3, 12.5, &mut sched, &mut log),
            ResponseOutcome::Counted
        );
        let lat = log.events.iter().find_map(|e| match e {
            crate::metrics::LogEvent::Retrieval { latency, .. } => Some(*latency),
            _ => None,
        });
        assert_eq!(lat, Some(2.5));
    }

    #[test]
    fn duplicates_and_late_arrivals_ignored() {
        let (mut c, mut sched, mut log) = fixture(0);
        c.tick(10.0, &mut sched, &mut log);
        assert_eq!(
            c.on_response(1, 2, 10.5, &mut sched, &mut log),
            ResponseOutcome::Counted
        );
        assert_eq!(
            c.on_response(1, 2, 10.6, &mut sched, &mut log),
            ResponseOutcome::Duplicate
        );
        // seq 2 abandoned, then a late response shows up.
        c.tick(10.2, &mut sched, &mut log);
        c.on_timeout(2, 12.2, &mut sched, &mut log);
        assert_eq!(
            c.on_response(2, 2, 12.9, &mut sched, &mut log),
            ResponseOutcome::Ignored
        );
        assert_eq!(c.received.len(), 1);
    }

    #[test]
    fn done_requires_all_resolved() {
        let (mut c, mut sched, mut log) = fixture(0);
        c.next_seq = 500;
        c.tick(0.0, &mut sched, &mut log);
        assert!(!c.done());
        c.on_response(500, 1, 0.5, &mut sched, &mut log);
        assert!(c.done());
    }
}
