//! Simplified CSMA/CA shared medium.
//!
//! One channel at 11 Mb/s. A sender carrier-senses over an extended
//! neighborhood; a medium that was busy within the last DIFS forces a
//! deferral and a uniform backoff. Every frame re-contends until it wins
//! the channel, DCF-style: a sensed-busy backoff round doubles a unicast
//! frame's contention window (capped) but never discards the frame.
//! Each frame is transmitted exactly once; there is no link-layer ACK in
//! either mode, so a collision is silent: a receiver keeps a frame only
//! when it is the unique audible transmission overlapping its airtime.

use std::collections::VecDeque;

use crate::events::Ev;
use crate::geom::{in_range, NodePosition};
use crate::kernel::{RngStream, Scheduler};
use crate::metrics::RunLog;
use crate::packet::{NodeId, Packet};

pub const BITRATE_BPS: f64 = 11e6;
/// Preamble/PLCP equivalent added to every frame's serialization time.
pub const MAC_OVERHEAD_S: f64 = 192e-6;
pub const DIFS_S: f64 = 50e-6;
pub const SLOT_S: f64 = 20e-6;
pub const CW_INITIAL: u32 = 31;
pub const CW_MAX: u32 = 1023;
/// Carrier sensing reaches beyond the decode range, as 802.11 energy
/// detection does. At 2x the radio radius, two senders audible to a
/// common receiver always sense each other, so collisions come from
/// same-instant starts under contention rather than hidden terminals.
pub const CS_RANGE_FACTOR: f64 = 2.0;
/// How long finished transmissions stay visible for overlap checks.
const RETENTION_S: f64 = 0.1;

pub fn airtime(bytes: usize) -> f64 {
    bytes as f64 * 8.0 / BITRATE_BPS + MAC_OVERHEAD_S
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    Broadcast,
    Unicast(NodeId),
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub sender: NodeId,
    pub mode: FrameMode,
    pub packet: Packet,
}

#[derive(Debug, Clone)]
pub struct Transmission {
    pub id: u64,
    pub frame: Frame,
    pub start: f64,
    pub end: f64,
}

/// A frame that survived the collision rules at one receiver.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub receiver: NodeId,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    /// Medium was idle a full DIFS: transmit right after DIFS.
    FastPending,
    /// Waiting for an audible ongoing transmission to end.
    Deferring,
    /// Backoff drawn; sense again when it expires.
    BackoffPending,
    Transmitting,
}

struct MacState {
    queue: VecDeque<Frame>,
    phase: Phase,
    cw: u32,
}

impl MacState {
    fn new() -> Self {
        MacState {
            queue: VecDeque::new(),
            phase: Phase::Idle,
            cw: CW_INITIAL,
        }
    }
}

pub struct Medium {
    radius: f64,
    cs_radius: f64,
    macs: Vec<MacState>,
    live: Vec<Transmission>,
    next_tx_id: u64,
    /// Frames lost at a receiver because of overlapping audible frames.
    pub collisions: u64,
    pub broadcast_tx: u64,
    pub unicast_tx: u64,
}

impl Medium {
    pub fn new(node_count: usize, radius: f64) -> Self {
        Medium {
            radius,
            cs_radius: radius * CS_RANGE_FACTOR,
            macs: (0..node_count).map(|_| MacState::new()).collect(),
            live: Vec::new(),
            next_tx_id: 0,
            collisions: 0,
            broadcast_tx: 0,
            unicast_tx: 0,
        }
    }

    pub fn queue_len(&self, node: NodeId) -> usize {
        self.macs[node].queue.len()
    }

    /// Hand a frame to the sender's MAC.
    pub fn enqueue(
        &mut self,
        frame: Frame,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
    ) {
        let node = frame.sender;
        self.macs[node].queue.push_back(frame);
        if self.macs[node].phase == Phase::Idle {
            self.begin_cycle(node, sched, positions, rng);
        }
    }

    fn begin_cycle(
        &mut self,
        node: NodeId,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
    ) {
        let st = &mut self.macs[node];
        debug_assert_eq!(st.phase, Phase::Idle);
        if st.queue.is_empty() {
            return;
        }
        st.cw = CW_INITIAL;
        self.continue_cycle(node, true, sched, positions, rng);
    }

    fn continue_cycle(
        &mut self,
        node: NodeId,
        fast_allowed: bool,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
    ) {
        let now = sched.now();
        if fast_allowed && self.idle_for_difs(node, now, positions) {
            self.macs[node].phase = Phase::FastPending;
            sched
                .schedule(now + DIFS_S, Ev::MacFire { node })
                .expect("future");
        } else if let Some(end) = self.earliest_audible_end(node, now, positions) {
            self.macs[node].phase = Phase::Deferring;
            sched.schedule(end, Ev::MacWake { node }).expect("future");
        } else {
            // Idle now but busy within the last DIFS: mandatory backoff.
            let slots = rng.index_inclusive(self.macs[node].cw as usize) as f64;
            self.macs[node].phase = Phase::BackoffPending;
            sched
                .schedule(now + DIFS_S + slots * SLOT_S, Ev::MacFire { node })
                .expect("future");
        }
    }

    pub fn on_wake(
        &mut self,
        node: NodeId,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
    ) {
        debug_assert_eq!(self.macs[node].phase, Phase::Deferring);
        self.continue_cycle(node, false, sched, positions, rng);
    }

    pub fn on_fire(
        &mut self,
        node: NodeId,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
        log: &mut RunLog,
    ) {
        let now = sched.now();
        match self.macs[node].phase {
            Phase::FastPending => {
                if self.idle_for_difs(node, now, positions) {
                    self.transmit(node, sched, log);
                } else {
                    // Contention appeared during DIFS; no attempt consumed.
                    self.continue_cycle(node, false, sched, positions, rng);
                }
            }
            Phase::BackoffPending => {
                if self.earliest_audible_end(node, now, positions).is_none() {
                    self.transmit(node, sched, log);
                } else {
                    self.failed_attempt(node, sched, positions, rng);
                }
            }
            other => unreachable!("MacFire in phase {other:?}"),
        }
    }

    fn failed_attempt(
        &mut self,
        node: NodeId,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
    ) {
        let st = &mut self.macs[node];
        // Binary exponential backoff on sensed-busy rounds for unicast;
        // broadcast re-contends at the initial window. Neither mode
        // discards the frame.
        if matches!(st.queue.front().expect("frame at head").mode, FrameMode::Unicast(_)) {
            st.cw = (st.cw * 2 + 1).min(CW_MAX);
        }
        self.continue_cycle(node, false, sched, positions, rng);
    }

    fn transmit(&mut self, node: NodeId, sched: &mut Scheduler<Ev>, log: &mut RunLog) {
        let now = sched.now();
        let frame = self.macs[node].queue.pop_front().expect("frame at head");
        let bytes = frame.packet.wire_size();
        let end = now + airtime(bytes);
        let id = self.next_tx_id;
        self.next_tx_id += 1;
        match frame.mode {
            FrameMode::Broadcast => self.broadcast_tx += 1,
            FrameMode::Unicast(_) => self.unicast_tx += 1,
        }
        log.tx(now, node, frame.packet.kind(), bytes);
        self.live.push(Transmission {
            id,
            frame,
            start: now,
            end,
        });
        self.macs[node].phase = Phase::Transmitting;
        sched.schedule(end, Ev::TxEnd { tx_id: id }).expect("future");
    }

    /// Resolve per-receiver outcomes for a finished transmission and
    /// start the sender's next queued frame.
    pub fn on_tx_end(
        &mut self,
        tx_id: u64,
        sched: &mut Scheduler<Ev>,
        positions: &[NodePosition],
        rng: &mut RngStream,
    ) -> Vec<Delivery> {
        let now = sched.now();
        let tx = self
            .live
            .iter()
            .find(|t| t.id == tx_id)
            .expect("transmission exists")
            .clone();
        let sender = tx.frame.sender;

        let mut deliveries = Vec::new();
        for receiver in 0..positions.len() {
            if receiver == sender
                || !in_range(&positions[sender], &positions[receiver], self.radius)
            {
                continue;
            }
            let interfered = self.live.iter().any(|g| {
                g.id != tx.id
                    && g.start < tx.end
                    && tx.start < g.end
                    && in_range(&positions[g.frame.sender], &positions[receiver], self.radius)
            });
            if interfered {
                self.collisions += 1;
            } else {
                deliveries.push(Delivery {
                    receiver,
                    frame: tx.frame.clone(),
                });
            }
        }

        self.macs[sender].phase = Phase::Idle;
        self.begin_cycle(sender, sched, positions, rng);
        self.live.retain(|t| t.end > now - RETENTION_S);
        deliveries
    }

    fn idle_for_difs(&self, node: NodeId, t: f64, positions: &[NodePosition]) -> bool {
        !self.live.iter().any(|g| {
            g.start < t
                && g.end > t - DIFS_S
                && in_range(&positions[g.frame.sender], &positions[node], self.cs_radius)
        })
    }

    fn earliest_audible_end(&self, node: NodeId, t: f64, positions: &[NodePosition]) -> Option<f64> {
        self.live
            .iter()
            .filter(|g| {
                g.start < t
                    && g.end > t
                    && in_range(&positions[g.frame.sender], &positions[node], self.cs_radius)
            })
            .map(|g| g.end)
            .min_by(|a, b| a.partial_cmp(b).expect("finite"))
    }
}
