//! Address-based forwarding with AODV route discovery and maintenance.
//!
//! Reactive discovery: a node with traffic but no route buffers the
//! packet and floods an RREQ; the destination (or an intermediate node
//! with a fresh-enough route) unicasts an RREP back along the reverse
//! path. HELLO beacons plus overheard traffic provide neighbor liveness;
//! a silent next-hop invalidates its routes and triggers an RERR flood
//! back toward the sources. Constants follow RFC 3561 defaults.

use std::collections::{HashMap, VecDeque};

use crate::events::Ev;
use crate::kernel::{EventHandle, Scheduler};
use crate::medium::{Frame, FrameMode};
use crate::packet::{AodvControl, NodeId, Packet};

pub const ACTIVE_ROUTE_TIMEOUT_S: f64 = 3.0;
pub const HELLO_INTERVAL_S: f64 = 1.0;
pub const ALLOWED_HELLO_LOSS: f64 = 2.0;
/// Additional RREQ attempts after the first.
pub const RREQ_RETRIES: u32 = 2;
/// 2 x NODE_TRAVERSAL_TIME (40 ms) x NET_DIAMETER (35).
pub const NET_TRAVERSAL_TIME_S: f64 = 2.8;
pub const RREQ_ID_LIFETIME_S: f64 = 6.0;
pub const PENDING_BUFFER_CAP: usize = 64;
pub const IP_HOP_LIMIT: u32 = 32;

#[derive(Debug, Clone, Copy)]
pub struct RouteEntry {
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq: u32,
    pub seq_known: bool,
    pub expiry: f64,
    pub active: bool,
}

impl RouteEntry {
    pub fn usable(&self, now: f64) -> bool {
        self.active && self.expiry > now
    }
}

#[derive(Debug)]
pub struct PendingDiscovery {
    pub attempt: u32,
    pub buffer: VecDeque<Packet>,
    pub timer: EventHandle,
}

/// Packets surfacing at this node's application layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Upcall {
    /// A request reached its destination; `hops` counts the transmissions
    /// it took.
    Request {
        src: NodeId,
        seq: u32,
        sent_at: f64,
        hops: u32,
    },
    /// A response reached the original requester.
    Response { seq: u32, hops: u32 },
}

pub struct AodvCtx<'a> {
    pub now: f64,
    pub sched: &'a mut Scheduler<Ev>,
    pub outbox: &'a mut Vec<Frame>,
}

pub struct AodvNode {
    pub id: NodeId,
    pub own_seq: u32,
    next_rreq_id: u32,
    pub routes: HashMap<NodeId, RouteEntry>,
    pub pending: HashMap<NodeId, PendingDiscovery>,
    rreq_seen: HashMap<(NodeId, u32), f64>,
    pub last_heard: HashMap<NodeId, f64>,
    last_tx: f64,
    pub buffer_drops: u64,
}

impl AodvNode {
    pub fn new(id: NodeId) -> Self {
        AodvNode {
            id,
            own_seq: 0,
            next_rreq_id: 0,
            routes: HashMap::new(),
            pending: HashMap::new(),
            rreq_seen: HashMap::new(),
            last_heard: HashMap::new(),
            last_tx: f64::NEG_INFINITY,
            buffer_drops: 0,
        }
    }

    /// Any successfully received frame counts as a HELLO for liveness.
    pub fn heard(&mut self, neighbor: NodeId, now: f64) {
        self.last_heard.insert(neighbor, now);
    }

    fn send(&mut self, ctx: &mut AodvCtx, mode: FrameMode, packet: Packet) {
        self.last_tx = ctx.now;
        ctx.outbox.push(Frame {
            sender: self.id,
            mode,
            packet,
        });
    }

    pub fn usable_route(&self, dest: NodeId, now: f64) -> Option<RouteEntry> {
        self.routes.get(&dest).copied().filter(|r| r.usable(now))
    }

    fn refresh_route(&mut self, dest: NodeId, now: f64) {
        if let Some(r) = self.routes.get_mut(&dest) {
            if r.usable(now) {
                r.expiry = now + ACTIVE_ROUTE_TIMEOUT_S;
            }
        }
    }

    /// Install or update a route per the sequence-number freshness rules.
    fn install_route(
        &mut self,
        dest: NodeId,
        next_hop: NodeId,
        hop_count: u32,
        seq: Option<u32>,
        now: f64,
    ) {
        if dest == self.id {
            return;
        }
        let fresh = RouteEntry {
            next_hop,
            hop_count,
            dest_seq: seq.unwrap_or(0),
            seq_known: seq.is_some(),
            expiry: now + ACTIVE_ROUTE_TIMEOUT_S,
            active: true,
        };
        match self.routes.get_mut(&dest) {
            None => {
                self.routes.insert(dest, fresh);
            }
            Some(r) => {
                let replace = match seq {
                    Some(s) => {
                        !r.usable(now)
                            || !r.seq_known
                            || s > r.dest_seq
                            || (s == r.dest_seq && hop_count < r.hop_count)
                    }
                    None => !r.usable(now),
                };
                if replace {
                    let kept_seq = if seq.is_none() && r.seq_known {
                        Some((r.dest_seq, true))
                    } else {
                        None
                    };
                    *r = fresh;
                    if let Some((s, known)) = kept_seq {
                        r.dest_seq = r.dest_seq.max(s);
                        r.seq_known = known;
                    }
                } else if r.next_hop == next_hop {
                    r.expiry = now + ACTIVE_ROUTE_TIMEOUT_S;
                }
            }
        }
    }

    /// Unicast along a usable route, or buffer the packet and start
    /// (or join) a route discovery.
    pub fn send_or_discover(&mut self, packet: Packet, dest: NodeId, ctx: &mut AodvCtx) {
        if let Some(route) = self.usable_route(dest, ctx.now) {
            self.refresh_route(dest, ctx.now);
            self.send(ctx, FrameMode::Unicast(route.next_hop), packet);
            return;
        }
        if let Some(p) = self.pending.get_mut(&dest) {
            if p.buffer.len() >= PENDING_BUFFER_CAP {
                p.buffer.pop_front();
                self.buffer_drops += 1;
            }
            p.buffer.push_back(packet);
            return;
        }
        let mut buffer = VecDeque::new();
        buffer.push_back(packet);
        let timer = ctx
            .sched
            .schedule(
                ctx.now + NET_TRAVERSAL_TIME_S,
                Ev::RreqTimeout {
                    node: self.id,
                    dest,
                },
            )
            .expect("future");
        self.pending.insert(
            dest,
            PendingDiscovery {
                attempt: 1,
                buffer,
                timer,
            },
        );
        self.broadcast_rreq(dest, ctx);
    }

    fn broadcast_rreq(&mut self, dest: NodeId, ctx: &mut AodvCtx) {
        self.own_seq += 1;
        self.next_rreq_id += 1;
        let rreq_id = self.next_rreq_id;
        self.rreq_seen.insert((self.id, rreq_id), ctx.now);
        let dest_seq = self
            .routes
            .get(&dest)
            .filter(|r| r.seq_known)
            .map(|r| r.dest_seq);
        let rreq = AodvControl::Rreq {
            originator: self.id,
            orig_seq: self.own_seq,
            rreq_id,
            dest,
            dest_seq,
            hop_count: 0,
        };
        self.send(ctx, FrameMode::Broadcast, Packet::Aodv(rreq));
    }

    /// Expanding the RREQ wait with binary exponential backoff; the final
    /// failure drops everything buffered for the destination.
    pub fn on_rreq_timeout(&mut self, dest: NodeId, ctx: &mut AodvCtx) {
        let Some(p) = self.pending.get_mut(&dest) else {
            return;
        };
        if p.attempt > RREQ_RETRIES {
            let dropped = self.pending.remove(&dest).expect("present");
            self.buffer_drops += dropped.buffer.len() as u64;
            return;
        }
        p.attempt += 1;
        let wait = NET_TRAVERSAL_TIME_S * f64::from(1u32 << (p.attempt - 1));
        p.timer = ctx
            .sched
            .schedule(
                ctx.now + wait,
                Ev::RreqTimeout {
                    node: self.id,
                    dest,
                },
            )
            .expect("future");
        self.broadcast_rreq(dest, ctx);
    }

    fn maybe_drain(&mut self, dest: NodeId, ctx: &mut AodvCtx) {
        if self.usable_route(dest, ctx.now).is_none() {
            return;
        }
        let Some(p) = self.pending.remove(&dest) else {
            return;
        };
        ctx.sched.cancel(p.timer);
        for packet in p.buffer {
            self.send_or_discover(packet, dest, ctx);
        }
    }

    /// Process a frame delivered to this node (already filtered for
    /// addressing). Returns application upcalls.
    pub fn handle_packet(
        &mut self,
        packet: Packet,
        from: NodeId,
        ctx: &mut AodvCtx,
    ) -> Vec<Upcall> {
        match packet {
            Packet::IpRequest {
                src,
                dst,
                seq,
                sent_at,
                hop_count,
            } => {
                self.refresh_route(src, ctx.now);
                if dst == self.id {
                    return vec![Upcall::Request {
                        src,
                        seq,
                        sent_at,
                        hops: hop_count + 1,
                    }];
                }
                if hop_count + 1 <= IP_HOP_LIMIT {
                    self.send_or_discover(
                        Packet::IpRequest {
                            src,
                            dst,
                            seq,
                            sent_at,
                            hop_count: hop_count + 1,
                        },
                        dst,
                        ctx,
                    );
                }
                Vec::new()
            }
            Packet::IpResponse {
                src,
                dst,
                seq,
                sent_at,
                request_hops,
                hop_count,
            } => {
                self.refresh_route(src, ctx.now);
                if dst == self.id {
                    return vec![Upcall::Response {
                        seq,
                        hops: request_hops,
                    }];
                }
                if hop_count + 1 <= IP_HOP_LIMIT {
                    self.send_or_discover(
                        Packet::IpResponse {
                            src,
                            dst,
                            seq,
                            sent_at,
                            request_hops,
                            hop_count: hop_count + 1,
                        },
                        dst,
                        ctx,
                    );
                }
                Vec::new()
            }
            Packet::Aodv(control) => {
                self.handle_control(control, from, ctx);
                Vec::new()
            }
            Packet::Interest(_) | Packet::Data(_) => Vec::new(),
        }
    }

    fn handle_control(&mut self, control: AodvControl, from: NodeId, ctx: &mut AodvCtx) {
        match control {
            AodvControl::Rreq {
                originator,
                orig_seq,
                rreq_id,
                dest,
                dest_seq,
                hop_count,
            } => {
                if originator == self.id {
                    return; // own flood echoed back
                }
                if let Some(t) = self.rreq_seen.get(&(originator, rreq_id)) {
                    if ctx.now - t <= RREQ_ID_LIFETIME_S {
                        return;
                    }
                }
                self.rreq_seen.insert((originator, rreq_id), ctx.now);
                let hops = hop_count + 1;
                self.install_route(from, from, 1, None, ctx.now);
                self.install_route(originator, from, hops, Some(orig_seq), ctx.now);
                self.maybe_drain(originator, ctx);

                if dest == self.id {
                    self.own_seq = self.own_seq.max(dest_seq.unwrap_or(0)) + 1;
                    let rrep = AodvControl::Rrep {
                        dest: self.id,
                        dest_seq: self.own_seq,
                        originator,
                        hop_count: 0,
                    };
                    self.send(ctx, FrameMode::Unicast(from), Packet::Aodv(rrep));
                    return;
                }
                let fresh_route = self
                    .routes
                    .get(&dest)
                    .copied()
                    .filter(|r| {
                        r.usable(ctx.now)
                            && r.seq_known
                            && dest_seq.map_or(true, |ds| r.dest_seq >= ds)
                    });
                if let Some(r) = fresh_route {
                    let rrep = AodvControl::Rrep {
                        dest,
                        dest_seq: r.dest_seq,
                        originator,
                        hop_count: r.hop_count,
                    };
                    self.send(ctx, FrameMode::Unicast(from), Packet::Aodv(rrep));
                } else {
                    let rreq = AodvControl::Rreq {
                        originator,
                        orig_seq,
                        rreq_id,
                        dest,
                        dest_seq,
                        hop_count: hops,
                    };
                    self.send(ctx, FrameMode::Broadcast, Packet::Aodv(rreq));
                }
            }
            AodvControl::Rrep {
                dest,
                dest_seq,
                originator,
                hop_count,
            } => {
                self.install_route(from, from, 1, None, ctx.now);
                self.install_route(dest, from, hop_count + 1, Some(dest_seq), ctx.now);
                self.maybe_drain(dest, ctx);
                if originator == self.id {
                    return;
                }
                if let Some(rev) = self.usable_route(originator, ctx.now) {
                    self.refresh_route(originator, ctx.now);
                    let rrep = AodvControl::Rrep {
                        dest,
                        dest_seq,
                        originator,
                        hop_count: hop_count + 1,
                    };
                    self.send(ctx, FrameMode::Unicast(rev.next_hop), Packet::Aodv(rrep));
                }
                // No reverse route: the RREP is dropped.
            }
            AodvControl::Rerr { unreachable } => {
                let mut propagate = Vec::new();
                for (dest, seq) in unreachable {
                    if let Some(r) = self.routes.get_mut(&dest) {
                        if r.active && r.next_hop == from {
                            r.active = false;
                            r.dest_seq = r.dest_seq.max(seq);
                            r.seq_known = true;
                            propagate.push((dest, r.dest_seq));
                        }
                    }
                }
                if !propagate.is_empty() {
                    propagate.sort_unstable();
                    self.send(
                        ctx,
                        FrameMode::Broadcast,
                        Packet::Aodv(AodvControl::Rerr {
                            unreachable: propagate,
                        }),
                    );
                }
            }
            AodvControl::Hello { seq } => {
                self.install_route(from, from, 1, Some(seq), ctx.now);
                self.maybe_drain(from, ctx);
            }
        }
    }

    /// Periodic maintenance: HELLO beaconing and next-hop liveness.
    pub fn on_tick(&mut self, ctx: &mut AodvCtx) {
        let now = ctx.now;
        self.rreq_seen.retain(|_, t| now - *t <= RREQ_ID_LIFETIME_S);

        // A next-hop silent for ALLOWED_HELLO_LOSS intervals breaks all
        // routes through it.
        let mut next_hops: Vec<NodeId> = self
            .routes
            .values()
            .filter(|r| r.usable(now))
            .map(|r| r.next_hop)
            .collect();
        next_hops.sort_unstable();
        next_hops.dedup();
        let mut unreachable = Vec::new();
        for nh in next_hops {
            let heard = self.last_heard.get(&nh).copied().unwrap_or(f64::MIN);
            if now - heard > ALLOWED_HELLO_LOSS * HELLO_INTERVAL_S {
                unreachable.extend(self.invalidate_via(nh));
            }
        }
        if !unreachable.is_empty() {
            unreachable.sort_unstable();
            self.send(
                ctx,
                FrameMode::Broadcast,
                Packet::Aodv(AodvControl::Rerr { unreachable }),
            );
        }

        // HELLO only while part of active routes, suppressed when any
        // recent transmission already proved liveness to the neighbors.
        let has_active = self.routes.values().any(|r| r.usable(now));
        if has_active && now - self.last_tx >= HELLO_INTERVAL_S {
            let hello = AodvControl::Hello { seq: self.own_seq };
            self.send(ctx, FrameMode::Broadcast, Packet::Aodv(hello));
        }

        ctx.sched
            .schedule(now + HELLO_INTERVAL_S, Ev::AodvTick { node: self.id })
            .expect("future");
    }

    fn invalidate_via(&mut self, next_hop: NodeId) -> Vec<(NodeId, u32)> {
        let mut dests: Vec<NodeId> = self
            .routes
            .iter()
            .filter(|(_, r)| r.active && r.next_hop == next_hop)
            .map(|(d, _)| *d)
            .collect();
        dests.sort_unstable();
        let mut out = Vec::new();
        for d in dests {
            let r = self.routes.get_mut(&d).expect("present");
            r.active = false;
            r.dest_seq += 1;
            r.seq_known = true;
            out.push((d, r.dest_seq));
        }
        out
    }
}
