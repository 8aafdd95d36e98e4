//! Per-node NDN forwarding for the three name-based schemes.
//!
//! All three share the Interest pipeline front (Content Store, then PIT
//! with nonce suppression and aggregation, then the local producer) and
//! differ in the forwarding tail:
//!
//! * DAF: FIB hit -> unicast to the closest next-hop with a lifetime
//!   timer armed; FIB miss -> broadcast (in-network discovery). Returning
//!   data feeds the per-next-hop RTT estimator (positive feedback);
//!   timer expiry silently removes the next-hop (negative feedback).
//! * Flooding: every surviving Interest and every matched Data goes out
//!   as broadcast; the FIB is unused.
//! * Self-learning: only consumer-flagged discovery Interests flood;
//!   plain Interests need a FIB hit or are dropped. Data travels as
//!   per-downstream unicast and prefix announcements populate FIBs.

use crate::events::Ev;
use crate::kernel::Scheduler;
use crate::medium::{Frame, FrameMode};
use crate::packet::{DataPacket, Ep, InterestPacket, Name, NodeId, Packet};
use crate::tables::{ContentStore, Fib, Pit, PitOutcome};

/// Interest lifetime carried by every Interest and used for PIT expiry.
pub const INTEREST_LIFETIME_S: f64 = 2.0;
/// Stale-entry checker period and next-hop idle lifetime.
pub const STALE_CHECKER_PERIOD_S: f64 = 1.0;
pub const STALE_LIFETIME_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NdnScheme {
    Daf,
    Flooding,
    SelfLearning,
}

/// Mutable world access handed to a node while it processes one packet.
pub struct NdnCtx<'a> {
    pub now: f64,
    pub sched: &'a mut Scheduler<Ev>,
    pub outbox: &'a mut Vec<Frame>,
    /// Responses surfacing at this node's own application: (name, hops).
    pub delivered: &'a mut Vec<(Name, u32)>,
}

pub struct NdnNode {
    pub id: NodeId,
    pub scheme: NdnScheme,
    pub cs: ContentStore,
    pub pit: Pit,
    pub fib: Fib,
    pub producer_prefix: Option<Name>,
}

impl NdnNode {
    pub fn new(id: NodeId, scheme: NdnScheme, cs_capacity: usize) -> Self {
        NdnNode {
            id,
            scheme,
            cs: ContentStore::new(cs_capacity),
            pit: Pit::new(),
            fib: Fib::new(),
            producer_prefix: None,
        }
    }

    fn send(&self, ctx: &mut NdnCtx, mode: FrameMode, packet: Packet) {
        ctx.outbox.push(Frame {
            sender: self.id,
            mode,
            packet,
        });
    }

    /// Interest pipeline. `ep` identifies the previous hop (local face or
    /// neighbor); `was_broadcast` reflects the arriving frame's mode.
    pub fn on_interest(
        &mut self,
        interest: InterestPacket,
        ep: Ep,
        was_broadcast: bool,
        ctx: &mut NdnCtx,
    ) {
        let name = interest.name.clone();

        // Content Store first: a hit answers without touching the PIT.
        if let Some(cached) = self.cs.lookup(&name) {
            let payload_size = cached.payload_size;
            match ep {
                Ep::Local => ctx.delivered.push((name, 0)),
                Ep::Node(prev) => {
                    let reply = DataPacket {
                        name: name.clone(),
                        payload_size,
                        announced_prefix: was_broadcast.then(|| name.first_component()),
                        hc_from_source: 0,
                    };
                    self.send(ctx, FrameMode::Unicast(prev), Packet::Data(reply));
                }
            }
            return;
        }

        match self
            .pit
            .process_interest(&name, interest.nonce, ep, ctx.now, interest.lifetime)
        {
            PitOutcome::DuplicateNonce | PitOutcome::Aggregated => return,
            PitOutcome::New => {
                let entry = self.pit.entry(&name).expect("just created");
                let expiry = entry.expiry;
                ctx.sched
                    .schedule(
                        expiry,
                        Ev::PitExpire {
                            node: self.id,
                            name: name.clone(),
                        },
                    )
                    .expect("future");
            }
            PitOutcome::Retransmission => {}
        }

        // Local producer answers instead of forwarding.
        if let Some(prefix) = self.producer_prefix.clone() {
            if prefix.is_prefix_of(&name) {
                let data = DataPacket {
                    name,
                    payload_size: crate::packet::DATA_PAYLOAD_BYTES,
                    announced_prefix: was_broadcast.then_some(prefix),
                    hc_from_source: 0,
                };
                self.on_data(data, None, ctx);
                return;
            }
        }

        let hop_count = match ep {
            Ep::Local => interest.hop_count,
            Ep::Node(_) => interest.hop_count + 1,
        };
        let forward = InterestPacket {
            hop_count,
            ..interest
        };

        match self.scheme {
            NdnScheme::Daf => match self.fib.lookup(&name, ctx.now) {
                Some((prefix, nh)) => {
                    if !self.fib.has_pending_timer(&prefix, nh) {
                        let timeout = self.fib.timeout_for(&prefix, nh);
                        let handle = ctx
                            .sched
                            .schedule(
                                ctx.now + timeout,
                                Ev::FibTimeout {
                                    node: self.id,
                                    prefix: prefix.clone(),
                                    nh,
                                },
                            )
                            .expect("future");
                        self.fib.set_pending_timer(&prefix, nh, handle);
                    }
                    self.pit.mark_forwarded(&name, ctx.now);
                    self.send(ctx, FrameMode::Unicast(nh), Packet::Interest(forward));
                }
                None => {
                    self.pit.mark_forwarded(&name, ctx.now);
                    self.send(ctx, FrameMode::Broadcast, Packet::Interest(forward));
                }
            },
            NdnScheme::Flooding => {
                self.pit.mark_forwarded(&name, ctx.now);
                self.send(ctx, FrameMode::Broadcast, Packet::Interest(forward));
            }
            NdnScheme::SelfLearning => {
                if forward.discovery {
                    self.pit.mark_forwarded(&name, ctx.now);
                    self.send(ctx, FrameMode::Broadcast, Packet::Interest(forward));
                } else if let Some((_, nh)) = self.fib.lookup(&name, ctx.now) {
                    self.pit.mark_forwarded(&name, ctx.now);
                    self.send(ctx, FrameMode::Unicast(nh), Packet::Interest(forward));
                }
                // FIB miss on a plain Interest: dropped silently (no NACK).
            }
        }
    }

    /// Data pipeline. `from` is the transmitting neighbor, or None for
    /// locally produced data.
    pub fn on_data(&mut self, data: DataPacket, from: Option<NodeId>, ctx: &mut NdnCtx) {
        if let Some(from) = from {
            match self.scheme {
                NdnScheme::Daf => {
                    let prefix = data
                        .announced_prefix
                        .clone()
                        .or_else(|| self.fib.lcp_prefix(&data.name));
                    if let Some(prefix) = prefix {
                        let rtt = self
                            .pit
                            .entry(&data.name)
                            .and_then(|e| e.forwarded_at)
                            .map(|t| ctx.now - t)
                            .filter(|rtt| *rtt > 0.0);
                        let hc = data.hc_from_source + 1;
                        if let Ok(Some(timer)) =
                            self.fib.on_data(&prefix, from, hc, ctx.now, rtt)
                        {
                            ctx.sched.cancel(timer);
                        }
                    }
                }
                NdnScheme::Flooding => {}
                NdnScheme::SelfLearning => {
                    if let Some(prefix) = &data.announced_prefix {
                        self.fib
                            .replace_single(prefix, from, data.hc_from_source + 1, ctx.now);
                    }
                }
            }
        }

        // Opportunistic caching before the PIT lookup, unsolicited or not.
        self.cs.insert(data.clone(), ctx.now);

        let Some(entry) = self.pit.satisfy(&data.name) else {
            return; // no downstream: cached only
        };

        let arrived_hops = match from {
            Some(_) => data.hc_from_source + 1,
            None => 0,
        };
        if entry.has_local() {
            ctx.delivered.push((data.name.clone(), arrived_hops));
        }

        let remotes = entry.remote_eps();
        if remotes.is_empty() {
            return;
        }
        let forward = DataPacket {
            hc_from_source: arrived_hops,
            ..data
        };
        match self.scheme {
            NdnScheme::Daf => {
                if remotes.len() == 1 {
                    self.send(ctx, FrameMode::Unicast(remotes[0]), Packet::Data(forward));
                } else {
                    // Aggregated downstreams collapse into one broadcast.
                    self.send(ctx, FrameMode::Broadcast, Packet::Data(forward));
                }
            }
            NdnScheme::Flooding => {
                self.send(ctx, FrameMode::Broadcast, Packet::Data(forward));
            }
            NdnScheme::SelfLearning => {
                for ep in remotes {
                    self.send(ctx, FrameMode::Unicast(ep), Packet::Data(forward.clone()));
                }
            }
        }
    }

    /// PIT lifetime check; aggregation may have pushed the expiry out.
    pub fn on_pit_expire(&mut self, name: &Name, ctx: &mut NdnCtx) {
        if let Some(expiry) = self.pit.expire_if_due(name, ctx.now) {
            ctx.sched
                .schedule(
                    expiry,
                    Ev::PitExpire {
                        node: self.id,
                        name: name.clone(),
                    },
                )
                .expect("future");
        }
    }

    /// Negative feedback: the armed next-hop never answered.
    pub fn on_fib_timeout(&mut self, prefix: &Name, nh: NodeId) {
        self.fib.remove_nexthop(prefix, nh);
    }

    pub fn on_stale_check(&mut self, ctx: &mut NdnCtx) {
        self.fib.purge_stale(ctx.now, STALE_LIFETIME_S);
        ctx.sched
            .schedule(
                ctx.now + STALE_CHECKER_PERIOD_S,
                Ev::StaleCheck { node: self.id },
            )
            .expect("future");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        node: NdnNode,
        sched: Scheduler<Ev>,
        outbox: Vec<Frame>,
        delivered: Vec<(Name, u32)>,
    }

    impl Fixture {
        fn new(scheme: NdnScheme) -> Self {
            Fixture {
                node: NdnNode::new(0, scheme, 200),
                sched: Scheduler::new(),
                outbox: Vec::new(),
                delivered: Vec::new(),
            }
        }

        fn interest(name: &Name, nonce: u32, discovery: bool) -> InterestPacket {
            InterestPacket {
                name: name.clone(),
                nonce,
                lifetime: INTEREST_LIFETIME_S,
                discovery,
                hop_count: 0,
            }
        }

        fn data(name: &Name, announced: bool, hc: u32) -> DataPacket {
            DataPacket {
                name: name.clone(),
                payload_size: 512,
                announced_prefix: announced.then(|| name.first_component()),
                hc_from_source: hc,
            }
        }

        /// Advance the fixture clock to `t`.
        fn advance(&mut self, t: f64) {
            self.sched.schedule(t, Ev::MobilityTick).unwrap();
            while let Some((time, _)) = self.sched.pop() {
                if time >= t {
                    break;
                }
            }
        }

        fn on_interest(&mut self, i: InterestPacket, ep: Ep, was_broadcast: bool) {
            let mut ctx = NdnCtx {
                now: self.sched.now(),
                sched: &mut self.sched,
                outbox: &mut self.outbox,
                delivered: &mut self.delivered,
            };
            self.node.on_interest(i, ep, was_broadcast, &mut ctx);
        }

        fn on_data(&mut self, d: DataPacket, from: Option<NodeId>) {
            let mut ctx = NdnCtx {
                now: self.sched.now(),
                sched: &mut self.sched,
                outbox: &mut self.outbox,
                delivered: &mut self.delivered,
            };
            self.node.on_data(d, from, &mut ctx);
        }

        fn sent_modes(&self) -> Vec<(FrameMode, &'static str)> {
            self.outbox
                .iter()
                .map(|f| (f.mode, f.packet.kind()))
                .collect()
        }
    }

    #[test]
    fn daf_cs_hit_replies_without_forwarding() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.node.cs.insert(Fixture::data(&name, false, 0), 0.0);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Unicast(3), "data")]);
        assert!(f.node.pit.is_empty(), "no PIT state for answered interest");
        // Reply to a broadcast interest announces the prefix.
        let Packet::Data(d) = &f.outbox[0].packet else {
            panic!()
        };
        assert_eq!(d.announced_prefix, Some(Name::prefix("A")));
        assert_eq!(d.hc_from_source, 0);
    }

    #[test]
    fn daf_fib_hit_unicasts_and_arms_timer() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        let prefix = Name::prefix("A");
        f.node.fib.on_data(&prefix, 9, 2, 0.0, Some(0.1)).unwrap();
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Local, false);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Unicast(9), "interest")]);
        assert!(f.node.fib.has_pending_timer(&prefix, 9));
        // srtt=0.1, rttv=0.05 -> timer at now + 0.3
        let mut times = Vec::new();
        while let Some((t, ev)) = f.sched.pop() {
            if matches!(ev, Ev::FibTimeout { .. }) {
                times.push(t);
            }
        }
        assert_eq!(times.len(), 1);
        assert!((times[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn daf_fib_miss_broadcasts() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Local, false);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Broadcast, "interest")]);
        assert!(f.node.pit.entry(&name).unwrap().forwarded_at.is_some());
    }

    #[test]
    fn daf_duplicate_nonce_dropped() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(2), true);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        assert_eq!(f.outbox.len(), 1, "echo suppressed");
    }

    #[test]
    fn daf_data_refreshes_fib_and_forwards_downstream() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        // Interest from one downstream, forwarded by broadcast.
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        f.outbox.clear();
        // Data returns from neighbor 9 a little later, announcing /A,
        // two hops from source.
        f.advance(0.004);
        f.on_data(Fixture::data(&name, true, 1), Some(9));
        assert_eq!(f.sent_modes(), vec![(FrameMode::Unicast(3), "data")]);
        let hop = f.node.fib.nexthop(&Name::prefix("A"), 9).unwrap();
        assert_eq!(hop.hc, 2);
        assert!(hop.estimator.is_some(), "rtt sample from forwarded_at");
        let Packet::Data(d) = &f.outbox[0].packet else {
            panic!()
        };
        assert_eq!(d.hc_from_source, 2, "forwarding increments the counter");
    }

    #[test]
    fn daf_aggregated_downstreams_collapse_to_broadcast() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        f.on_interest(Fixture::interest(&name, 2, false), Ep::Node(4), true);
        f.on_interest(Fixture::interest(&name, 3, false), Ep::Node(5), true);
        f.outbox.clear();
        f.on_data(Fixture::data(&name, true, 0), Some(9));
        assert_eq!(f.sent_modes(), vec![(FrameMode::Broadcast, "data")]);
    }

    #[test]
    fn daf_unsolicited_data_cached_not_forwarded() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.on_data(Fixture::data(&name, true, 0), Some(9));
        assert!(f.outbox.is_empty());
        assert!(f.node.cs.lookup(&name).is_some(), "opportunistic caching");
        // Positive feedback still creates the FIB next-hop.
        assert!(f.node.fib.nexthop(&Name::prefix("A"), 9).is_some());
    }

    #[test]
    fn producer_answers_interest() {
        let mut f = Fixture::new(NdnScheme::Daf);
        f.node.producer_prefix = Some(Name::prefix("A"));
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Unicast(3), "data")]);
        let Packet::Data(d) = &f.outbox[0].packet else {
            panic!()
        };
        assert_eq!(d.announced_prefix, Some(Name::prefix("A")));
        assert_eq!(d.hc_from_source, 0);
        assert!(f.node.pit.entry(&name).is_none(), "entry consumed");
    }

    #[test]
    fn producer_reply_to_unicast_interest_omits_announcement() {
        let mut f = Fixture::new(NdnScheme::Daf);
        f.node.producer_prefix = Some(Name::prefix("A"));
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), false);
        let Packet::Data(d) = &f.outbox[0].packet else {
            panic!()
        };
        assert_eq!(d.announced_prefix, None);
    }

    #[test]
    fn flooding_always_broadcasts_interests() {
        let mut f = Fixture::new(NdnScheme::Flooding);
        let name = Name::from_parts("A", 7);
        // Even with a FIB entry present, flooding ignores it.
        f.node
            .fib
            .on_data(&Name::prefix("A"), 9, 1, 0.0, Some(0.1))
            .unwrap();
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Broadcast, "interest")]);
    }

    #[test]
    fn flooding_data_broadcasts_on_any_match() {
        let mut f = Fixture::new(NdnScheme::Flooding);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Node(3), true);
        f.outbox.clear();
        f.on_data(Fixture::data(&name, true, 0), Some(9));
        assert_eq!(f.sent_modes(), vec![(FrameMode::Broadcast, "data")]);
        // A second copy finds no PIT entry and stops.
        f.outbox.clear();
        f.on_data(Fixture::data(&name, true, 0), Some(8));
        assert!(f.outbox.is_empty());
    }

    #[test]
    fn self_learning_discovery_floods_plain_drops() {
        let mut f = Fixture::new(NdnScheme::SelfLearning);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, true), Ep::Node(3), true);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Broadcast, "interest")]);
        f.outbox.clear();
        // Plain interest, FIB miss: silent drop.
        let name2 = Name::from_parts("B", 1);
        f.on_interest(Fixture::interest(&name2, 2, false), Ep::Node(3), false);
        assert!(f.outbox.is_empty());
        // But the PIT entry exists, so data flowing past still satisfies it.
        assert!(f.node.pit.entry(&name2).is_some());
    }

    #[test]
    fn self_learning_unicasts_into_stale_entry() {
        let mut f = Fixture::new(NdnScheme::SelfLearning);
        let name = Name::from_parts("A", 7);
        f.node.fib.replace_single(&Name::prefix("A"), 9, 2, 0.0);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Local, false);
        assert_eq!(f.sent_modes(), vec![(FrameMode::Unicast(9), "interest")]);
        assert!(
            !f.node.fib.has_pending_timer(&Name::prefix("A"), 9),
            "self-learning arms no lifetime timers"
        );
    }

    #[test]
    fn self_learning_data_unicasts_per_downstream_and_learns() {
        let mut f = Fixture::new(NdnScheme::SelfLearning);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, true), Ep::Node(3), true);
        f.on_interest(Fixture::interest(&name, 2, true), Ep::Node(4), true);
        f.outbox.clear();
        f.on_data(Fixture::data(&name, true, 0), Some(9));
        assert_eq!(
            f.sent_modes(),
            vec![
                (FrameMode::Unicast(3), "data"),
                (FrameMode::Unicast(4), "data"),
            ]
        );
        let hop = f.node.fib.nexthop(&Name::prefix("A"), 9).unwrap();
        assert_eq!(hop.hc, 1);
    }

    #[test]
    fn local_data_delivery_counts_zero_hops_on_self_hit() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.node.cs.insert(Fixture::data(&name, false, 3), 0.0);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Local, false);
        assert_eq!(f.delivered, vec![(name, 0)]);
        assert!(f.outbox.is_empty());
    }

    #[test]
    fn consumer_retransmission_reforwards() {
        let mut f = Fixture::new(NdnScheme::Daf);
        let name = Name::from_parts("A", 7);
        f.on_interest(Fixture::interest(&name, 1, false), Ep::Local, false);
        assert_eq!(f.outbox.len(), 1);
        // Same downstream (local), fresh nonce: retransmission goes out again.
        f.on_interest(Fixture::interest(&name, 2, false), Ep::Local, false);
        assert_eq!(f.outbox.len(), 2);
    }
}
