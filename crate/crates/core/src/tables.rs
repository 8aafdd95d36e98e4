//! The NDN stateful forwarding plane: Content Store with LRU eviction,
//! PIT with nonce loop-suppression and aggregation, and FIB with
//! per-next-hop RTT state and staleness bookkeeping.

use std::collections::{HashMap, HashSet};

use crate::error::SimError;
use crate::estimator::{RttEstimator, DEFAULT_NEXTHOP_TIMEOUT};
use crate::kernel::EventHandle;
use crate::packet::{DataPacket, Ep, Name, NodeId};

// ---------------------------------------------------------------------------
// Content Store
// ---------------------------------------------------------------------------

struct CsSlot {
    data: DataPacket,
    inserted_at: f64,
    last_used: u64,
}

/// Exact-name packet cache with strict least-recently-used eviction.
/// Lookup hits refresh recency; capacity 0 disables caching entirely.
pub struct ContentStore {
    capacity: usize,
    slots: HashMap<Name, CsSlot>,
    tick: u64,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            slots: HashMap::new(),
            tick: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn lookup(&mut self, name: &Name) -> Option<&DataPacket> {
        self.tick += 1;
        let tick = self.tick;
        self.slots.get_mut(name).map(|slot| {
            slot.last_used = tick;
            &slot.data
        })
    }

    /// Cache a data packet (solicited or not). Returns the evicted name,
    /// if the store was full.
    pub fn insert(&mut self, data: DataPacket, now: f64) -> Option<Name> {
        if self.capacity == 0 {
            return None;
        }
        self.tick += 1;
        let name = data.name.clone();
        self.slots.insert(
            name.clone(),
            CsSlot {
                data,
                inserted_at: now,
                last_used: self.tick,
            },
        );
        if self.slots.len() > self.capacity {
            let victim = self
                .slots
                .iter()
                .min_by_key(|(_, s)| s.last_used)
                .map(|(n, _)| n.clone())
                .expect("store is nonempty");
            self.slots.remove(&victim);
            return Some(victim);
        }
        None
    }

    pub fn inserted_at(&self, name: &Name) -> Option<f64> {
        self.slots.get(name).map(|s| s.inserted_at)
    }
}

// ---------------------------------------------------------------------------
// PIT
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PitOutcome {
    /// Entry created; the Interest continues down the pipeline.
    New,
    /// Appended to an existing entry; the Interest is not forwarded.
    Aggregated,
    /// Same (name, nonce) already seen: loop/echo suppression.
    DuplicateNonce,
    /// New nonce from a previous-hop already in the entry: a downstream
    /// retransmission, forwarded again.
    Retransmission,
}

#[derive(Debug, Clone, Copy)]
pub struct PitRecord {
    pub nonce: u32,
    pub ep: Ep,
    pub t_request: f64,
}

#[derive(Debug, Clone)]
pub struct PitEntry {
    pub records: Vec<PitRecord>,
    pub expiry: f64,
    /// Time this node last transmitted the Interest upstream, if it did.
    pub forwarded_at: Option<f64>,
}

impl PitEntry {
    /// Distinct previous-hop neighbors (the local face excluded).
    pub fn remote_eps(&self) -> Vec<NodeId> {
        let mut eps = Vec::new();
        for r in &self.records {
            if let Ep::Node(n) = r.ep {
                if !eps.contains(&n) {
                    eps.push(n);
                }
            }
        }
        eps
    }

    pub fn has_local(&self) -> bool {
        self.records.iter().any(|r| r.ep == Ep::Local)
    }
}

/// Per-name pending-Interest state. A node never forwards two Interests
/// with the same (name, nonce); the seen-set enforces this even after an
/// entry has been satisfied.
#[derive(Default)]
pub struct Pit {
    entries: HashMap<Name, PitEntry>,
    seen: HashSet<(Name, u32)>,
}

impl Pit {
    pub fn new() -> Self {
        Pit::default()
    }

    pub fn process_interest(
        &mut self,
        name: &Name,
        nonce: u32,
        ep: Ep,
        now: f64,
        lifetime: f64,
    ) -> PitOutcome {
        if !self.seen.insert((name.clone(), nonce)) {
            return PitOutcome::DuplicateNonce;
        }
        match self.entries.get_mut(name) {
            None => {
                self.entries.insert(
                    name.clone(),
                    PitEntry {
                        records: vec![PitRecord {
                            nonce,
                            ep,
                            t_request: now,
                        }],
                        expiry: now + lifetime,
                        forwarded_at: None,
                    },
                );
                PitOutcome::New
            }
            Some(entry) => {
                entry.expiry = entry.expiry.max(now + lifetime);
                if let Some(rec) = entry.records.iter_mut().find(|r| r.ep == ep) {
                    rec.nonce = nonce;
                    rec.t_request = now;
                    PitOutcome::Retransmission
                } else {
                    entry.records.push(PitRecord {
                        nonce,
                        ep,
                        t_request: now,
                    });
                    PitOutcome::Aggregated
                }
            }
        }
    }

    pub fn mark_forwarded(&mut self, name: &Name, now: f64) {
        if let Some(e) = self.entries.get_mut(name) {
            e.forwarded_at = Some(now);
        }
    }

    /// Consume the entry for an exact name match, if any.
    pub fn satisfy(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    /// Drop the entry if its lifetime has elapsed. Returns the entry's
    /// current expiry when it is still alive.
    pub fn expire_if_due(&mut self, name: &Name, now: f64) -> Option<f64> {
        match self.entries.get(name) {
            None => None,
            Some(e) if now + 1e-12 >= e.expiry => {
                self.entries.remove(name);
                None
            }
            Some(e) => Some(e.expiry),
        }
    }

    pub fn entry(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ---------------------------------------------------------------------------
// FIB
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FibNextHop {
    pub nh: NodeId,
    /// Hop count to the data node that produced the last positive feedback.
    pub hc: u32,
    /// Timestamp of the last Data received through this next-hop.
    pub t_data: f64,
    pub estimator: Option<RttEstimator>,
    /// Set iff a unicast Interest through this next-hop awaits Data.
    pub pending_timer: Option<EventHandle>,
    pub last_use: f64,
}

/// Prefix table with per-neighbor next-hops; at most one next-hop per
/// (prefix, neighbor) pair.
#[derive(Default)]
pub struct Fib {
    entries: HashMap<Name, Vec<FibNextHop>>,
}

impl Fib {
    pub fn new() -> Self {
        Fib::default()
    }

    /// Longest-common-prefix match, then minimum hop count; ties break by
    /// the most recent t_data. Records `last_use` on the returned hop.
    pub fn lookup(&mut self, name: &Name, now: f64) -> Option<(Name, NodeId)> {
        for len in (1..=name.len()).rev() {
            let prefix = name.truncated(len);
            if let Some(hops) = self.entries.get_mut(&prefix) {
                if hops.is_empty() {
                    continue;
                }
                let best = hops
                    .iter_mut()
                    .min_by(|a, b| {
                        a.hc.cmp(&b.hc).then(
                            b.t_data
                                .partial_cmp(&a.t_data)
                                .expect("t_data is never NaN"),
                        )
                    })
                    .expect("nonempty");
                best.last_use = now;
                return Some((prefix, best.nh));
            }
        }
        None
    }

    /// Longest existing prefix matching `name`, without recording use.
    pub fn lcp_prefix(&self, name: &Name) -> Option<Name> {
        (1..=name.len())
            .rev()
            .map(|len| name.truncated(len))
            .find(|p| self.entries.get(p).is_some_and(|hops| !hops.is_empty()))
    }

    /// Positive feedback from a Data packet received through `nh`:
    /// creates or refreshes the next-hop, feeding the estimator when a
    /// locally measured RTT sample is available. Returns the Eq-armed
    /// timer handle that the caller must cancel, if one was pending.
    pub fn on_data(
        &mut self,
        prefix: &Name,
        nh: NodeId,
        hc: u32,
        now: f64,
        rtt: Option<f64>,
    ) -> Result<Option<EventHandle>, SimError> {
        let hops = self.entries.entry(prefix.clone()).or_default();
        if let Some(hop) = hops.iter_mut().find(|h| h.nh == nh) {
            if let Some(sample) = rtt {
                match hop.estimator.as_mut() {
                    Some(e) => e.update(sample)?,
                    None => hop.estimator = Some(RttEstimator::new(sample)?),
                }
            }
            hop.hc = hc;
            hop.t_data = now;
            Ok(hop.pending_timer.take())
        } else {
            hops.push(FibNextHop {
                nh,
                hc,
                t_data: now,
                estimator: match rtt {
                    Some(sample) => Some(RttEstimator::new(sample)?),
                    None => None,
                },
                pending_timer: None,
                last_use: now,
            });
            Ok(None)
        }
    }

    /// Replace the whole next-hop set of a prefix with a single neighbor
    /// (self-learning keeps only the latest announcement).
    pub fn replace_single(&mut self, prefix: &Name, nh: NodeId, hc: u32, now: f64) {
        self.entries.insert(
            prefix.clone(),
            vec![FibNextHop {
                nh,
                hc,
                t_data: now,
                estimator: None,
                pending_timer: None,
                last_use: now,
            }],
        );
    }

    /// Lifetime to arm when unicasting through (prefix, nh).
    pub fn timeout_for(&self, prefix: &Name, nh: NodeId) -> f64 {
        self.nexthop(prefix, nh)
            .and_then(|h| h.estimator.as_ref())
            .map(|e| e.timeout())
            .unwrap_or(DEFAULT_NEXTHOP_TIMEOUT)
    }

    pub fn set_pending_timer(&mut self, prefix: &Name, nh: NodeId, handle: EventHandle) {
        if let Some(hop) = self.nexthop_mut(prefix, nh) {
            hop.pending_timer = Some(handle);
        }
    }

    pub fn has_pending_timer(&self, prefix: &Name, nh: NodeId) -> bool {
        self.nexthop(prefix, nh)
            .map(|h| h.pending_timer.is_some())
            .unwrap_or(false)
    }

    /// Negative feedback: remove the next-hop, deleting the entry when it
    /// becomes empty. Returns true iff the hop existed.
    pub fn remove_nexthop(&mut self, prefix: &Name, nh: NodeId) -> bool {
        let Some(hops) = self.entries.get_mut(prefix) else {
            return false;
        };
        let before = hops.len();
        hops.retain(|h| h.nh != nh);
        let removed = hops.len() < before;
        if hops.is_empty() {
            self.entries.remove(prefix);
        }
        removed
    }

    /// Periodic checker: drop next-hops that carry no pending timer and
    /// have seen neither data nor use within `stale_lifetime`.
    pub fn purge_stale(&mut self, now: f64, stale_lifetime: f64) -> Vec<(Name, NodeId)> {
        let mut removed = Vec::new();
        for (prefix, hops) in self.entries.iter_mut() {
            hops.retain(|h| {
                let fresh = h.pending_timer.is_some()
                    || now - h.t_data.max(h.last_use) <= stale_lifetime;
                if !fresh {
                    removed.push((prefix.clone(), h.nh));
                }
                fresh
            });
        }
        self.entries.retain(|_, hops| !hops.is_empty());
        removed.sort();
        removed
    }

    pub fn nexthop(&self, prefix: &Name, nh: NodeId) -> Option<&FibNextHop> {
        self.entries
            .get(prefix)
            .and_then(|hops| hops.iter().find(|h| h.nh == nh))
    }

    fn nexthop_mut(&mut self, prefix: &Name, nh: NodeId) -> Option<&mut FibNextHop> {
        self.entries
            .get_mut(prefix)
            .and_then(|hops| hops.iter_mut().find(|h| h.nh == nh))
    }

    pub fn contains_prefix(&self, prefix: &Name) -> bool {
        self.entries.contains_key(prefix)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
