//! Deterministic discrete-event engine: virtual clock, event queue and
//! seeded pseudo-random streams.
//!
//! All protocol and traffic logic runs on top of a single [`Scheduler`].
//! Events fire in nondecreasing virtual time; ties break by insertion
//! order, so a run is a pure function of (scenario, seed).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::SimError;

/// Opaque handle for a scheduled event, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[cfg(test)]
impl EventHandle {
    pub(crate) fn test_handle(id: u64) -> Self {
        EventHandle(id)
    }
}

struct Entry<T> {
    time: f64,
    seq: u64,
    id: u64,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reverse: BinaryHeap is a max-heap, we want earliest (time, seq) first.
        // Scheduled times are always finite.
        other
            .time
            .partial_cmp(&self.time)
            .expect("event time must not be NaN")
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue with a virtual clock.
///
/// `T` is the opaque action descriptor carried by each event.
pub struct Scheduler<T> {
    clock: f64,
    queue: BinaryHeap<Entry<T>>,
    next_seq: u64,
    next_id: u64,
    pending: HashSet<u64>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<T> Scheduler<T> {
    pub fn new() -> Self {
        Scheduler {
            clock: 0.0,
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_id: 0,
            pending: HashSet::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    /// Current virtual time in seconds.
    pub fn now(&self) -> f64 {
        self.clock
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    /// Enqueue an event at absolute virtual time `at`.
    ///
    /// Scheduling in the past signals a protocol-logic bug and is rejected.
    pub fn schedule(&mut self, at: f64, payload: T) -> Result<EventHandle, SimError> {
        if at < self.clock {
            return Err(SimError::ScheduleInPast {
                at,
                now: self.clock,
            });
        }
        let id = self.next_id;
        self.next_id += 1;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry {
            time: at,
            seq,
            id,
            payload,
        });
        self.pending.insert(id);
        Ok(EventHandle(id))
    }

    /// Schedule relative to the current clock.
    pub fn schedule_in(&mut self, delay: f64, payload: T) -> Result<EventHandle, SimError> {
        self.schedule(self.clock + delay, payload)
    }

    /// Remove a pending event. Returns `true` iff the event was still
    /// pending (not yet fired, not already cancelled).
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.pending.remove(&handle.0) {
            self.cancelled.insert(handle.0);
            true
        } else {
            false
        }
    }

    /// Fire time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<f64> {
        self.skip_cancelled();
        self.queue.peek().map(|e| e.time)
    }

    /// Dequeue the next live event and advance the clock to its fire time.
    pub fn pop(&mut self) -> Option<(f64, T)> {
        self.skip_cancelled();
        let entry = self.queue.pop()?;
        self.pending.remove(&entry.id);
        self.clock = entry.time;
        self.processed += 1;
        Some((entry.time, entry.payload))
    }

    pub fn is_empty(&mut self) -> bool {
        self.peek_time().is_none()
    }

    fn skip_cancelled(&mut self) {
        while let Some(head) = self.queue.peek() {
            if self.cancelled.remove(&head.id) {
                self.queue.pop();
            } else {
                break;
            }
        }
    }
}

impl<T> Default for Scheduler<T> {
    fn default() -> Self {
        Self::new()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for run `index` of an experiment; stable in `master_seed` so that
/// extending `runs` never perturbs earlier runs.
pub fn run_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Named pseudo-random stream, derived from `(master_seed, stream_id)`.
///
/// Streams with distinct ids are independent: interleaved draws from one
/// never perturb another, and adding a new stream id leaves existing
/// sequences unchanged.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: &str) -> Self {
        let seed = splitmix64(master_seed ^ fnv1a(stream_id.as_bytes()));
        RngStream {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    /// Uniform draw in `[lo, hi)`; the degenerate interval `lo == hi`
    /// yields `lo`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, SimError> {
        if lo > hi {
            return Err(SimError::BadUniformRange { lo, hi });
        }
        if lo == hi {
            return Ok(lo);
        }
        // 53 mantissa bits give a value in [0, 1).
        let unit = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        Ok(lo + (hi - lo) * unit)
    }

    /// Uniform integer in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Widening multiply avoids modulo bias.
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Uniform integer in `[0, n]`.
    pub fn index_inclusive(&mut self, n: usize) -> usize {
        self.index(n + 1)
    }

    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.index(i + 1);
            slice.swap(i, j);
        }
    }
}
