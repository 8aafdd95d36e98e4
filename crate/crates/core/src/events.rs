//! Event payloads dispatched by the simulation loop.

use crate::packet::{Name, NodeId};

#[derive(Debug, Clone)]
pub enum Ev {
    /// Periodic position advance for all moving nodes.
    MobilityTick,
    /// Re-evaluate the medium after deferring to an ongoing transmission.
    MacWake { node: NodeId },
    /// DIFS or backoff expired: sense and transmit, or retry.
    MacFire { node: NodeId },
    /// A frame finished serializing; resolve per-receiver deliveries.
    TxEnd { tx_id: u64 },
    /// Constant-bit-rate application emission.
    ConsumerSend { node: NodeId },
    /// Application-level retransmission timeout for one sequence number.
    AppTimeout { node: NodeId, seq: u32 },
    /// PIT entry lifetime check.
    PitExpire { node: NodeId, name: Name },
    /// FIB next-hop lifetime expiry (negative feedback).
    FibTimeout {
        node: NodeId,
        prefix: Name,
        nh: NodeId,
    },
    /// Periodic stale-entry checker.
    StaleCheck { node: NodeId },
    /// AODV HELLO emission, neighbor liveness and route maintenance.
    AodvTick { node: NodeId },
    /// Route discovery wait expired for a destination.
    RreqTimeout { node: NodeId, dest: NodeId },
}
