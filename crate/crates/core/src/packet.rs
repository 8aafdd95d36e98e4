//! Packet types for the NDN and IP planes, with the byte-size model used
//! for serialization delay and Tx-byte accounting.

use std::fmt;

pub type NodeId = usize;

/// Hierarchical content identifier, e.g. `/A/seq42` = ["A", "seq42"].
/// In this artifact's naming scheme the producer prefix is the first
/// component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    components: Vec<String>,
}

impl Name {
    pub fn new(components: Vec<String>) -> Self {
        assert!(!components.is_empty(), "names are nonempty");
        Name { components }
    }

    pub fn from_parts(prefix: &str, seq: u32) -> Self {
        Name {
            components: vec![prefix.to_string(), seq.to_string()],
        }
    }

    pub fn prefix(prefix: &str) -> Self {
        Name {
            components: vec![prefix.to_string()],
        }
    }

    pub fn components(&self) -> &[String] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First component, the producer prefix in this naming scheme.
    pub fn first_component(&self) -> Name {
        Name {
            components: vec![self.components[0].clone()],
        }
    }

    /// True iff `self` is a prefix of `name` (component-wise).
    pub fn is_prefix_of(&self, name: &Name) -> bool {
        self.components.len() <= name.components.len()
            && self
                .components
                .iter()
                .zip(&name.components)
                .all(|(a, b)| a == b)
    }

    pub fn truncated(&self, len: usize) -> Name {
        Name {
            components: self.components[..len].to_vec(),
        }
    }

    /// Encoded length: one separator byte plus the bytes of each component.
    pub fn wire_len(&self) -> usize {
        self.components.iter().map(|c| 1 + c.len()).sum()
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

/// Previous-hop identifier stored in PIT records: either the local
/// application face or a neighbor's link-layer address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ep {
    Local,
    Node(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterestPacket {
    pub name: Name,
    pub nonce: u32,
    pub lifetime: f64,
    /// Self-learning only: set by the consumer on discovery Interests.
    pub discovery: bool,
    /// Hops traversed; incremented once per retransmitting node.
    pub hop_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub name: Name,
    pub payload_size: usize,
    /// Producer prefix attached when the data node answered a
    /// broadcast/discovery Interest.
    pub announced_prefix: Option<Name>,
    /// Hops since the replying data node; 0 on the reply transmission.
    pub hc_from_source: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AodvControl {
    Rreq {
        originator: NodeId,
        orig_seq: u32,
        rreq_id: u32,
        dest: NodeId,
        dest_seq: Option<u32>,
        hop_count: u32,
    },
    Rrep {
        dest: NodeId,
        dest_seq: u32,
        originator: NodeId,
        hop_count: u32,
    },
    Rerr {
        unreachable: Vec<(NodeId, u32)>,
    },
    Hello {
        seq: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    Interest(InterestPacket),
    Data(DataPacket),
    IpRequest {
        src: NodeId,
        dst: NodeId,
        seq: u32,
        sent_at: f64,
        hop_count: u32,
    },
    IpResponse {
        src: NodeId,
        dst: NodeId,
        seq: u32,
        sent_at: f64,
        /// Request-path hop count echoed by the responder.
        request_hops: u32,
        hop_count: u32,
    },
    Aodv(AodvControl),
}

// Byte-size model. The application payloads come from the traffic model
// (12-byte IP request, 512-byte data payload); headers are flat
// equivalents so Tx-byte comparisons stay honest across planes.
pub const IP_HEADER_BYTES: usize = 48;
pub const IP_REQUEST_PAYLOAD: usize = 12;
pub const DATA_PAYLOAD_BYTES: usize = 512;
pub const INTEREST_FIXED_BYTES: usize = 16; // nonce + lifetime
pub const INTEREST_HEADER_BYTES: usize = 20;
pub const DATA_HEADER_BYTES: usize = 24;
const RREQ_BYTES: usize = 24;
const RREP_BYTES: usize = 20;
const RERR_BASE_BYTES: usize = 4;
const RERR_PER_DEST_BYTES: usize = 8;

impl Packet {
    /// Bytes on the wire, used for serialization delay and Tx-byte counters.
    pub fn wire_size(&self) -> usize {
        match self {
            Packet::Interest(i) => i.name.wire_len() + INTEREST_FIXED_BYTES + INTEREST_HEADER_BYTES,
            Packet::Data(d) => d.payload_size + d.name.wire_len() + DATA_HEADER_BYTES,
            Packet::IpRequest { .. } => IP_REQUEST_PAYLOAD + IP_HEADER_BYTES,
            Packet::IpResponse { .. } => DATA_PAYLOAD_BYTES + IP_HEADER_BYTES,
            Packet::Aodv(c) => {
                let body = match c {
                    AodvControl::Rreq { .. } => RREQ_BYTES,
                    AodvControl::Rrep { .. } => RREP_BYTES,
                    AodvControl::Rerr { unreachable } => {
                        RERR_BASE_BYTES + RERR_PER_DEST_BYTES * unreachable.len()
                    }
                    AodvControl::Hello { .. } => RREP_BYTES,
                };
                body + IP_HEADER_BYTES
            }
        }
    }

    /// Short tag for event logs.
    pub fn kind(&self) -> &'static str {
        match self {
            Packet::Interest(_) => "interest",
            Packet::Data(_) => "data",
            Packet::IpRequest { .. } => "ip_request",
            Packet::IpResponse { .. } => "ip_response",
            Packet::Aodv(AodvControl::Rreq { .. }) => "rreq",
            Packet::Aodv(AodvControl::Rrep { .. }) => "rrep",
            Packet::Aodv(AodvControl::Rerr { .. }) => "rerr",
            Packet::Aodv(AodvControl::Hello { .. }) => "hello",
        }
    }

    /// Identifier column for event logs: content name or destination address.
    pub fn describe(&self) -> String {
        match self {
            Packet::Interest(i) => i.name.to_string(),
            Packet::Data(d) => d.name.to_string(),
            Packet::IpRequest { dst, seq, .. } => format!("{dst}#{seq}"),
            Packet::IpResponse { dst, seq, .. } => format!("{dst}#{seq}"),
            Packet::Aodv(AodvControl::Rreq { dest, .. }) => format!("{dest}"),
            Packet::Aodv(AodvControl::Rrep { dest, .. }) => format!("{dest}"),
            Packet::Aodv(AodvControl::Rerr { .. }) => "rerr".to_string(),
            Packet::Aodv(AodvControl::Hello { .. }) => "hello".to_string(),
        }
    }
}
