//! Deterministic discrete-event simulator comparing four MANET
//! network-layer schemes: data-centric ad-hoc forwarding over NDN (DAF),
//! NDN flooding, NDN self-learning, and IP routing with AODV.
//!
//! Nodes sit on a seeded grid inside a larger arena, move under a
//! random-walk model, and share a single unit-disk 11 Mb/s channel with
//! carrier sensing and per-receiver collisions. Request-response
//! applications drive each scheme and a four-metric suite (success rate,
//! latency, Tx-events per data, hop count) comes out of the run log.

pub mod aodv;
pub mod error;
pub mod estimator;
pub mod events;
pub mod geom;
pub mod harness;
pub mod kernel;
pub mod medium;
pub mod metrics;
pub mod packet;
pub mod scenario;
pub mod strategy;
pub mod tables;
pub mod traffic;
pub mod world;

pub use error::{ConfigError, SimError};
pub use metrics::{compute_metrics, RunLog, RunMetrics};
pub use scenario::{Pattern, ScenarioConfig, Scheme};
pub use world::{RunConfig, RunOutput, Topology, World};
