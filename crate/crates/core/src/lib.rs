//! Named Data Networking over lossy multi-hop IoT radios.
//!
//! The crate is a deterministic discrete-event simulator built from:
//!
//! - [`wire`]: names, Interest/Data packets and their 64-byte-MTU framing;
//! - [`node`]: the per-node forwarding engine (FIB, PIT, content store,
//!   nonce dedup, stop-and-go consumers);
//! - [`strategy`]: flooding and reactive name-based routing, plus forwarding
//!   aggregation and opportunistic caching;
//! - [`radio`]: directed lossy topologies, the shared broadcast medium and
//!   the transmission ledger;
//! - [`sim`]: the NDN event loop;
//! - [`baseline`]: a proactive tree-routing stack for comparison;
//! - [`analytics`]: closed-form transmission counts;
//! - [`experiments`]: scenarios, presets, CSV output and the verification harness.

use std::fmt;

pub mod analytics;
pub mod baseline;
pub mod experiments;
pub mod node;
pub mod radio;
pub mod sim;
pub mod strategy;
pub mod wire;

/// Simulation time in milliseconds.
pub type Millis = u64;

/// Index of a node in a [`radio::RadioTopology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u16);

impl NodeId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
