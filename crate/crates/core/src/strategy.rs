//! Forwarding and caching decisions plugged into the node engine.
//!
//! Interest routing is either flooding ([`Routing::Vif`]) or reactive
//! name-based routing ([`Routing::Ronr`]): the first Interest of a content
//! item floods, the Data that answers it installs a temporary FIB entry for
//! the item's prefix along the reverse path, and later Interests are unicast.
//! Content forwarding aggregation (`cfa`) replaces per-face Data unicasts by a
//! single broadcast, and opportunistic near-path caching (`onpc`) stores
//! overheard Data at low priority.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{CachePriority, CsInsert, NodeState};
use crate::wire::{Data, Interest};
use crate::{Millis, NodeId};

/// Default lifetime of a reactive FIB entry.
pub const DEFAULT_TEMP_FIB_MS: Millis = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    Vif,
    Ronr,
}

impl fmt::Display for Routing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Routing::Vif => "vif",
            Routing::Ronr => "ronr",
        })
    }
}

impl FromStr for Routing {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vif" => Ok(Routing::Vif),
            "ronr" => Ok(Routing::Ronr),
            other => Err(ConfigError::UnknownRouting(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown routing scheme {0:?} (expected vif or ronr)")]
    UnknownRouting(String),
    #[error("opportunistic caching needs a non-zero cache capacity")]
    OnpcWithoutCache,
    #[error("temporary FIB lifetime must be positive")]
    ZeroFibLifetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub routing: Routing,
    pub cfa: bool,
    pub onpc: bool,
    /// Content store capacity in chunks; 0 disables caching.
    pub cache_capacity: usize,
    pub temp_fib_lifetime_ms: Millis,
}

impl StrategyConfig {
    pub fn new(routing: Routing) -> Self {
        StrategyConfig {
            routing,
            cfa: false,
            onpc: false,
            cache_capacity: 0,
            temp_fib_lifetime_ms: DEFAULT_TEMP_FIB_MS,
        }
    }

    pub fn vif() -> Self {
        Self::new(Routing::Vif)
    }

    pub fn ronr() -> Self {
        Self::new(Routing::Ronr)
    }

    pub fn with_cache(mut self, chunks: usize) -> Self {
        self.cache_capacity = chunks;
        self
    }

    pub fn with_cfa(mut self, on: bool) -> Self {
        self.cfa = on;
        self
    }

    pub fn with_onpc(mut self, on: bool) -> Self {
        self.onpc = on;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.onpc && self.cache_capacity == 0 {
            return Err(ConfigError::OnpcWithoutCache);
        }
        if self.temp_fib_lifetime_ms == 0 {
            return Err(ConfigError::ZeroFibLifetime);
        }
        Ok(())
    }
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self::vif()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forwarding {
    Flood,
    Unicast(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataEmission {
    Broadcast,
    UnicastEach,
}

pub fn decide_interest_forwarding(
    config: &StrategyConfig,
    state: &NodeState,
    interest: &Interest,
    now: Millis,
) -> Forwarding {
    match config.routing {
        Routing::Vif => Forwarding::Flood,
        Routing::Ronr => match state.fib_lookup(&interest.name, now) {
            Some(face) => Forwarding::Unicast(face),
            None => Forwarding::Flood,
        },
    }
}

/// Installs `parent(data.name) -> from` as a temporary route (RONR only).
pub fn on_data_install_route(config: &StrategyConfig, state: &mut NodeState, data: &Data, from: NodeId, now: Millis) {
    if config.routing != Routing::Ronr {
        return;
    }
    if let Ok(prefix) = data.name.parent() {
        state.fib.upsert(prefix, from, now + config.temp_fib_lifetime_ms, true);
    }
}

pub fn select_data_emission(config: &StrategyConfig, pit_incoming: &[NodeId]) -> DataEmission {
    if config.cfa && pit_incoming.len() >= 2 {
        DataEmission::Broadcast
    } else {
        DataEmission::UnicastEach
    }
}

/// Hook for Data that was neither addressed to this node nor pending here.
pub fn on_overheard_data(config: &StrategyConfig, state: &mut NodeState, data: &Data, now: Millis) -> Option<CsInsert> {
    if !config.onpc {
        return None;
    }
    Some(state.cs.insert(data.clone(), CachePriority::Unsolicited, now))
}
