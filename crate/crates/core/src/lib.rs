//! Discrete-time simulator of peer-to-peer energy trading across
//! interconnected microgrids.
//!
//! Each simulated hour, prosumers inside a microgrid trade their net energy
//! positions through a uniform-price double auction whose bids evolve over an
//! iterative consensus loop. Surplus or deficit left after local trading is
//! routed to directly connected neighbor grids through a second-tier auction,
//! and whatever remains settles against the main grid at retail tariffs.
//! Every bid, clearing commit, and settlement is recorded on a per-microgrid
//! event chain that anchors digests into a shared DAG ledger.
//!
//! Everything is deterministic given a scenario seed: random streams are
//! derived by hashing the seed with structural labels, so results do not
//! depend on iteration order, thread timing, or unrelated config changes.

pub mod auction;
pub mod config;
pub mod error;
pub mod hierarchy;
pub mod ledger;
pub mod market;
pub mod metrics;
pub mod microgrid;
pub mod price;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod traces;

pub use error::{Error, Result};
pub use price::{Money, Price};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a trading agent (a prosumer or consumer smart meter).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_owned())
    }
}

/// Identifier of a microgrid.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridId(pub String);

impl fmt::Display for GridId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GridId {
    fn from(s: &str) -> Self {
        GridId(s.to_owned())
    }
}
