//! Microgrid membership and the mapping from metered traces to auction
//! participants.

use crate::auction::{AgentState, Role};
use crate::error::{Error, Result};
use crate::ledger::ChainId;
use crate::market::Tariff;
use crate::price::Price;
use crate::rng::derive_rng;
use crate::traces::TraceSet;
use crate::{AgentId, GridId};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

/// A microgrid: a named set of member agents with its own event chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Microgrid {
    pub id: GridId,
    pub members: BTreeSet<AgentId>,
}

impl Microgrid {
    pub fn from_traces(id: &GridId, traces: &TraceSet) -> Result<Microgrid> {
        let members = traces.members(id).cloned().ok_or_else(|| {
            Error::Config(format!("grid {id} has no agents in the trace data"))
        })?;
        Ok(Microgrid {
            id: id.clone(),
            members,
        })
    }

    pub fn chain_id(&self) -> ChainId {
        ChainId(self.id.0.clone())
    }
}

/// Samples an agent's private limit for the day: buyers draw from the upper
/// half of the tariff band (they would rather trade locally than import),
/// sellers from the lower half. Uniform on the bid grid, one draw per agent
/// per day.
pub fn sample_limit_price(
    agent: &AgentId,
    day: u32,
    role: Role,
    tariff: &Tariff,
    seed: u64,
) -> Price {
    let mut rng = derive_rng(seed, &["limit", &agent.0, &day.to_string()]);
    let t = Price::TICK.millipence();
    let mid = tariff.midpoint().millipence();
    let (lo, hi) = match role {
        Role::Buyer => ((mid + t - 1).div_euclid(t), tariff.buy.millipence() / t - 1),
        Role::Seller => (tariff.sell.millipence() / t + 1, mid.div_euclid(t)),
    };
    let hi = hi.max(lo);
    Price::from_millipence(rng.random_range(lo..=hi) * t)
}

/// Builds the auction participants for one grid and period.
///
/// Agents with a zero net position sit the auction out. Aggressiveness
/// carries over from `priors` (what the agent learned in earlier periods)
/// and defaults to neutral.
pub fn bidders_for_period(
    grid: &Microgrid,
    traces: &TraceSet,
    period: u32,
    priors: &BTreeMap<AgentId, f64>,
    tariff: &Tariff,
    seed: u64,
) -> Result<Vec<AgentState>> {
    let day = period / 24;
    let mut bidders = Vec::new();
    for agent in &grid.members {
        let sample = traces.get(agent, period).ok_or_else(|| Error::MissingTrace {
            agent: agent.clone(),
            period,
        })?;
        let net = sample.net_energy_wh();
        if net == 0 {
            continue;
        }
        let role = if net < 0 { Role::Buyer } else { Role::Seller };
        bidders.push(AgentState {
            id: agent.clone(),
            role,
            limit_price: sample_limit_price(agent, day, role, tariff, seed),
            aggressiveness: priors.get(agent).copied().unwrap_or(0.0),
            net_energy_wh: net,
        });
    }
    Ok(bidders)
}
