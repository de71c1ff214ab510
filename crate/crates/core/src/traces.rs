//! Energy trace loading, validation, and synthetic generation.
//!
//! A trace is one CSV row per agent per hourly period giving production and
//! consumption in Wh. The synthetic generator builds a photovoltaic week:
//! a solar bell between 06:00 and 18:00 and a double-peak household load,
//! with one grid optionally shifted by twelve hours so its surplus lands
//! when everyone else is short.

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::{AgentId, GridId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

pub const TRACE_COLUMNS: [&str; 5] = [
    "agent_id",
    "grid_id",
    "period",
    "production_wh",
    "consumption_wh",
];

/// One agent's metered energy for one period.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSample {
    pub agent: AgentId,
    pub grid: GridId,
    pub period: u32,
    pub production_wh: u64,
    pub consumption_wh: u64,
}

impl TraceSample {
    /// Net position: positive is surplus to sell, negative is deficit.
    pub fn net_energy_wh(&self) -> i64 {
        self.production_wh as i64 - self.consumption_wh as i64
    }
}

/// Validated, indexed trace collection: every agent belongs to exactly one
/// grid and has a sample for every period `0..period_count`.
#[derive(Clone, Debug)]
pub struct TraceSet {
    by_agent: BTreeMap<AgentId, Vec<TraceSample>>,
    members: BTreeMap<GridId, BTreeSet<AgentId>>,
    period_count: u32,
}

impl TraceSet {
    pub fn from_samples(samples: Vec<TraceSample>) -> Result<TraceSet> {
        if samples.is_empty() {
            return Err(Error::Trace("trace contains no samples".into()));
        }
        let period_count = samples.iter().map(|s| s.period).max().unwrap() + 1;

        let mut by_agent: BTreeMap<AgentId, Vec<Option<TraceSample>>> = BTreeMap::new();
        let mut members: BTreeMap<GridId, BTreeSet<AgentId>> = BTreeMap::new();
        let mut grid_of: BTreeMap<AgentId, GridId> = BTreeMap::new();

        for sample in samples {
            match grid_of.get(&sample.agent) {
                None => {
                    grid_of.insert(sample.agent.clone(), sample.grid.clone());
                    members
                        .entry(sample.grid.clone())
                        .or_default()
                        .insert(sample.agent.clone());
                }
                Some(grid) if *grid != sample.grid => {
                    return Err(Error::Trace(format!(
                        "agent {} appears in both grid {} and grid {}",
                        sample.agent, grid, sample.grid
                    )));
                }
                Some(_) => {}
            }
            let slots = by_agent
                .entry(sample.agent.clone())
                .or_insert_with(|| vec![None; period_count as usize]);
            let slot = &mut slots[sample.period as usize];
            if slot.is_some() {
                return Err(Error::Trace(format!(
                    "duplicate sample for agent {} period {}",
                    sample.agent, sample.period
                )));
            }
            *slot = Some(sample);
        }

        let mut complete = BTreeMap::new();
        for (agent, slots) in by_agent {
            let mut filled = Vec::with_capacity(slots.len());
            for (period, slot) in slots.into_iter().enumerate() {
                match slot {
                    Some(sample) => filled.push(sample),
                    None => {
                        return Err(Error::Gap {
                            agent,
                            period: period as u32,
                        })
                    }
                }
            }
            complete.insert(agent, filled);
        }

        Ok(TraceSet {
            by_agent: complete,
            members,
            period_count,
        })
    }

    pub fn period_count(&self) -> u32 {
        self.period_count
    }

    pub fn grids(&self) -> impl Iterator<Item = &GridId> {
        self.members.keys()
    }

    pub fn members(&self, grid: &GridId) -> Option<&BTreeSet<AgentId>> {
        self.members.get(grid)
    }

    pub fn get(&self, agent: &AgentId, period: u32) -> Option<&TraceSample> {
        self.by_agent.get(agent)?.get(period as usize)
    }

    /// All samples ordered by (agent, period).
    pub fn samples(&self) -> impl Iterator<Item = &TraceSample> {
        self.by_agent.values().flatten()
    }
}

/// Parses and fully validates a trace CSV.
pub fn load_traces(path: &Path) -> Result<Vec<TraceSample>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::FileAccess {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();

    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    for expected in TRACE_COLUMNS {
        if !columns.contains(&expected) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                column: expected.into(),
            });
        }
    }
    let index: Vec<usize> = TRACE_COLUMNS
        .iter()
        .map(|c| columns.iter().position(|x| x == c).unwrap())
        .collect();

    let mut samples = Vec::new();
    for (line_index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line_index + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: row,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let number = |slot: usize, name: &str| -> Result<u64> {
            let text = fields[index[slot]];
            text.parse::<u64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: row,
                message: format!("{name} `{text}` is not a nonnegative integer"),
            })
        };
        samples.push(TraceSample {
            agent: AgentId(fields[index[0]].to_owned()),
            grid: GridId(fields[index[1]].to_owned()),
            period: number(2, "period")? as u32,
            production_wh: number(3, "production_wh")?,
            consumption_wh: number(4, "consumption_wh")?,
        });
    }

    // Reject gaps and duplicates up front so later lookups cannot fail.
    TraceSet::from_samples(samples.clone())?;
    Ok(samples)
}

pub fn render_traces(samples: &[TraceSample]) -> String {
    let mut out = String::new();
    out.push_str(&TRACE_COLUMNS.join(","));
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.agent, s.grid, s.period, s.production_wh, s.consumption_wh
        );
    }
    out
}

/// Shape of the synthetic week produced by [`generate_traces`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub agents_per_grid: u32,
    pub periods: u32,
    /// Grid whose solar production is shifted by twelve hours.
    pub shifted_grid: Option<GridId>,
    /// Per-agent solar peak before jitter, Wh in the noon hour.
    pub production_peak_wh: f64,
    /// Per-agent base load before jitter and the hourly shape weight.
    pub consumption_scale_wh: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            agents_per_grid: 5,
            periods: 168,
            shifted_grid: None,
            production_peak_wh: 1500.0,
            consumption_scale_wh: 450.0,
        }
    }
}

/// Household load weight per hour of day: a small morning peak and a larger
/// evening one.
const CONSUMPTION_SHAPE: [f64; 24] = [
    0.30, 0.25, 0.22, 0.20, 0.22, 0.30, 0.55, 1.00, 0.90, 0.70, 0.60, 0.55, 0.55, 0.52, 0.50,
    0.52, 0.65, 0.95, 1.25, 1.40, 1.20, 0.90, 0.60, 0.40,
];

/// Solar output weight for an hour of day: a sine bell over 06:00-18:00,
/// zero at night.
fn solar_shape(hour: u32) -> f64 {
    (PI * (hour as f64 - 6.0) / 12.0).sin().max(0.0)
}

/// Generates a deterministic synthetic trace for the given grids.
///
/// Each agent gets a persistent size factor and an additional per-day
/// jitter, both derived from the seed per agent, so regenerating with more
/// grids or agents never changes existing rows.
pub fn generate_traces(grids: &[GridId], spec: &GeneratorSpec, seed: u64) -> Vec<TraceSample> {
    let mut samples = Vec::new();
    for grid in grids {
        let shifted = spec.shifted_grid.as_ref() == Some(grid);
        for i in 1..=spec.agents_per_grid {
            let agent = AgentId(format!("{grid}-a{i:02}"));
            let mut agent_rng = derive_rng(seed, &["gen-agent", &agent.0]);
            let size_prod: f64 = agent_rng.random_range(0.8..1.2);
            let size_cons: f64 = agent_rng.random_range(0.8..1.2);
            for period in 0..spec.periods {
                let day = period / 24;
                let hour = period % 24;
                let mut day_rng =
                    derive_rng(seed, &["gen-day", &agent.0, &day.to_string()]);
                let jitter_prod: f64 = day_rng.random_range(0.85..1.15);
                let jitter_cons: f64 = day_rng.random_range(0.85..1.15);

                let solar_hour = if shifted { (hour + 12) % 24 } else { hour };
                let production = spec.production_peak_wh
                    * size_prod
                    * jitter_prod
                    * solar_shape(solar_hour);
                let consumption = spec.consumption_scale_wh
                    * size_cons
                    * jitter_cons
                    * CONSUMPTION_SHAPE[hour as usize];

                samples.push(TraceSample {
                    agent: agent.clone(),
                    grid: grid.clone(),
                    period,
                    production_wh: production.round() as u64,
                    consumption_wh: consumption.round() as u64,
                });
            }
        }
    }
    samples
}
