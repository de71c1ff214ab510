//! Two-layer ledger simulation.
//!
//! Layer one is a per-microgrid event chain: an append-only log of bid,
//! clearing-commit, and settlement events with monotone timestamps and a
//! sampled confirmation latency. Layer two is a DAG of anchor records; each
//! anchor commits to the digest of the events appended to a chain since its
//! previous anchor and approves two earlier DAG tips, tangle style.
//!
//! This is an accounting model, not a consensus implementation: digests are
//! real SHA-256 over event content (so tampering is detectable), while
//! latency, fees, and energy are drawn from fixed per-transaction figures.

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

/// Identifier of a per-microgrid event chain.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub String);

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Bid,
    ClearingCommit,
    Settlement,
}

impl EventKind {
    fn tag(self) -> u8 {
        match self {
            EventKind::Bid => 1,
            EventKind::ClearingCommit => 2,
            EventKind::Settlement => 3,
        }
    }
}

/// One confirmed transaction on a microgrid chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainEvent {
    pub chain: ChainId,
    /// 1-based, gapless per chain.
    pub sequence: u64,
    pub kind: EventKind,
    pub payload_digest: [u8; 32],
    /// Submission time in simulation seconds.
    pub sim_time: f64,
    /// Submission time plus the sampled confirmation latency.
    pub confirm_time: f64,
}

/// An anchor in the DAG: a commitment to one chain's recent events that
/// approves two earlier records. The two bootstrap records carry no
/// references and no chain.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorRecord {
    pub id: u64,
    pub chain: Option<ChainId>,
    pub state_digest: [u8; 32],
    /// Exactly two approved earlier records, except the genesis pair.
    pub tangle_refs: Vec<u64>,
    pub sim_time: f64,
    /// Inclusive 1-based sequence range committed by this anchor.
    pub events_from: u64,
    pub events_to: u64,
}

/// Per-transaction cost figures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerCosts {
    /// Mean confirmation latency in seconds.
    pub confirm_latency_mean_secs: f64,
    /// Flat fee charged per bid event.
    pub fee_per_bid: f64,
    /// Energy cost per transaction in Wh.
    pub energy_per_tx_wh: f64,
}

impl Default for LedgerCosts {
    fn default() -> Self {
        LedgerCosts {
            confirm_latency_mean_secs: 12.0,
            fee_per_bid: 1.0,
            energy_per_tx_wh: 3.93e-9,
        }
    }
}

/// 95th percentile of the standard normal distribution.
const Z95: f64 = 1.6448536269514722;
/// Confirmation latency p95 is pinned at 5/3 of the mean (20 s at the
/// default 12 s mean).
const P95_OVER_MEAN: f64 = 5.0 / 3.0;

/// Log-normal parameters with the given arithmetic mean and a 95th
/// percentile at `P95_OVER_MEAN` times the mean.
fn lognormal_params(mean: f64) -> (f64, f64) {
    // Solving exp(mu + sigma^2/2) = mean and exp(mu + z*sigma) = ratio*mean
    // gives sigma^2/2 - z*sigma + ln(ratio) = 0.
    let sigma = Z95 - (Z95 * Z95 - 2.0 * P95_OVER_MEAN.ln()).sqrt();
    let mu = mean.ln() - sigma * sigma / 2.0;
    (mu, sigma)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerMetrics {
    pub event_count: u64,
    /// Anchor records excluding the genesis pair.
    pub anchor_count: u64,
    pub bid_count: u64,
    pub total_fee: f64,
    pub total_energy_wh: f64,
    pub mean_confirm_latency_secs: f64,
    pub p95_confirm_latency_secs: f64,
}

struct ChainLog {
    events: Vec<ChainEvent>,
    anchors: Vec<u64>,
    anchored_upto: u64,
    prev_digest: [u8; 32],
    last_time: f64,
    latency_rng: ChaCha8Rng,
}

struct Inner {
    chains: BTreeMap<ChainId, ChainLog>,
    dag: Vec<AnchorRecord>,
    tips: BTreeSet<u64>,
    tip_rng: ChaCha8Rng,
}

/// The two-layer ledger. All methods take `&self`; concurrent recording and
/// anchoring from multiple worker threads serialize on an internal lock.
pub struct Ledger {
    costs: LedgerCosts,
    latency_dist: LogNormal<f64>,
    seed: u64,
    inner: Mutex<Inner>,
}

fn chain_genesis_digest(chain: &ChainId) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"chain-genesis");
    h.update(chain.0.as_bytes());
    h.finalize().into()
}

fn event_digest(event: &ChainEvent) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"event");
    h.update(event.chain.0.as_bytes());
    h.update(event.sequence.to_le_bytes());
    h.update([event.kind.tag()]);
    h.update(event.payload_digest);
    h.update(event.sim_time.to_le_bytes());
    h.update(event.confirm_time.to_le_bytes());
    h.finalize().into()
}

fn anchor_digest(prev: &[u8; 32], events: &[ChainEvent]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"anchor");
    h.update(prev);
    for event in events {
        h.update(event_digest(event));
    }
    h.finalize().into()
}

/// Digest of an arbitrary payload, for callers assembling event content.
pub fn payload_digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.finalize().into()
}

impl Ledger {
    /// Creates an empty ledger and bootstraps the DAG with a genesis pair.
    pub fn new(costs: LedgerCosts, seed: u64) -> Ledger {
        let (mu, sigma) = lognormal_params(costs.confirm_latency_mean_secs);
        let latency_dist = LogNormal::new(mu, sigma).expect("finite latency parameters");
        let mut dag = Vec::new();
        let mut tips = BTreeSet::new();
        for id in 0..2u64 {
            let mut h = Sha256::new();
            h.update(b"genesis");
            h.update(seed.to_le_bytes());
            h.update(id.to_le_bytes());
            dag.push(AnchorRecord {
                id,
                chain: None,
                state_digest: h.finalize().into(),
                tangle_refs: Vec::new(),
                sim_time: 0.0,
                events_from: 0,
                events_to: 0,
            });
            tips.insert(id);
        }
        Ledger {
            costs,
            latency_dist,
            seed,
            inner: Mutex::new(Inner {
                chains: BTreeMap::new(),
                dag,
                tips,
                tip_rng: derive_rng(seed, &["dag-tips"]),
            }),
        }
    }

    pub fn costs(&self) -> &LedgerCosts {
        &self.costs
    }

    /// Appends an event to a chain, sampling its confirmation latency from
    /// the chain's own stream. Timestamps must not regress per chain.
    pub fn record_event(
        &self,
        chain: &ChainId,
        kind: EventKind,
        payload: [u8; 32],
        sim_time: f64,
    ) -> Result<ChainEvent> {
        let mut inner = self.inner.lock().unwrap();
        let seed = self.seed;
        let log = inner.chains.entry(chain.clone()).or_insert_with(|| ChainLog {
            events: Vec::new(),
            anchors: Vec::new(),
            anchored_upto: 0,
            prev_digest: chain_genesis_digest(chain),
            last_time: f64::NEG_INFINITY,
            latency_rng: derive_rng(seed, &["latency", &chain.0]),
        });
        if sim_time < log.last_time {
            return Err(Error::TimeRegression {
                chain: chain.0.clone(),
                at: sim_time,
                head: log.last_time,
            });
        }
        let latency = self.latency_dist.sample(&mut log.latency_rng);
        let event = ChainEvent {
            chain: chain.clone(),
            sequence: log.events.len() as u64 + 1,
            kind,
            payload_digest: payload,
            sim_time,
            confirm_time: sim_time + latency,
        };
        log.events.push(event.clone());
        log.last_time = sim_time;
        Ok(event)
    }

    /// Folds a chain's unanchored events into a new DAG record that approves
    /// two tips sampled with replacement.
    pub fn anchor(&self, chain: &ChainId, sim_time: f64) -> Result<AnchorRecord> {
        let mut inner = self.inner.lock().unwrap();
        let inner = &mut *inner;
        let log = inner
            .chains
            .get_mut(chain)
            .ok_or_else(|| Error::NothingToAnchor {
                chain: chain.0.clone(),
            })?;
        if log.anchored_upto as usize == log.events.len() {
            return Err(Error::NothingToAnchor {
                chain: chain.0.clone(),
            });
        }
        if sim_time < log.last_time {
            return Err(Error::TimeRegression {
                chain: chain.0.clone(),
                at: sim_time,
                head: log.last_time,
            });
        }

        let pending = &log.events[log.anchored_upto as usize..];
        let state_digest = anchor_digest(&log.prev_digest, pending);

        let tips: Vec<u64> = inner.tips.iter().copied().collect();
        let pick = |rng: &mut ChaCha8Rng| tips[rng.random_range(0..tips.len())];
        let refs = vec![pick(&mut inner.tip_rng), pick(&mut inner.tip_rng)];

        let record = AnchorRecord {
            id: inner.dag.len() as u64,
            chain: Some(chain.clone()),
            state_digest,
            tangle_refs: refs.clone(),
            sim_time,
            events_from: log.anchored_upto + 1,
            events_to: log.events.len() as u64,
        };
        inner.dag.push(record.clone());
        for r in refs {
            inner.tips.remove(&r);
        }
        inner.tips.insert(record.id);

        log.prev_digest = state_digest;
        log.anchored_upto = log.events.len() as u64;
        log.anchors.push(record.id);
        log.last_time = sim_time;
        Ok(record)
    }

    /// Replays an externally supplied event log against the stored anchor
    /// digests. Any edit to an anchored event changes its digest and fails
    /// the corresponding anchor.
    pub fn verify_chain_log(&self, chain: &ChainId, events: &[ChainEvent]) -> Result<()> {
        let inner = self.inner.lock().unwrap();
        let mismatch = |detail: String| Error::ChainMismatch {
            chain: chain.0.clone(),
            detail,
        };
        for (i, event) in events.iter().enumerate() {
            if event.sequence != i as u64 + 1 {
                return Err(mismatch(format!(
                    "event {} has sequence {}, expected {}",
                    i,
                    event.sequence,
                    i + 1
                )));
            }
            if event.chain != *chain {
                return Err(mismatch(format!(
                    "event {} belongs to chain {}",
                    event.sequence, event.chain
                )));
            }
        }
        let log = inner
            .chains
            .get(chain)
            .ok_or_else(|| mismatch("chain not found".into()))?;
        let mut prev = chain_genesis_digest(chain);
        for anchor_id in &log.anchors {
            let record = &inner.dag[*anchor_id as usize];
            if events.len() < record.events_to as usize {
                return Err(mismatch(format!(
                    "anchor {} commits events up to {}, log has {}",
                    record.id,
                    record.events_to,
                    events.len()
                )));
            }
            let span = &events[record.events_from as usize - 1..record.events_to as usize];
            let digest = anchor_digest(&prev, span);
            if digest != record.state_digest {
                return Err(mismatch(format!(
                    "anchor {} digest mismatch over events {}..={}",
                    record.id, record.events_from, record.events_to
                )));
            }
            prev = digest;
        }
        Ok(())
    }

    /// Verifies every chain against its stored events.
    pub fn verify_all(&self) -> Result<()> {
        for chain in self.chains() {
            let events = self.events(&chain);
            self.verify_chain_log(&chain, &events)?;
        }
        self.verify_dag()
    }

    /// Structural DAG checks: two genesis records without references, every
    /// later record approving exactly two strictly earlier ones (hence no
    /// cycles), and the tip set being exactly the unreferenced records.
    pub fn verify_dag(&self) -> Result<()> {
        let inner = self.inner.lock().unwrap();
        let fail = |detail: String| Error::ChainMismatch {
            chain: "<dag>".into(),
            detail,
        };
        let mut referenced = BTreeSet::new();
        for (i, record) in inner.dag.iter().enumerate() {
            if record.id != i as u64 {
                return Err(fail(format!("record {i} has id {}", record.id)));
            }
            match (i < 2, record.tangle_refs.len()) {
                (true, 0) | (false, 2) => {}
                (genesis, n) => {
                    return Err(fail(format!(
                        "record {i} has {n} references (genesis: {genesis})"
                    )))
                }
            }
            for r in &record.tangle_refs {
                if *r >= record.id {
                    return Err(fail(format!("record {i} references {r}, not earlier")));
                }
                referenced.insert(*r);
            }
        }
        let expected_tips: BTreeSet<u64> = (0..inner.dag.len() as u64)
            .filter(|id| !referenced.contains(id))
            .collect();
        if expected_tips != inner.tips {
            return Err(fail("tip set does not match unreferenced records".into()));
        }
        Ok(())
    }

    pub fn chains(&self) -> Vec<ChainId> {
        self.inner.lock().unwrap().chains.keys().cloned().collect()
    }

    pub fn events(&self, chain: &ChainId) -> Vec<ChainEvent> {
        self.inner
            .lock()
            .unwrap()
            .chains
            .get(chain)
            .map(|log| log.events.clone())
            .unwrap_or_default()
    }

    pub fn records(&self) -> Vec<AnchorRecord> {
        self.inner.lock().unwrap().dag.clone()
    }

    /// Aggregate fee, energy, and latency figures over all chains.
    pub fn metrics(&self) -> LedgerMetrics {
        let inner = self.inner.lock().unwrap();
        let mut metrics = LedgerMetrics::default();
        let mut latencies = Vec::new();
        for log in inner.chains.values() {
            for event in &log.events {
                metrics.event_count += 1;
                if event.kind == EventKind::Bid {
                    metrics.bid_count += 1;
                }
                latencies.push(event.confirm_time - event.sim_time);
            }
        }
        metrics.anchor_count = inner.dag.len() as u64 - 2;
        metrics.total_fee = metrics.bid_count as f64 * self.costs.fee_per_bid;
        metrics.total_energy_wh =
            (metrics.event_count + metrics.anchor_count) as f64 * self.costs.energy_per_tx_wh;
        if !latencies.is_empty() {
            latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
            metrics.mean_confirm_latency_secs =
                latencies.iter().sum::<f64>() / latencies.len() as f64;
            let rank = (latencies.len() as f64 * 0.95).ceil() as usize;
            metrics.p95_confirm_latency_secs = latencies[rank.saturating_sub(1)];
        }
        metrics
    }
}
