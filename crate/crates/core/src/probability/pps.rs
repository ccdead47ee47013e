//! Probability passing and superposition.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use super::config::{EngineConfig, Mode};
use super::ledger::{ContributionLedger, LedgerEntry};
use super::state::Status;
use crate::error::{Error, Result};
use crate::graph::{CognitiveNetwork, ElementId, Relation};
use crate::trace::{EventKind, Trace};

/// Task- or kind-specific termination: returning `true` stops propagation
/// from `from` to `to` over `via`.
pub trait StopRule {
    fn stops(&self, net: &CognitiveNetwork, via: &ElementId, from: &ElementId, to: &ElementId) -> bool;
}

/// The default: no extra stops.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoStop;

impl StopRule for NoStop {
    fn stops(&self, _: &CognitiveNetwork, _: &ElementId, _: &ElementId, _: &ElementId) -> bool {
        false
    }
}

impl<F> StopRule for F
where
    F: Fn(&CognitiveNetwork, &ElementId, &ElementId, &ElementId) -> bool,
{
    fn stops(&self, net: &CognitiveNetwork, via: &ElementId, from: &ElementId, to: &ElementId) -> bool {
        self(net, via, from, to)
    }
}

/// Conditional probability of reaching the far end of `rel` from `from`.
/// Gaussian specs are evaluated at the scalar value of the B end, falling
/// back to the A end.
pub fn conditional_toward(net: &CognitiveNetwork, rel: &Relation, from: &ElementId) -> f64 {
    let forward = &rel.a == from;
    let scalar = |id: &ElementId| net.get(id).ok().and_then(|e| e.value()).and_then(|v| v.scalar());
    let at = scalar(&rel.b).or_else(|| scalar(&rel.a));
    rel.cond.toward(forward).evaluate(at)
}

fn relation_k(rel: &Relation, cfg: &EngineConfig) -> f64 {
    rel.params.get("k").and_then(|p| p.as_real()).unwrap_or(cfg.default_k)
}

struct Candidate {
    value: f64,
    seq: Reverse<u64>,
    target: ElementId,
    source: ElementId,
    via: ElementId,
    hops: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value).then(self.seq.cmp(&other.seq))
    }
}

/// Receipt of one launch.
#[derive(Debug, Clone, PartialEq)]
pub struct Launch {
    pub id: u64,
    pub contributions: usize,
}

pub fn pps_launch(
    net: &mut CognitiveNetwork,
    source: &ElementId,
    delta: f64,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<Option<Launch>> {
    pps_launch_with(net, source, delta, cfg, ledger, trace, &NoStop)
}

/// Propagates `delta` from `source`, visiting every element at most once and
/// always expanding the strongest pending contribution first, so each
/// element is reached by its highest-valued path.
///
/// Returns `None` when nothing was launched (delta below the decay epsilon or
/// a suppressed source).
pub fn pps_launch_with(
    net: &mut CognitiveNetwork,
    source: &ElementId,
    delta: f64,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
    stop: &dyn StopRule,
) -> Result<Option<Launch>> {
    let state = *net.state(source)?;
    if !(delta > 0.0 && delta <= 1.0) && !(cfg.mode == Mode::Simplified && delta > 0.0) {
        return Err(Error::Parameter(format!("launch delta {delta} outside (0,1]")));
    }
    if delta < cfg.decay_epsilon || state.is_suppressed() {
        return Ok(None);
    }
    let launch = ledger.begin_launch(source, delta);
    trace.push(EventKind::Launch, source, source, delta, state.result);

    let mut visited: HashSet<ElementId> = HashSet::from([source.clone()]);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut contributions = 0;
    expand(net, source, delta, 0, cfg, stop, &visited, &mut heap, &mut seq);

    while let Some(c) = heap.pop() {
        if visited.contains(&c.target) {
            continue;
        }
        let st = net.state(&c.target)?;
        if st.status != Status::Superposed {
            continue;
        }
        visited.insert(c.target.clone());
        let old = st.result;
        let new = match cfg.mode {
            Mode::Exact => old + c.value - old * c.value,
            Mode::Simplified => old + c.value,
        };
        net.state_mut(&c.target)?.result = new;
        ledger.record(LedgerEntry {
            launch,
            source: c.source.clone(),
            target: c.target.clone(),
            via: c.via.clone(),
            contribution: c.value,
        });
        let event = match cfg.mode {
            Mode::Exact => EventKind::Superpose,
            Mode::Simplified => EventKind::Contribute,
        };
        trace.push(event, &c.source, &c.target, c.value, new);
        contributions += 1;
        expand(net, &c.target, c.value, c.hops, cfg, stop, &visited, &mut heap, &mut seq);
    }
    Ok(Some(Launch { id: launch, contributions }))
}

#[allow(clippy::too_many_arguments)]
fn expand(
    net: &CognitiveNetwork,
    from: &ElementId,
    p: f64,
    hops: u32,
    cfg: &EngineConfig,
    stop: &dyn StopRule,
    visited: &HashSet<ElementId>,
    heap: &mut BinaryHeap<Candidate>,
    seq: &mut u64,
) {
    if cfg.max_hops.is_some_and(|m| hops >= m) {
        return;
    }
    for rid in net.incident(from) {
        let rel = net.relation(rid).expect("incident yields relations");
        let Some(to) = rel.other_end(from) else { continue };
        if to == from || visited.contains(to) {
            continue;
        }
        let mut value = p * rel.membership * conditional_toward(net, rel, from);
        if cfg.mode == Mode::Simplified {
            value *= relation_k(rel, cfg);
        }
        if value < cfg.decay_epsilon || value <= 0.0 || stop.stops(net, rid, from, to) {
            continue;
        }
        *seq += 1;
        heap.push(Candidate {
            value,
            seq: Reverse(*seq),
            target: to.clone(),
            source: from.clone(),
            via: rid.clone(),
            hops: hops + 1,
        });
    }
}
