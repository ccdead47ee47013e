use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{
    BasicRelationKind, CognitiveNetwork, Concept, Derivation, Element, ElementId, Layered, Payload,
    Relation,
};
use crate::probability::{pps_launch, revert_entries, ContributionLedger, EngineConfig, ProbabilityState, Status};
use crate::trace::{EventKind, Trace};

/// Whether growth of `base` is blocked because one of its instances has been
/// suppressed in this task.
pub fn growth_blocked(net: &CognitiveNetwork, base: &ElementId) -> bool {
    net.elements().any(|e| e.state.is_suppressed() && e.bases.contains(base))
}

/// Copies a knowledge concept into `net` under a fresh id.
pub fn grow_concept(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    base: &ElementId,
    trace: &mut Trace,
) -> Result<ElementId> {
    grow_concept_as(net, kb, base, None, trace)
}

/// [`grow_concept`] with a caller-chosen id.
pub fn grow_concept_as(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    base: &ElementId,
    id: Option<ElementId>,
    trace: &mut Trace,
) -> Result<ElementId> {
    let template = kb
        .get(base)?
        .concept()
        .ok_or_else(|| Error::Kind(format!("`{base}` is a relation, not a concept")))?;
    if growth_blocked(net, base) {
        return Err(Error::GrowthBlocked(base.clone()));
    }
    let id = id.unwrap_or_else(|| net.fresh_id(base.as_str()));
    let concept = Concept { name: template.name.clone(), ..template.clone() };
    net.insert(Element {
        id: id.clone(),
        bases: vec![base.clone()],
        state: ProbabilityState::default(),
        payload: Payload::Concept(concept),
    })?;
    trace.push(EventKind::Grow, base, &id, 0.0, 0.0);
    Ok(id)
}

/// Which end of `rel` the instance `x` plays: `true` for A.
fn plays_a(net: &CognitiveNetwork, kb: &CognitiveNetwork, x: &ElementId, rel: &Relation) -> Option<bool> {
    let layered = Layered { instance: net, kb };
    if layered.derives(x, &rel.a) {
        Some(true)
    } else if layered.derives(x, &rel.b) {
        Some(false)
    } else {
        None
    }
}

/// An existing instance of `base_rel` between the same ends.
fn existing_link(net: &CognitiveNetwork, base_rel: &ElementId, a: &ElementId, b: &ElementId) -> Option<ElementId> {
    net.elements()
        .filter(|e| e.bases.contains(base_rel))
        .find(|e| e.relation().is_some_and(|r| &r.a == a && &r.b == b))
        .map(|e| e.id.clone())
}

/// Links `a` to `b` (growing `b` first when absent) with a derived copy of
/// `base_rel`, then lets probability flow across the new link.
///
/// Linking the same ends through the same base twice returns the existing
/// relation unchanged.
#[allow(clippy::too_many_arguments)]
pub fn grow_link(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    a: &ElementId,
    base_rel: &ElementId,
    b: Option<&ElementId>,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<ElementId> {
    let template = kb
        .get(base_rel)?
        .relation()
        .ok_or_else(|| Error::Kind(format!("`{base_rel}` is a concept, not a relation")))?
        .clone();
    if net.state(a)?.is_suppressed() {
        return Err(Error::GrowthBlocked(a.clone()));
    }
    let a_is_a = plays_a(net, kb, a, &template)
        .ok_or_else(|| Error::structure(a, format!("does not derive from an end of `{base_rel}`")))?;
    let far_base = if a_is_a { &template.b } else { &template.a };
    let far = match b {
        Some(b) => {
            if !(Layered { instance: net, kb }).derives(b, far_base) {
                return Err(Error::structure(b, format!("does not derive from `{far_base}`")));
            }
            if net.state(b)?.is_suppressed() {
                return Err(Error::GrowthBlocked(b.clone()));
            }
            b.clone()
        }
        None => grow_concept(net, kb, far_base, trace)?,
    };
    let (ea, eb) = if a_is_a { (a.clone(), far) } else { (far, a.clone()) };
    if let Some(existing) = existing_link(net, base_rel, &ea, &eb) {
        return Ok(existing);
    }
    let id = net.fresh_id(base_rel.as_str());
    let relation = Relation { a: ea.clone(), b: eb.clone(), membership: 1.0, ..template };
    net.insert(Element {
        id: id.clone(),
        bases: vec![base_rel.clone()],
        state: ProbabilityState::default(),
        payload: Payload::Relation(relation),
    })?;
    trace.push(EventKind::Grow, base_rel, &id, 0.0, 0.0);
    if template.kind != BasicRelationKind::Xor {
        exchange(net, &ea, cfg, ledger, trace)?;
    }
    Ok(id)
}

/// Elements connected to `start` through relations of any kind but Xor.
pub fn component_of(net: &CognitiveNetwork, start: &ElementId) -> BTreeSet<ElementId> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(cur) = queue.pop_front() {
        if let Some(r) = net.relation(&cur) {
            for end in [&r.a, &r.b] {
                if seen.insert(end.clone()) {
                    queue.push_back(end.clone());
                }
            }
        }
        for rid in net.incident(&cur) {
            if net.relation(rid).is_some_and(|r| r.kind == BasicRelationKind::Xor) {
                continue;
            }
            if seen.insert(rid.clone()) {
                queue.push_back(rid.clone());
            }
        }
    }
    seen
}

/// Cancels and re-runs every launch that started inside the component of
/// `at`, so earlier launches also reach whatever was just connected.
pub fn exchange(
    net: &mut CognitiveNetwork,
    at: &ElementId,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<()> {
    let component = component_of(net, at);
    let affected: Vec<(u64, ElementId, f64)> = ledger
        .launches()
        .iter()
        .filter(|l| component.contains(&l.origin) && !ledger.is_sealed(&l.origin))
        .map(|l| (l.id, l.origin.clone(), l.delta))
        .collect();
    if affected.is_empty() {
        return Ok(());
    }
    let ids: BTreeSet<u64> = affected.iter().map(|(id, _, _)| *id).collect();
    let removed = ledger.take_where(|e| ids.contains(&e.launch));
    revert_entries(net, ledger, &removed, cfg.mode)?;
    for (id, origin, delta) in affected {
        ledger.forget_launch(id);
        if net.state(&origin).is_ok_and(|s| s.status != Status::Suppressed) {
            pps_launch(net, &origin, delta, cfg, ledger, trace)?;
        }
    }
    Ok(())
}
