use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{
    classify_tree_network, BasicRelationKind, CognitiveNetwork, Derivation, Element, ElementId, Payload, Relation,
    TreeDecl,
};
use crate::growth::grow_concept;
use crate::probability::ProbabilityState;
use crate::trace::{EventKind, Trace};

/// Which way a lateral relation is followed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From the A end to the B end, using P(B|A).
    Forward,
    /// From the B end to the A end, using P(A|B).
    Backward,
}

/// One reasoning step: the grown element, the relation grown to reach it and
/// the running chain probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    pub element: ElementId,
    pub relation: ElementId,
    pub prob: f64,
}

fn derives_from(kb: &CognitiveNetwork, bases: &[ElementId], target: &ElementId) -> bool {
    bases.iter().any(|b| b == target || kb.belongs_to(b, target).unwrap_or(false))
}

/// Grows a chain of instances across lateral knowledge relations, starting
/// at `start`. At each step the most probable applicable relation is taken;
/// the chain stops at `max_steps`, when nothing applies, or when the running
/// probability would drop below `min_prob`.
pub fn reason_chain(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    start: &ElementId,
    kinds: &BTreeSet<BasicRelationKind>,
    direction: Direction,
    max_steps: usize,
    min_prob: f64,
    trace: &mut Trace,
) -> Result<Vec<ChainStep>> {
    net.get(start)?;
    let mut chain = Vec::new();
    let mut cur = start.clone();
    let mut running = 1.0;
    let mut visited: BTreeSet<ElementId> = net.get(start)?.bases.iter().cloned().collect();
    while chain.len() < max_steps {
        let el = net.get(&cur)?;
        let bases = el.bases.clone();
        let value = el.value().and_then(|v| v.scalar());
        let cur_is_relation = el.is_relation();
        // (probability, relation id, far base, cur plays the A end)
        let mut best: Option<(f64, ElementId, ElementId, bool)> = None;
        for (rid, r) in kb.relations() {
            if !kinds.contains(&r.kind) || !r.kind.is_lateral() {
                continue;
            }
            let mut options = Vec::new();
            if direction == Direction::Forward || r.kind.is_symmetric() {
                options.push((true, &r.a, &r.b, r.cond.forward));
            }
            if direction == Direction::Backward || r.kind.is_symmetric() {
                options.push((false, &r.b, &r.a, r.cond.backward));
            }
            for (plays_a, near, far, spec) in options {
                if !derives_from(kb, &bases, near) || visited.contains(far) {
                    continue;
                }
                if kb.relation(far).is_some() && !cur_is_relation {
                    continue;
                }
                let p = spec.evaluate(value);
                if best.as_ref().is_none_or(|(bp, bid, _, _)| p > *bp || (p == *bp && rid < bid)) {
                    best = Some((p, rid.clone(), far.clone(), plays_a));
                }
            }
        }
        let Some((p, rid, far, plays_a)) = best else { break };
        if running * p < min_prob {
            break;
        }
        let grown = if kb.relation(&far).is_some() {
            grow_relation_end(net, kb, &cur, &far, trace)
        } else {
            grow_concept(net, kb, &far, trace)
        };
        let next = match grown {
            Ok(id) => id,
            Err(Error::GrowthBlocked(_)) => break,
            Err(e) => return Err(e),
        };
        running *= p;
        net.state_mut(&next)?.result = running;
        let template = kb.relation(&rid).expect("relation listed above").clone();
        let (a, b) = if plays_a { (cur.clone(), next.clone()) } else { (next.clone(), cur.clone()) };
        let link = net.fresh_id(rid.as_str());
        net.insert(Element {
            id: link.clone(),
            bases: vec![rid.clone()],
            state: ProbabilityState::default(),
            payload: Payload::Relation(Relation { a, b, ..template }),
        })?;
        trace.push(EventKind::Grow, &rid, &link, p, running);
        visited.insert(far);
        chain.push(ChainStep { element: next.clone(), relation: link, prob: running });
        cur = next;
    }
    Ok(chain)
}

/// Grows an instance of the knowledge relation `far` next to the instance
/// relation `cur`, reusing the ends of `cur` that derive from the ends of
/// `far` and growing the others.
fn grow_relation_end(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    cur: &ElementId,
    far: &ElementId,
    trace: &mut Trace,
) -> Result<ElementId> {
    let template = kb.relation(far).expect("checked by caller").clone();
    let cur_rel = net.relation(cur).expect("checked by caller").clone();
    let mut ends = Vec::new();
    for base_end in [&template.a, &template.b] {
        let layered = crate::graph::Layered { instance: net, kb };
        let reuse = [&cur_rel.a, &cur_rel.b]
            .into_iter()
            .find(|e| layered.derives(e, base_end) && !ends.contains(*e))
            .cloned();
        let end = match reuse {
            Some(e) => e,
            None if kb.concept(base_end).is_some() => grow_concept(net, kb, base_end, trace)?,
            None => return Err(Error::Kind(format!("cannot grow relation end `{base_end}`"))),
        };
        ends.push(end);
    }
    let id = net.fresh_id(far.as_str());
    let b = ends.pop().expect("two ends");
    let a = ends.pop().expect("two ends");
    net.insert(Element {
        id: id.clone(),
        bases: vec![far.clone()],
        state: ProbabilityState::default(),
        payload: Payload::Relation(Relation { a, b, ..template }),
    })?;
    trace.push(EventKind::Grow, far, &id, 0.0, 0.0);
    Ok(id)
}

/// Grows a new version of the instance tree at `tree_root`, linked to the old
/// one by an instance of a `kind` relation from the root's knowledge. The
/// copy keeps ids' stems, bases and states. Without `keep_history` the old
/// version is removed afterwards.
pub fn iterate_step(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    tree_root: &ElementId,
    kind: BasicRelationKind,
    keep_history: bool,
    trace: &mut Trace,
) -> Result<ElementId> {
    if !kind.is_lateral() {
        return Err(Error::Kind(format!("{kind} is not a lateral relation")));
    }
    let view = classify_tree_network(net, tree_root)?;
    let bases = net.get(tree_root)?.bases.clone();
    let lateral = kb
        .relations()
        .filter(|(_, r)| r.kind == kind)
        .find(|(_, r)| derives_from(kb, &bases, &r.a) || (kind.is_symmetric() && derives_from(kb, &bases, &r.b)))
        .map(|(id, r)| (id.clone(), r.clone()))
        .ok_or_else(|| Error::Kind(format!("no {kind} relation applies to `{tree_root}`")))?;

    let mut old: Vec<ElementId> = view.elements();
    old.sort_by_key(|id| net.index_of(id));
    let mut remap: BTreeMap<ElementId, ElementId> = BTreeMap::new();
    for id in &old {
        let el = net.get(id)?.clone();
        let fresh = net.fresh_id(id.as_str());
        let payload = match el.payload {
            Payload::Relation(r) => Payload::Relation(Relation {
                a: remap.get(&r.a).cloned().unwrap_or(r.a.clone()),
                b: remap.get(&r.b).cloned().unwrap_or(r.b.clone()),
                ..r
            }),
            p => p,
        };
        net.insert(Element { id: fresh.clone(), bases: el.bases, state: el.state, payload })?;
        trace.push(EventKind::Grow, id, &fresh, 0.0, el.state.result);
        remap.insert(id.clone(), fresh);
    }
    let new_root = remap[tree_root].clone();
    let (lid, lrel) = lateral;
    let link = net.fresh_id(lid.as_str());
    net.insert(Element {
        id: link.clone(),
        bases: vec![lid.clone()],
        state: ProbabilityState::default(),
        payload: Payload::Relation(Relation { a: tree_root.clone(), b: new_root.clone(), ..lrel }),
    })?;
    trace.push(EventKind::Grow, &lid, &link, 0.0, 0.0);
    let decl = net.tree(tree_root).cloned();
    let members = view.members.iter().filter_map(|m| remap.get(m)).cloned().collect();
    net.declare_tree(
        &new_root,
        TreeDecl { members, base: decl.as_ref().and_then(|d| d.base.clone()), stats: None },
    )?;
    if !keep_history {
        for id in old.iter().rev() {
            if net.contains(id) {
                for gone in net.remove(id)? {
                    trace.push(EventKind::Prune, tree_root, &gone, 0.0, 0.0);
                }
            }
        }
    }
    Ok(new_root)
}
