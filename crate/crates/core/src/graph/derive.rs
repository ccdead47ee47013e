use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::network::{CognitiveNetwork, ElementId};
use super::tree::NetworkFragment;

/// The belong-to predicate used when checking derivation between networks.
pub trait Derivation {
    /// Whether `derived` may stand in for `base`.
    fn derives(&self, derived: &ElementId, base: &ElementId) -> bool;
}

/// Derivation inside one network. A relation without lineage is accepted for
/// a base relation of the same basic kind.
impl Derivation for CognitiveNetwork {
    fn derives(&self, derived: &ElementId, base: &ElementId) -> bool {
        let (Ok(d), Ok(b)) = (self.get(derived), self.get(base)) else {
            return false;
        };
        if d.is_relation() != b.is_relation() {
            return false;
        }
        if self.belongs_to(derived, base).unwrap_or(false) {
            return true;
        }
        matches!((d.relation(), b.relation()), (Some(dr), Some(br))
            if d.bases.is_empty() && dr.kind == br.kind)
    }
}

/// Derivation of instance elements from knowledge: an instance derives from
/// a knowledge element when one of the instances in its belong-to closure has
/// a base that belongs to it. Ids of the instance network itself are also
/// accepted as bases.
#[derive(Debug, Clone, Copy)]
pub struct Layered<'a> {
    pub instance: &'a CognitiveNetwork,
    pub kb: &'a CognitiveNetwork,
}

impl Derivation for Layered<'_> {
    fn derives(&self, derived: &ElementId, base: &ElementId) -> bool {
        let Ok(d) = self.instance.get(derived) else {
            return false;
        };
        if self.instance.contains(base) && self.instance.derives(derived, base) {
            return true;
        }
        let Ok(b) = self.kb.get(base) else {
            return false;
        };
        if d.is_relation() != b.is_relation() {
            return false;
        }
        for x in self.instance.belong_closure(derived) {
            let Ok(xe) = self.instance.get(&x) else { continue };
            if xe.bases.iter().any(|kb_id| self.kb.belongs_to(kb_id, base).unwrap_or(false)) {
                return true;
            }
            if let (Some(v), Some(bv)) = (xe.value(), b.value()) {
                if v.contained_in(&bv) {
                    return true;
                }
            }
        }
        matches!((d.relation(), b.relation()), (Some(dr), Some(br))
            if d.bases.is_empty() && dr.kind == br.kind)
    }
}

/// Injective correspondence from base elements to derived elements.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedMapping {
    pairs: IndexMap<ElementId, ElementId>,
}

impl DerivedMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, base: ElementId, derived: ElementId) {
        self.pairs.insert(base, derived);
    }

    pub fn get(&self, base: &ElementId) -> Option<&ElementId> {
        self.pairs.get(base)
    }

    pub fn base_of(&self, derived: &ElementId) -> Option<&ElementId> {
        self.pairs.iter().find(|(_, d)| *d == derived).map(|(b, _)| b)
    }

    pub fn contains_base(&self, base: &ElementId) -> bool {
        self.pairs.contains_key(base)
    }

    pub fn contains_derived(&self, derived: &ElementId) -> bool {
        self.pairs.values().any(|d| d == derived)
    }

    pub fn remove(&mut self, base: &ElementId) -> Option<ElementId> {
        self.pairs.shift_remove(base)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, &ElementId)> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs sorted by base id; the canonical form used for tie-breaking.
    pub fn sorted_pairs(&self) -> Vec<(ElementId, ElementId)> {
        let mut v: Vec<_> = self.pairs.iter().map(|(b, d)| (b.clone(), d.clone())).collect();
        v.sort();
        v
    }
}

/// Base elements in search order: concepts first, then relations so that a
/// relation is placed only after the relations it connects.
pub(crate) fn search_order(base: &NetworkFragment<'_>) -> Vec<ElementId> {
    let mut order: Vec<ElementId> = base.concepts().cloned().collect();
    let mut pending: Vec<ElementId> = base.relations().cloned().collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut i = 0;
        while i < pending.len() {
            let r = base.net.relation(&pending[i]).expect("fragment relation");
            let ready = [&r.a, &r.b].iter().all(|end| {
                !base.contains(end) || base.net.concept(end).is_some() || order.contains(end)
            });
            if ready {
                order.push(pending.remove(i));
            } else {
                i += 1;
            }
        }
        if pending.len() == before {
            order.append(&mut pending);
        }
    }
    order
}

/// Whether placing base relation `b` on derived relation `d` keeps topology
/// under the partial mapping.
pub(crate) fn topology_ok(
    derived: &CognitiveNetwork,
    d: &ElementId,
    base: &NetworkFragment<'_>,
    b: &ElementId,
    mapping: &DerivedMapping,
) -> bool {
    let (Some(dr), Some(br)) = (derived.relation(d), base.net.relation(b)) else {
        return false;
    };
    let image = |end: &ElementId| -> Option<Option<&ElementId>> {
        if base.contains(end) {
            Some(mapping.get(end))
        } else {
            None
        }
    };
    let fits = |bend: &ElementId, dend: &ElementId| match image(bend) {
        None => true,
        Some(Some(m)) => m == dend,
        Some(None) => !mapping.contains_derived(dend),
    };
    (fits(&br.a, &dr.a) && fits(&br.b, &dr.b))
        || (br.kind.is_symmetric() && fits(&br.a, &dr.b) && fits(&br.b, &dr.a))
}

struct Search<'s, 'a> {
    derived: &'s NetworkFragment<'a>,
    base: &'s NetworkFragment<'a>,
    rel: &'s dyn Derivation,
    order: Vec<ElementId>,
    used: BTreeSet<ElementId>,
    mapping: DerivedMapping,
}

impl Search<'_, '_> {
    fn run(&mut self, depth: usize, visit: &mut dyn FnMut(&DerivedMapping) -> bool) -> bool {
        if depth == self.order.len() {
            return visit(&self.mapping);
        }
        let b = self.order[depth].clone();
        let is_rel = self.base.net.relation(&b).is_some();
        let candidates: Vec<ElementId> = self
            .derived
            .elements
            .iter()
            .filter(|d| !self.used.contains(*d))
            .filter(|d| (self.derived.net.relation(d).is_some()) == is_rel)
            .filter(|d| self.rel.derives(d, &b))
            .filter(|d| {
                !is_rel || topology_ok(self.derived.net, d, self.base, &b, &self.mapping)
            })
            .cloned()
            .collect();
        for d in candidates {
            self.used.insert(d.clone());
            self.mapping.insert(b.clone(), d.clone());
            let go_on = self.run(depth + 1, visit);
            self.mapping.remove(&b);
            self.used.remove(&d);
            if !go_on {
                return false;
            }
        }
        true
    }
}

/// Visits every total, injective, topology-preserving derivation of `base`
/// inside `derived`, in search order. The visitor returns `false` to stop.
pub fn enumerate_derivations(
    derived: &NetworkFragment<'_>,
    base: &NetworkFragment<'_>,
    rel: &dyn Derivation,
    visit: &mut dyn FnMut(&DerivedMapping) -> bool,
) {
    let mut search = Search {
        derived,
        base,
        rel,
        order: search_order(base),
        used: BTreeSet::new(),
        mapping: DerivedMapping::new(),
    };
    search.run(0, visit);
}

/// The first derivation of `base` in `derived`, if any.
pub fn check_derived_network(
    derived: &NetworkFragment<'_>,
    base: &NetworkFragment<'_>,
    rel: &dyn Derivation,
) -> Option<DerivedMapping> {
    let mut found = None;
    enumerate_derivations(derived, base, rel, &mut |m| {
        found = Some(m.clone());
        false
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BasicRelationKind, Concept, Relation};

    fn id(s: &str) -> ElementId {
        ElementId::from(s)
    }

    fn kb() -> CognitiveNetwork {
        let mut kb = CognitiveNetwork::knowledge();
        kb.add_concept("face", Concept::named("face")).unwrap();
        kb.add_concept("eye", Concept::named("eye")).unwrap();
        kb.add_relation("face-has-eye", Relation::new(BasicRelationKind::HasComponent, "face", "eye"))
            .unwrap();
        kb
    }

    fn instance(with_relation: bool) -> CognitiveNetwork {
        let mut inst = CognitiveNetwork::instance();
        inst.add_concept("eye1", Concept::named("eye")).unwrap();
        inst.add_base(&id("eye1"), &id("eye")).unwrap();
        inst.add_concept("face1", Concept::named("face")).unwrap();
        inst.add_base(&id("face1"), &id("face")).unwrap();
        if with_relation {
            inst.add_relation("r1", Relation::new(BasicRelationKind::HasComponent, "face1", "eye1"))
                .unwrap();
            inst.add_base(&id("r1"), &id("face-has-eye")).unwrap();
        }
        inst
    }

    #[test]
    fn binary_relation_derivation() {
        let kb = kb();
        let inst = instance(true);
        let layered = Layered { instance: &inst, kb: &kb };
        let m = check_derived_network(&NetworkFragment::whole(&inst), &NetworkFragment::whole(&kb), &layered)
            .expect("derivation exists");
        assert_eq!(m.get(&id("face-has-eye")), Some(&id("r1")));
        assert_eq!(m.get(&id("eye")), Some(&id("eye1")));
        for (b, d) in m.iter() {
            assert!(layered.derives(d, b));
        }
    }

    #[test]
    fn empty_base_is_vacuous() {
        let kb = kb();
        let inst = instance(false);
        let layered = Layered { instance: &inst, kb: &kb };
        let empty = NetworkFragment::of(&kb, []);
        let m = check_derived_network(&NetworkFragment::whole(&inst), &empty, &layered);
        assert_eq!(m, Some(DerivedMapping::new()));
    }

    #[test]
    fn missing_relation_image() {
        let kb = kb();
        let inst = instance(false);
        let layered = Layered { instance: &inst, kb: &kb };
        let m = check_derived_network(&NetworkFragment::whole(&inst), &NetworkFragment::whole(&kb), &layered);
        assert_eq!(m, None);
    }

    #[test]
    fn reversed_direction_rejected_for_oriented_kinds() {
        let kb = kb();
        let mut inst = instance(false);
        inst.add_relation("r1", Relation::new(BasicRelationKind::HasComponent, "eye1", "face1"))
            .unwrap();
        let layered = Layered { instance: &inst, kb: &kb };
        let m = check_derived_network(&NetworkFragment::whole(&inst), &NetworkFragment::whole(&kb), &layered);
        assert_eq!(m, None);
    }

    #[test]
    fn network_derives_from_itself() {
        let kb = kb();
        let whole = NetworkFragment::whole(&kb);
        let m = check_derived_network(&whole, &whole, &kb).unwrap();
        assert!(m.iter().all(|(b, d)| b == d));
    }
}
