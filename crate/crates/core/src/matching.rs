//! Membership of known fragments against knowledge trees.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{
    check_derived_network, knowledge_trees, search_order, topology_ok, CognitiveNetwork, Derivation,
    DerivedMapping, Element, ElementId, Layered, NetworkFragment, Param, Term, TreeNetworkView,
};
use crate::probability::{params_membership, pps_launch, ContributionLedger, EngineConfig, ProbabilityState};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Root of the matched knowledge tree.
    pub base: ElementId,
    /// Base element to fragment element, for placed elements only.
    pub mapping: DerivedMapping,
    pub membership: f64,
}

/// The two networks a match runs between. Fragment elements live in
/// `fragment_net`; bases live in `kb`. Both may be the same network.
#[derive(Debug, Clone, Copy)]
pub struct MatchContext<'a> {
    pub fragment_net: &'a CognitiveNetwork,
    pub kb: &'a CognitiveNetwork,
}

impl<'a> MatchContext<'a> {
    pub fn new(fragment_net: &'a CognitiveNetwork, kb: &'a CognitiveNetwork) -> Self {
        MatchContext { fragment_net, kb }
    }

    fn same_network(&self) -> bool {
        std::ptr::eq(self.fragment_net, self.kb)
    }
}

impl Derivation for MatchContext<'_> {
    fn derives(&self, derived: &ElementId, base: &ElementId) -> bool {
        if self.same_network() {
            self.kb.derives(derived, base)
        } else {
            Layered { instance: self.fragment_net, kb: self.kb }.derives(derived, base)
        }
    }
}

/// Membership of a candidate concept or value in a base concept.
pub fn match_concept(ctx: &MatchContext<'_>, candidate: &Term, base: &ElementId) -> f64 {
    let Some(b) = ctx.kb.concept(base) else {
        return 0.0;
    };
    let value = match candidate {
        Term::Value(v) => Some(*v),
        Term::Id(id) => ctx.fragment_net.get(id).ok().and_then(Element::value),
    };
    if let (Some(dist), Some(x)) = (b.distribution, value.and_then(|v| v.scalar())) {
        return dist.membership(x);
    }
    let fits = match candidate {
        Term::Id(id) => ctx.fragment_net.concept(id).is_some() && ctx.derives(id, base),
        Term::Value(v) => b.value.is_some_and(|bv| v.contained_in(&bv)),
    };
    if fits {
        1.0
    } else {
        0.0
    }
}

/// Parameter specification of a base concept inside a tree: its own
/// parameters, overridden by those of longitudinal tree relations ending at
/// it.
pub(crate) fn concept_spec(
    kb: &CognitiveNetwork,
    tree: &TreeNetworkView,
    base: &ElementId,
) -> BTreeMap<String, Param> {
    let mut spec = kb.get(base).map(|e| e.params().clone()).unwrap_or_default();
    for rid in &tree.longitudinal {
        if let Some(r) = kb.relation(rid) {
            if &r.b == base {
                spec.extend(r.params.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
        }
    }
    spec
}

fn placement_score(
    ctx: &MatchContext<'_>,
    tree: &TreeNetworkView,
    fragment_el: &ElementId,
    base: &ElementId,
) -> f64 {
    let Ok(f) = ctx.fragment_net.get(fragment_el) else {
        return 0.0;
    };
    match (f.relation(), ctx.kb.relation(base)) {
        (Some(fr), Some(br)) => {
            if ctx.derives(fragment_el, base) {
                params_membership(&fr.params, &br.params)
            } else {
                0.0
            }
        }
        (None, None) => {
            let m = match_concept(ctx, &Term::Id(fragment_el.clone()), base);
            if m == 0.0 {
                return 0.0;
            }
            m * params_membership(f.params(), &concept_spec(ctx.kb, tree, base))
        }
        _ => 0.0,
    }
}

/// A copy of the tree's knowledge elements with cleared states.
fn scratch_tree(kb: &CognitiveNetwork, tree: &TreeNetworkView) -> CognitiveNetwork {
    let mut scratch = CognitiveNetwork::instance();
    let view = NetworkFragment::of(kb, tree.elements());
    for id in search_order(&view) {
        let Ok(el) = kb.get(&id) else { continue };
        let copy = Element {
            id: id.clone(),
            bases: Vec::new(),
            state: ProbabilityState::default(),
            payload: el.payload.clone(),
        };
        // Relations whose ends fall outside the view are left out.
        let _ = scratch.insert(copy);
    }
    scratch
}

/// Root probability of the tree when each placed base element starts at its
/// score. `extra` adds inputs for base elements matched by other means.
fn evaluate(
    kb: &CognitiveNetwork,
    tree: &TreeNetworkView,
    scores: &BTreeMap<ElementId, f64>,
    cfg: &EngineConfig,
) -> Result<f64> {
    let mut scratch = scratch_tree(kb, tree);
    let mut launches = Vec::new();
    for (base, &p) in scores {
        let Ok(el) = scratch.get_mut(base) else { continue };
        match el.relation_mut() {
            Some(r) => r.membership = p,
            None => {
                el.state = ProbabilityState::observed(p);
                launches.push((base.clone(), p));
            }
        }
    }
    let order: Vec<ElementId> = scratch.ids().cloned().collect();
    launches.sort_by_key(|(id, _)| order.iter().position(|o| o == id));
    let mut ledger = ContributionLedger::new();
    let mut trace = Trace::new();
    for (id, p) in launches {
        if p >= cfg.decay_epsilon {
            pps_launch(&mut scratch, &id, p, cfg, &mut ledger, &mut trace)?;
        }
    }
    Ok(scratch.state(&tree.root).map(|s| s.result).unwrap_or(0.0))
}

struct Placement<'s, 'a> {
    ctx: &'s MatchContext<'a>,
    tree: &'s TreeNetworkView,
    base_view: NetworkFragment<'a>,
    fragment: &'s [ElementId],
    order: Vec<ElementId>,
    anchor: Option<&'s ElementId>,
    extra: &'s BTreeMap<ElementId, f64>,
    cfg: &'s EngineConfig,
    used: BTreeSet<ElementId>,
    mapping: DerivedMapping,
    scores: BTreeMap<ElementId, f64>,
    best: Option<(f64, Vec<(ElementId, ElementId)>, DerivedMapping)>,
}

impl Placement<'_, '_> {
    fn search(&mut self, depth: usize) -> Result<()> {
        if depth == self.order.len() {
            return self.leaf();
        }
        let b = self.order[depth].clone();
        let is_rel = self.base_view.net.relation(&b).is_some();
        let mut options = Vec::new();
        for f in self.fragment {
            if self.used.contains(f) {
                continue;
            }
            if is_rel && !topology_ok(self.ctx.fragment_net, f, &self.base_view, &b, &self.mapping) {
                continue;
            }
            let score = placement_score(self.ctx, self.tree, f, &b);
            if score > 0.0 || (is_rel && self.ctx.derives(f, &b)) {
                options.push((f.clone(), score));
            }
        }
        if options.is_empty() {
            return self.search(depth + 1);
        }
        for (f, score) in options {
            self.used.insert(f.clone());
            self.mapping.insert(b.clone(), f.clone());
            self.scores.insert(b.clone(), score);
            self.search(depth + 1)?;
            self.scores.remove(&b);
            self.mapping.remove(&b);
            self.used.remove(&f);
        }
        Ok(())
    }

    fn leaf(&mut self) -> Result<()> {
        if let Some(anchor) = self.anchor {
            if !self.mapping.contains_derived(anchor) {
                return Ok(());
            }
        }
        let mut scores = self.scores.clone();
        for (base, &p) in self.extra {
            let e = scores.entry(base.clone()).or_insert(0.0);
            *e = e.max(p);
        }
        let membership = evaluate(self.ctx.kb, self.tree, &scores, self.cfg)?;
        let key = self.mapping.sorted_pairs();
        let better = match &self.best {
            None => true,
            Some((m, k, _)) => membership > m + 1e-12 || ((membership - m).abs() <= 1e-12 && key < *k),
        };
        if better {
            self.best = Some((membership, key, self.mapping.clone()));
        }
        Ok(())
    }
}

fn match_tree_inner(
    ctx: &MatchContext<'_>,
    fragment: &[ElementId],
    tree: &TreeNetworkView,
    cfg: &EngineConfig,
    anchor: Option<&ElementId>,
    extra: &BTreeMap<ElementId, f64>,
) -> Result<MatchResult> {
    let base_view = NetworkFragment::of(ctx.kb, tree.elements());
    for id in &base_view.elements {
        ctx.kb.get(id).map_err(|_| Error::structure(&tree.root, format!("tree element `{id}` missing")))?;
    }
    let empty = MatchResult { base: tree.root.clone(), mapping: DerivedMapping::new(), membership: 0.0 };
    // A fragment element with no admissible position anywhere fails the
    // structure match outright.
    for f in fragment {
        let placeable = base_view.elements.iter().any(|b| {
            placement_score(ctx, tree, f, b) > 0.0
                || (ctx.kb.relation(b).is_some() && ctx.derives(f, b))
        });
        if !placeable {
            return Ok(empty);
        }
    }
    let mut p = Placement {
        ctx,
        tree,
        order: search_order(&base_view),
        base_view,
        fragment,
        anchor,
        extra,
        cfg,
        used: BTreeSet::new(),
        mapping: DerivedMapping::new(),
        scores: BTreeMap::new(),
        best: None,
    };
    p.search(0)?;
    Ok(match p.best {
        Some((membership, _, mapping)) => MatchResult { base: tree.root.clone(), mapping, membership },
        None => empty,
    })
}

/// Places the fragment inside the tree and reads the root probability after
/// propagating every placed element's membership.
///
/// Every fragment element that has a compatible position somewhere must be
/// placeable; among placements the one with the highest membership wins, ties
/// going to the lexicographically smallest pair list.
pub fn match_tree(
    ctx: &MatchContext<'_>,
    fragment: &[ElementId],
    tree: &TreeNetworkView,
    cfg: &EngineConfig,
) -> Result<MatchResult> {
    match_tree_inner(ctx, fragment, tree, cfg, None, &BTreeMap::new())
}

/// Like [`match_tree`] but only placements that include `anchor` count.
pub fn match_tree_anchored(
    ctx: &MatchContext<'_>,
    fragment: &[ElementId],
    tree: &TreeNetworkView,
    anchor: &ElementId,
    cfg: &EngineConfig,
) -> Result<MatchResult> {
    match_tree_inner(ctx, fragment, tree, cfg, Some(anchor), &BTreeMap::new())
}

/// Matches inner trees first and feeds their memberships to the outer level
/// as the inputs of their roots.
pub fn match_nested(
    ctx: &MatchContext<'_>,
    fragment: &[ElementId],
    tree: &TreeNetworkView,
    cfg: &EngineConfig,
) -> Result<MatchResult> {
    let trees = knowledge_trees(ctx.kb);
    nested(ctx, fragment, tree, cfg, &trees, 0)
}

fn nested(
    ctx: &MatchContext<'_>,
    fragment: &[ElementId],
    tree: &TreeNetworkView,
    cfg: &EngineConfig,
    trees: &[TreeNetworkView],
    depth: usize,
) -> Result<MatchResult> {
    if depth > cfg.nesting_limit {
        return Err(Error::Depth(cfg.nesting_limit));
    }
    let inner_trees: Vec<&TreeNetworkView> = tree
        .members
        .iter()
        .filter_map(|m| trees.iter().find(|t| &t.root == m && !t.longitudinal.is_empty()))
        .collect();
    if inner_trees.is_empty() {
        return match_tree(ctx, fragment, tree, cfg);
    }

    let mut outer = tree.clone();
    let mut extra = BTreeMap::new();
    let mut mapping = DerivedMapping::new();
    let mut remaining: Vec<ElementId> = fragment.to_vec();
    for inner in inner_trees {
        let inner_elements: Vec<ElementId> = inner.elements();
        let inner_fragment: Vec<ElementId> = remaining
            .iter()
            .filter(|f| inner_elements.iter().any(|b| placement_score(ctx, inner, f, b) > 0.0))
            .cloned()
            .collect();
        let res = nested(ctx, &inner_fragment, inner, cfg, trees, depth + 1)?;
        for (b, d) in res.mapping.iter() {
            mapping.insert(b.clone(), d.clone());
            remaining.retain(|f| f != d);
        }
        extra.insert(inner.root.clone(), res.membership);
        let hidden: Vec<ElementId> = inner_elements.into_iter().filter(|e| e != &inner.root).collect();
        outer.members.retain(|m| !hidden.contains(m));
        outer.longitudinal.retain(|m| !hidden.contains(m));
        outer.additional.retain(|m| !hidden.contains(m));
    }
    let res = match_tree_inner(ctx, &remaining, &outer, cfg, None, &extra)?;
    for (b, d) in res.mapping.iter() {
        mapping.insert(b.clone(), d.clone());
    }
    Ok(MatchResult { base: tree.root.clone(), mapping, membership: res.membership })
}

/// Whether the fragment contains a complete derived copy of `base`.
pub fn match_complete(ctx: &MatchContext<'_>, fragment: &[ElementId], base: &[ElementId]) -> bool {
    let derived = NetworkFragment::of(ctx.fragment_net, fragment.iter().cloned());
    let base = NetworkFragment::of(ctx.kb, base.iter().cloned());
    check_derived_network(&derived, &base, ctx).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{classify_tree_network, BasicRelationKind, Concept, Relation, ValueTerm};
    use crate::probability::{superpose, Gaussian};
    use BasicRelationKind::*;

    fn id(s: &str) -> ElementId {
        ElementId::from(s)
    }

    /// Root R with members a (P(R|a)=0.7) and b (P(R|b)=0.5).
    fn two_member_kb() -> CognitiveNetwork {
        let mut kb = CognitiveNetwork::knowledge();
        for c in ["R", "a", "b"] {
            kb.add_concept(c, Concept::named(c)).unwrap();
        }
        kb.add_relation("Ra", Relation::new(HasComponent, "R", "a").with_cond(1.0, 0.7)).unwrap();
        kb.add_relation("Rb", Relation::new(HasComponent, "R", "b").with_cond(1.0, 0.5)).unwrap();
        kb
    }

    fn instance_of(bases: &[&str]) -> (CognitiveNetwork, Vec<ElementId>) {
        let mut inst = CognitiveNetwork::instance();
        let mut ids = Vec::new();
        for b in bases {
            let i = id(&format!("{b}1"));
            inst.add_concept(i.clone(), Concept::named(*b)).unwrap();
            inst.add_base(&i, &id(b)).unwrap();
            ids.push(i);
        }
        (inst, ids)
    }

    #[test]
    fn concept_matching() {
        let mut kb = CognitiveNetwork::knowledge();
        kb.add_concept("fruit", Concept::named("fruit")).unwrap();
        kb.add_concept("apple", Concept::named("apple")).unwrap();
        kb.add_base(&id("apple"), &id("fruit")).unwrap();
        let mut adult = Concept::named("adult-height");
        adult.distribution = Some(Gaussian::new(1.7, 0.1).unwrap());
        kb.add_concept("adult-height", adult).unwrap();
        let ctx = MatchContext::new(&kb, &kb);
        assert_eq!(match_concept(&ctx, &Term::Id(id("apple")), &id("fruit")), 1.0);
        assert_eq!(match_concept(&ctx, &Term::Id(id("fruit")), &id("fruit")), 1.0);
        assert_eq!(match_concept(&ctx, &Term::Id(id("fruit")), &id("apple")), 0.0);
        let h = match_concept(&ctx, &Term::Value(ValueTerm::Scalar(1.8)), &id("adult-height"));
        assert!((h - (-0.5f64).exp()).abs() < 1e-9);
        assert_eq!(match_concept(&ctx, &Term::Value(ValueTerm::Scalar(1.8)), &id("fruit")), 0.0);
    }

    #[test]
    fn single_and_pair_membership() {
        let kb = two_member_kb();
        let tree = classify_tree_network(&kb, &id("R")).unwrap();
        let cfg = EngineConfig::default();
        let (inst, ids) = instance_of(&["a", "b"]);
        let ctx = MatchContext::new(&inst, &kb);
        let one = match_tree(&ctx, &ids[..1], &tree, &cfg).unwrap();
        assert!((one.membership - 0.7).abs() < 1e-12);
        let both = match_tree(&ctx, &ids, &tree, &cfg).unwrap();
        assert!((both.membership - superpose(0.7, 0.5).unwrap()).abs() < 1e-12);
        assert_eq!(both.mapping.get(&id("b")), Some(&id("b1")));
    }

    #[test]
    fn incompatible_element_fails_structure() {
        let kb = two_member_kb();
        let tree = classify_tree_network(&kb, &id("R")).unwrap();
        let mut inst = CognitiveNetwork::instance();
        inst.add_concept("x", Concept::named("x")).unwrap();
        inst.add_concept("y", Concept::named("y")).unwrap();
        inst.add_relation("xy", Relation::new(Move, "x", "y")).unwrap();
        let ctx = MatchContext::new(&inst, &kb);
        let res = match_tree(&ctx, &[id("xy")], &tree, &EngineConfig::default()).unwrap();
        assert_eq!(res.membership, 0.0);
        assert!(res.mapping.is_empty());
    }

    #[test]
    fn relation_parameters_scale_paths() {
        let mut kb = CognitiveNetwork::knowledge();
        for c in ["R", "a"] {
            kb.add_concept(c, Concept::named(c)).unwrap();
        }
        let mut r = Relation::new(HasComponent, "R", "a").with_cond(1.0, 0.7);
        r.params.insert("distance".into(), Param::Interval { lo: 0.0, hi: 5.0 });
        kb.add_relation("Ra", r).unwrap();
        let tree = classify_tree_network(&kb, &id("R")).unwrap();
        let (mut inst, mut ids) = instance_of(&["a", "R"]);
        let mut obs = Relation::new(HasComponent, "R1", "a1");
        obs.params.insert("distance".into(), Param::Real(7.0));
        inst.add_relation("obs", obs).unwrap();
        ids.retain(|i| i != &id("R1"));
        ids.push(id("obs"));
        let ctx = MatchContext::new(&inst, &kb);
        let res = match_tree(&ctx, &ids, &tree, &EngineConfig::default()).unwrap();
        // The observed relation is placed but its distance is out of range.
        assert_eq!(res.mapping.get(&id("Ra")), Some(&id("obs")));
        assert_eq!(res.membership, 0.0);
    }

    fn nested_kb() -> CognitiveNetwork {
        // outer O has members I1 and I2, each the root of an inner tree.
        let mut kb = CognitiveNetwork::knowledge();
        for c in ["O", "I1", "I2", "x", "y", "z"] {
            kb.add_concept(c, Concept::named(c)).unwrap();
        }
        kb.add_relation("O-I1", Relation::new(HasPart, "O", "I1")).unwrap();
        kb.add_relation("O-I2", Relation::new(HasPart, "O", "I2")).unwrap();
        kb.add_relation("I1-x", Relation::new(HasComponent, "I1", "x").with_cond(1.0, 0.7)).unwrap();
        kb.add_relation("I2-y", Relation::new(HasComponent, "I2", "y").with_cond(1.0, 0.5)).unwrap();
        kb.add_relation("I2-z", Relation::new(HasComponent, "I2", "z").with_cond(1.0, 0.6)).unwrap();
        kb
    }

    #[test]
    fn nested_memberships_compose() {
        let kb = nested_kb();
        let tree = classify_tree_network(&kb, &id("O")).unwrap();
        let cfg = EngineConfig::default();
        let (inst, ids) = instance_of(&["x", "y"]);
        let ctx = MatchContext::new(&inst, &kb);
        let res = match_nested(&ctx, &ids, &tree, &cfg).unwrap();
        assert!((res.membership - 0.85).abs() < 1e-12);

        let (inst, ids) = instance_of(&["x"]);
        let ctx = MatchContext::new(&inst, &kb);
        let res = match_nested(&ctx, &ids, &tree, &cfg).unwrap();
        assert!((res.membership - 0.7).abs() < 1e-12);
    }

    #[test]
    fn nested_full_inner_match_equals_flat() {
        let kb = nested_kb();
        let tree = classify_tree_network(&kb, &id("O")).unwrap();
        let cfg = EngineConfig::default();
        let (inst, ids) = instance_of(&["I1"]);
        let ctx = MatchContext::new(&inst, &kb);
        let nested = match_nested(&ctx, &ids, &tree, &cfg).unwrap();
        let flat = match_tree(&ctx, &ids, &tree, &cfg).unwrap();
        assert_eq!(nested.membership, flat.membership);
        assert_eq!(nested.membership, 1.0);
    }

    #[test]
    fn nesting_depth_limit() {
        let kb = nested_kb();
        let tree = classify_tree_network(&kb, &id("O")).unwrap();
        let cfg = EngineConfig { nesting_limit: 0, ..Default::default() };
        let (inst, ids) = instance_of(&["x"]);
        let ctx = MatchContext::new(&inst, &kb);
        assert_eq!(match_nested(&ctx, &ids, &tree, &cfg), Err(Error::Depth(0)));
    }

    #[test]
    fn complete_matching() {
        let kb = two_member_kb();
        let base: Vec<ElementId> = kb.ids().cloned().collect();
        let (mut inst, _) = instance_of(&["R", "a", "b"]);
        inst.add_relation("r1", Relation::new(HasComponent, "R1", "a1")).unwrap();
        let ctx = MatchContext::new(&inst, &kb);
        let partial: Vec<ElementId> = inst.ids().cloned().collect();
        assert!(!match_complete(&ctx, &partial, &base));
        inst.add_relation("r2", Relation::new(HasComponent, "R1", "b1")).unwrap();
        inst.add_concept("extra", Concept::named("extra")).unwrap();
        let all: Vec<ElementId> = inst.ids().cloned().collect();
        let ctx = MatchContext::new(&inst, &kb);
        assert!(match_complete(&ctx, &all, &base));
        let same = MatchContext::new(&kb, &kb);
        assert!(match_complete(&same, &base, &base));
    }
}
