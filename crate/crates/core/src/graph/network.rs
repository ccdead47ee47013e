use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::kind::BasicRelationKind;
use super::value::{Param, ValueTerm};
use crate::error::{Error, Result};
use crate::probability::{ConditionalProbabilityPair, Gaussian, ProbSpec, ProbabilityState};

/// Identifier of a concept or relation, unique within its network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(id: impl Into<String>) -> Self {
        ElementId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId(s.to_owned())
    }
}

impl From<String> for ElementId {
    fn from(s: String) -> Self {
        ElementId(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub value: Option<ValueTerm>,
    /// Continuous concepts declare a distribution over candidate values.
    pub distribution: Option<Gaussian>,
    pub params: BTreeMap<String, Param>,
}

impl Concept {
    pub fn named(name: impl Into<String>) -> Self {
        Concept { name: name.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: BasicRelationKind,
    pub a: ElementId,
    pub b: ElementId,
    pub cond: ConditionalProbabilityPair,
    pub params: BTreeMap<String, Param>,
    /// Relational membership factor R used during propagation.
    pub membership: f64,
}

impl Relation {
    /// A relation whose conditional probabilities default to the kind's fixed
    /// values, or 1 where the kind leaves them free.
    pub fn new(kind: BasicRelationKind, a: impl Into<ElementId>, b: impl Into<ElementId>) -> Self {
        let cond = ConditionalProbabilityPair::points(
            kind.fixed_forward().unwrap_or(1.0),
            kind.fixed_backward().unwrap_or(1.0),
        );
        Relation {
            kind,
            a: a.into(),
            b: b.into(),
            cond,
            params: BTreeMap::new(),
            membership: 1.0,
        }
    }

    pub fn with_cond(mut self, pba: f64, pab: f64) -> Self {
        self.cond = ConditionalProbabilityPair::points(pba, pab);
        self
    }

    /// The far end when standing on `from`, if `from` is an endpoint.
    pub fn other_end(&self, from: &ElementId) -> Option<&ElementId> {
        if &self.a == from {
            Some(&self.b)
        } else if &self.b == from {
            Some(&self.a)
        } else {
            None
        }
    }

    pub fn touches(&self, id: &ElementId) -> bool {
        &self.a == id || &self.b == id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Concept(Concept),
    Relation(Relation),
}

/// A concept or relation together with its belong-to links and state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: ElementId,
    /// Elements this one was derived from. In an instance network these name
    /// elements of the knowledge base.
    pub bases: Vec<ElementId>,
    pub state: ProbabilityState,
    pub payload: Payload,
}

impl Element {
    pub fn concept(&self) -> Option<&Concept> {
        match &self.payload {
            Payload::Concept(c) => Some(c),
            Payload::Relation(_) => None,
        }
    }

    pub fn relation(&self) -> Option<&Relation> {
        match &self.payload {
            Payload::Relation(r) => Some(r),
            Payload::Concept(_) => None,
        }
    }

    pub fn relation_mut(&mut self) -> Option<&mut Relation> {
        match &mut self.payload {
            Payload::Relation(r) => Some(r),
            Payload::Concept(_) => None,
        }
    }

    pub fn is_relation(&self) -> bool {
        matches!(self.payload, Payload::Relation(_))
    }

    pub fn params(&self) -> &BTreeMap<String, Param> {
        match &self.payload {
            Payload::Concept(c) => &c.params,
            Payload::Relation(r) => &r.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut BTreeMap<String, Param> {
        match &mut self.payload {
            Payload::Concept(c) => &mut c.params,
            Payload::Relation(r) => &mut r.params,
        }
    }

    pub fn value(&self) -> Option<ValueTerm> {
        self.concept().and_then(|c| c.value)
    }
}

/// Whether a network holds reusable knowledge or task-specific instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkRole {
    Knowledge,
    Instance,
}

/// Application statistics of a learned tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub new_knowledge: bool,
    pub success: u64,
    pub trials: u64,
    pub created_at: u64,
}

/// Co-occurrence counts of a learned relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelationStats {
    pub cooccur: u64,
    pub seen: u64,
}

/// An explicit tree declaration: its members and, for instance trees, the
/// knowledge tree it was grown from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDecl {
    pub members: Vec<ElementId>,
    pub base: Option<ElementId>,
    pub stats: Option<TreeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitiveNetwork {
    role: NetworkRole,
    elements: IndexMap<ElementId, Element>,
    trees: IndexMap<ElementId, TreeDecl>,
    relation_stats: IndexMap<ElementId, RelationStats>,
    globals: BTreeMap<String, String>,
    retired: BTreeSet<ElementId>,
    serials: BTreeMap<String, u64>,
}

impl CognitiveNetwork {
    pub fn new(role: NetworkRole) -> Self {
        CognitiveNetwork {
            role,
            elements: IndexMap::new(),
            trees: IndexMap::new(),
            relation_stats: IndexMap::new(),
            globals: BTreeMap::new(),
            retired: BTreeSet::new(),
            serials: BTreeMap::new(),
        }
    }

    pub fn knowledge() -> Self {
        Self::new(NetworkRole::Knowledge)
    }

    pub fn instance() -> Self {
        Self::new(NetworkRole::Instance)
    }

    pub fn role(&self) -> NetworkRole {
        self.role
    }

    /// |concepts| + |relations|.
    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.elements.contains_key(id)
    }

    pub fn get(&self, id: &ElementId) -> Result<&Element> {
        self.elements.get(id).ok_or_else(|| Error::Lookup(id.clone()))
    }

    pub fn get_mut(&mut self, id: &ElementId) -> Result<&mut Element> {
        self.elements.get_mut(id).ok_or_else(|| Error::Lookup(id.clone()))
    }

    pub fn concept(&self, id: &ElementId) -> Option<&Concept> {
        self.elements.get(id).and_then(Element::concept)
    }

    pub fn relation(&self, id: &ElementId) -> Option<&Relation> {
        self.elements.get(id).and_then(Element::relation)
    }

    pub fn state(&self, id: &ElementId) -> Result<&ProbabilityState> {
        self.get(id).map(|e| &e.state)
    }

    pub fn state_mut(&mut self, id: &ElementId) -> Result<&mut ProbabilityState> {
        self.get_mut(id).map(|e| &mut e.state)
    }

    /// Elements in insertion order.
    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ElementId> {
        self.elements.keys()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&ElementId, &Relation)> {
        self.elements.iter().filter_map(|(id, e)| e.relation().map(|r| (id, r)))
    }

    pub fn index_of(&self, id: &ElementId) -> Option<usize> {
        self.elements.get_index_of(id)
    }

    /// Relations with `id` as an endpoint, in insertion order.
    pub fn incident(&self, id: &ElementId) -> Vec<&ElementId> {
        self.relations().filter(|(_, r)| r.touches(id)).map(|(rid, _)| rid).collect()
    }

    pub fn is_retired(&self, id: &ElementId) -> bool {
        self.retired.contains(id)
    }

    pub fn add_concept(&mut self, id: impl Into<ElementId>, concept: Concept) -> Result<ElementId> {
        let id = id.into();
        self.insert(Element {
            id: id.clone(),
            bases: Vec::new(),
            state: ProbabilityState::default(),
            payload: Payload::Concept(concept),
        })?;
        Ok(id)
    }

    pub fn add_relation(&mut self, id: impl Into<ElementId>, relation: Relation) -> Result<ElementId> {
        let id = id.into();
        self.insert(Element {
            id: id.clone(),
            bases: Vec::new(),
            state: ProbabilityState::default(),
            payload: Payload::Relation(relation),
        })?;
        Ok(id)
    }

    /// Inserts a fully formed element after checking referential integrity,
    /// kind constraints and (in a knowledge network) belong-to acyclicity and
    /// derived overloading.
    pub fn insert(&mut self, element: Element) -> Result<()> {
        let id = &element.id;
        if self.elements.contains_key(id) || self.retired.contains(id) {
            return Err(Error::Duplicate(id.clone()));
        }
        if let Payload::Relation(r) = &element.payload {
            for end in [&r.a, &r.b] {
                if end == id {
                    return Err(Error::structure(id, "a relation cannot end on itself"));
                }
                if !self.elements.contains_key(end) {
                    return Err(Error::Lookup(end.clone()));
                }
            }
            check_cond(id, r)?;
            if r.kind == BasicRelationKind::BelongTo && self.reaches_strictly(&r.b, &r.a) {
                return Err(Error::structure(id, "belong-to cycle"));
            }
        }
        if self.role == NetworkRole::Knowledge {
            for base in &element.bases {
                self.check_base(&element, base)?;
            }
        }
        self.elements.insert(id.clone(), element);
        Ok(())
    }

    /// Adds a belong-to link `derived ⊆ base`.
    pub fn add_base(&mut self, derived: &ElementId, base: &ElementId) -> Result<()> {
        let element = self.get(derived)?;
        if element.bases.contains(base) {
            return Ok(());
        }
        if self.role == NetworkRole::Knowledge {
            self.check_base(element, base)?;
        }
        self.get_mut(derived)?.bases.push(base.clone());
        Ok(())
    }

    fn check_base(&self, element: &Element, base: &ElementId) -> Result<()> {
        let id = &element.id;
        let target = self.get(base)?;
        if base == id || self.reaches_strictly(base, id) {
            return Err(Error::structure(id, format!("belong-to cycle through `{base}`")));
        }
        match (&element.payload, &target.payload) {
            (Payload::Concept(_), Payload::Concept(_)) => Ok(()),
            (Payload::Relation(d), Payload::Relation(b)) => check_overloading(id, d, b),
            _ => Err(Error::Kind(format!(
                "`{id}` cannot derive from `{base}`: concept and relation mixed"
            ))),
        }
    }

    /// Removes an element and every relation that transitively depends on it.
    /// Removed ids are retired and never handed out again.
    pub fn remove(&mut self, id: &ElementId) -> Result<Vec<ElementId>> {
        self.get(id)?;
        let mut doomed = vec![id.clone()];
        let mut i = 0;
        while i < doomed.len() {
            let cur = doomed[i].clone();
            for rid in self.incident(&cur) {
                if !doomed.contains(rid) {
                    doomed.push(rid.clone());
                }
            }
            i += 1;
        }
        for d in &doomed {
            self.elements.shift_remove(d);
            self.relation_stats.shift_remove(d);
            self.retired.insert(d.clone());
        }
        for decl in self.trees.values_mut() {
            decl.members.retain(|m| !doomed.contains(m));
        }
        self.trees.retain(|root, _| !doomed.contains(root));
        Ok(doomed)
    }

    /// A fresh id `<stem>#<n>` that has never been used here.
    pub fn fresh_id(&mut self, stem: &str) -> ElementId {
        let stem = stem.split('#').next().unwrap_or(stem).to_owned();
        let counter = self.serials.entry(stem.clone()).or_insert(0);
        loop {
            *counter += 1;
            let id = ElementId(format!("{stem}#{counter}"));
            if !self.elements.contains_key(&id) && !self.retired.contains(&id) {
                return id;
            }
        }
    }

    pub fn trees(&self) -> impl Iterator<Item = (&ElementId, &TreeDecl)> {
        self.trees.iter()
    }

    pub fn tree(&self, root: &ElementId) -> Option<&TreeDecl> {
        self.trees.get(root)
    }

    pub fn tree_mut(&mut self, root: &ElementId) -> Option<&mut TreeDecl> {
        self.trees.get_mut(root)
    }

    pub fn declare_tree(&mut self, root: &ElementId, decl: TreeDecl) -> Result<()> {
        self.get(root)?;
        for m in &decl.members {
            self.get(m)?;
        }
        self.trees.insert(root.clone(), decl);
        Ok(())
    }

    pub fn remove_tree(&mut self, root: &ElementId) -> Option<TreeDecl> {
        self.trees.shift_remove(root)
    }

    pub fn relation_stats(&self, id: &ElementId) -> Option<RelationStats> {
        self.relation_stats.get(id).copied()
    }

    pub fn all_relation_stats(&self) -> impl Iterator<Item = (&ElementId, &RelationStats)> {
        self.relation_stats.iter()
    }

    pub fn set_relation_stats(&mut self, id: &ElementId, stats: RelationStats) -> Result<()> {
        if self.relation(id).is_none() {
            return Err(Error::Lookup(id.clone()));
        }
        self.relation_stats.insert(id.clone(), stats);
        Ok(())
    }

    pub fn globals(&self) -> &BTreeMap<String, String> {
        &self.globals
    }

    pub fn set_global(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.globals.insert(key.into(), value.into());
    }

    /// Same-network belong-to outgoing links of `id`: its bases (knowledge
    /// networks only), BelongTo relations leaving it, and Equal relations in
    /// either direction.
    fn belong_successors(&self, id: &ElementId, with_equal: bool) -> Vec<ElementId> {
        let mut out = Vec::new();
        if let Some(e) = self.elements.get(id) {
            if self.role == NetworkRole::Knowledge {
                out.extend(e.bases.iter().cloned());
            }
        }
        for (_, r) in self.relations() {
            match r.kind {
                BasicRelationKind::BelongTo if &r.a == id => out.push(r.b.clone()),
                BasicRelationKind::Equal if with_equal => {
                    if let Some(o) = r.other_end(id) {
                        out.push(o.clone());
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Every element reachable from `start` by belong-to links (reflexive).
    pub fn belong_closure(&self, start: &ElementId) -> Vec<ElementId> {
        let mut seen = vec![start.clone()];
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(cur) = queue.pop_front() {
            for next in self.belong_successors(&cur, true) {
                if !seen.contains(&next) {
                    seen.push(next.clone());
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Reachability over non-Equal belong-to links, excluding the trivial path.
    fn reaches_strictly(&self, from: &ElementId, to: &ElementId) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<ElementId> = self.belong_successors(from, false).into();
        while let Some(cur) = queue.pop_front() {
            if &cur == to {
                return true;
            }
            if seen.insert(cur.clone()) {
                queue.extend(self.belong_successors(&cur, false));
            }
        }
        false
    }

    /// `candidate ⊆ base` within this network.
    pub fn belongs_to(&self, candidate: &ElementId, base: &ElementId) -> Result<bool> {
        self.get(candidate)?;
        let base_value = self.get(base)?.value();
        Ok(self.belong_closure(candidate).iter().any(|x| {
            x == base
                || match (self.elements.get(x).and_then(Element::value), base_value) {
                    (Some(v), Some(bv)) => v.contained_in(&bv),
                    _ => false,
                }
        }))
    }

    /// Belong-to over ids or bare values.
    pub fn belongs_to_term(&self, candidate: &Term, base: &Term) -> Result<bool> {
        let value_of = |t: &Term| -> Result<Option<ValueTerm>> {
            match t {
                Term::Value(v) => Ok(Some(*v)),
                Term::Id(id) => Ok(self.get(id)?.value()),
            }
        };
        match (candidate, base) {
            (Term::Id(c), Term::Id(b)) => self.belongs_to(c, b),
            _ => {
                let cv = value_of(candidate)?;
                let bv = value_of(base)?;
                Ok(match (cv, bv) {
                    (Some(c), Some(b)) => c.contained_in(&b),
                    _ => false,
                })
            }
        }
    }
}

/// An element reference or a literal value, for belong-to queries.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Id(ElementId),
    Value(ValueTerm),
}

fn check_cond(id: &ElementId, r: &Relation) -> Result<()> {
    for (forward, spec) in [(true, &r.cond.forward), (false, &r.cond.backward)] {
        if let ProbSpec::Point(p) = spec {
            if !r.kind.admits(forward, *p) {
                let dir = if forward { "P(B|A)" } else { "P(A|B)" };
                return Err(Error::Parameter(format!(
                    "`{id}`: {dir} = {p} is not admissible for {}",
                    r.kind
                )));
            }
        } else if r.kind.fixed_forward().is_some() && forward
            || r.kind.fixed_backward().is_some() && !forward
        {
            return Err(Error::Parameter(format!("`{id}`: {} fixes this probability", r.kind)));
        }
    }
    if !(0.0..=1.0).contains(&r.membership) {
        return Err(Error::Parameter(format!("`{id}`: membership factor out of [0,1]")));
    }
    Ok(())
}

fn check_overloading(id: &ElementId, derived: &Relation, base: &Relation) -> Result<()> {
    if derived.kind != base.kind {
        return Err(Error::Kind(format!(
            "`{id}` is {} but its base is {}",
            derived.kind, base.kind
        )));
    }
    for (name, spec) in &base.params {
        if let Some(p) = derived.params.get(name) {
            if !p.within(spec) {
                return Err(Error::Parameter(format!(
                    "`{id}`: parameter `{name}` lies outside its base range"
                )));
            }
        }
    }
    Ok(())
}
