use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::kind::BasicRelationKind;
use super::network::{CognitiveNetwork, ElementId};
use crate::error::{Error, Result};

/// A borrowed selection of elements of one network.
#[derive(Debug, Clone)]
pub struct NetworkFragment<'a> {
    pub net: &'a CognitiveNetwork,
    pub elements: Vec<ElementId>,
}

impl<'a> NetworkFragment<'a> {
    pub fn whole(net: &'a CognitiveNetwork) -> Self {
        NetworkFragment { net, elements: net.ids().cloned().collect() }
    }

    pub fn of(net: &'a CognitiveNetwork, elements: impl IntoIterator<Item = ElementId>) -> Self {
        NetworkFragment { net, elements: elements.into_iter().collect() }
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.elements.contains(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ElementId> {
        self.elements.iter().filter(|id| self.net.concept(id).is_some())
    }

    pub fn relations(&self) -> impl Iterator<Item = &ElementId> {
        self.elements.iter().filter(|id| self.net.relation(id).is_some())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// A rooted view over a connected subnetwork.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNetworkView {
    pub root: ElementId,
    /// Non-root elements reached from the root, in discovery order.
    pub members: Vec<ElementId>,
    /// Relations on top-down chains from the root.
    pub longitudinal: Vec<ElementId>,
    /// Every other relation inside the tree.
    pub additional: Vec<ElementId>,
}

impl TreeNetworkView {
    /// Root, members and relations, without repetition.
    pub fn elements(&self) -> Vec<ElementId> {
        let mut out = vec![self.root.clone()];
        for id in self.members.iter().chain(&self.longitudinal).chain(&self.additional) {
            if !out.contains(id) {
                out.push(id.clone());
            }
        }
        out
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        &self.root == id
            || self.members.contains(id)
            || self.longitudinal.contains(id)
            || self.additional.contains(id)
    }

    pub fn fragment<'a>(&self, net: &'a CognitiveNetwork) -> NetworkFragment<'a> {
        NetworkFragment::of(net, self.elements())
    }

    pub fn relations(&self) -> impl Iterator<Item = &ElementId> {
        self.longitudinal.iter().chain(&self.additional)
    }
}

fn ignored(kind: BasicRelationKind) -> bool {
    matches!(kind, BasicRelationKind::Xor | BasicRelationKind::BelongTo)
}

/// Classifies the tree rooted at `root`.
///
/// With a tree declaration the declared members bound the scope; otherwise the
/// scope is everything reachable by following longitudinal relations downward
/// and lateral relations either way. Every concept in scope has to hang off a
/// downward chain from the root.
pub fn classify_tree_network(net: &CognitiveNetwork, root: &ElementId) -> Result<TreeNetworkView> {
    let root_el = net.get(root)?;
    let declared: Option<BTreeSet<ElementId>> = net
        .tree(root)
        .map(|d| d.members.iter().cloned().chain([root.clone()]).collect());
    // A declaration lists concepts; relations among them come along.
    let allowed = |id: &ElementId| {
        declared.as_ref().is_none_or(|s| {
            s.contains(id) || net.relation(id).is_some_and(|r| s.contains(&r.a) && s.contains(&r.b))
        })
    };

    // Scope discovery.
    let mut scope = vec![root.clone()];
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(cur) = queue.pop_front() {
        for rid in net.incident(&cur) {
            let r = net.relation(rid).expect("incident yields relations");
            if ignored(r.kind) || (r.kind.is_longitudinal() && r.b == cur) {
                // Upward longitudinal links belong to an enclosing tree.
                if declared.is_none() || !allowed(rid) {
                    continue;
                }
            }
            for next in [rid, &r.a, &r.b] {
                if !scope.contains(next) && allowed(next) {
                    scope.push(next.clone());
                    queue.push_back(next.clone());
                }
            }
        }
    }
    if let Some(decl) = &declared {
        if let Some(missing) = decl.iter().find(|m| !scope.contains(m)) {
            return Err(Error::structure(missing, format!("not connected to tree root `{root}`")));
        }
    }

    // Top-down chains. A relation root contributes its endpoints as tops.
    let mut tops = vec![root.clone()];
    if let Some(r) = root_el.relation() {
        tops.push(r.a.clone());
        tops.push(r.b.clone());
    }
    let mut reached: Vec<ElementId> = tops.clone();
    let mut longitudinal = Vec::new();
    let mut queue: VecDeque<ElementId> = tops.into();
    while let Some(cur) = queue.pop_front() {
        for rid in net.incident(&cur) {
            let r = net.relation(rid).expect("incident yields relations");
            if !r.kind.is_longitudinal() || r.a != cur || rid == root || !scope.contains(rid) {
                continue;
            }
            if !longitudinal.contains(rid) {
                longitudinal.push(rid.clone());
            }
            for next in [rid, &r.b] {
                if !reached.contains(next) {
                    reached.push(next.clone());
                    queue.push_back(next.clone());
                }
            }
        }
    }

    let mut additional = Vec::new();
    for id in &scope {
        let el = net.get(id)?;
        match el.relation() {
            None => {
                if !reached.contains(id) {
                    return Err(Error::structure(
                        id,
                        format!("no longitudinal chain from `{root}` reaches this concept"),
                    ));
                }
            }
            Some(r) => {
                if longitudinal.contains(id) || id == root {
                    continue;
                }
                if r.kind.is_longitudinal() {
                    return Err(Error::structure(
                        id,
                        format!("longitudinal chain does not start at `{root}`"),
                    ));
                }
                if !ignored(r.kind) {
                    additional.push(id.clone());
                }
            }
        }
    }
    let members = reached
        .iter()
        .filter(|id| *id != root && net.concept(id).is_some())
        .cloned()
        .collect();
    Ok(TreeNetworkView { root: root.clone(), members, longitudinal, additional })
}

/// Every tree of a knowledge network that can serve as a matching template:
/// declared trees plus each concept heading a longitudinal relation.
/// Roots whose structure fails classification are skipped.
pub fn knowledge_trees(net: &CognitiveNetwork) -> Vec<TreeNetworkView> {
    let mut roots: Vec<ElementId> = net.trees().map(|(r, _)| r.clone()).collect();
    for (_, r) in net.relations() {
        if r.kind.is_longitudinal() && net.concept(&r.a).is_some() && !roots.contains(&r.a) {
            roots.push(r.a.clone());
        }
    }
    roots.iter().filter_map(|r| classify_tree_network(net, r).ok()).collect()
}
