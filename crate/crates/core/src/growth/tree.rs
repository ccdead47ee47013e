use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::basic::{grow_concept, grow_link};
use crate::error::{Error, Result};
use crate::graph::{CognitiveNetwork, Derivation, DerivedMapping, ElementId, Layered, TreeDecl, TreeNetworkView};
use crate::probability::{conditional_toward, ContributionLedger, EngineConfig};
use crate::trace::Trace;

/// An instance tree under construction and the knowledge tree it copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrownTree {
    pub tree: TreeNetworkView,
    /// Knowledge element to instance element.
    pub mapping: DerivedMapping,
    /// Knowledge elements that must not be instantiated again: blocked by
    /// suppression or removed by pruning.
    pub cut: BTreeSet<ElementId>,
    /// The collapsed root has been offered for matching against enclosing
    /// trees.
    pub offered: bool,
}

impl GrownTree {
    pub fn root(&self) -> Option<&ElementId> {
        self.mapping.get(&self.tree.root)
    }

    /// Knowledge elements not yet instantiated.
    pub fn deferred(&self) -> Vec<ElementId> {
        self.tree
            .elements()
            .into_iter()
            .filter(|b| !self.mapping.contains_base(b) && !self.cut.contains(b))
            .collect()
    }
}

/// Probability an uninstantiated base concept would receive from its already
/// instantiated tree neighbours: the best of neighbour result times the
/// conditional probability toward it.
fn projected(net: &CognitiveNetwork, kb: &CognitiveNetwork, grown: &GrownTree, base: &ElementId) -> f64 {
    let mut best: f64 = 0.0;
    for rid in grown.tree.relations() {
        let Some(r) = kb.relation(rid) else { continue };
        let Some(other) = r.other_end(base) else { continue };
        if other == base {
            continue;
        }
        let Some(inst) = grown.mapping.get(other) else { continue };
        let Ok(st) = net.state(inst) else { continue };
        if st.is_suppressed() {
            continue;
        }
        best = best.max(st.result * conditional_toward(kb, r, other));
    }
    best
}

/// Instantiates every base element of the tree whose projected probability
/// reaches the activation threshold, repeating while anything new appears.
/// The root is always instantiated. Returns whether anything was grown.
pub fn extend_tree(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    grown: &mut GrownTree,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<bool> {
    let mut any = false;
    loop {
        let mut progressed = false;
        for b in grown.tree.elements() {
            if grown.mapping.contains_base(&b) || grown.cut.contains(&b) {
                continue;
            }
            if kb.concept(&b).is_some() {
                let is_root = b == grown.tree.root;
                if !is_root && projected(net, kb, grown, &b) < cfg.activation_threshold {
                    continue;
                }
                match grow_concept(net, kb, &b, trace) {
                    Ok(inst) => {
                        super::link_conflicts(net, kb, &inst, trace)?;
                        grown.mapping.insert(b.clone(), inst);
                        progressed = true;
                    }
                    Err(Error::GrowthBlocked(_)) => {
                        grown.cut.insert(b.clone());
                    }
                    Err(e) => return Err(e),
                }
            } else if let Some(r) = kb.relation(&b) {
                let (Some(ia), Some(ib)) = (grown.mapping.get(&r.a).cloned(), grown.mapping.get(&r.b).cloned())
                else {
                    continue;
                };
                if net.state(&ia)?.is_suppressed() || net.state(&ib)?.is_suppressed() {
                    grown.cut.insert(b.clone());
                    continue;
                }
                let link = grow_link(net, kb, &ia, &b, Some(&ib), cfg, ledger, trace)?;
                grown.mapping.insert(b.clone(), link);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
        any = true;
    }
    record_tree(net, grown)?;
    Ok(any)
}

/// Writes the tree declaration of the instance tree.
fn record_tree(net: &mut CognitiveNetwork, grown: &GrownTree) -> Result<()> {
    let Some(root) = grown.root().cloned() else {
        return Ok(());
    };
    let members: Vec<ElementId> = grown
        .tree
        .members
        .iter()
        .filter_map(|m| grown.mapping.get(m))
        .filter(|m| net.contains(m))
        .cloned()
        .collect();
    net.declare_tree(&root, TreeDecl { members, base: Some(grown.tree.root.clone()), stats: None })
}

/// Attaches seed elements to their base counterparts, then grows the rest of
/// the tree. Elements whose projected probability is still below the
/// activation threshold are left deferred in the returned record.
pub fn grow_tree(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    seed: &DerivedMapping,
    tree: &TreeNetworkView,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<GrownTree> {
    let mut grown = GrownTree { tree: tree.clone(), mapping: DerivedMapping::new(), cut: BTreeSet::new(), offered: false };
    attach_seed(net, kb, &mut grown, seed)?;
    extend_tree(net, kb, &mut grown, cfg, ledger, trace)?;
    Ok(grown)
}

/// Adds seed pairs to a grown tree, creating the belong-to links they need.
pub(crate) fn attach_seed(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    grown: &mut GrownTree,
    seed: &DerivedMapping,
) -> Result<()> {
    for (b, d) in seed.iter() {
        if grown.mapping.contains_base(b) || grown.mapping.contains_derived(d) {
            continue;
        }
        let base_el = kb.get(b)?;
        let el = net.get(d)?;
        if base_el.is_relation() != el.is_relation() {
            return Err(Error::structure(d, format!("cannot stand for `{b}`: concept and relation mixed")));
        }
        if let (Some(dr), Some(br)) = (el.relation(), base_el.relation()) {
            if dr.kind != br.kind {
                return Err(Error::structure(d, format!("{} cannot stand for {} `{b}`", dr.kind, br.kind)));
            }
        } else if !el.bases.is_empty() && !(Layered { instance: net, kb }).derives(d, b) {
            return Err(Error::structure(d, format!("does not belong to `{b}`")));
        }
        if el.bases.is_empty() || !(Layered { instance: net, kb }).derives(d, b) {
            net.add_base(d, b)?;
        }
        grown.mapping.insert(b.clone(), d.clone());
    }
    Ok(())
}
