use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::Result;
use crate::graph::{CognitiveNetwork, ElementId};
use crate::probability::ContributionLedger;
use crate::trace::{EventKind, Trace};

/// What a prune must keep.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrunePolicy {
    pub keep_roots: bool,
    /// Elements still needed by pending fragments or open queries.
    pub keep_task_relevant: BTreeSet<ElementId>,
    /// Members at most this many longitudinal levels under their root are
    /// kept. `None` removes every member.
    pub min_granularity: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneReport {
    /// Every removed id, including relations removed with their ends.
    pub removed: Vec<ElementId>,
    pub warnings: Vec<String>,
}

/// Longitudinal depth of tree members under `root`.
fn levels(net: &CognitiveNetwork, root: &ElementId, members: &BTreeSet<ElementId>) -> BTreeMap<ElementId, usize> {
    let mut depth = BTreeMap::from([(root.clone(), 0)]);
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(cur) = queue.pop_front() {
        let d = depth[&cur];
        for (_, r) in net.relations() {
            if r.kind.is_longitudinal() && r.a == cur && members.contains(&r.b) && !depth.contains_key(&r.b) {
                depth.insert(r.b.clone(), d + 1);
                queue.push_back(r.b.clone());
            }
        }
    }
    depth
}

/// Cuts the low-level members of fully collapsed instance trees. Ledger
/// entries of removed elements are sealed so no later undo can touch them.
pub fn prune(
    net: &mut CognitiveNetwork,
    policy: &PrunePolicy,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<PruneReport> {
    let mut report = PruneReport::default();
    let roots: Vec<ElementId> = net.trees().map(|(r, _)| r.clone()).collect();
    for root in roots {
        let Some(decl) = net.tree(&root) else { continue };
        let members: BTreeSet<ElementId> = decl.members.iter().filter(|m| **m != root).cloned().collect();
        let collapsed = |id: &ElementId| net.state(id).is_ok_and(|s| s.is_collapsed());
        if members.is_empty() || !collapsed(&root) || !members.iter().all(collapsed) {
            continue;
        }
        let depth = levels(net, &root, &members);
        let mut doomed: Vec<ElementId> = Vec::new();
        for m in &members {
            if let (Some(bound), Some(d)) = (policy.min_granularity, depth.get(m)) {
                if *d <= bound {
                    continue;
                }
            }
            if policy.keep_task_relevant.contains(m) {
                if policy.min_granularity.is_some() {
                    report.warnings.push(format!("`{m}` is protected but below the granularity bound; kept"));
                }
                continue;
            }
            doomed.push(m.clone());
        }
        if !policy.keep_roots && !policy.keep_task_relevant.contains(&root) {
            doomed.push(root.clone());
        }
        for d in doomed {
            if !net.contains(&d) {
                continue;
            }
            let result = net.state(&d)?.result;
            for gone in net.remove(&d)? {
                ledger.seal(&gone);
                trace.push(EventKind::Prune, &root, &gone, result, result);
                report.removed.push(gone);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{fit_run, FitInput, SceneInputs};
    use crate::probability::EngineConfig;

    fn fitted_face() -> CognitiveNetwork {
        let kb = crate::growth::tests::faces_kb();
        let scene = SceneInputs { inputs: vec![FitInput::new("face", 1.0).named("face#1")], relations: vec![] };
        fit_run(&kb, EngineConfig::default(), &scene).unwrap().instance
    }

    #[test]
    fn collapsed_face_keeps_root() {
        let mut net = fitted_face();
        let policy = PrunePolicy { keep_roots: true, ..Default::default() };
        let mut trace = Trace::new();
        let report = prune(&mut net, &policy, &mut ContributionLedger::new(), &mut trace).unwrap();
        assert!(net.contains(&ElementId::from("face#1")));
        assert_eq!(net.element_count(), 1);
        // four members and four relations
        assert_eq!(report.removed.len(), 8);
        assert!(trace.events().iter().all(|e| e.event == EventKind::Prune));
        assert_eq!(net.state(&ElementId::from("face#1")).unwrap().result, 1.0);
    }

    #[test]
    fn empty_policy_on_empty_net() {
        let mut net = CognitiveNetwork::instance();
        let report =
            prune(&mut net, &PrunePolicy::default(), &mut ContributionLedger::new(), &mut Trace::new()).unwrap();
        assert!(report.removed.is_empty());
    }

    #[test]
    fn superposed_tree_untouched() {
        let kb = crate::growth::tests::faces_kb();
        let scene = SceneInputs { inputs: vec![FitInput::new("eye", 0.5)], relations: vec![] };
        let mut net = fit_run(&kb, EngineConfig::default(), &scene).unwrap().instance;
        let before = net.element_count();
        let policy = PrunePolicy { keep_roots: true, ..Default::default() };
        let report = prune(&mut net, &policy, &mut ContributionLedger::new(), &mut Trace::new()).unwrap();
        assert!(report.removed.is_empty());
        assert_eq!(net.element_count(), before);
    }

    #[test]
    fn protected_member_survives_with_warning() {
        let mut net = fitted_face();
        let eye = net.ids().find(|i| i.as_str().starts_with("eye")).unwrap().clone();
        let policy = PrunePolicy {
            keep_roots: true,
            keep_task_relevant: BTreeSet::from([eye.clone()]),
            min_granularity: Some(0),
        };
        let report = prune(&mut net, &policy, &mut ContributionLedger::new(), &mut Trace::new()).unwrap();
        assert!(net.contains(&eye));
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn granularity_bound_keeps_upper_levels() {
        let mut net = fitted_face();
        let before = net.element_count();
        let policy = PrunePolicy { keep_roots: true, min_granularity: Some(1), ..Default::default() };
        let report = prune(&mut net, &policy, &mut ContributionLedger::new(), &mut Trace::new()).unwrap();
        assert!(report.removed.is_empty());
        assert_eq!(net.element_count(), before);
    }
}
