use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::basic::{component_of, grow_concept_as};
use super::tree::{attach_seed, extend_tree, grow_tree, GrownTree};
use crate::error::{Error, Result};
use crate::graph::{
    knowledge_trees, BasicRelationKind, CognitiveNetwork, Derivation, Element,
    ElementId, Layered, Param, Payload, Relation, TreeNetworkView, ValueTerm,
};
use crate::matching::{match_tree_anchored, MatchContext, MatchResult};
use crate::probability::{ConditionalProbabilityPair, mean_result, pps_launch, settle, ContributionLedger, EngineConfig, ProbabilityState, Status};
use crate::trace::{EventKind, Trace, TraceEvent};

/// An observed fragment: an instance of `base` with an input probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInput {
    pub base: ElementId,
    pub prob: f64,
    pub id: Option<ElementId>,
    /// Unknown placeholder; only meaningful in query templates.
    pub variable: bool,
    pub value: Option<ValueTerm>,
    pub params: BTreeMap<String, Param>,
}

impl FitInput {
    pub fn new(base: impl Into<ElementId>, prob: f64) -> Self {
        FitInput {
            base: base.into(),
            prob,
            id: None,
            variable: false,
            value: None,
            params: BTreeMap::new(),
        }
    }

    pub fn named(mut self, id: impl Into<ElementId>) -> Self {
        self.id = Some(id.into());
        self
    }
}

/// An observed relation between fragments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRelation {
    pub id: ElementId,
    pub kind: BasicRelationKind,
    pub a: ElementId,
    pub b: ElementId,
    pub base: Option<ElementId>,
    pub cond: Option<ConditionalProbabilityPair>,
    pub params: BTreeMap<String, Param>,
}

impl ObservedRelation {
    pub fn new(id: impl Into<ElementId>, kind: BasicRelationKind, a: impl Into<ElementId>, b: impl Into<ElementId>) -> Self {
        ObservedRelation {
            id: id.into(),
            kind,
            a: a.into(),
            b: b.into(),
            base: None,
            cond: None,
            params: BTreeMap::new(),
        }
    }
}

/// Everything observed in one scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneInputs {
    pub inputs: Vec<FitInput>,
    pub relations: Vec<ObservedRelation>,
}

impl SceneInputs {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Instantiates a scene's observations in a fresh instance network, before
/// any fitting. Returns the network and the ids of the input fragments.
pub fn ingest(
    kb: &CognitiveNetwork,
    scene: &SceneInputs,
    trace: &mut Trace,
) -> Result<(CognitiveNetwork, Vec<ElementId>)> {
    let mut net = CognitiveNetwork::instance();
    let mut fragments = Vec::new();
    for input in &scene.inputs {
        if !(0.0..=1.0).contains(&input.prob) {
            return Err(Error::Parameter(format!("input probability {} outside [0,1]", input.prob)));
        }
        let id = grow_concept_as(&mut net, kb, &input.base, input.id.clone(), trace)?;
        let el = net.get_mut(&id)?;
        // Observations replace the copied specification.
        if let Payload::Concept(c) = &mut el.payload {
            c.params = input.params.clone();
            if input.value.is_some() {
                c.value = input.value;
            }
        }
        el.state = ProbabilityState::observed(input.prob);
        if !input.variable {
            fragments.push(id);
        }
    }
    for obs in &scene.relations {
        let cond = match (&obs.cond, &obs.base) {
            (Some(c), _) => *c,
            (None, Some(base)) => kb
                .relation(base)
                .ok_or_else(|| Error::Kind(format!("`{base}` is not a knowledge relation")))?
                .cond,
            (None, None) => Relation::new(obs.kind, obs.a.clone(), obs.b.clone()).cond,
        };
        let relation = Relation {
            kind: obs.kind,
            a: obs.a.clone(),
            b: obs.b.clone(),
            cond,
            params: obs.params.clone(),
            membership: 1.0,
        };
        net.insert(Element {
            id: obs.id.clone(),
            bases: obs.base.iter().cloned().collect(),
            state: ProbabilityState::default(),
            payload: Payload::Relation(relation),
        })?;
        trace.push(EventKind::Grow, obs.base.as_ref().unwrap_or(&obs.id), &obs.id, 0.0, 0.0);
    }
    let ids: Vec<ElementId> = net.elements().filter(|e| !e.is_relation()).map(|e| e.id.clone()).collect();
    for id in ids {
        super::link_conflicts(&mut net, kb, &id, trace)?;
    }
    Ok((net, fragments))
}

/// A connected instance network and its evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedNetwork {
    pub elements: Vec<ElementId>,
    pub all_collapsed: bool,
    /// Unweighted mean result probability over unsuppressed concepts.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub instance: CognitiveNetwork,
    /// Candidate interpretations, best first.
    pub networks: Vec<RankedNetwork>,
    /// The best interpretation is fully collapsed.
    pub absolute: bool,
    /// The best two interpretations are indistinguishable.
    pub tie: bool,
    /// Some fragment matched no knowledge.
    pub learning_triggered: bool,
    pub unexplained: Vec<ElementId>,
    pub grown: Vec<GrownTree>,
    pub events: Vec<TraceEvent>,
    pub steps: u64,
}

impl FitReport {
    pub fn state(&self, id: &ElementId) -> Option<&ProbabilityState> {
        self.instance.state(id).ok()
    }
}

/// A running scene fit. The knowledge base is passed to each call rather
/// than owned, so the task can be saved and resumed on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTask {
    pub config: EngineConfig,
    pub instance: CognitiveNetwork,
    pub ledger: ContributionLedger,
    pub trace: Trace,
    /// Input fragments in ingestion order.
    pub fragments: Vec<ElementId>,
    /// Fragments not yet launched.
    pub pending: Vec<ElementId>,
    pub grown: Vec<GrownTree>,
    /// Remaining interpretations per fragment, best first.
    pub alternatives: BTreeMap<ElementId, Vec<ElementId>>,
    pub protected: BTreeSet<ElementId>,
}

impl FitTask {
    pub fn new(kb: &CognitiveNetwork, config: EngineConfig, scene: &SceneInputs) -> Result<Self> {
        config.validate()?;
        let mut trace = Trace::new();
        let (instance, fragments) = ingest(kb, scene, &mut trace)?;
        Ok(FitTask {
            config,
            instance,
            ledger: ContributionLedger::new(),
            trace,
            pending: fragments.clone(),
            fragments,
            grown: Vec::new(),
            alternatives: BTreeMap::new(),
            protected: BTreeSet::new(),
        })
    }

    /// Whether fragments remain to be launched.
    pub fn is_done(&self) -> bool {
        self.pending.iter().all(|f| !self.schedulable(f))
    }

    fn schedulable(&self, f: &ElementId) -> bool {
        self.instance
            .state(f)
            .is_ok_and(|s| s.status == Status::Superposed && !s.launched)
    }

    fn pick(&self) -> Option<ElementId> {
        let mut best: Option<(&ElementId, f64)> = None;
        for f in self.pending.iter().filter(|f| self.schedulable(f)) {
            let r = self.instance.state(f).map(|s| s.result).unwrap_or(0.0);
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((f, r));
            }
        }
        best.map(|(f, _)| f.clone())
    }

    pub fn is_absorbed(&self, id: &ElementId) -> bool {
        self.grown.iter().any(|g| g.mapping.contains_derived(id))
    }

    /// Runs one scheduling step: match and grow for the strongest pending
    /// fragment, launch it and settle. Returns `false` when nothing was left.
    pub fn step(&mut self, kb: &CognitiveNetwork) -> Result<bool> {
        self.pending.retain(|f| self.instance.state(f).is_ok_and(|s| s.status == Status::Superposed && !s.launched));
        let Some(pick) = self.pick() else {
            return Ok(false);
        };
        self.trace.next_step();
        if !self.is_absorbed(&pick) {
            self.absorb(kb, &pick, false)?;
        }
        let st = self.instance.state_mut(&pick)?;
        st.launched = true;
        let delta = st.input;
        self.pending.retain(|f| f != &pick);
        if delta > 0.0 {
            pps_launch(&mut self.instance, &pick, delta, &self.config, &mut self.ledger, &mut self.trace)?;
        }
        self.settle_all(kb)?;
        Ok(true)
    }

    /// Steps until every fragment is consumed and reports.
    pub fn run(&mut self, kb: &CognitiveNetwork) -> Result<FitReport> {
        while self.step(kb)? {}
        Ok(self.report())
    }

    fn settle_all(&mut self, kb: &CognitiveNetwork) -> Result<()> {
        loop {
            settle(&mut self.instance, &self.config, &mut self.ledger, &mut self.trace)?;
            let mut grew = false;
            for i in 0..self.grown.len() {
                let mut g = self.grown[i].clone();
                if !g.deferred().is_empty() {
                    grew |= extend_tree(&mut self.instance, kb, &mut g, &self.config, &mut self.ledger, &mut self.trace)?;
                }
                self.grown[i] = g;
            }
            grew |= self.offer_collapsed_roots(kb)?;
            grew |= self.retry_alternatives(kb)?;
            if self.config.auto_prune {
                self.prune_collapsed()?;
            }
            if !grew {
                return Ok(());
            }
        }
    }

    /// Collapsed instance roots may in turn be evidence for enclosing trees.
    fn offer_collapsed_roots(&mut self, kb: &CognitiveNetwork) -> Result<bool> {
        let mut grew = false;
        for i in 0..self.grown.len() {
            let g = &self.grown[i];
            let Some(root) = g.root().cloned() else { continue };
            if g.offered || !self.instance.state(&root).is_ok_and(|s| s.is_collapsed()) {
                continue;
            }
            self.grown[i].offered = true;
            grew |= self.absorb(kb, &root, true)?;
        }
        Ok(grew)
    }

    /// Grows the next interpretation of a fragment whose grown trees have all
    /// been suppressed.
    fn retry_alternatives(&mut self, kb: &CognitiveNetwork) -> Result<bool> {
        let mut grew = false;
        let fragments: Vec<ElementId> = self.alternatives.keys().cloned().collect();
        for f in fragments {
            if !self.instance.state(&f).is_ok_and(|s| !s.is_suppressed()) {
                continue;
            }
            let mut holders = self.grown.iter().filter(|g| g.mapping.contains_derived(&f)).peekable();
            if holders.peek().is_none() {
                continue;
            }
            let all_suppressed = holders.all(|g| {
                g.root().is_none_or(|r| self.instance.state(r).map_or(true, |s| s.is_suppressed()))
            });
            if !all_suppressed {
                continue;
            }
            let Some(next) = self.alternatives.get_mut(&f).and_then(|v| (!v.is_empty()).then(|| v.remove(0)))
            else {
                continue;
            };
            let Some(tree) = knowledge_trees(kb).into_iter().find(|t| t.root == next) else { continue };
            if let Some(res) = self.candidate(kb, &f, &tree)? {
                self.grow_from(kb, &res, &tree)?;
                grew = true;
            }
        }
        Ok(grew)
    }

    /// Instance elements a match of `tree` anchored at `f` may use.
    fn context(&self, kb: &CognitiveNetwork, f: &ElementId, tree: &TreeNetworkView) -> Vec<ElementId> {
        let layered = Layered { instance: &self.instance, kb };
        let bases = tree.elements();
        let mut sd = vec![f.clone()];
        for e in self.instance.elements() {
            if e.is_relation() || e.state.is_suppressed() || sd.contains(&e.id) {
                continue;
            }
            if bases.iter().any(|b| layered.derives(&e.id, b)) {
                sd.push(e.id.clone());
            }
        }
        for (rid, r) in self.instance.relations() {
            if r.kind != BasicRelationKind::Xor && sd.contains(&r.a) && sd.contains(&r.b) {
                sd.push(rid.clone());
            }
        }
        sd
    }

    fn candidate(&mut self, kb: &CognitiveNetwork, f: &ElementId, tree: &TreeNetworkView) -> Result<Option<MatchResult>> {
        let sd = self.context(kb, f, tree);
        let ctx = MatchContext::new(&self.instance, kb);
        let res = match_tree_anchored(&ctx, &sd, tree, f, &self.config)?;
        self.trace.push(EventKind::Match, f, &tree.root, res.membership, res.membership);
        Ok((res.membership >= self.config.activation_threshold).then_some(res))
    }

    /// Matches `f` against every knowledge tree it can sit in and grows the
    /// best interpretation. Returns whether a tree was grown.
    fn absorb(&mut self, kb: &CognitiveNetwork, f: &ElementId, upward: bool) -> Result<bool> {
        let layered = Layered { instance: &self.instance, kb };
        let trees: Vec<TreeNetworkView> = knowledge_trees(kb)
            .into_iter()
            .filter(|t| !t.longitudinal.is_empty() || !t.additional.is_empty())
            .filter(|t| t.elements().iter().any(|b| layered.derives(f, b)))
            .filter(|t| !upward || t.members.iter().any(|m| layered.derives(f, m)))
            .filter(|t| !self.grown.iter().any(|g| g.tree.root == t.root && g.mapping.contains_derived(f)))
            .collect();
        let mut found: Vec<(MatchResult, f64, TreeNetworkView)> = Vec::new();
        for t in trees {
            if let Some(res) = self.candidate(kb, f, &t)? {
                found.push((res, generation_preference(kb, &t), t));
            }
        }
        found.sort_by(|x, y| {
            y.0.membership
                .total_cmp(&x.0.membership)
                .then(y.1.total_cmp(&x.1))
                .then(x.2.root.cmp(&y.2.root))
        });
        let mut found = found.into_iter();
        let Some((best, _, tree)) = found.next() else {
            return Ok(false);
        };
        let rest: Vec<ElementId> =
            found.take(self.config.branch_limit.saturating_sub(1)).map(|(_, _, t)| t.root).collect();
        if !rest.is_empty() {
            self.alternatives.insert(f.clone(), rest);
        }
        self.grow_from(kb, &best, &tree)?;
        Ok(true)
    }

    fn grow_from(&mut self, kb: &CognitiveNetwork, res: &MatchResult, tree: &TreeNetworkView) -> Result<()> {
        let existing = self
            .grown
            .iter()
            .position(|g| g.tree.root == tree.root && res.mapping.iter().any(|(_, d)| g.mapping.contains_derived(d)));
        match existing {
            Some(i) => {
                let mut g = self.grown[i].clone();
                attach_seed(&mut self.instance, kb, &mut g, &res.mapping)?;
                extend_tree(&mut self.instance, kb, &mut g, &self.config, &mut self.ledger, &mut self.trace)?;
                self.grown[i] = g;
            }
            None => {
                let g = grow_tree(&mut self.instance, kb, &res.mapping, tree, &self.config, &mut self.ledger, &mut self.trace)?;
                self.grown.push(g);
            }
        }
        Ok(())
    }

    fn prune_collapsed(&mut self) -> Result<()> {
        let mut keep = self.protected.clone();
        keep.extend(self.pending.iter().cloned());
        let policy = crate::lifecycle::PrunePolicy {
            keep_roots: true,
            keep_task_relevant: keep,
            min_granularity: None,
        };
        let report = crate::lifecycle::prune(&mut self.instance, &policy, &mut self.ledger, &mut self.trace)?;
        for g in &mut self.grown {
            let gone: Vec<ElementId> =
                g.mapping.iter().filter(|(_, d)| report.removed.contains(d)).map(|(b, _)| b.clone()).collect();
            for b in gone {
                g.mapping.remove(&b);
                g.cut.insert(b);
            }
        }
        Ok(())
    }

    /// Fragments no grown tree accounts for, excluding suppressed ones.
    pub fn unexplained(&self) -> Vec<ElementId> {
        self.fragments
            .iter()
            .filter(|f| self.instance.state(f).is_ok_and(|s| !s.is_suppressed()))
            .filter(|f| !self.is_absorbed(f))
            .cloned()
            .collect()
    }

    pub fn report(&self) -> FitReport {
        let networks = rank_networks(&self.instance);
        let absolute = networks.first().is_some_and(|n| n.all_collapsed);
        let tie = !absolute && networks.len() >= 2 && (networks[0].mean - networks[1].mean).abs() <= 1e-12;
        let unexplained = self.unexplained();
        FitReport {
            instance: self.instance.clone(),
            absolute,
            tie,
            learning_triggered: !unexplained.is_empty(),
            unexplained,
            networks,
            grown: self.grown.clone(),
            events: self.trace.events().to_vec(),
            steps: self.trace.step(),
        }
    }
}

/// Preference among equally good interpretations: the mean P(B|A) over the
/// tree's longitudinal relations.
fn generation_preference(kb: &CognitiveNetwork, tree: &TreeNetworkView) -> f64 {
    let ps: Vec<f64> = tree
        .longitudinal
        .iter()
        .filter_map(|r| kb.relation(r))
        .map(|r| r.cond.forward.evaluate(None))
        .collect();
    if ps.is_empty() {
        0.0
    } else {
        ps.iter().sum::<f64>() / ps.len() as f64
    }
}

/// Connected interpretations of an instance network, best first: fully
/// collapsed ones, then by mean result probability.
pub fn rank_networks(net: &CognitiveNetwork) -> Vec<RankedNetwork> {
    let mut seen: BTreeSet<ElementId> = BTreeSet::new();
    let mut out: Vec<(usize, RankedNetwork)> = Vec::new();
    for (index, e) in net.elements().enumerate() {
        if e.is_relation() || seen.contains(&e.id) {
            continue;
        }
        let comp = component_of(net, &e.id);
        seen.extend(comp.iter().cloned());
        let elements: Vec<ElementId> = net.ids().filter(|id| comp.contains(*id)).cloned().collect();
        let concepts: Vec<&ProbabilityState> = elements
            .iter()
            .filter(|id| net.concept(id).is_some())
            .filter_map(|id| net.state(id).ok())
            .filter(|s| !s.is_suppressed())
            .collect();
        if concepts.is_empty() {
            continue;
        }
        let all_collapsed = concepts.iter().all(|s| s.is_collapsed());
        let mean = mean_result(concepts.iter().copied());
        out.push((index, RankedNetwork { elements, all_collapsed, mean }));
    }
    out.sort_by(|(ia, a), (ib, b)| {
        b.all_collapsed.cmp(&a.all_collapsed).then(b.mean.total_cmp(&a.mean)).then(ia.cmp(ib))
    });
    out.into_iter().map(|(_, n)| n).collect()
}

/// Convenience wrapper: builds a task and runs it to the end.
pub fn fit_run(kb: &CognitiveNetwork, config: EngineConfig, scene: &SceneInputs) -> Result<FitReport> {
    FitTask::new(kb, config, scene)?.run(kb)
}
