//! Structure learning: hypothesis trees for unexplained input, confirmation
//! by application counts, probability estimation and merging.
//!
//! Counting: a learned tree counts one trial per scene it is grown in and a
//! success when its root collapses. Each learned member relation `root ->
//! member` keeps `seen` (scenes in which the member was observed) and `co`
//! (scenes in which it was observed inside an application of the tree).
//! The estimates are `P(member|root) = co / trials` and
//! `P(root|member) = co / seen`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::graph::{
    classify_tree_network, BasicRelationKind, CognitiveNetwork, Concept, Derivation, ElementId, Layered,
    NetworkFragment, Param, Relation, RelationStats, TreeDecl, TreeNetworkView, TreeStats,
};
use crate::growth::{FitReport, FitTask, SceneInputs};
use crate::matching::concept_spec;
use crate::probability::{ConditionalProbabilityPair, EngineConfig, Gaussian};

/// Estimator used for learned conditional probabilities.
pub const ESTIMATE_FORMULA: &str = "P(member|root) = co/trials; P(root|member) = co/seen";

/// Allowed deviation of one parameter from its reference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Gaussian membership with this standard deviation.
    Gauss { sigma: f64 },
    /// Full membership within `width` of the reference, none outside.
    Band { width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationStandard {
    pub tolerances: BTreeMap<String, Tolerance>,
    /// Aggregate membership an instance needs to meet the standard.
    pub threshold: f64,
}

impl Default for DeviationStandard {
    fn default() -> Self {
        DeviationStandard { tolerances: BTreeMap::new(), threshold: 0.5 }
    }
}

impl DeviationStandard {
    pub fn meets(&self, membership: f64) -> bool {
        membership >= self.threshold
    }

    /// The specification learned from one observation.
    pub fn spec_for(&self, key: &str, observed: &Param) -> Param {
        match (observed, self.tolerances.get(key)) {
            (Param::Real(v), Some(Tolerance::Gauss { sigma })) => Param::Gauss(Gaussian { mu: *v, sigma: *sigma }),
            (Param::Real(v), Some(Tolerance::Band { width })) => Param::Interval { lo: v - width, hi: v + width },
            (p, _) => p.clone(),
        }
    }

    fn factor(&self, key: &str, observed: &Param, spec: &Param) -> f64 {
        match (spec, observed.as_real(), self.tolerances.get(key)) {
            (Param::Real(v), Some(x), Some(Tolerance::Gauss { sigma })) => Gaussian { mu: *v, sigma: *sigma }.membership(x),
            (Param::Real(v), Some(x), Some(Tolerance::Band { width })) => {
                if (x - v).abs() <= *width {
                    1.0
                } else {
                    0.0
                }
            }
            _ => observed.membership_under(spec),
        }
    }
}

/// Observed parameter values per instance element.
pub type Reference = BTreeMap<ElementId, BTreeMap<String, Param>>;

/// Product over the fragment's elements of each referenced parameter's
/// membership under the element's own specification. A parameter the
/// element does not specify contributes 1.
pub fn deviation_membership(fragment: &NetworkFragment<'_>, reference: &Reference, standard: &DeviationStandard) -> f64 {
    let mut m = 1.0;
    for id in &fragment.elements {
        let (Ok(el), Some(obs)) = (fragment.net.get(id), reference.get(id)) else { continue };
        for (k, o) in obs {
            if let Some(spec) = el.params().get(k) {
                m *= standard.factor(k, o, spec);
            }
        }
    }
    m
}

/// Prior knowledge the learner relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    /// Relation kinds that make observed instances one cluster.
    pub adjacency: BTreeSet<BasicRelationKind>,
}

impl Default for Priors {
    fn default() -> Self {
        Priors { adjacency: BTreeSet::from([BasicRelationKind::Adjoining]) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub engine: EngineConfig,
    pub standard: DeviationStandard,
    /// Member relations whose two estimates both fall below this are dropped.
    pub discard_floor: f64,
    /// Trials after which a tree stops counting as new knowledge.
    pub confirm_count: u64,
    /// Minimum pooled membership for merging parameter distributions.
    pub similarity: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            engine: EngineConfig::default(),
            standard: DeviationStandard::default(),
            discard_floor: 0.05,
            confirm_count: 5,
            similarity: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub relation: ElementId,
    /// P(member|root)
    pub forward: f64,
    /// P(root|member)
    pub backward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeReport {
    /// (kept root, absorbed root)
    pub merged: Vec<(ElementId, ElementId)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnReport {
    pub scenes: usize,
    /// Scenes without any input.
    pub skipped: usize,
    /// Input kinds unknown to the knowledge base, added as plain concepts.
    pub primitives: Vec<ElementId>,
    pub created: Vec<ElementId>,
    pub extended: Vec<ElementId>,
    /// Clusters for which no hypothesis produced a collapsed interpretation.
    pub rejected: usize,
    pub discarded: Vec<ElementId>,
    pub merge: MergeReport,
    pub estimates: Vec<Estimate>,
    pub formula: &'static str,
}

/// Learned trees: declared trees carrying statistics.
fn learned_roots(kb: &CognitiveNetwork) -> Vec<ElementId> {
    kb.trees().filter(|(_, d)| d.stats.is_some()).map(|(r, _)| r.clone()).collect()
}

/// `(relation id, member)` for the member relations of a learned tree.
fn member_relations(kb: &CognitiveNetwork, root: &ElementId) -> Vec<(ElementId, ElementId)> {
    kb.relations()
        .filter(|(_, r)| r.kind == BasicRelationKind::HasComponent && &r.a == root)
        .map(|(id, r)| (id.clone(), r.b.clone()))
        .collect()
}

fn tree_stats(kb: &CognitiveNetwork, root: &ElementId) -> Option<TreeStats> {
    kb.tree(root).and_then(|d| d.stats)
}

fn set_tree_stats(kb: &mut CognitiveNetwork, root: &ElementId, stats: TreeStats) {
    if let Some(d) = kb.tree_mut(root) {
        d.stats = Some(stats);
    }
}

/// A proposed knowledge change for one cluster.
#[derive(Debug, Clone)]
struct Hypothesis {
    /// Existing learned tree to extend, or `None` for a new tree.
    extend: Option<ElementId>,
    members: Vec<(ElementId, BTreeMap<String, Param>)>,
    adjacencies: Vec<(ElementId, ElementId)>,
}

fn free_id(kb: &mut CognitiveNetwork, wanted: String) -> ElementId {
    let id = ElementId::new(wanted.clone());
    if !kb.contains(&id) && !kb.is_retired(&id) {
        return id;
    }
    (1..)
        .map(|n| ElementId::new(format!("{wanted}/{n}")))
        .find(|id| !kb.contains(id) && !kb.is_retired(id))
        .expect("unbounded search")
}

fn install(kb: &mut CognitiveNetwork, h: &Hypothesis, created_at: u64) -> Result<ElementId> {
    let root = match &h.extend {
        Some(r) => r.clone(),
        None => {
            let root = kb.fresh_id("learned");
            kb.add_concept(root.clone(), Concept::named("learned"))?;
            kb.declare_tree(
                &root,
                TreeDecl {
                    members: Vec::new(),
                    base: None,
                    stats: Some(TreeStats { new_knowledge: true, success: 1, trials: 1, created_at }),
                },
            )?;
            root
        }
    };
    let existing: BTreeSet<ElementId> = member_relations(kb, &root).into_iter().map(|(_, m)| m).collect();
    for (m, params) in &h.members {
        if existing.contains(m) {
            continue;
        }
        let rid = free_id(kb, format!("{root}/has/{m}"));
        let mut rel = Relation::new(BasicRelationKind::HasComponent, root.clone(), m.clone());
        rel.params = params.clone();
        kb.add_relation(rid.clone(), rel)?;
        kb.set_relation_stats(&rid, RelationStats { cooccur: 1, seen: 1 })?;
        if let Some(d) = kb.tree_mut(&root) {
            d.members.push(m.clone());
        }
    }
    for (a, b) in &h.adjacencies {
        if a == b {
            continue;
        }
        let present = kb.relations().any(|(_, r)| {
            r.kind == BasicRelationKind::Adjoining && ((&r.a == a && &r.b == b) || (&r.a == b && &r.b == a))
        });
        if !present {
            let rid = free_id(kb, format!("{a}/adj/{b}"));
            kb.add_relation(rid, Relation::new(BasicRelationKind::Adjoining, a.clone(), b.clone()))?;
        }
    }
    Ok(root)
}

/// Refreshes every learned relation's conditional probabilities from its
/// counts.
fn reestimate(kb: &mut CognitiveNetwork) -> Result<Vec<Estimate>> {
    let mut out = Vec::new();
    for root in learned_roots(kb) {
        let Some(ts) = tree_stats(kb, &root) else { continue };
        for (rid, _) in member_relations(kb, &root) {
            let st = kb.relation_stats(&rid).unwrap_or(RelationStats { cooccur: 1, seen: 1 });
            let forward = st.cooccur as f64 / ts.trials.max(1) as f64;
            let backward = st.cooccur as f64 / st.seen.max(1) as f64;
            if let Some(r) = kb.get_mut(&rid)?.relation_mut() {
                r.cond = ConditionalProbabilityPair::points(forward.min(1.0), backward.min(1.0));
            }
            out.push(Estimate { relation: rid, forward, backward });
        }
    }
    Ok(out)
}

fn discard(kb: &mut CognitiveNetwork, floor: f64) -> Result<Vec<ElementId>> {
    let mut gone = Vec::new();
    for root in learned_roots(kb) {
        for (rid, m) in member_relations(kb, &root) {
            let Some(r) = kb.relation(&rid) else { continue };
            let (Some(f), Some(b)) = (r.cond.forward.as_point(), r.cond.backward.as_point()) else { continue };
            if f < floor && b < floor {
                gone.extend(kb.remove(&rid)?);
                if let Some(d) = kb.tree_mut(&root) {
                    d.members.retain(|x| x != &m);
                }
            }
        }
        if member_relations(kb, &root).is_empty() {
            gone.extend(kb.remove(&root)?);
        }
    }
    Ok(gone)
}

struct SceneRun {
    report: FitReport,
    fragments: Vec<ElementId>,
    observed: Reference,
}

fn fit_scene(kb: &CognitiveNetwork, scene: &SceneInputs, engine: &EngineConfig) -> Result<SceneRun> {
    let mut task = FitTask::new(kb, engine.clone(), scene)?;
    let fragments = task.fragments.clone();
    let report = task.run(kb)?;
    let observed = fragments
        .iter()
        .zip(scene.inputs.iter().filter(|i| !i.variable))
        .map(|(f, i)| (f.clone(), i.params.clone()))
        .collect();
    Ok(SceneRun { report, fragments, observed })
}

/// Counts one scene against every learned tree.
fn count_scene(kb: &mut CognitiveNetwork, run: &SceneRun) -> Result<()> {
    let inst = &run.report.instance;
    for root in learned_roots(kb) {
        let applied: Vec<_> = run.report.grown.iter().filter(|g| g.tree.root == root).collect();
        let mut stats = tree_stats(kb, &root).expect("learned tree");
        if !applied.is_empty() {
            stats.trials += 1;
            let collapsed =
                applied.iter().any(|g| g.root().is_some_and(|r| inst.state(r).is_ok_and(|s| s.is_collapsed())));
            if collapsed {
                stats.success += 1;
            }
        }
        for (rid, m) in member_relations(kb, &root) {
            let layered = Layered { instance: inst, kb };
            let observed = run.fragments.iter().any(|f| layered.derives(f, &m));
            if !observed {
                continue;
            }
            let mut rs = kb.relation_stats(&rid).unwrap_or_default();
            rs.seen += 1;
            let inside = applied.iter().any(|g| g.mapping.get(&m).is_some_and(|d| run.fragments.contains(d)));
            if inside {
                rs.cooccur += 1;
            }
            kb.set_relation_stats(&rid, rs)?;
        }
        set_tree_stats(kb, &root, stats);
    }
    Ok(())
}

/// Connected components of the unexplained fragments under observed
/// adjacency, in input order.
fn clusters(run: &SceneRun, scene: &SceneInputs, priors: &Priors) -> Vec<Vec<ElementId>> {
    let un: Vec<ElementId> = run.report.unexplained.clone();
    let edges: Vec<(&ElementId, &ElementId)> = scene
        .relations
        .iter()
        .filter(|r| priors.adjacency.contains(&r.kind))
        .map(|r| (&r.a, &r.b))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in &un {
        if !seen.insert(start.clone()) {
            continue;
        }
        let mut comp = vec![start.clone()];
        let mut i = 0;
        while i < comp.len() {
            let cur = comp[i].clone();
            for (a, b) in &edges {
                let next = if **a == cur { *b } else if **b == cur { *a } else { continue };
                if un.contains(next) && seen.insert(next.clone()) {
                    comp.push(next.clone());
                }
            }
            i += 1;
        }
        out.push(comp);
    }
    out
}

fn base_of(inst: &CognitiveNetwork, id: &ElementId) -> Option<ElementId> {
    inst.get(id).ok().and_then(|e| e.bases.first().cloned())
}

fn hypotheses(kb: &CognitiveNetwork, run: &SceneRun, scene: &SceneInputs, cluster: &[ElementId], priors: &Priors, standard: &DeviationStandard) -> Vec<Hypothesis> {
    let inst = &run.report.instance;
    let mut members: Vec<(ElementId, BTreeMap<String, Param>)> = Vec::new();
    for f in cluster {
        let Some(b) = base_of(inst, f) else { continue };
        if members.iter().any(|(m, _)| m == &b) {
            continue;
        }
        let params = run.observed.get(f).map(|ps| ps.iter().map(|(k, v)| (k.clone(), standard.spec_for(k, v))).collect());
        members.push((b, params.unwrap_or_default()));
    }
    let mut internal = Vec::new();
    let mut bridges: BTreeMap<ElementId, Vec<(ElementId, ElementId)>> = BTreeMap::new();
    for r in scene.relations.iter().filter(|r| priors.adjacency.contains(&r.kind)) {
        let (ina, inb) = (cluster.contains(&r.a), cluster.contains(&r.b));
        let (Some(ba), Some(bb)) = (base_of(inst, &r.a), base_of(inst, &r.b)) else { continue };
        if ina && inb {
            internal.push((ba, bb));
        } else if ina || inb {
            let outside = if ina { &r.b } else { &r.a };
            for g in &run.report.grown {
                let learned_new = tree_stats(kb, &g.tree.root).is_some_and(|s| s.new_knowledge);
                if learned_new && g.mapping.contains_derived(outside) {
                    bridges.entry(g.tree.root.clone()).or_default().push((ba.clone(), bb.clone()));
                }
            }
        }
    }
    let mut out: Vec<Hypothesis> = bridges
        .into_iter()
        .map(|(root, extra)| Hypothesis {
            extend: Some(root),
            members: members.clone(),
            adjacencies: internal.iter().cloned().chain(extra).collect(),
        })
        .collect();
    out.push(Hypothesis { extend: None, members, adjacencies: internal });
    out
}

/// Deviation of the cluster's observations from the knowledge that now
/// explains them.
fn cluster_deviation(kb: &CognitiveNetwork, run: &SceneRun, cluster: &[ElementId], standard: &DeviationStandard) -> f64 {
    let mut m = 1.0;
    for f in cluster {
        let Some(obs) = run.observed.get(f) else { continue };
        let Some(g) = run.report.grown.iter().find(|g| g.mapping.contains_derived(f)) else { continue };
        let Some(b) = g.mapping.base_of(f) else { continue };
        let spec = concept_spec(kb, &g.tree, b);
        for (k, o) in obs {
            if let Some(s) = spec.get(k) {
                m *= standard.factor(k, o, s);
            }
        }
    }
    m
}

/// Proposes, tests and installs knowledge for each unexplained cluster.
/// Returns `(root, extended)` for each installed change.
fn learn_scene(
    kb: &mut CognitiveNetwork,
    run: &SceneRun,
    scene: &SceneInputs,
    priors: &Priors,
    config: &LearnConfig,
    ordinal: u64,
) -> Result<(Vec<(ElementId, bool)>, usize)> {
    let mut installed = Vec::new();
    let mut rejected = 0;
    for cluster in clusters(run, scene, priors) {
        let mut best: Option<((bool, usize), CognitiveNetwork, ElementId, bool)> = None;
        for h in hypotheses(kb, run, scene, &cluster, priors, &config.standard) {
            let mut trial = kb.clone();
            let root = install(&mut trial, &h, ordinal)?;
            let tried = fit_scene(&trial, scene, &config.engine)?;
            let inst = &tried.report.instance;
            let collapsed = cluster.iter().all(|f| inst.state(f).is_ok_and(|s| s.is_collapsed()));
            if !collapsed || !config.standard.meets(cluster_deviation(&trial, &tried, &cluster, &config.standard)) {
                continue;
            }
            // Interpretations built on existing knowledge come first; size
            // decides within each class.
            let key = (h.extend.is_none(), inst.element_count());
            if best.as_ref().is_none_or(|(k, ..)| key < *k) {
                best = Some((key, trial, root, h.extend.is_some()));
            }
        }
        match best {
            Some((_, trial, root, extended)) => {
                *kb = trial;
                installed.push((root, extended));
            }
            None => rejected += 1,
        }
    }
    Ok((installed, rejected))
}

fn ensure_primitives(kb: &mut CognitiveNetwork, scene: &SceneInputs, added: &mut Vec<ElementId>) -> Result<()> {
    for input in &scene.inputs {
        if !kb.contains(&input.base) {
            kb.add_concept(input.base.clone(), Concept::named(input.base.as_str()))?;
            added.push(input.base.clone());
        }
    }
    Ok(())
}

/// Runs the learner over a sequence of scenes, updating `kb` in place.
pub fn cnl_run(kb: &mut CognitiveNetwork, scenes: &[SceneInputs], priors: &Priors, config: &LearnConfig) -> Result<LearnReport> {
    let mut report = LearnReport { formula: ESTIMATE_FORMULA, ..Default::default() };
    for (ordinal, scene) in scenes.iter().enumerate() {
        report.scenes += 1;
        if scene.inputs.is_empty() {
            report.skipped += 1;
            continue;
        }
        ensure_primitives(kb, scene, &mut report.primitives)?;
        let run = fit_scene(kb, scene, &config.engine)?;
        count_scene(kb, &run)?;
        if !run.report.unexplained.is_empty() {
            let (installed, rejected) = learn_scene(kb, &run, scene, priors, config, ordinal as u64)?;
            report.rejected += rejected;
            for (root, extended) in installed {
                let list = if extended { &mut report.extended } else { &mut report.created };
                if !list.contains(&root) {
                    list.push(root);
                }
            }
        }
        reestimate(kb)?;
        report.discarded.extend(discard(kb, config.discard_floor)?);
        for root in learned_roots(kb) {
            let mut st = tree_stats(kb, &root).expect("learned tree");
            if st.new_knowledge && st.trials > config.confirm_count {
                st.new_knowledge = false;
                set_tree_stats(kb, &root, st);
            }
        }
    }
    report.merge = merge_similar(kb, config)?;
    report.estimates = reestimate(kb)?;
    Ok(report)
}

/// Learns from a single scene: the hypothesis trees installed for its
/// unexplained clusters, ready for growth. Empty when everything is
/// explained.
pub fn single_sample_structure(
    kb: &mut CognitiveNetwork,
    scene: &SceneInputs,
    priors: &Priors,
    config: &LearnConfig,
) -> Result<Vec<TreeNetworkView>> {
    let mut added = Vec::new();
    ensure_primitives(kb, scene, &mut added)?;
    let run = fit_scene(kb, scene, &config.engine)?;
    if run.report.unexplained.is_empty() {
        return Ok(Vec::new());
    }
    let ordinal = kb.trees().filter_map(|(_, d)| d.stats.map(|s| s.created_at + 1)).max().unwrap_or(0);
    let (installed, _) = learn_scene(kb, &run, scene, priors, config, ordinal)?;
    installed.into_iter().map(|(root, _)| classify_tree_network(kb, &root)).collect()
}

/// Bhattacharyya coefficient of two gaussians: 1 for identical
/// distributions, toward 0 as they separate.
pub fn gaussian_overlap(a: Gaussian, b: Gaussian) -> f64 {
    let (va, vb) = (a.sigma * a.sigma, b.sigma * b.sigma);
    let d = a.mu - b.mu;
    (2.0 * a.sigma * b.sigma / (va + vb)).sqrt() * (-d * d / (4.0 * (va + vb))).exp()
}

/// Weighted pooling of two gaussians: mean and second moment are averaged.
pub fn pool_gaussians(a: Gaussian, wa: f64, b: Gaussian, wb: f64) -> Gaussian {
    let w = wa + wb;
    let mu = (wa * a.mu + wb * b.mu) / w;
    let second = (wa * (a.sigma * a.sigma + a.mu * a.mu) + wb * (b.sigma * b.sigma + b.mu * b.mu)) / w;
    Gaussian { mu, sigma: (second - mu * mu).max(0.0).sqrt() }
}

/// Lateral structure among a tree's members as kind and unordered ends.
fn lateral_signature(
    kb: &CognitiveNetwork,
    root: &ElementId,
    members: &BTreeSet<ElementId>,
) -> BTreeSet<(BasicRelationKind, ElementId, ElementId)> {
    let Ok(view) = classify_tree_network(kb, root) else { return BTreeSet::new() };
    view.additional
        .iter()
        .filter_map(|rid| kb.relation(rid))
        .filter(|r| r.kind.is_lateral() && members.contains(&r.a) && members.contains(&r.b))
        .map(|r| {
            let (x, y) = if r.a <= r.b { (r.a.clone(), r.b.clone()) } else { (r.b.clone(), r.a.clone()) };
            (r.kind, x, y)
        })
        .collect()
}

/// Pooled parameters of two member relations, or `None` when they are not
/// similar enough.
fn pooled_params(
    pa: &BTreeMap<String, Param>,
    wa: f64,
    pb: &BTreeMap<String, Param>,
    wb: f64,
    similarity: f64,
) -> Option<BTreeMap<String, Param>> {
    if pa.keys().ne(pb.keys()) {
        return None;
    }
    let mut out = BTreeMap::new();
    for (k, a) in pa {
        let merged = match (a, &pb[k]) {
            (Param::Gauss(ga), Param::Gauss(gb)) => {
                if gaussian_overlap(*ga, *gb) < similarity {
                    return None;
                }
                Param::Gauss(pool_gaussians(*ga, wa, *gb, wb))
            }
            (x, y) if x == y => x.clone(),
            _ => return None,
        };
        out.insert(k.clone(), merged);
    }
    Some(out)
}

/// Merges learned trees with the same structure and similar parameters into
/// the earlier one, pooling counts and distributions.
pub fn merge_similar(kb: &mut CognitiveNetwork, config: &LearnConfig) -> Result<MergeReport> {
    let mut report = MergeReport::default();
    let roots = learned_roots(kb);
    let mut absorbed: BTreeSet<ElementId> = BTreeSet::new();
    for (i, keep) in roots.iter().enumerate() {
        if absorbed.contains(keep) {
            continue;
        }
        for other in &roots[i + 1..] {
            if absorbed.contains(other) {
                continue;
            }
            let mk: BTreeMap<ElementId, ElementId> = member_relations(kb, keep).into_iter().map(|(r, m)| (m, r)).collect();
            let mo: BTreeMap<ElementId, ElementId> = member_relations(kb, other).into_iter().map(|(r, m)| (m, r)).collect();
            if !mk.keys().eq(mo.keys()) {
                continue;
            }
            let members: BTreeSet<ElementId> = mk.keys().cloned().collect();
            if lateral_signature(kb, keep, &members) != lateral_signature(kb, other, &members) {
                continue;
            }
            let (sk, so) = (tree_stats(kb, keep).expect("learned"), tree_stats(kb, other).expect("learned"));
            let mut pooled = Vec::new();
            for (m, rk) in &mk {
                let ro = &mo[m];
                let (Some(a), Some(b)) = (kb.relation(rk), kb.relation(ro)) else { continue };
                match pooled_params(&a.params, sk.trials as f64, &b.params, so.trials as f64, config.similarity) {
                    Some(p) => pooled.push((rk.clone(), ro.clone(), p)),
                    None => break,
                }
            }
            if pooled.len() != mk.len() {
                continue;
            }
            for (rk, ro, params) in pooled {
                let a = kb.relation_stats(&rk).unwrap_or_default();
                let b = kb.relation_stats(&ro).unwrap_or_default();
                kb.set_relation_stats(&rk, RelationStats { cooccur: a.cooccur + b.cooccur, seen: a.seen + b.seen })?;
                if let Some(r) = kb.get_mut(&rk)?.relation_mut() {
                    r.params = params;
                }
            }
            let trials = sk.trials + so.trials;
            set_tree_stats(
                kb,
                keep,
                TreeStats {
                    new_knowledge: trials <= config.confirm_count,
                    success: sk.success + so.success,
                    trials,
                    created_at: sk.created_at.min(so.created_at),
                },
            );
            kb.remove(other)?;
            absorbed.insert(other.clone());
            report.merged.push((keep.clone(), other.clone()));
        }
    }
    if !report.merged.is_empty() {
        reestimate(kb)?;
    }
    Ok(report)
}
