//! Hugin-style two-phase propagation over the layer schedule.
//!
//! Separators keep their previous potential; a clique absorbs the ratio of
//! the new separator potential to the old one. Collect walks the layers
//! from the deepest to the root, distribute walks them back out. Each layer
//! is handed to the [`Executor`], whose strategy decides how its
//! destination entries are split into concurrent tasks.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::executor::Executor;
use super::strategy::{build_layer_tasks, ExecutionStrategy, LayerTasks, Phase, StrategyRegistry, Task, TaskOp, WorkItem, DEFAULT_CHUNK};
use super::InferenceError;
use crate::jtree::{CliqueId, JunctionTree, NodeId, SepId};
use crate::network::{Evidence, EvidenceError, VarId};
use crate::potential::{Domain, EvidenceFilter, ExtendMap, MarginalizeMap, PotentialTable};

/// Cliques whose largest entry drops below this are rescaled to max 1.
pub const RESCALE_THRESHOLD: f64 = 1e-100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Fresh,
    EvidenceLoaded,
    Collected,
    Distributed,
}

/// Working potentials for one inference run. The true potential of clique
/// `c` is `clique_values(c) · exp(clique_log_scale(c))`.
#[derive(Clone, Debug)]
pub struct InferenceState {
    cliques: Vec<Vec<f64>>,
    clique_log_scale: Vec<f64>,
    seps: Vec<Vec<f64>>,
    sep_prev: Vec<Vec<f64>>,
    sep_log_scale: Vec<f64>,
    sep_prev_log_scale: Vec<f64>,
    stage: Stage,
}

impl InferenceState {
    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn clique_values(&self, c: CliqueId) -> &[f64] {
        &self.cliques[c]
    }

    pub fn clique_log_scale(&self, c: CliqueId) -> f64 {
        self.clique_log_scale[c]
    }

    pub fn separator_values(&self, s: SepId) -> &[f64] {
        &self.seps[s]
    }

    /// Σ entries · exp(log-scale).
    pub fn clique_mass(&self, c: CliqueId) -> f64 {
        self.cliques[c].iter().sum::<f64>() * self.clique_log_scale[c].exp()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub strategy: String,
    pub threads: usize,
    pub chunk: usize,
}

impl EngineConfig {
    pub fn new(strategy: impl Into<String>, threads: usize) -> Self {
        EngineConfig {
            strategy: strategy.into(),
            threads,
            chunk: DEFAULT_CHUNK,
        }
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub variable: VarId,
    pub posterior: Vec<f64>,
}

pub type Posteriors = BTreeMap<VarId, QueryResult>;

pub struct InferenceEngine {
    tree: Arc<JunctionTree>,
    executor: Executor,
    sep_from_child: Vec<MarginalizeMap>,
    sep_from_parent: Vec<MarginalizeMap>,
    into_parent: Vec<ExtendMap>,
    into_child: Vec<ExtendMap>,
    home: Vec<CliqueId>,
    query_maps: Vec<MarginalizeMap>,
    collect_plan: Vec<LayerTasks>,
    distribute_plan: Vec<LayerTasks>,
}

impl std::fmt::Debug for InferenceEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InferenceEngine")
            .field("executor", &self.executor)
            .field("cliques", &self.tree.cliques.len())
            .finish()
    }
}

impl InferenceEngine {
    pub fn new(
        tree: Arc<JunctionTree>,
        strategy: Box<dyn ExecutionStrategy>,
        threads: usize,
        chunk: usize,
    ) -> Result<Self, InferenceError> {
        let executor = Executor::new(strategy, threads, chunk).map_err(|e| InferenceError::ThreadPool(e.to_string()))?;
        let sched = &tree.schedule;
        let mut sep_from_child = Vec::with_capacity(tree.separators.len());
        let mut sep_from_parent = Vec::with_capacity(tree.separators.len());
        let mut into_parent = Vec::with_capacity(tree.separators.len());
        let mut into_child = Vec::with_capacity(tree.separators.len());
        for sep in &tree.separators {
            let child = &tree.cliques[sched.sep_child[sep.id]].domain;
            let parent = &tree.cliques[sched.sep_parent[sep.id]].domain;
            sep_from_child.push(MarginalizeMap::new(child, &sep.domain)?);
            sep_from_parent.push(MarginalizeMap::new(parent, &sep.domain)?);
            into_parent.push(ExtendMap::new(&sep.domain, parent)?);
            into_child.push(ExtendMap::new(&sep.domain, child)?);
        }
        let cards = tree.cardinalities();
        let mut home = Vec::with_capacity(cards.len());
        let mut query_maps = Vec::with_capacity(cards.len());
        for v in 0..cards.len() {
            let c = tree
                .smallest_clique_containing(&[v])
                .ok_or_else(|| InferenceError::Fault(format!("variable {v} is in no clique")))?;
            home.push(c);
            let single = Domain::new(vec![(v, cards[v])])?;
            query_maps.push(MarginalizeMap::new(&tree.cliques[c].domain, &single)?);
        }
        let strategy = executor.strategy();
        let collect_plan = build_layer_tasks(&tree, sched, strategy, executor.chunk(), Phase::Collect);
        let distribute_plan = build_layer_tasks(&tree, sched, strategy, executor.chunk(), Phase::Distribute);
        Ok(InferenceEngine {
            tree,
            executor,
            sep_from_child,
            sep_from_parent,
            into_parent,
            into_child,
            home,
            query_maps,
            collect_plan,
            distribute_plan,
        })
    }

    pub fn from_config(
        tree: Arc<JunctionTree>,
        registry: &StrategyRegistry,
        config: &EngineConfig,
    ) -> Result<Self, InferenceError> {
        let strategy = registry.create(&config.strategy)?;
        Self::new(tree, strategy, config.threads, config.chunk)
    }

    pub fn tree(&self) -> &JunctionTree {
        &self.tree
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn collect_plan(&self) -> &[LayerTasks] {
        &self.collect_plan
    }

    pub fn distribute_plan(&self) -> &[LayerTasks] {
        &self.distribute_plan
    }

    /// Clique used to enter evidence on and to answer queries about `var`.
    pub fn home_clique(&self, var: VarId) -> CliqueId {
        self.home[var]
    }

    pub fn new_state(&self) -> InferenceState {
        InferenceState {
            cliques: self.tree.potentials.iter().map(|p| p.values().to_vec()).collect(),
            clique_log_scale: vec![0.0; self.tree.cliques.len()],
            seps: self.tree.separators.iter().map(|s| vec![1.0; s.domain.size()]).collect(),
            sep_prev: self.tree.separators.iter().map(|s| vec![1.0; s.domain.size()]).collect(),
            sep_log_scale: vec![0.0; self.tree.separators.len()],
            sep_prev_log_scale: vec![0.0; self.tree.separators.len()],
            stage: Stage::Fresh,
        }
    }

    /// Restores the initialized potentials without reallocating.
    pub fn reset(&self, state: &mut InferenceState) {
        for (dst, p) in state.cliques.iter_mut().zip(&self.tree.potentials) {
            dst.copy_from_slice(p.values());
        }
        for v in state.seps.iter_mut().chain(state.sep_prev.iter_mut()) {
            v.fill(1.0);
        }
        state.clique_log_scale.fill(0.0);
        state.sep_log_scale.fill(0.0);
        state.sep_prev_log_scale.fill(0.0);
        state.stage = Stage::Fresh;
    }

    /// Zeroes, in each evidence variable's home clique, every entry that
    /// disagrees with the observation.
    pub fn load_evidence(&self, state: &mut InferenceState, evidence: &Evidence) -> Result<(), InferenceError> {
        if state.stage != Stage::Fresh {
            return Err(InferenceError::Stage("evidence must be loaded into a fresh state"));
        }
        let cards = self.tree.cardinalities();
        let mut per_clique: BTreeMap<CliqueId, Evidence> = BTreeMap::new();
        for (var, s) in evidence.iter() {
            if var >= cards.len() {
                return Err(EvidenceError::UnknownVariable(var).into());
            }
            if s >= cards[var] {
                return Err(EvidenceError::StateOutOfRange { var, state: s, card: cards[var] }.into());
            }
            per_clique.entry(self.home[var]).or_default().insert(var, s);
        }
        let mut filters: Vec<Option<EvidenceFilter>> = (0..self.tree.cliques.len()).map(|_| None).collect();
        let mut items = Vec::with_capacity(per_clique.len());
        for (c, ev) in per_clique {
            let domain = &self.tree.cliques[c].domain;
            filters[c] = Some(EvidenceFilter::new(domain, &ev)?);
            items.push(WorkItem {
                node: NodeId::Clique(c),
                op: TaskOp::ReduceEvidence,
                len: domain.size(),
            });
        }
        let kernel = |t: &Task, dst: &mut [f64]| -> Result<f64, InferenceError> {
            if let Some(f) = &filters[node_index(t)] {
                f.apply(t.begin, dst);
            }
            Ok(0.0)
        };
        for g in self.executor.strategy().plan(&items, self.executor.chunk()) {
            self.executor.run_group(&g, &mut state.cliques, node_index, &kernel)?;
        }
        state.stage = Stage::EvidenceLoaded;
        Ok(())
    }

    /// Leaves-to-root sweep. Afterwards each root clique is proportional to
    /// the joint of its scope and the evidence.
    pub fn collect(&self, state: &mut InferenceState) -> Result<(), InferenceError> {
        if !matches!(state.stage, Stage::Fresh | Stage::EvidenceLoaded) {
            return Err(InferenceError::Stage("collect needs a fresh or evidence-loaded state"));
        }
        for layer in &self.collect_plan {
            self.run_layer(state, layer, Phase::Collect)?;
        }
        for &r in &self.tree.schedule.roots {
            if !state.cliques[r].iter().any(|&v| v > 0.0) {
                return Err(InferenceError::ZeroProbabilityEvidence);
            }
        }
        state.stage = Stage::Collected;
        Ok(())
    }

    /// Root-to-leaves sweep. Afterwards the tree is calibrated.
    pub fn distribute(&self, state: &mut InferenceState) -> Result<(), InferenceError> {
        if state.stage != Stage::Collected {
            return Err(InferenceError::Stage("distribute needs a collected state"));
        }
        for layer in &self.distribute_plan {
            self.run_layer(state, layer, Phase::Distribute)?;
        }
        state.stage = Stage::Distributed;
        Ok(())
    }

    fn run_layer(&self, state: &mut InferenceState, layer: &LayerTasks, phase: Phase) -> Result<(), InferenceError> {
        let sched = &self.tree.schedule;
        let nodes = &sched.layers[layer.layer];
        if layer.layer % 2 == 1 {
            for &node in nodes {
                let NodeId::Separator(s) = node else { continue };
                let source = match phase {
                    Phase::Collect => sched.sep_child[s],
                    Phase::Distribute => sched.sep_parent[s],
                };
                let (cur, prev) = (&mut state.seps[s], &mut state.sep_prev[s]);
                std::mem::swap(cur, prev);
                state.sep_prev_log_scale[s] = state.sep_log_scale[s];
                state.sep_log_scale[s] = state.clique_log_scale[source];
            }
            let cliques = &state.cliques;
            let kernel = |t: &Task, dst: &mut [f64]| -> Result<f64, InferenceError> {
                let s = node_index(t);
                let (map, src) = match phase {
                    Phase::Collect => (&self.sep_from_child[s], &cliques[sched.sep_child[s]]),
                    Phase::Distribute => (&self.sep_from_parent[s], &cliques[sched.sep_parent[s]]),
                };
                map.compute_range(src, t.begin, dst);
                Ok(0.0)
            };
            for g in &layer.groups {
                self.executor.run_group(g, &mut state.seps, node_index, &kernel)?;
            }
            return Ok(());
        }

        let seps = &state.seps;
        let prev = &state.sep_prev;
        let absorb = |s: SepId, map: &ExtendMap, t: &Task, dst: &mut [f64]| -> Result<(), InferenceError> {
            let (cur, old) = (&seps[s], &prev[s]);
            let mut bad = None;
            map.for_each(t.begin, dst.len(), |i, p| {
                let (n, d) = (cur[p], old[p]);
                if d == 0.0 {
                    if n != 0.0 {
                        bad = Some(p);
                    }
                    dst[i] = 0.0;
                } else {
                    dst[i] *= n / d;
                }
            });
            match bad {
                Some(p) => Err(InferenceError::Fault(format!(
                    "separator {s} entry {p}: positive message over a zero potential"
                ))),
                None => Ok(()),
            }
        };
        let kernel = |t: &Task, dst: &mut [f64]| -> Result<f64, InferenceError> {
            let c = node_index(t);
            match phase {
                Phase::Collect => {
                    for &s in &sched.clique_children[c] {
                        absorb(s, &self.into_parent[s], t, dst)?;
                    }
                }
                Phase::Distribute => {
                    if let Some(s) = sched.clique_parent[c] {
                        absorb(s, &self.into_child[s], t, dst)?;
                    }
                }
            }
            Ok(dst.iter().copied().fold(0.0, f64::max))
        };
        let mut maxima: BTreeMap<CliqueId, f64> = BTreeMap::new();
        for g in &layer.groups {
            let m = self.executor.run_group(g, &mut state.cliques, node_index, &kernel)?;
            for (t, v) in g.tasks.iter().zip(m) {
                let e = maxima.entry(node_index(t)).or_insert(0.0);
                *e = e.max(v);
            }
        }
        for (c, max) in maxima {
            let shift: f64 = match phase {
                Phase::Collect => sched.clique_children[c]
                    .iter()
                    .map(|&s| state.sep_log_scale[s] - state.sep_prev_log_scale[s])
                    .sum(),
                Phase::Distribute => sched.clique_parent[c]
                    .map_or(0.0, |s| state.sep_log_scale[s] - state.sep_prev_log_scale[s]),
            };
            state.clique_log_scale[c] += shift;
            if max > 0.0 && max < RESCALE_THRESHOLD {
                for v in state.cliques[c].iter_mut() {
                    *v /= max;
                }
                state.clique_log_scale[c] += max.ln();
            }
        }
        Ok(())
    }

    /// Posterior of `var` from its home clique.
    pub fn query_marginal(&self, state: &InferenceState, var: VarId) -> Result<QueryResult, InferenceError> {
        if state.stage != Stage::Distributed {
            return Err(InferenceError::Stage("queries need a distributed state"));
        }
        if var >= self.home.len() {
            return Err(EvidenceError::UnknownVariable(var).into());
        }
        let card = self.tree.cardinalities()[var];
        let mut posterior = vec![0.0; card];
        self.query_maps[var].compute_range(&state.cliques[self.home[var]], 0, &mut posterior);
        let total: f64 = posterior.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(InferenceError::ZeroProbabilityEvidence);
        }
        for p in &mut posterior {
            *p /= total;
        }
        Ok(QueryResult { variable: var, posterior })
    }

    /// Complete case: reset, evidence, collect, distribute, then the
    /// posterior of every unobserved variable.
    pub fn run_case(&self, state: &mut InferenceState, evidence: &Evidence) -> Result<Posteriors, InferenceError> {
        self.reset(state);
        self.load_evidence(state, evidence)?;
        self.collect(state)?;
        self.distribute(state)?;
        let vars: Vec<VarId> = (0..self.home.len()).filter(|&v| !evidence.contains(v)).collect();
        let state: &InferenceState = state;
        let results = self.executor.map(vars.len(), |i| self.query_marginal(state, vars[i]));
        results.into_iter().map(|r| r.map(|q| (q.variable, q))).collect()
    }

    /// [`run_case`](Self::run_case) on a throwaway state.
    pub fn infer(&self, evidence: &Evidence) -> Result<Posteriors, InferenceError> {
        let mut state = self.new_state();
        self.run_case(&mut state, evidence)
    }

    /// Current potential of clique `c` as a table (scale factor not applied).
    pub fn clique_table(&self, state: &InferenceState, c: CliqueId) -> PotentialTable {
        PotentialTable::new(self.tree.cliques[c].domain.clone(), state.cliques[c].clone())
            .expect("working potentials stay nonnegative and finite")
    }

    /// Current potential of separator `s`.
    pub fn separator_table(&self, state: &InferenceState, s: SepId) -> PotentialTable {
        PotentialTable::new(self.tree.separators[s].domain.clone(), state.seps[s].clone())
            .expect("working potentials stay nonnegative and finite")
    }
}

fn node_index(t: &Task) -> usize {
    match t.node {
        NodeId::Clique(c) => c,
        NodeId::Separator(s) => s,
    }
}
