//! Execution strategies: how the destination entries of one layer are cut
//! into tasks and which of those tasks may run concurrently.
//!
//! Every strategy produces the same tasks' *contents* (each destination
//! entry is computed by exactly one task, with a fixed per-entry operation
//! order), so results are bit-identical across strategies and thread counts.
//! They differ only in granularity:
//!
//! | name     | tasks per node       | concurrency                          |
//! |----------|----------------------|--------------------------------------|
//! | `seq`    | one                  | none                                 |
//! | `inter`  | one                  | all nodes of a layer at once         |
//! | `intra`  | `chunk`-sized ranges | chunks of one node, node after node  |
//! | `hybrid` | `chunk`-sized ranges | all chunks of all nodes of the layer |

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::jtree::{JunctionTree, LayerSchedule, NodeId};

/// Default number of destination entries per task.
pub const DEFAULT_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TaskOp {
    MarginalizeToSeparator,
    AbsorbFromSeparator,
    ReduceEvidence,
}

/// Computes destination entries `begin..end` of `node`'s table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Task {
    pub node: NodeId,
    pub op: TaskOp,
    pub begin: usize,
    pub end: usize,
}

impl Task {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.begin
    }
}

/// A node whose table a layer rewrites, with its entry count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkItem {
    pub node: NodeId,
    pub op: TaskOp,
    pub len: usize,
}

/// Tasks that may run concurrently; a barrier follows every group.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TaskGroup {
    pub tasks: Vec<Task>,
    pub concurrent: bool,
}

pub trait ExecutionStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Strategies that never use more than the calling thread.
    fn is_sequential(&self) -> bool {
        false
    }

    /// Splits one layer's work into barrier-separated task groups.
    fn plan(&self, items: &[WorkItem], chunk: usize) -> Vec<TaskGroup>;
}

fn whole(item: &WorkItem) -> Task {
    Task {
        node: item.node,
        op: item.op,
        begin: 0,
        end: item.len,
    }
}

/// `[0, len)` cut into `chunk`-sized ranges; the last one may be short.
fn chunked(item: &WorkItem, chunk: usize) -> impl Iterator<Item = Task> + '_ {
    let chunk = chunk.max(1);
    (0..item.len.div_ceil(chunk)).map(move |k| Task {
        node: item.node,
        op: item.op,
        begin: k * chunk,
        end: ((k + 1) * chunk).min(item.len),
    })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Sequential;

impl ExecutionStrategy for Sequential {
    fn name(&self) -> &'static str {
        "seq"
    }

    fn is_sequential(&self) -> bool {
        true
    }

    fn plan(&self, items: &[WorkItem], _chunk: usize) -> Vec<TaskGroup> {
        vec![TaskGroup {
            tasks: items.iter().map(whole).collect(),
            concurrent: false,
        }]
    }
}

/// Coarse-grained: one task per tree node.
#[derive(Debug, Default, Clone, Copy)]
pub struct InterClique;

impl ExecutionStrategy for InterClique {
    fn name(&self) -> &'static str {
        "inter"
    }

    fn plan(&self, items: &[WorkItem], _chunk: usize) -> Vec<TaskGroup> {
        vec![TaskGroup {
            tasks: items.iter().map(whole).collect(),
            concurrent: true,
        }]
    }
}

/// Fine-grained: the entries of one table at a time.
#[derive(Debug, Default, Clone, Copy)]
pub struct IntraClique;

impl ExecutionStrategy for IntraClique {
    fn name(&self) -> &'static str {
        "intra"
    }

    fn plan(&self, items: &[WorkItem], chunk: usize) -> Vec<TaskGroup> {
        items
            .iter()
            .map(|item| TaskGroup {
                tasks: chunked(item, chunk).collect(),
                concurrent: true,
            })
            .collect()
    }
}

/// Flattened: the entries of every table in the layer packed into one pool
/// of uniformly sized tasks. Chunks never straddle two nodes.
#[derive(Debug, Default, Clone, Copy)]
pub struct Hybrid;

impl ExecutionStrategy for Hybrid {
    fn name(&self) -> &'static str {
        "hybrid"
    }

    fn plan(&self, items: &[WorkItem], chunk: usize) -> Vec<TaskGroup> {
        vec![TaskGroup {
            tasks: items.iter().flat_map(|item| chunked(item, chunk)).collect(),
            concurrent: true,
        }]
    }
}

pub type StrategyFactory = fn() -> Box<dyn ExecutionStrategy>;

#[derive(Debug, thiserror::Error)]
#[error("unknown execution strategy `{name}` (available: {})", .available.join(", "))]
pub struct UnknownStrategy {
    pub name: String,
    pub available: Vec<String>,
}

/// Strategies registered by name.
#[derive(Clone)]
pub struct StrategyRegistry {
    entries: BTreeMap<String, StrategyFactory>,
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = StrategyRegistry::empty();
        r.register("seq", || Box::new(Sequential));
        r.register("inter", || Box::new(InterClique));
        r.register("intra", || Box::new(IntraClique));
        r.register("hybrid", || Box::new(Hybrid));
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// The four built-in strategies: `seq`, `inter`, `intra`, `hybrid`.
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Replaces any strategy already registered under `name`.
    pub fn register(&mut self, name: impl Into<String>, factory: StrategyFactory) {
        self.entries.insert(name.into(), factory);
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn ExecutionStrategy>, UnknownStrategy> {
        let key = match name {
            "sequential" => "seq",
            "inter-clique" => "inter",
            "intra-clique" => "intra",
            other => other,
        };
        self.entries
            .get(key)
            .map(|f| f())
            .ok_or_else(|| UnknownStrategy {
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

/// Which sweep a layer plan belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Collect,
    Distribute,
}

/// Task groups for one layer of one sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerTasks {
    pub layer: usize,
    pub groups: Vec<TaskGroup>,
}

/// Nodes rewritten by `layer` during `phase`: every separator of a
/// separator layer; for a clique layer, the cliques that absorb something
/// (those with children when collecting, all but roots when distributing).
pub fn layer_work(tree: &JunctionTree, schedule: &LayerSchedule, layer: usize, phase: Phase) -> Vec<WorkItem> {
    schedule.layers[layer]
        .iter()
        .filter_map(|&node| match node {
            NodeId::Separator(s) => Some(WorkItem {
                node,
                op: TaskOp::MarginalizeToSeparator,
                len: tree.separators[s].domain.size(),
            }),
            NodeId::Clique(c) => {
                let absorbs = match phase {
                    Phase::Collect => !schedule.clique_children[c].is_empty(),
                    Phase::Distribute => schedule.clique_parent[c].is_some(),
                };
                absorbs.then(|| WorkItem {
                    node,
                    op: TaskOp::AbsorbFromSeparator,
                    len: tree.cliques[c].domain.size(),
                })
            }
        })
        .collect()
}

/// Per-layer task lists for one sweep, in execution order: deepest layer
/// to layer 0 when collecting, layer 1 outward when distributing. Layers
/// with no work are omitted.
pub fn build_layer_tasks(
    tree: &JunctionTree,
    schedule: &LayerSchedule,
    strategy: &dyn ExecutionStrategy,
    chunk: usize,
    phase: Phase,
) -> Vec<LayerTasks> {
    let order: Vec<usize> = match phase {
        Phase::Collect => (0..schedule.len()).rev().collect(),
        Phase::Distribute => (1..schedule.len()).collect(),
    };
    order
        .into_iter()
        .filter_map(|layer| {
            let items = layer_work(tree, schedule, layer, phase);
            (!items.is_empty()).then(|| {
                let groups = strategy.plan(&items, chunk);
                debug_assert_eq!(check_partition(&items, &groups), Ok(()));
                LayerTasks { layer, groups }
            })
        })
        .collect()
}

/// Checks that the tasks of `groups` cover each item's `[0, len)` exactly
/// once and touch no other node.
pub fn check_partition(items: &[WorkItem], groups: &[TaskGroup]) -> Result<(), String> {
    let mut ranges: BTreeMap<NodeId, Vec<(usize, usize)>> =
        items.iter().map(|i| (i.node, Vec::new())).collect();
    for t in groups.iter().flat_map(|g| &g.tasks) {
        ranges
            .get_mut(&t.node)
            .ok_or_else(|| format!("task for unplanned node {:?}", t.node))?
            .push((t.begin, t.end));
    }
    for item in items {
        let r = ranges.get_mut(&item.node).expect("inserted above");
        r.sort_unstable();
        let mut next = 0;
        for &(b, e) in r.iter() {
            if b != next || e <= b {
                return Err(format!("{:?}: range {b}..{e} after {next}", item.node));
            }
            next = e;
        }
        if next != item.len {
            return Err(format!("{:?}: covered {next} of {} entries", item.node, item.len));
        }
    }
    Ok(())
}
