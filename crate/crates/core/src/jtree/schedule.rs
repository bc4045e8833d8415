//! Root selection and the breadth-first layer schedule.
//!
//! Cliques and separators are both nodes of the schedule. Starting from the
//! root clique at layer 0, separators land on odd layers and cliques on even
//! ones. Nodes within one layer never depend on each other.

use std::collections::VecDeque;

use serde::Serialize;

use super::{CliqueId, JunctionTree, SepId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum NodeId {
    Clique(CliqueId),
    Separator(SepId),
}

impl NodeId {
    pub fn is_clique(self) -> bool {
        matches!(self, NodeId::Clique(_))
    }
}

fn node_neighbors(tree: &JunctionTree, node: NodeId) -> Vec<NodeId> {
    match node {
        NodeId::Clique(c) => tree.cliques[c].separators.iter().map(|&s| NodeId::Separator(s)).collect(),
        NodeId::Separator(s) => {
            let (a, b) = tree.separators[s].cliques;
            vec![NodeId::Clique(a), NodeId::Clique(b)]
        }
    }
}

/// Breadth-first distances and parents over the clique/separator node graph.
struct Bfs {
    clique_dist: Vec<Option<usize>>,
    sep_dist: Vec<Option<usize>>,
    clique_parent: Vec<Option<NodeId>>,
    sep_parent: Vec<Option<NodeId>>,
    visited: Vec<NodeId>,
}

impl Bfs {
    fn run(tree: &JunctionTree, start: NodeId) -> Self {
        let mut b = Bfs {
            clique_dist: vec![None; tree.cliques.len()],
            sep_dist: vec![None; tree.separators.len()],
            clique_parent: vec![None; tree.cliques.len()],
            sep_parent: vec![None; tree.separators.len()],
            visited: Vec::new(),
        };
        b.set(start, 0, None);
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            b.visited.push(node);
            let d = b.dist(node).unwrap();
            for next in node_neighbors(tree, node) {
                if b.dist(next).is_none() {
                    b.set(next, d + 1, Some(node));
                    queue.push_back(next);
                }
            }
        }
        b
    }

    fn dist(&self, n: NodeId) -> Option<usize> {
        match n {
            NodeId::Clique(c) => self.clique_dist[c],
            NodeId::Separator(s) => self.sep_dist[s],
        }
    }

    fn parent(&self, n: NodeId) -> Option<NodeId> {
        match n {
            NodeId::Clique(c) => self.clique_parent[c],
            NodeId::Separator(s) => self.sep_parent[s],
        }
    }

    fn set(&mut self, n: NodeId, d: usize, p: Option<NodeId>) {
        match n {
            NodeId::Clique(c) => {
                self.clique_dist[c] = Some(d);
                self.clique_parent[c] = p;
            }
            NodeId::Separator(s) => {
                self.sep_dist[s] = Some(d);
                self.sep_parent[s] = p;
            }
        }
    }

    /// Farthest visited node; ties go to the smallest node id.
    fn farthest(&self) -> NodeId {
        *self
            .visited
            .iter()
            .max_by(|a, b| self.dist(**a).cmp(&self.dist(**b)).then(b.cmp(a)))
            .expect("bfs visits its start")
    }
}

/// Eccentricity of clique `c` within its component, in node hops.
pub fn eccentricity(tree: &JunctionTree, c: CliqueId) -> usize {
    let b = Bfs::run(tree, NodeId::Clique(c));
    b.visited.iter().filter_map(|&n| b.dist(n)).max().unwrap_or(0)
}

/// One root per connected component: the center of the component's
/// clique/separator tree, found by a double breadth-first sweep. If the
/// center falls on a separator, the neighbouring clique on the side of the
/// first sweep's far end is used. Components are ordered by smallest clique id.
pub fn select_root(tree: &JunctionTree) -> Vec<CliqueId> {
    tree.components()
        .iter()
        .map(|comp| {
            let start = NodeId::Clique(comp[0]);
            let u = Bfs::run(tree, start).farthest();
            let from_u = Bfs::run(tree, u);
            let v = from_u.farthest();
            let mut path = vec![v];
            while let Some(p) = from_u.parent(*path.last().unwrap()) {
                path.push(p);
            }
            path.reverse(); // u .. v
            let half = path.len() / 2;
            match path[half] {
                NodeId::Clique(c) => c,
                NodeId::Separator(_) => match path[half - 1] {
                    NodeId::Clique(c) => c,
                    NodeId::Separator(_) => unreachable!("cliques and separators alternate"),
                },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerSchedule {
    pub roots: Vec<CliqueId>,
    /// Layer `k` lists its nodes sorted by id.
    pub layers: Vec<Vec<NodeId>>,
    pub clique_layer: Vec<usize>,
    pub sep_layer: Vec<usize>,
    /// Separator toward the root, `None` for roots.
    pub clique_parent: Vec<Option<SepId>>,
    /// Separators toward the leaves, ascending.
    pub clique_children: Vec<Vec<SepId>>,
    /// Endpoint clique nearer the root.
    pub sep_parent: Vec<CliqueId>,
    /// Endpoint clique farther from the root.
    pub sep_child: Vec<CliqueId>,
}

impl LayerSchedule {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer_of(&self, node: NodeId) -> usize {
        match node {
            NodeId::Clique(c) => self.clique_layer[c],
            NodeId::Separator(s) => self.sep_layer[s],
        }
    }
}

/// Breadth-first labelling from `roots` (one per component). Layers of
/// separate components are merged positionally.
pub fn compute_layers(tree: &JunctionTree, roots: &[CliqueId]) -> LayerSchedule {
    let nc = tree.cliques.len();
    let ns = tree.separators.len();
    let mut s = LayerSchedule {
        roots: roots.to_vec(),
        layers: Vec::new(),
        clique_layer: vec![usize::MAX; nc],
        sep_layer: vec![usize::MAX; ns],
        clique_parent: vec![None; nc],
        clique_children: vec![Vec::new(); nc],
        sep_parent: vec![usize::MAX; ns],
        sep_child: vec![usize::MAX; ns],
    };
    for &root in roots {
        let bfs = Bfs::run(tree, NodeId::Clique(root));
        for &node in &bfs.visited {
            let d = bfs.dist(node).unwrap();
            if s.layers.len() <= d {
                s.layers.resize(d + 1, Vec::new());
            }
            s.layers[d].push(node);
            match (node, bfs.parent(node)) {
                (NodeId::Clique(c), parent) => {
                    s.clique_layer[c] = d;
                    if let Some(NodeId::Separator(p)) = parent {
                        s.clique_parent[c] = Some(p);
                        s.sep_child[p] = c;
                    }
                }
                (NodeId::Separator(sep), Some(NodeId::Clique(p))) => {
                    s.sep_layer[sep] = d;
                    s.sep_parent[sep] = p;
                    s.clique_children[p].push(sep);
                }
                (NodeId::Separator(_), _) => unreachable!("separators always have a parent clique"),
            }
        }
    }
    for layer in &mut s.layers {
        layer.sort_unstable();
    }
    for children in &mut s.clique_children {
        children.sort_unstable();
    }
    debug_assert!(s.clique_layer.iter().all(|&l| l != usize::MAX), "roots must cover every component");
    s
}
