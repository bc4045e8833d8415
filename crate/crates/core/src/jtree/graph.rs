use std::collections::{BTreeSet, HashSet};

use crate::network::{BayesianNetwork, VarId};

/// Simple undirected graph over dense vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        UndirectedGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Ignores self-loops. Returns whether the edge is new.
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        self.adj[b].insert(a);
        self.adj[a].insert(b)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    /// Edges as `(low, high)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// True iff `order` is a perfect elimination ordering: every vertex's
    /// neighbors that come later in `order` are pairwise adjacent.
    pub fn is_perfect_elimination_order(&self, order: &[usize]) -> bool {
        let mut pos = vec![usize::MAX; self.len()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        order.iter().all(|&v| {
            let later: Vec<usize> = self.adj[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
            later
                .iter()
                .enumerate()
                .all(|(i, &a)| later[i + 1..].iter().all(|&b| self.has_edge(a, b)))
        })
    }
}

/// Undirected skeleton plus an edge between every pair of co-parents.
pub fn moralize(net: &BayesianNetwork) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(net.len());
    for cpt in net.cpts() {
        for (i, &p) in cpt.parents.iter().enumerate() {
            g.add_edge(p, cpt.child);
            for &q in &cpt.parents[i + 1..] {
                g.add_edge(p, q);
            }
        }
    }
    g
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    pub chordal: UndirectedGraph,
    pub order: Vec<usize>,
    pub fill_edges: Vec<(usize, usize)>,
    /// Maximal cliques, in the order their eliminated vertex was removed.
    /// Each clique is sorted ascending.
    pub cliques: Vec<Vec<VarId>>,
}

/// Greedy min-fill elimination. Ties go to the smaller closed neighborhood,
/// then to the smaller vertex id.
pub fn triangulate_min_fill(g: &UndirectedGraph) -> Triangulation {
    let n = g.len();
    let mut work = g.clone();
    let mut chordal = g.clone();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut fill_edges = Vec::new();
    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(n);

    let fill_of = |w: &UndirectedGraph, v: usize| -> usize {
        let ns: Vec<usize> = w.neighbors(v).iter().copied().collect();
        let mut missing = 0;
        for i in 0..ns.len() {
            for j in i + 1..ns.len() {
                if !w.has_edge(ns[i], ns[j]) {
                    missing += 1;
                }
            }
        }
        missing
    };
    let mut fill: Vec<usize> = (0..n).map(|v| fill_of(&work, v)).collect();

    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (fill[v], work.neighbors(v).len(), v))
            .expect("a live vertex remains");
        let ns: Vec<usize> = work.neighbors(v).iter().copied().collect();
        for i in 0..ns.len() {
            for j in i + 1..ns.len() {
                if work.add_edge(ns[i], ns[j]) {
                    chordal.add_edge(ns[i], ns[j]);
                    fill_edges.push((ns[i], ns[j]));
                }
            }
        }
        let mut clique = ns.clone();
        clique.push(v);
        clique.sort_unstable();
        candidates.push(clique);

        for &u in &ns {
            work.adj[u].remove(&v);
        }
        work.adj[v].clear();
        alive[v] = false;
        order.push(v);

        // fill counts can only change within distance two of v
        let mut touched: HashSet<usize> = ns.iter().copied().collect();
        for &u in &ns {
            touched.extend(work.neighbors(u).iter().copied());
        }
        for u in touched {
            fill[u] = fill_of(&work, u);
        }
    }

    let cliques = maximal_only(candidates);
    Triangulation {
        chordal,
        order,
        fill_edges,
        cliques,
    }
}

/// Drops every candidate that is a subset of another (keeping the first of
/// any duplicates). Candidates must be sorted.
fn maximal_only(candidates: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let sets: Vec<BTreeSet<usize>> = candidates.iter().map(|c| c.iter().copied().collect()).collect();
    candidates
        .into_iter()
        .enumerate()
        .filter(|(i, c)| {
            !sets.iter().enumerate().any(|(j, s)| {
                j != *i && c.len() <= s.len() && c.iter().all(|x| s.contains(x)) && (c.len() < s.len() || j < *i)
            })
        })
        .map(|(_, c)| c)
        .collect()
}
