//! Junction-tree compilation: moralize, triangulate (min-fill), connect the
//! maximal cliques by a maximum-weight spanning tree, assign CPTs, choose a
//! root, and lay out the breadth-first schedule.

mod graph;
mod report;
mod schedule;

use std::collections::BTreeSet;

use crate::network::{BayesianNetwork, VarId};
use crate::potential::{Domain, PotentialError, PotentialTable};

pub use graph::{moralize, triangulate_min_fill, Triangulation, UndirectedGraph};
pub use report::TreeReport;
pub use schedule::{compute_layers, eccentricity, select_root, LayerSchedule, NodeId};

pub type CliqueId = usize;
pub type SepId = usize;

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("no clique contains the family of variable {0}")]
    FamilyNotCovered(VarId),
    #[error("clique {0} is empty")]
    EmptyClique(CliqueId),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Why a tree fails one of the junction-tree structural properties.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error("cliques containing variable {0} are not connected")]
    RunningIntersection(VarId),
    #[error("family of variable {0} is in no clique")]
    FamilyNotCovered(VarId),
    #[error("separator {0} scope differs from its endpoint intersection")]
    SeparatorScope(SepId),
    #[error("{separators} separators for {cliques} cliques in {components} components")]
    NotAForest {
        cliques: usize,
        separators: usize,
        components: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clique {
    pub id: CliqueId,
    pub domain: Domain,
    /// Incident separators, ascending.
    pub separators: Vec<SepId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Separator {
    pub id: SepId,
    /// Endpoints, smaller id first.
    pub cliques: (CliqueId, CliqueId),
    pub domain: Domain,
}

impl Separator {
    pub fn other(&self, c: CliqueId) -> CliqueId {
        if self.cliques.0 == c {
            self.cliques.1
        } else {
            self.cliques.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JunctionTree {
    pub cliques: Vec<Clique>,
    pub separators: Vec<Separator>,
    /// Initial clique potentials; all ones until CPTs are assigned.
    pub potentials: Vec<PotentialTable>,
    /// Clique that received each variable's CPT.
    pub cpt_home: Vec<CliqueId>,
    pub schedule: LayerSchedule,
    cards: Vec<usize>,
}

/// Maximum-weight spanning forest over the clique graph (weight = size of
/// the scope intersection, only positive weights), built with Kruskal's
/// algorithm. Ties go to the lexicographically smaller `(low id, high id)`
/// pair. The root of each component is chosen by [`select_root`].
pub fn build_tree(cliques: &[Vec<VarId>], cards: &[usize]) -> Result<JunctionTree, BuildError> {
    let domains = cliques
        .iter()
        .map(|c| Domain::from_vars(c, cards))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(i) = domains.iter().position(Domain::is_empty) {
        return Err(BuildError::EmptyClique(i));
    }
    let k = domains.len();
    let mut candidates = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let w = intersection(domains[i].vars(), domains[j].vars()).len();
            if w > 0 {
                candidates.push((w, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut uf = UnionFind::new(k);
    let mut clique_nodes: Vec<Clique> = domains
        .into_iter()
        .enumerate()
        .map(|(id, domain)| Clique {
            id,
            domain,
            separators: Vec::new(),
        })
        .collect();
    let mut separators = Vec::new();
    for (_, i, j) in candidates {
        if uf.union(i, j) {
            let id = separators.len();
            let shared = intersection(clique_nodes[i].domain.vars(), clique_nodes[j].domain.vars());
            separators.push(Separator {
                id,
                cliques: (i, j),
                domain: Domain::from_vars(&shared, cards)?,
            });
            clique_nodes[i].separators.push(id);
            clique_nodes[j].separators.push(id);
        }
    }
    let potentials = clique_nodes
        .iter()
        .map(|c| PotentialTable::ones(c.domain.clone()))
        .collect();
    let mut tree = JunctionTree {
        cliques: clique_nodes,
        separators,
        potentials,
        cpt_home: Vec::new(),
        schedule: LayerSchedule {
            roots: vec![],
            layers: vec![],
            clique_layer: vec![],
            sep_layer: vec![],
            clique_parent: vec![],
            clique_children: vec![],
            sep_parent: vec![],
            sep_child: vec![],
        },
        cards: cards.to_vec(),
    };
    let roots = select_root(&tree);
    tree.schedule = compute_layers(&tree, &roots);
    Ok(tree)
}

/// Multiplies each CPT into the smallest clique (by table size, then id)
/// containing its family.
pub fn assign_cpts(net: &BayesianNetwork, tree: &mut JunctionTree) -> Result<(), BuildError> {
    let cards = net.cardinalities();
    tree.potentials = tree
        .cliques
        .iter()
        .map(|c| PotentialTable::ones(c.domain.clone()))
        .collect();
    tree.cpt_home = Vec::with_capacity(net.len());
    for cpt in net.cpts() {
        let family = cpt.family();
        let home = tree
            .smallest_clique_containing(&family)
            .ok_or(BuildError::FamilyNotCovered(cpt.child))?;
        let mut layout: Vec<(VarId, usize)> = cpt.parents.iter().map(|&p| (p, cards[p])).collect();
        layout.push((cpt.child, cards[cpt.child]));
        let factor = PotentialTable::from_unordered(&layout, cpt.probabilities.clone())?;
        tree.potentials[home].multiply_in(&factor)?;
        tree.cpt_home.push(home);
    }
    Ok(())
}

/// Full compilation pipeline.
pub fn compile(net: &BayesianNetwork) -> Result<JunctionTree, BuildError> {
    let moral = moralize(net);
    let tri = triangulate_min_fill(&moral);
    let mut tree = build_tree(&tri.cliques, &net.cardinalities())?;
    assign_cpts(net, &mut tree)?;
    Ok(tree)
}

impl JunctionTree {
    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    /// Recomputes the schedule from explicit roots, one per component.
    pub fn reroot(&mut self, roots: &[CliqueId]) {
        self.schedule = compute_layers(self, roots);
    }

    /// Smallest clique (table size, then id) whose scope covers `vars`.
    pub fn smallest_clique_containing(&self, vars: &[VarId]) -> Option<CliqueId> {
        self.cliques
            .iter()
            .filter(|c| c.domain.contains_all(vars))
            .min_by_key(|c| (c.domain.size(), c.id))
            .map(|c| c.id)
    }

    /// Cliques grouped by connected component, each sorted, components
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<CliqueId>> {
        let mut uf = UnionFind::new(self.cliques.len());
        for s in &self.separators {
            uf.union(s.cliques.0, s.cliques.1);
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<CliqueId>> = Default::default();
        for c in 0..self.cliques.len() {
            groups.entry(uf.find(c)).or_default().push(c);
        }
        let mut out: Vec<Vec<CliqueId>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    pub fn total_clique_entries(&self) -> usize {
        self.cliques.iter().map(|c| c.domain.size()).sum()
    }

    pub fn total_separator_entries(&self) -> usize {
        self.separators.iter().map(|s| s.domain.size()).sum()
    }

    pub fn check_forest(&self) -> Result<(), StructureError> {
        let components = self.components().len();
        if self.separators.len() + components != self.cliques.len() {
            return Err(StructureError::NotAForest {
                cliques: self.cliques.len(),
                separators: self.separators.len(),
                components,
            });
        }
        Ok(())
    }

    /// For every variable, the cliques containing it induce a connected subtree.
    pub fn check_running_intersection(&self) -> Result<(), StructureError> {
        for v in 0..self.num_vars() {
            let holders: Vec<CliqueId> = self
                .cliques
                .iter()
                .filter(|c| c.domain.position(v).is_some())
                .map(|c| c.id)
                .collect();
            let Some(&start) = holders.first() else { continue };
            let mut seen = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                for &s in &self.cliques[c].separators {
                    let o = self.separators[s].other(c);
                    if self.cliques[o].domain.position(v).is_some() && seen.insert(o) {
                        stack.push(o);
                    }
                }
            }
            if seen.len() != holders.len() {
                return Err(StructureError::RunningIntersection(v));
            }
        }
        Ok(())
    }

    pub fn check_family_preservation(&self, net: &BayesianNetwork) -> Result<(), StructureError> {
        for cpt in net.cpts() {
            if self.smallest_clique_containing(&cpt.family()).is_none() {
                return Err(StructureError::FamilyNotCovered(cpt.child));
            }
        }
        Ok(())
    }

    pub fn check_separator_scopes(&self) -> Result<(), StructureError> {
        for s in &self.separators {
            let (a, b) = s.cliques;
            let shared = intersection(self.cliques[a].domain.vars(), self.cliques[b].domain.vars());
            if s.domain.vars() != shared.as_slice() {
                return Err(StructureError::SeparatorScope(s.id));
            }
        }
        Ok(())
    }

    pub fn check_structure(&self, net: &BayesianNetwork) -> Result<(), StructureError> {
        self.check_forest()?;
        self.check_running_intersection()?;
        self.check_family_preservation(net)?;
        self.check_separator_scopes()
    }
}

fn intersection(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    a.iter().copied().filter(|v| b.binary_search(v).is_ok()).collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
