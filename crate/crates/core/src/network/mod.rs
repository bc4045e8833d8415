//! Discrete Bayesian networks: variables, conditional probability tables,
//! structural validation and evidence.

mod bif;
mod sample;

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

pub use bif::{parse_bif, write_bif, BifError};
pub use sample::{forward_sample, sample_evidence, seeded_rng, Rng64};

/// Dense variable index, assigned in declaration order starting at 0.
pub type VarId = usize;

/// Tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(id: VarId, name: impl Into<String>, states: Vec<String>) -> Self {
        Variable {
            id,
            name: name.into(),
            states,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// `P(child | parents)`. One row per parent configuration, the last listed
/// parent varying fastest; each row has `card(child)` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub probabilities: Vec<f64>,
}

impl Cpt {
    pub fn new(child: VarId, parents: Vec<VarId>, probabilities: Vec<f64>) -> Self {
        Cpt {
            child,
            parents,
            probabilities,
        }
    }

    /// `{child} ∪ parents`, ascending.
    pub fn family(&self) -> Vec<VarId> {
        let mut f: Vec<VarId> = self.parents.clone();
        f.push(self.child);
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Row index for a full parent assignment given in `parents` order.
    pub fn row_index(&self, parent_states: &[usize], cards: &[usize]) -> usize {
        self.parents
            .iter()
            .zip(parent_states)
            .fold(0, |acc, (&p, &s)| acc * cards[p] + s)
    }
}

/// Why a network fails validation.
#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    Cardinality(usize),
    DuplicateState(String),
    MissingCpt,
    DuplicateCpt,
    UnknownVariable(VarId),
    DuplicateParent(VarId),
    RowLength { expected: usize, found: usize },
    EntryOutOfRange { index: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    Cycle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub variable: VarId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "variable {}: ", self.variable)?;
        match &self.kind {
            ViolationKind::Cardinality(c) => write!(f, "invalid cardinality {c}"),
            ViolationKind::DuplicateState(s) => write!(f, "duplicate state name `{s}`"),
            ViolationKind::MissingCpt => write!(f, "no probability table"),
            ViolationKind::DuplicateCpt => write!(f, "more than one probability table"),
            ViolationKind::UnknownVariable(v) => write!(f, "table references unknown variable {v}"),
            ViolationKind::DuplicateParent(v) => write!(f, "parent {v} listed twice"),
            ViolationKind::RowLength { expected, found } => {
                write!(f, "table has {found} entries, expected {expected}")
            }
            ViolationKind::EntryOutOfRange { index, value } => {
                write!(f, "entry {index} = {value} outside [0, 1]")
            }
            ViolationKind::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            ViolationKind::Cycle => write!(f, "participates in a directed cycle"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("directed cycle through variables {0:?}")]
pub struct CycleError(pub Vec<VarId>);

#[derive(Debug, thiserror::Error)]
#[error("invalid network: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidNetwork(pub Vec<Violation>);

#[derive(Clone, Debug, PartialEq)]
pub struct BayesianNetwork {
    pub name: String,
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

impl BayesianNetwork {
    /// Builds a network without validating it. CPTs are stored in the order
    /// given; use [`BayesianNetwork::try_new`] for a checked construction.
    pub fn new(name: impl Into<String>, variables: Vec<Variable>, cpts: Vec<Cpt>) -> Self {
        BayesianNetwork {
            name: name.into(),
            variables,
            cpts,
        }
    }

    pub fn try_new(
        name: impl Into<String>,
        variables: Vec<Variable>,
        mut cpts: Vec<Cpt>,
    ) -> Result<Self, InvalidNetwork> {
        cpts.sort_by_key(|c| c.child);
        let net = Self::new(name, variables, cpts);
        let violations = net.validate();
        if violations.is_empty() {
            Ok(net)
        } else {
            Err(InvalidNetwork(violations))
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    /// The CPT whose child is `id`. Only meaningful on a validated network.
    pub fn cpt(&self, id: VarId) -> &Cpt {
        &self.cpts[id]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Directed `(parent, child)` edges, sorted.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        let mut e: Vec<_> = self
            .cpts
            .iter()
            .flat_map(|c| c.parents.iter().map(move |&p| (p, c.child)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn validate(&self) -> Vec<Violation> {
        let n = self.variables.len();
        let mut out = Vec::new();
        let mut push = |variable, kind| out.push(Violation { variable, kind });

        let mut is_parent = vec![false; n];
        for cpt in &self.cpts {
            for &p in &cpt.parents {
                if p < n {
                    is_parent[p] = true;
                }
            }
        }
        for (id, v) in self.variables.iter().enumerate() {
            let card = v.cardinality();
            if card == 0 || (is_parent[id] && card < 2) {
                push(id, ViolationKind::Cardinality(card));
            }
            let mut seen = BTreeSet::new();
            for s in &v.states {
                if !seen.insert(s.as_str()) {
                    push(id, ViolationKind::DuplicateState(s.clone()));
                }
            }
        }

        let mut owners = vec![0usize; n];
        for cpt in &self.cpts {
            if cpt.child >= n {
                push(cpt.child, ViolationKind::UnknownVariable(cpt.child));
                continue;
            }
            owners[cpt.child] += 1;
            let mut seen = BTreeSet::new();
            let mut scope_ok = true;
            for &p in &cpt.parents {
                if p >= n {
                    push(cpt.child, ViolationKind::UnknownVariable(p));
                    scope_ok = false;
                } else if !seen.insert(p) {
                    push(cpt.child, ViolationKind::DuplicateParent(p));
                }
            }
            if !scope_ok {
                continue;
            }
            let card = self.variables[cpt.child].cardinality();
            let rows: usize = cpt
                .parents
                .iter()
                .map(|&p| self.variables[p].cardinality())
                .product();
            let expected = rows * card;
            if cpt.probabilities.len() != expected {
                push(
                    cpt.child,
                    ViolationKind::RowLength {
                        expected,
                        found: cpt.probabilities.len(),
                    },
                );
                continue;
            }
            for (index, &value) in cpt.probabilities.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    push(cpt.child, ViolationKind::EntryOutOfRange { index, value });
                }
            }
            if card > 0 {
                for (row, chunk) in cpt.probabilities.chunks(card).enumerate() {
                    let sum: f64 = chunk.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        push(cpt.child, ViolationKind::RowSum { row, sum });
                    }
                }
            }
        }
        for (id, &count) in owners.iter().enumerate() {
            match count {
                0 => push(id, ViolationKind::MissingCpt),
                1 => {}
                _ => push(id, ViolationKind::DuplicateCpt),
            }
        }

        if let Err(CycleError(cyclic)) = self.topological_order() {
            for v in cyclic {
                push(v, ViolationKind::Cycle);
            }
        }
        out
    }

    /// Divides every CPT row whose sum is off by more than `1e-12` by that
    /// sum. Rows already that close are left untouched, so repeated calls
    /// are no-ops.
    pub fn renormalize_rows(&mut self) {
        for cpt in &mut self.cpts {
            let card = self.variables[cpt.child].cardinality();
            if card == 0 {
                continue;
            }
            for row in cpt.probabilities.chunks_mut(card) {
                let total: f64 = row.iter().sum();
                if total > 0.0 && (total - 1.0).abs() > 1e-12 {
                    row.iter_mut().for_each(|p| *p /= total);
                }
            }
        }
    }

    /// Kahn's algorithm with a min-heap, so ties go to the smallest id.
    /// On failure the error lists every variable left unordered.
    pub fn topological_order(&self) -> Result<Vec<VarId>, CycleError> {
        let n = self.variables.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<VarId>> = vec![Vec::new(); n];
        for (p, c) in self.edges() {
            if p < n && c < n {
                indegree[c] += 1;
                children[p].push(c);
            }
        }
        let mut ready: BinaryHeap<Reverse<VarId>> =
            (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(CycleError((0..n).filter(|&v| indegree[v] > 0).collect()))
        }
    }

    /// `P(child = state | parents)` under a full assignment indexed by var id.
    pub fn conditional(&self, child: VarId, assignment: &[usize]) -> f64 {
        let cpt = &self.cpts[child];
        let card = self.variables[child].cardinality();
        let row = cpt.parents.iter().fold(0, |acc, &p| {
            acc * self.variables[p].cardinality() + assignment[p]
        });
        cpt.probabilities[row * card + assignment[child]]
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("unknown variable id {0}")]
    UnknownVariable(VarId),
    #[error("state {state} out of range for variable {var} (cardinality {card})")]
    StateOutOfRange { var: VarId, state: usize, card: usize },
    #[error("variable {0} observed twice")]
    Duplicate(VarId),
}

/// Observed variable → state index. Keys are unique by construction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Evidence(BTreeMap<VarId, usize>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds evidence from pairs, rejecting duplicates and out-of-range states.
    pub fn from_pairs(
        net: &BayesianNetwork,
        pairs: impl IntoIterator<Item = (VarId, usize)>,
    ) -> Result<Self, EvidenceError> {
        let mut ev = Evidence::new();
        for (var, state) in pairs {
            if var >= net.len() {
                return Err(EvidenceError::UnknownVariable(var));
            }
            let card = net.variable(var).cardinality();
            if state >= card {
                return Err(EvidenceError::StateOutOfRange { var, state, card });
            }
            if ev.0.insert(var, state).is_some() {
                return Err(EvidenceError::Duplicate(var));
            }
        }
        Ok(ev)
    }

    pub fn insert(&mut self, var: VarId, state: usize) -> Option<usize> {
        self.0.insert(var, state)
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.0.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.0.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.0.iter().map(|(&v, &s)| (v, s))
    }
}

impl FromIterator<(VarId, usize)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (VarId, usize)>>(iter: I) -> Self {
        Evidence(iter.into_iter().collect())
    }
}
