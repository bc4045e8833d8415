//! Potential tables: flat, row-major arrays of nonnegative reals over an
//! ascending variable scope, the last scope variable varying fastest.
//!
//! The three hot operations of junction-tree propagation (marginalization,
//! extension, and evidence reduction) are all expressed through
//! [`mapping`] recipes that evaluate each destination entry independently.

pub mod mapping;

use std::collections::BTreeMap;

use crate::network::{Evidence, VarId};
pub use mapping::{build_index_mapping, ExtendMap, IndexMapping, MarginalizeMap, Projector};

/// Full assignment over a scope.
pub type Assignment = BTreeMap<VarId, usize>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("variable {0} is not in the table scope")]
    NotSubset(VarId),
    #[error("scopes are not related by inclusion (stray variables {0:?})")]
    UnrelatedScopes(Vec<VarId>),
    #[error("cardinality mismatch for variable {0}")]
    CardinalityMismatch(VarId),
    #[error("variable {0} appears twice in a scope")]
    DuplicateVariable(VarId),
    #[error("variable {0} has cardinality zero")]
    ZeroCardinality(VarId),
    #[error("assignment is missing variable {0}")]
    MissingVariable(VarId),
    #[error("assignment has variable {0} outside the scope")]
    ExtraVariable(VarId),
    #[error("state {state} out of range for variable {var}")]
    StateOutOfRange { var: VarId, state: usize },
    #[error("index {index} out of range for a table of {size} entries")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("expected {expected} values, got {found}")]
    ValueLength { expected: usize, found: usize },
    #[error("entry {0} is negative or not finite")]
    InvalidValue(usize),
    #[error("scopes differ")]
    ShapeMismatch,
    #[error("positive value divided by zero at entry {0}")]
    DivisionByZero(usize),
    #[error("table has zero total mass (evidence has probability zero)")]
    ZeroMass,
}

/// Ordered scope with cardinalities and row-major strides.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Domain {
    vars: Vec<VarId>,
    cards: Vec<usize>,
    strides: Vec<usize>,
}

impl Domain {
    /// Sorts `pairs` by variable id.
    pub fn new(mut pairs: Vec<(VarId, usize)>) -> Result<Self, PotentialError> {
        pairs.sort_unstable_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(PotentialError::DuplicateVariable(w[0].0));
            }
        }
        if let Some(&(v, _)) = pairs.iter().find(|p| p.1 == 0) {
            return Err(PotentialError::ZeroCardinality(v));
        }
        let vars: Vec<VarId> = pairs.iter().map(|p| p.0).collect();
        let cards: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let mut strides = vec![1usize; cards.len()];
        for k in (0..cards.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * cards[k + 1];
        }
        Ok(Domain {
            vars,
            cards,
            strides,
        })
    }

    /// Domain over `vars` (any order) with cardinalities looked up by id.
    pub fn from_vars(vars: &[VarId], cards_by_id: &[usize]) -> Result<Self, PotentialError> {
        Self::new(vars.iter().map(|&v| (v, cards_by_id[v])).collect())
    }

    pub fn empty() -> Self {
        Domain::default()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Number of table entries; 1 for the empty scope.
    pub fn size(&self) -> usize {
        self.cards.iter().product()
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.vars.binary_search(&var).ok()
    }

    pub fn card_of(&self, var: VarId) -> Option<usize> {
        self.position(var).map(|k| self.cards[k])
    }

    pub fn contains_all(&self, vars: &[VarId]) -> bool {
        vars.iter().all(|&v| self.position(v).is_some())
    }

    /// Restriction to the variables in `keep` that belong to this domain.
    pub fn restrict(&self, keep: &[VarId]) -> Domain {
        let pairs = self
            .vars
            .iter()
            .zip(&self.cards)
            .filter(|(v, _)| keep.contains(v))
            .map(|(&v, &c)| (v, c))
            .collect();
        Domain::new(pairs).expect("restriction of a valid domain")
    }

    pub fn index_of(&self, assignment: &Assignment) -> Result<usize, PotentialError> {
        if let Some(&extra) = assignment.keys().find(|&&v| self.position(v).is_none()) {
            return Err(PotentialError::ExtraVariable(extra));
        }
        let mut index = 0;
        for k in 0..self.vars.len() {
            let v = self.vars[k];
            let s = *assignment
                .get(&v)
                .ok_or(PotentialError::MissingVariable(v))?;
            if s >= self.cards[k] {
                return Err(PotentialError::StateOutOfRange { var: v, state: s });
            }
            index += s * self.strides[k];
        }
        Ok(index)
    }

    pub fn assignment_of(&self, index: usize) -> Result<Assignment, PotentialError> {
        let size = self.size();
        if index >= size {
            return Err(PotentialError::IndexOutOfRange { index, size });
        }
        Ok(self
            .vars
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, (index / self.strides[k]) % self.cards[k]))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTable {
    domain: Domain,
    values: Vec<f64>,
}

impl PotentialTable {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self, PotentialError> {
        let expected = domain.size();
        if values.len() != expected {
            return Err(PotentialError::ValueLength {
                expected,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PotentialError::InvalidValue(i));
        }
        Ok(PotentialTable { domain, values })
    }

    /// Table whose `values` are laid out row-major over `scope` as given
    /// (not necessarily ascending); the result is canonicalized.
    pub fn from_unordered(scope: &[(VarId, usize)], values: Vec<f64>) -> Result<Self, PotentialError> {
        let given = Projector::new(
            scope.iter().map(|p| p.1).collect(),
            row_major_strides(scope.iter().map(|p| p.1)),
        );
        let domain = Domain::new(scope.to_vec())?;
        if values.len() != given.size() {
            return Err(PotentialError::ValueLength {
                expected: given.size(),
                found: values.len(),
            });
        }
        // canonical position of each entry in given order
        let canon_strides: Vec<usize> = scope
            .iter()
            .map(|&(v, _)| domain.strides()[domain.position(v).unwrap()])
            .collect();
        let scatter = Projector::new(scope.iter().map(|p| p.1).collect(), canon_strides);
        let mut out = vec![0.0; values.len()];
        scatter.for_each(0, values.len(), |i, dst| out[dst] = values[i]);
        Self::new(domain, out)
    }

    pub fn ones(domain: Domain) -> Self {
        let n = domain.size();
        PotentialTable {
            domain,
            values: vec![1.0; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        PotentialTable {
            domain: Domain::empty(),
            values: vec![value],
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn scope(&self) -> &[VarId] {
        self.domain.vars()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn index_of(&self, assignment: &Assignment) -> Result<usize, PotentialError> {
        self.domain.index_of(assignment)
    }

    pub fn assignment_of(&self, index: usize) -> Result<Assignment, PotentialError> {
        self.domain.assignment_of(index)
    }

    pub fn get(&self, assignment: &Assignment) -> Result<f64, PotentialError> {
        Ok(self.values[self.index_of(assignment)?])
    }

    /// Sums out every variable not in `keep`.
    pub fn marginalize(&self, keep: &[VarId]) -> Result<PotentialTable, PotentialError> {
        if let Some(&v) = keep.iter().find(|&&v| self.domain.position(v).is_none()) {
            return Err(PotentialError::NotSubset(v));
        }
        let dst = self.domain.restrict(keep);
        let map = MarginalizeMap::new(&self.domain, &dst)?;
        let mut values = vec![0.0; dst.size()];
        map.compute_range(&self.values, 0, &mut values);
        Ok(PotentialTable { domain: dst, values })
    }

    /// Replicates the table across the extra variables of `superscope`.
    pub fn extend(&self, superscope: &Domain) -> Result<PotentialTable, PotentialError> {
        let map = ExtendMap::new(&self.domain, superscope)?;
        let mut values = vec![0.0; superscope.size()];
        map.for_each(0, values.len(), |i, s| values[i] = self.values[s]);
        Ok(PotentialTable {
            domain: superscope.clone(),
            values,
        })
    }

    /// Zeroes entries that disagree with the evidence on an in-scope variable.
    pub fn reduce(&self, evidence: &Evidence) -> Result<PotentialTable, PotentialError> {
        let mut out = self.clone();
        let filter = EvidenceFilter::new(&self.domain, evidence)?;
        filter.apply(0, &mut out.values);
        Ok(out)
    }

    /// `self[i] *= factor[project(i)]`.
    pub fn multiply_in(&mut self, factor: &PotentialTable) -> Result<(), PotentialError> {
        let map = ExtendMap::new(&factor.domain, &self.domain)?;
        let values = &mut self.values;
        map.for_each(0, values.len(), |i, s| values[i] *= factor.values[s]);
        Ok(())
    }

    pub fn multiplied(&self, factor: &PotentialTable) -> Result<PotentialTable, PotentialError> {
        let mut out = self.clone();
        out.multiply_in(factor)?;
        Ok(out)
    }

    /// Pointwise division with `0/0 = 0`.
    pub fn divide(&self, denom: &PotentialTable) -> Result<PotentialTable, PotentialError> {
        if self.domain != denom.domain {
            return Err(PotentialError::ShapeMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&denom.values)
            .enumerate()
            .map(|(i, (&n, &d))| safe_ratio(n, d).ok_or(PotentialError::DivisionByZero(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PotentialTable {
            domain: self.domain.clone(),
            values,
        })
    }

    pub fn normalize(&self) -> Result<PotentialTable, PotentialError> {
        let total = self.sum();
        if total <= 0.0 {
            return Err(PotentialError::ZeroMass);
        }
        Ok(PotentialTable {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v / total).collect(),
        })
    }
}

/// `n / d` under the Hugin convention `0/0 = 0`; `None` for `x/0`, `x > 0`.
#[inline]
pub fn safe_ratio(n: f64, d: f64) -> Option<f64> {
    if d == 0.0 {
        (n == 0.0).then_some(0.0)
    } else {
        Some(n / d)
    }
}

fn row_major_strides(cards: impl DoubleEndedIterator<Item = usize> + ExactSizeIterator) -> Vec<usize> {
    let mut strides = vec![0; cards.len()];
    let mut acc = 1;
    for (k, c) in cards.enumerate().rev() {
        strides[k] = acc;
        acc *= c;
    }
    strides
}

/// Per-entry evidence agreement test for one table shape. Entry `i` is kept
/// iff its projection onto the in-scope evidence variables equals the
/// observed configuration.
#[derive(Clone, Debug)]
pub struct EvidenceFilter {
    proj: Option<Projector>,
    observed: usize,
}

impl EvidenceFilter {
    pub fn new(domain: &Domain, evidence: &Evidence) -> Result<Self, PotentialError> {
        let mut ev_cards = Vec::new();
        let mut ev_states = Vec::new();
        for (k, &v) in domain.vars().iter().enumerate() {
            if let Some(s) = evidence.get(v) {
                if s >= domain.cards()[k] {
                    return Err(PotentialError::StateOutOfRange { var: v, state: s });
                }
                ev_cards.push(domain.cards()[k]);
                ev_states.push(s);
            }
        }
        if ev_cards.is_empty() {
            return Ok(EvidenceFilter {
                proj: None,
                observed: 0,
            });
        }
        let ev_strides = row_major_strides(ev_cards.iter().copied());
        let observed = ev_states.iter().zip(&ev_strides).map(|(s, t)| s * t).sum();
        let strides = domain
            .vars()
            .iter()
            .map(|&v| {
                evidence.get(v).map_or(0, |_| {
                    let pos = domain
                        .vars()
                        .iter()
                        .filter(|&&u| evidence.contains(u))
                        .position(|&u| u == v)
                        .unwrap();
                    ev_strides[pos]
                })
            })
            .collect();
        Ok(EvidenceFilter {
            proj: Some(Projector::new(domain.cards().to_vec(), strides)),
            observed,
        })
    }

    pub fn is_noop(&self) -> bool {
        self.proj.is_none()
    }

    /// Applies the filter to entries `begin..begin + values.len()`.
    #[inline]
    pub fn apply(&self, begin: usize, values: &mut [f64]) {
        if let Some(p) = &self.proj {
            let observed = self.observed;
            p.for_each(begin, values.len(), |i, e| {
                if e != observed {
                    values[i] = 0.0;
                }
            });
        }
    }
}
