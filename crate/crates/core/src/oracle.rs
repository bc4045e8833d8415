//! Brute-force ground truth: posteriors by summing the full joint, plus
//! seeded generators for random test networks.
//!
//! Nothing here shares code with the junction-tree engine beyond the
//! network representation itself.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;

use crate::network::{seeded_rng, BayesianNetwork, Cpt, Evidence, EvidenceError, VarId, Variable};

/// Largest joint state space the enumerator accepts.
pub const ENUMERATION_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("joint state space of {0:.3e} assignments exceeds the enumeration limit")]
    StateSpace(f64),
    #[error("evidence has probability zero")]
    ZeroProbabilityEvidence,
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Visits every full assignment consistent with the evidence, odometer
/// style over the unobserved variables in topological order.
pub struct JointEnumerator<'a> {
    net: &'a BayesianNetwork,
    order: Vec<VarId>,
    free: Vec<VarId>,
    assignment: Vec<usize>,
    started: bool,
    done: bool,
}

impl<'a> JointEnumerator<'a> {
    pub fn new(net: &'a BayesianNetwork, evidence: &Evidence) -> Result<Self, OracleError> {
        let space: f64 = net.variables().iter().map(|v| v.cardinality() as f64).product();
        if space > ENUMERATION_LIMIT {
            return Err(OracleError::StateSpace(space));
        }
        let mut assignment = vec![0; net.len()];
        for (v, s) in evidence.iter() {
            if v >= net.len() {
                return Err(EvidenceError::UnknownVariable(v).into());
            }
            let card = net.variable(v).cardinality();
            if s >= card {
                return Err(EvidenceError::StateOutOfRange { var: v, state: s, card }.into());
            }
            assignment[v] = s;
        }
        let order = net.topological_order().expect("validated networks are acyclic");
        let free = order.iter().copied().filter(|&v| !evidence.contains(v)).collect();
        Ok(JointEnumerator {
            net,
            order,
            free,
            assignment,
            started: false,
            done: net.variables().iter().any(|v| v.cardinality() == 0),
        })
    }

    /// Advances to the next assignment; `None` once all are visited.
    pub fn next_assignment(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if self.started {
            let mut k = self.free.len();
            loop {
                if k == 0 {
                    self.done = true;
                    return None;
                }
                k -= 1;
                let v = self.free[k];
                self.assignment[v] += 1;
                if self.assignment[v] < self.net.variable(v).cardinality() {
                    break;
                }
                self.assignment[v] = 0;
            }
        }
        self.started = true;
        Some(&self.assignment)
    }

    /// ∏ CPT entries of the current assignment.
    pub fn joint(&self) -> f64 {
        let mut p = 1.0;
        for &v in &self.order {
            p *= self.net.conditional(v, &self.assignment);
            if p == 0.0 {
                break;
            }
        }
        p
    }
}

/// P(evidence).
pub fn evidence_probability(net: &BayesianNetwork, evidence: &Evidence) -> Result<f64, OracleError> {
    let mut it = JointEnumerator::new(net, evidence)?;
    let mut total = KahanSum::default();
    while it.next_assignment().is_some() {
        total.add(it.joint());
    }
    Ok(total.value())
}

/// P(var | evidence).
pub fn enumerate_posterior(net: &BayesianNetwork, evidence: &Evidence, var: VarId) -> Result<Vec<f64>, OracleError> {
    if var >= net.len() {
        return Err(EvidenceError::UnknownVariable(var).into());
    }
    let card = net.variable(var).cardinality();
    let mut it = JointEnumerator::new(net, evidence)?;
    let mut acc = vec![KahanSum::default(); card];
    while let Some(a) = it.next_assignment() {
        let s = a[var];
        acc[s].add(it.joint());
    }
    normalize(acc)
}

/// P(v | evidence) for every variable `v`, from a single pass over the joint.
/// Observed variables get their degenerate distribution.
pub fn enumerate_all_posteriors(net: &BayesianNetwork, evidence: &Evidence) -> Result<Vec<Vec<f64>>, OracleError> {
    let mut it = JointEnumerator::new(net, evidence)?;
    let mut acc: Vec<Vec<KahanSum>> = net
        .variables()
        .iter()
        .map(|v| vec![KahanSum::default(); v.cardinality()])
        .collect();
    while it.next_assignment().is_some() {
        let p = it.joint();
        if p == 0.0 {
            continue;
        }
        for (v, a) in acc.iter_mut().enumerate() {
            a[it.assignment[v]].add(p);
        }
    }
    acc.into_iter().map(normalize).collect()
}

fn normalize(acc: Vec<KahanSum>) -> Result<Vec<f64>, OracleError> {
    let values: Vec<f64> = acc.iter().map(KahanSum::value).collect();
    let mut total = KahanSum::default();
    values.iter().for_each(|&x| total.add(x));
    let total = total.value();
    if !(total > 0.0) {
        return Err(OracleError::ZeroProbabilityEvidence);
    }
    Ok(values.into_iter().map(|x| x / total).collect())
}

/// A probability vector drawn from the flat Dirichlet.
fn dirichlet_row<R: Rng>(rng: &mut R, card: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..card).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.into_iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / card as f64; card]
    }
}

fn binary_states(card: usize) -> Vec<String> {
    (0..card).map(|s| format!("s{s}")).collect()
}

/// Random DAG over a shuffled variable order. Each earlier variable becomes
/// a parent with probability `edge_prob`, up to `max_parents` per child.
/// Cardinalities are uniform on `2..=max_card`; CPT rows are flat-Dirichlet.
pub fn random_network(n_vars: usize, max_card: usize, max_parents: usize, edge_prob: f64, seed: u64) -> BayesianNetwork {
    assert!(n_vars <= 20, "random networks are limited to 20 variables");
    let mut rng = seeded_rng(seed);
    let max_card = max_card.max(2);
    let cards: Vec<usize> = (0..n_vars).map(|_| rng.random_range(2..=max_card)).collect();
    let mut order: Vec<VarId> = (0..n_vars).collect();
    order.shuffle(&mut rng);
    let mut parents: Vec<Vec<VarId>> = vec![Vec::new(); n_vars];
    for (i, &child) in order.iter().enumerate() {
        let mut earlier = order[..i].to_vec();
        earlier.shuffle(&mut rng);
        for p in earlier {
            if parents[child].len() >= max_parents {
                break;
            }
            if rng.random_bool(edge_prob.clamp(0.0, 1.0)) {
                parents[child].push(p);
            }
        }
        parents[child].sort_unstable();
    }
    let variables = (0..n_vars)
        .map(|v| Variable::new(v, format!("X{v}"), binary_states(cards[v])))
        .collect();
    let cpts = (0..n_vars)
        .map(|v| {
            let rows: usize = parents[v].iter().map(|&p| cards[p]).product();
            let probabilities = (0..rows).flat_map(|_| dirichlet_row(&mut rng, cards[v])).collect();
            Cpt::new(v, parents[v].clone(), probabilities)
        })
        .collect();
    BayesianNetwork::try_new(format!("random-{seed}"), variables, cpts).expect("generated networks are valid")
}

/// `rows × cols` lattice where each cell depends on its upper and left
/// neighbors. Cardinality `card` everywhere; rows are flat-Dirichlet.
pub fn grid_network(rows: usize, cols: usize, card: usize, seed: u64) -> BayesianNetwork {
    let mut rng = seeded_rng(seed);
    let id = |r: usize, c: usize| r * cols + c;
    let mut variables = Vec::with_capacity(rows * cols);
    let mut cpts = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = id(r, c);
            let mut parents = Vec::new();
            if r > 0 {
                parents.push(id(r - 1, c));
            }
            if c > 0 {
                parents.push(id(r, c - 1));
            }
            parents.sort_unstable();
            variables.push(Variable::new(v, format!("G{r}_{c}"), binary_states(card)));
            let n_rows = card.pow(parents.len() as u32);
            let probabilities = (0..n_rows).flat_map(|_| dirichlet_row(&mut rng, card)).collect();
            cpts.push(Cpt::new(v, parents, probabilities));
        }
    }
    BayesianNetwork::try_new(format!("grid-{rows}x{cols}"), variables, cpts).expect("generated networks are valid")
}
