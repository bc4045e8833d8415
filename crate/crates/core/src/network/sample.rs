use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BayesianNetwork, Evidence};

/// The generator behind every seeded draw in this crate: ChaCha8 seeded
/// through `SeedableRng::seed_from_u64`.
pub type Rng64 = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws one full assignment in topological order.
pub fn forward_sample<R: Rng + ?Sized>(net: &BayesianNetwork, rng: &mut R) -> Vec<usize> {
    let order = net
        .topological_order()
        .expect("forward sampling requires a DAG");
    let mut assignment = vec![0usize; net.len()];
    for v in order {
        let card = net.variable(v).cardinality();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_positive = 0;
        for s in 0..card {
            assignment[v] = s;
            let p = net.conditional(v, &assignment);
            if p > 0.0 {
                last_positive = s;
                acc += p;
                if u < acc {
                    chosen = Some(s);
                    break;
                }
            }
        }
        // rows summing to slightly below 1 can leave u uncovered
        assignment[v] = chosen.unwrap_or(last_positive);
    }
    assignment
}

/// Observes `floor(ratio · n)` distinct variables chosen uniformly, with
/// values taken from a single forward sample so the evidence always has
/// positive probability.
pub fn sample_evidence(net: &BayesianNetwork, ratio: f64, seed: u64) -> Evidence {
    let ratio = ratio.clamp(0.0, 1.0);
    let n = net.len();
    let k = ((ratio * n as f64).floor() as usize).min(n);
    let mut rng = seeded_rng(seed);
    let chosen = index::sample(&mut rng, n, k);
    let full = forward_sample(net, &mut rng);
    chosen.into_iter().map(|v| (v, full[v])).collect()
}
