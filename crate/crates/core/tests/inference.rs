use std::sync::Arc;

use jtinfer::inference::{EngineConfig, InferenceEngine, InferenceError, Stage, StrategyRegistry};
use jtinfer::jtree::compile;
use jtinfer::network::{parse_bif, sample_evidence, BayesianNetwork, Cpt, Evidence, Variable};
use jtinfer::oracle::{enumerate_all_posteriors, random_network, OracleError};
use proptest::prelude::*;

const MODES: [&str; 4] = ["seq", "inter", "intra", "hybrid"];

fn engine(net: &BayesianNetwork, mode: &str, threads: usize, chunk: usize) -> InferenceEngine {
    let tree = Arc::new(compile(net).unwrap());
    let cfg = EngineConfig::new(mode, threads).with_chunk(chunk);
    InferenceEngine::from_config(tree, &StrategyRegistry::builtin(), &cfg).unwrap()
}

fn states(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("s{s}")).collect()
}

fn chain3() -> BayesianNetwork {
    BayesianNetwork::try_new(
        "chain3",
        vec![
            Variable::new(0, "A", states(2)),
            Variable::new(1, "B", states(2)),
            Variable::new(2, "C", states(2)),
        ],
        vec![
            Cpt::new(0, vec![], vec![0.7, 0.3]),
            Cpt::new(1, vec![0], vec![0.8, 0.2, 0.1, 0.9]),
            Cpt::new(2, vec![1], vec![0.6, 0.4, 0.25, 0.75]),
        ],
    )
    .unwrap()
}

fn assert_matches_oracle(net: &BayesianNetwork, ev: &Evidence, e: &InferenceEngine) {
    let expect = enumerate_all_posteriors(net, ev).unwrap();
    let got = e.infer(ev).unwrap();
    assert_eq!(got.len(), net.len() - ev.len());
    for (v, q) in &got {
        for (a, b) in q.posterior.iter().zip(&expect[*v]) {
            assert!((a - b).abs() < 1e-9, "var {v}: {:?} vs {:?}", q.posterior, expect[*v]);
        }
    }
}

#[test]
fn chain_with_evidence_on_one_end() {
    let net = chain3();
    for mode in MODES {
        let e = engine(&net, mode, 2, 2);
        assert_matches_oracle(&net, &Evidence::new(), &e);
        for s in 0..2 {
            assert_matches_oracle(&net, &[(2, s)].into_iter().collect(), &e);
        }
    }
}

#[test]
fn prior_of_chain_root() {
    let net = chain3();
    let post = engine(&net, "seq", 1, 1024).infer(&Evidence::new()).unwrap();
    assert!((post[&0].posterior[0] - 0.7).abs() < 1e-12);
    assert!((post[&0].posterior[1] - 0.3).abs() < 1e-12);
}

#[test]
fn single_clique_tree() {
    let net = BayesianNetwork::try_new(
        "one",
        vec![Variable::new(0, "A", states(2))],
        vec![Cpt::new(0, vec![], vec![0.4, 0.6])],
    )
    .unwrap();
    let e = engine(&net, "hybrid", 4, 1);
    assert_eq!(e.tree().cliques.len(), 1);
    assert!(e.collect_plan().is_empty() && e.distribute_plan().is_empty());
    assert_eq!(e.infer(&Evidence::new()).unwrap()[&0].posterior, vec![0.4, 0.6]);
}

#[test]
fn zero_probability_evidence_is_an_outcome() {
    let net = BayesianNetwork::try_new(
        "det",
        vec![Variable::new(0, "A", states(2)), Variable::new(1, "B", states(2))],
        vec![
            Cpt::new(0, vec![], vec![1.0, 0.0]),
            Cpt::new(1, vec![0], vec![1.0, 0.0, 0.0, 1.0]),
        ],
    )
    .unwrap();
    let ev: Evidence = [(1, 1)].into_iter().collect();
    assert_eq!(enumerate_all_posteriors(&net, &ev), Err(OracleError::ZeroProbabilityEvidence));
    for mode in MODES {
        let err = engine(&net, mode, 2, 1).infer(&ev).unwrap_err();
        assert!(err.is_zero_probability(), "{mode}: {err}");
    }
}

#[test]
fn evidence_on_disconnected_components() {
    let net = random_network(8, 3, 2, 0.15, 42);
    let tree = compile(&net).unwrap();
    assert!(tree.components().len() > 1);
    let ev = sample_evidence(&net, 0.4, 1);
    for mode in MODES {
        assert_matches_oracle(&net, &ev, &engine(&net, mode, 3, 3));
    }
}

#[test]
fn stage_order_is_enforced() {
    let net = chain3();
    let e = engine(&net, "inter", 2, 16);
    let mut st = e.new_state();
    assert!(matches!(e.distribute(&mut st), Err(InferenceError::Stage(_))));
    assert!(matches!(e.query_marginal(&st, 0), Err(InferenceError::Stage(_))));
    e.load_evidence(&mut st, &Evidence::new()).unwrap();
    assert!(matches!(e.load_evidence(&mut st, &Evidence::new()), Err(InferenceError::Stage(_))));
    e.collect(&mut st).unwrap();
    e.distribute(&mut st).unwrap();
    assert_eq!(st.stage(), Stage::Distributed);
    e.reset(&mut st);
    assert_eq!(st.stage(), Stage::Fresh);
}

#[test]
fn reduced_clique_has_zeros_where_inconsistent() {
    let net = chain3();
    let e = engine(&net, "hybrid", 2, 1);
    let mut st = e.new_state();
    e.load_evidence(&mut st, &[(1, 0)].into_iter().collect()).unwrap();
    let c = e.home_clique(1);
    let t = e.clique_table(&st, c);
    for i in 0..t.len() {
        let a = t.assignment_of(i).unwrap();
        if a[&1] != 0 {
            assert_eq!(t.values()[i], 0.0);
        }
    }
}

#[test]
fn observing_a_variable_excludes_it_from_results() {
    let net = chain3();
    let ev: Evidence = [(0, 1)].into_iter().collect();
    let post = engine(&net, "seq", 1, 8).infer(&ev).unwrap();
    assert!(!post.contains_key(&0));
    assert_eq!(post.len(), 2);
}

#[test]
fn bundled_asia_matches_oracle() {
    let net = parse_bif(&std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../networks/asia.bif")).unwrap()).unwrap();
    for seed in 0..20 {
        let ev = sample_evidence(&net, 0.25, seed);
        for mode in MODES {
            assert_matches_oracle(&net, &ev, &engine(&net, mode, 2, 2));
        }
    }
}

#[test]
fn tiny_values_are_rescaled() {
    // a long chain of near-deterministic links under evidence drives clique
    // values far below the rescale threshold
    let n = 60;
    let vars = (0..n).map(|i| Variable::new(i, format!("V{i}"), states(2))).collect();
    let mut cpts = vec![Cpt::new(0, vec![], vec![0.5, 0.5])];
    for i in 1..n {
        cpts.push(Cpt::new(i, vec![i - 1], vec![1e-6, 1.0 - 1e-6, 1.0 - 1e-6, 1e-6]));
    }
    let net = BayesianNetwork::try_new("flip", vars, cpts).unwrap();
    let ev: Evidence = (0..n).filter(|&v| v != 30).map(|v| (v, 0)).collect();
    let e = engine(&net, "hybrid", 2, 1);
    let mut st = e.new_state();
    let post = e.run_case(&mut st, &ev).unwrap();
    assert!((0..e.tree().cliques.len()).any(|c| st.clique_log_scale(c) < -100.0));
    let p = &post[&30].posterior;
    let stay = 1e-6f64 * 1e-6;
    let flip = (1.0 - 1e-6f64) * (1.0 - 1e-6);
    assert!((p[0] - stay / (stay + flip)).abs() < 1e-15, "{p:?}");
    assert!(p.iter().all(|x| x.is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_networks_match_oracle(seed in 0u64..10_000, n in 1usize..10, ratio in 0.0f64..0.6, chunk in 1usize..40) {
        let net = random_network(n, 3, 3, 0.5, seed);
        let ev = sample_evidence(&net, ratio, seed);
        let expect = enumerate_all_posteriors(&net, &ev).unwrap();
        for mode in MODES {
            let got = engine(&net, mode, 3, chunk).infer(&ev).unwrap();
            for (v, q) in &got {
                let s: f64 = q.posterior.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                for (a, b) in q.posterior.iter().zip(&expect[*v]) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn modes_and_threads_are_bit_identical(seed in 0u64..10_000, chunk in 1usize..64) {
        let net = random_network(12, 3, 3, 0.5, seed);
        let ev = sample_evidence(&net, 0.2, seed);
        let reference = engine(&net, "seq", 1, chunk).infer(&ev).unwrap();
        for mode in MODES {
            for t in [1, 2, 4] {
                let got = engine(&net, mode, t, chunk).infer(&ev).unwrap();
                prop_assert_eq!(&got, &reference);
            }
        }
    }
}
