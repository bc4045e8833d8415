//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test -p jtinfer --test acceptance -- 2 5` runs only criteria 2 and 5.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use jtinfer::bench::{run_benchmark, run_row, BenchmarkConfig, MonotonicClock};
use jtinfer::inference::io::write_case;
use jtinfer::inference::{build_layer_tasks, check_partition, layer_work, InferenceEngine, Phase, StrategyRegistry};
use jtinfer::jtree::{build_tree, compile, compute_layers, select_root, JunctionTree};
use jtinfer::network::{sample_evidence, seeded_rng, BayesianNetwork, Evidence};
use jtinfer::oracle::{enumerate_all_posteriors, grid_network, random_network};
use rand::seq::SliceRandom;
use rand::Rng;

const MODES: [&str; 4] = ["seq", "inter", "intra", "hybrid"];

enum Verdict {
    Pass(String),
    Fail(String),
    /// Failed, but only because the machine lacks the cores the criterion
    /// measures; reported as FAIL without failing the run.
    FailHardware(String),
}

fn engine(tree: &Arc<JunctionTree>, mode: &str, threads: usize, chunk: usize) -> InferenceEngine {
    let strategy = StrategyRegistry::builtin().create(mode).unwrap();
    InferenceEngine::new(Arc::clone(tree), strategy, threads, chunk).unwrap()
}

fn oracle_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut rng = seeded_rng(0xACCE_0001);
    for i in 0..500u64 {
        let n = rng.random_range(2..=12);
        let net = random_network(n, 3, 3, 0.5, i);
        let ev = sample_evidence(&net, 0.2, i);
        let expect = match enumerate_all_posteriors(&net, &ev) {
            Ok(e) => e,
            Err(e) => return Verdict::Fail(format!("network {i}: oracle failed: {e}")),
        };
        let tree = Arc::new(compile(&net).unwrap());
        for mode in MODES {
            for (t, chunk) in [(1, 1024), (4, 5)] {
                let got = match engine(&tree, mode, t, chunk).infer(&ev) {
                    Ok(g) => g,
                    Err(e) => return Verdict::Fail(format!("network {i} {mode} t={t}: {e}")),
                };
                if got.len() != n - ev.len() {
                    return Verdict::Fail(format!("network {i} {mode}: {} posteriors", got.len()));
                }
                for (v, q) in &got {
                    for (a, b) in q.posterior.iter().zip(&expect[*v]) {
                        worst = worst.max((a - b).abs());
                        compared += 1;
                    }
                }
            }
        }
    }
    let detail = format!("500 networks, {compared} probabilities, max |diff| {worst:.3e} (tol 1e-9)");
    if worst <= 1e-9 {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn csv_for(net: &BayesianNetwork, e: &InferenceEngine, cases: &[Evidence]) -> Vec<u8> {
    let mut out = b"case_id,variable,state,posterior\n".to_vec();
    let mut state = e.new_state();
    for (i, ev) in cases.iter().enumerate() {
        write_case(&mut out, net, i, &e.run_case(&mut state, ev)).unwrap();
    }
    out
}

fn engine_determinism() -> Verdict {
    let nets = [common::load("hailfinder"), grid_network(10, 20, 2, 7)];
    let mut runs = 0;
    for net in &nets {
        let tree = Arc::new(compile(net).unwrap());
        let cases: Vec<Evidence> = (0..100).map(|s| sample_evidence(net, 0.2, 1000 + s)).collect();
        let reference = csv_for(net, &engine(&tree, "seq", 1, 1024), &cases);
        for mode in MODES {
            for t in [1, 2, 4, 8] {
                runs += 1;
                if csv_for(net, &engine(&tree, mode, t, 1024), &cases) != reference {
                    return Verdict::Fail(format!("{}: {mode} t={t} differs from seq", net.name));
                }
            }
        }
    }
    Verdict::Pass(format!(
        "hailfinder + {}: {runs} (mode, t) runs x 100 cases byte-identical",
        nets[1].name
    ))
}

fn calibration() -> Verdict {
    let mut worst_sep = 0.0f64;
    let mut worst_mass = 0.0f64;
    for name in common::BUNDLED {
        let net = common::load(name);
        let tree = Arc::new(compile(&net).unwrap());
        let e = engine(&tree, "hybrid", 4, 1024);
        let mut st = e.new_state();
        if let Err(err) = e.run_case(&mut st, &Evidence::new()) {
            return Verdict::Fail(format!("{name}: {err}"));
        }
        for c in 0..tree.cliques.len() {
            worst_mass = worst_mass.max((st.clique_mass(c) - 1.0).abs());
        }
        for s in &tree.separators {
            let vars = s.domain.vars();
            let (a, b) = s.cliques;
            let ma = e.clique_table(&st, a).marginalize(vars).unwrap();
            let mb = e.clique_table(&st, b).marginalize(vars).unwrap();
            let (sa, sb) = (st.clique_log_scale(a).exp(), st.clique_log_scale(b).exp());
            for (x, y) in ma.values().iter().zip(mb.values()) {
                let (x, y) = (x * sa, y * sb);
                let scale = x.abs().max(y.abs());
                if scale > 0.0 {
                    worst_sep = worst_sep.max((x - y).abs() / scale);
                }
            }
        }
    }
    let detail = format!(
        "{} networks, max separator rel. diff {worst_sep:.3e}, max |mass-1| {worst_mass:.3e} (tol 1e-9)",
        common::BUNDLED.len()
    );
    if worst_sep <= 1e-9 && worst_mass <= 1e-9 {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn check_tree(net: &BayesianNetwork, tree: &JunctionTree) -> Result<(), String> {
    tree.check_structure(net).map_err(|e| e.to_string())?;
    let reg = StrategyRegistry::builtin();
    for name in reg.names() {
        let s = reg.create(&name).unwrap();
        for chunk in [1, 16, 1024] {
            for phase in [Phase::Collect, Phase::Distribute] {
                for lt in build_layer_tasks(tree, &tree.schedule, s.as_ref(), chunk, phase) {
                    let items = layer_work(tree, &tree.schedule, lt.layer, phase);
                    check_partition(&items, &lt.groups).map_err(|e| format!("{name}/{chunk}: {e}"))?;
                }
            }
        }
    }
    Ok(())
}

fn structural_invariants() -> Verdict {
    for name in common::BUNDLED {
        let net = common::load(name);
        let tree = compile(&net).unwrap();
        if let Err(e) = check_tree(&net, &tree) {
            return Verdict::Fail(format!("{name}: {e}"));
        }
    }
    let mut rng = seeded_rng(0xACCE_0004);
    for i in 0..1000u64 {
        let n = rng.random_range(1..=20);
        let k = rng.random_range(0..=4);
        let p = rng.random_range(0.0..0.7);
        let net = random_network(n, 4, k, p, i);
        let tree = compile(&net).unwrap();
        if let Err(e) = check_tree(&net, &tree) {
            return Verdict::Fail(format!("random network {i}: {e}"));
        }
    }
    Verdict::Pass(format!(
        "{} bundled networks + 1000 random networks: RIP, families, separators, task coverage",
        common::BUNDLED.len()
    ))
}

/// Random tree topology on `k` nodes; shapes vary with `kind`.
fn random_topology<R: Rng>(rng: &mut R, k: usize, kind: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(k.saturating_sub(1));
    match kind {
        // random recursive tree
        0 => (1..k).for_each(|i| edges.push((rng.random_range(0..i), i))),
        // path with short random branches
        1 => (1..k).for_each(|i| edges.push((if rng.random_bool(0.8) { i - 1 } else { i.saturating_sub(3) }, i))),
        // star-heavy
        2 => (1..k).for_each(|i| edges.push((rng.random_range(0..i.min(3)), i))),
        // uniform labelled tree from a Prüfer sequence
        _ => {
            if k >= 2 {
                let seq: Vec<usize> = (0..k - 2).map(|_| rng.random_range(0..k)).collect();
                let mut degree = vec![1usize; k];
                seq.iter().for_each(|&v| degree[v] += 1);
                let mut leaves: BTreeSet<usize> = (0..k).filter(|&v| degree[v] == 1).collect();
                for &v in &seq {
                    let leaf = *leaves.iter().next().unwrap();
                    leaves.remove(&leaf);
                    edges.push((leaf, v));
                    degree[v] -= 1;
                    if degree[v] == 1 {
                        leaves.insert(v);
                    }
                }
                let last: Vec<usize> = leaves.into_iter().collect();
                edges.push((last[0], last[1]));
            }
        }
    }
    edges
}

fn root_optimality() -> Verdict {
    let mut rng = seeded_rng(0xACCE_0005);
    let mut sizes = 0;
    for trial in 0..200 {
        let k = rng.random_range(1..=200);
        let edges = random_topology(&mut rng, k, trial % 4);
        let mut label: Vec<usize> = (0..k).collect();
        label.shuffle(&mut rng);
        // one private variable per clique and one shared variable per edge,
        // all of cardinality 1 so tables stay tiny at any degree
        let mut scopes: Vec<Vec<usize>> = (0..k).map(|c| vec![c]).collect();
        for (e, &(a, b)) in edges.iter().enumerate() {
            scopes[label[a]].push(k + e);
            scopes[label[b]].push(k + e);
        }
        let cards = vec![1; k + edges.len()];
        let tree = build_tree(&scopes, &cards).unwrap();
        if tree.separators.len() != edges.len() {
            return Verdict::Fail(format!("trial {trial}: spanning tree lost the topology"));
        }
        let chosen = compute_layers(&tree, &select_root(&tree)).len();
        let best = (0..k).map(|c| compute_layers(&tree, &[c]).len()).min().unwrap();
        if chosen != best || tree.schedule.len() != best {
            return Verdict::Fail(format!("trial {trial} ({k} cliques): {chosen} layers, optimum {best}"));
        }
        sizes += k;
    }
    Verdict::Pass(format!("200 random trees ({sizes} cliques total): chosen root always optimal"))
}

fn scaling() -> Verdict {
    let net = common::load("water");
    let tree = Arc::new(compile(&net).unwrap());
    let entries = tree.total_clique_entries() + tree.total_separator_entries();
    let cases: Vec<Evidence> = (0..50).map(|s| sample_evidence(&net, 0.2, 6000 + s)).collect();
    let reg = StrategyRegistry::builtin();
    let clock = MonotonicClock::default();
    let median_total = |mode: &str, t: usize| -> f64 {
        let mut runs: Vec<f64> = (0..5)
            .map(|_| run_row(&tree, &reg, mode, t, 1024, &cases, &clock).unwrap().total_s)
            .collect();
        runs.sort_by(f64::total_cmp);
        runs[2]
    };
    let threads = [1, 2, 4, 8];
    let best = |mode: &str| -> (f64, Vec<f64>) {
        let times: Vec<f64> = threads.iter().map(|&t| median_total(mode, t)).collect();
        (times.iter().copied().fold(f64::INFINITY, f64::min), times)
    };
    let (hy_best, hy) = best("hybrid");
    let (inter_best, _) = best("inter");
    let (intra_best, _) = best("intra");
    let speedup = hy[0] / hy[3];
    let ratio = hy_best / inter_best.min(intra_best);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "water ({entries} entries), {cores} hardware thread(s): hybrid t=1 {:.3}s, t=8 {:.3}s, speedup {speedup:.2}x (need >= 2.0); \
         hybrid best {hy_best:.3}s vs best inter/intra {:.3}s, ratio {ratio:.3} (need <= 1.10)",
        hy[0],
        hy[3],
        inter_best.min(intra_best)
    );
    if entries < 1_000_000 {
        return Verdict::Fail(format!("{detail}; network too small"));
    }
    if speedup >= 2.0 && ratio <= 1.10 {
        Verdict::Pass(detail)
    } else if cores < 8 && ratio <= 1.10 {
        Verdict::FailHardware(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn benchmark_protocol() -> Verdict {
    let net = common::load("hailfinder");
    let tree = Arc::new(compile(&net).unwrap());
    let cfg = BenchmarkConfig {
        cases: 2000,
        evidence_ratio: 0.2,
        ..Default::default()
    };
    let report = match run_benchmark(&net, tree, &StrategyRegistry::builtin(), &cfg, &MonotonicClock::default()) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let counts: BTreeSet<usize> = report.evidence_counts.iter().copied().collect();
    let detail = format!(
        "{} cases, evidence sizes {counts:?}, {} rows, checksum {:016x}, all equal: {}",
        report.evidence_counts.len(),
        report.rows.len(),
        report.rows[0].checksum,
        report.checksums_agree()
    );
    if report.evidence_counts.len() == 2000
        && counts == BTreeSet::from([11])
        && report.checksums_agree()
        && report.rows.iter().all(|r| r.cases == 2000)
    {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Verdict); 7] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "engine determinism", engine_determinism),
        (3, "calibration", calibration),
        (4, "structural invariants", structural_invariants),
        (5, "root selection optimality", root_optimality),
        (6, "scaling", scaling),
        (7, "benchmark protocol", benchmark_protocol),
    ];
    let selected: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = false;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
            Verdict::FailHardware(d) => ("FAIL", format!("{d} [insufficient hardware parallelism]")),
        };
        println!("criterion {n} {name}: {tag} ({secs:.1}s) {detail}");
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
