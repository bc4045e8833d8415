//! Benchmark harness: seeded cases run under every (strategy, thread
//! count) pair, with only the per-case inference timed.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::inference::io::{format_probability, ZERO_PROBABILITY_FLAG};
use crate::inference::{InferenceEngine, InferenceError, Posteriors, StrategyRegistry, DEFAULT_CHUNK};
use crate::jtree::JunctionTree;
use crate::network::{sample_evidence, seeded_rng, BayesianNetwork, Evidence};

pub const DEFAULT_THREADS: [usize; 6] = [1, 2, 4, 8, 16, 32];
pub const DEFAULT_MODES: [&str; 4] = ["seq", "inter", "intra", "hybrid"];

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub cases: usize,
    pub evidence_ratio: f64,
    pub threads: Vec<usize>,
    pub modes: Vec<String>,
    pub seed: u64,
    pub chunk: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            cases: 2000,
            evidence_ratio: 0.2,
            threads: DEFAULT_THREADS.to_vec(),
            modes: DEFAULT_MODES.iter().map(|m| m.to_string()).collect(),
            seed: 0,
            chunk: DEFAULT_CHUNK,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.cases == 0 {
            return Err(BenchError::Config("at least one case is required".into()));
        }
        if !(0.0..=1.0).contains(&self.evidence_ratio) {
            return Err(BenchError::Config(format!(
                "evidence ratio {} is outside [0, 1]",
                self.evidence_ratio
            )));
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return Err(BenchError::Config("thread counts must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(BenchError::Config("no modes selected".into()));
        }
        if self.chunk == 0 {
            return Err(BenchError::Config("chunk must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("checksum mismatch: {mode} at t={threads} gave {found:016x}, expected {expected:016x}")]
    ChecksumMismatch {
        mode: String,
        threads: usize,
        expected: u64,
        found: u64,
        report: Box<BenchmarkReport>,
    },
}

/// Source of timestamps around each case.
pub trait Clock {
    fn now(&self) -> Duration;
}

#[derive(Debug)]
pub struct MonotonicClock(Instant);

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock(Instant::now())
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub mode: String,
    pub threads: usize,
    pub cases: usize,
    pub total_s: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    /// Sequential total time over this row's; `None` without a `seq` row.
    pub speedup: Option<f64>,
    pub checksum: u64,
    pub zero_probability_cases: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub network: String,
    pub config: BenchmarkConfig,
    pub evidence_counts: Vec<usize>,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    pub const CSV_HEADER: &'static str =
        "mode,threads,cases,total_s,mean_ms,median_ms,p95_ms,speedup,checksum,zero_probability_cases";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let speedup = r.speedup.map(|s| format!("{s:.4}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:016x},{}",
                r.mode, r.threads, r.cases, r.total_s, r.mean_ms, r.median_ms, r.p95_ms, speedup, r.checksum,
                r.zero_probability_cases
            );
        }
        out
    }

    pub fn checksums_agree(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].checksum == w[1].checksum)
    }
}

/// `n` evidence sets, each observing `floor(ratio · n_vars)` variables.
/// Case `i` is seeded by the `i`-th draw of a generator seeded with `seed`.
pub fn generate_cases(net: &BayesianNetwork, n: usize, ratio: f64, seed: u64) -> Vec<Evidence> {
    use rand::RngCore;
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| sample_evidence(net, ratio, rng.next_u64())).collect()
}

fn hash_line(line: &str) -> u64 {
    let digest = Sha256::digest(line.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Contribution of one case to the order-independent checksum: a wrapping
/// sum of hashes of `case,variable,state,posterior` lines, posteriors at
/// twelve significant digits.
pub fn case_checksum(case: usize, outcome: &Result<Posteriors, InferenceError>) -> Result<u64, InferenceError> {
    match outcome {
        Ok(posteriors) => Ok(posteriors.values().fold(0u64, |acc, q| {
            q.posterior.iter().enumerate().fold(acc, |acc, (s, &p)| {
                acc.wrapping_add(hash_line(&format!("{case},{},{s},{}", q.variable, format_probability(p))))
            })
        })),
        Err(InferenceError::ZeroProbabilityEvidence) => Ok(hash_line(&format!("{case},,,{ZERO_PROBABILITY_FLAG}"))),
        Err(e) => Err(InferenceError::Fault(e.to_string())),
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

/// Runs one (mode, threads) configuration over `cases` on `clock`. One
/// untimed warm-up case precedes the timed loop.
pub fn run_row(
    tree: &Arc<JunctionTree>,
    registry: &StrategyRegistry,
    mode: &str,
    threads: usize,
    chunk: usize,
    cases: &[Evidence],
    clock: &dyn Clock,
) -> Result<BenchmarkRow, BenchError> {
    let strategy = registry.create(mode).map_err(InferenceError::from)?;
    let engine = InferenceEngine::new(Arc::clone(tree), strategy, threads, chunk)?;
    let mut state = engine.new_state();
    if let Some(first) = cases.first() {
        let _ = engine.run_case(&mut state, first);
    }
    let mut times_ms = Vec::with_capacity(cases.len());
    let mut checksum = 0u64;
    let mut zero = 0;
    for (i, ev) in cases.iter().enumerate() {
        let start = clock.now();
        let outcome = engine.run_case(&mut state, ev);
        let elapsed = clock.now().saturating_sub(start);
        times_ms.push(elapsed.as_secs_f64() * 1e3);
        if matches!(outcome, Err(InferenceError::ZeroProbabilityEvidence)) {
            zero += 1;
        }
        checksum = checksum.wrapping_add(case_checksum(i, &outcome)?);
    }
    let total_s = times_ms.iter().sum::<f64>() / 1e3;
    let mean_ms = if times_ms.is_empty() { 0.0 } else { total_s * 1e3 / times_ms.len() as f64 };
    times_ms.sort_by(f64::total_cmp);
    Ok(BenchmarkRow {
        mode: engine.executor().strategy().name().to_string(),
        threads: engine.executor().threads(),
        cases: cases.len(),
        total_s,
        mean_ms,
        median_ms: median(&times_ms),
        p95_ms: percentile(&times_ms, 0.95),
        speedup: None,
        checksum,
        zero_probability_cases: zero,
    })
}

/// Full sweep over `config.modes × config.threads`. Sequential strategies
/// run once, at one thread. The tree is shared across rows and its
/// construction is not timed.
pub fn run_benchmark(
    net: &BayesianNetwork,
    tree: Arc<JunctionTree>,
    registry: &StrategyRegistry,
    config: &BenchmarkConfig,
    clock: &dyn Clock,
) -> Result<BenchmarkReport, BenchError> {
    config.validate()?;
    let cases = generate_cases(net, config.cases, config.evidence_ratio, config.seed);
    let mut rows: Vec<BenchmarkRow> = Vec::new();
    for mode in &config.modes {
        let sequential = registry.create(mode).map_err(InferenceError::from)?.is_sequential();
        let threads: Vec<usize> = if sequential { vec![1] } else { config.threads.clone() };
        for t in threads {
            rows.push(run_row(&tree, registry, mode, t, config.chunk, &cases, clock)?);
        }
    }
    let baseline = rows.iter().find(|r| r.mode == "seq").map(|r| r.total_s);
    for r in &mut rows {
        r.speedup = baseline.filter(|_| r.total_s > 0.0).map(|b| b / r.total_s);
    }
    let report = BenchmarkReport {
        network: net.name.clone(),
        config: config.clone(),
        evidence_counts: cases.iter().map(Evidence::len).collect(),
        rows,
    };
    if let Some(bad) = report.rows.iter().find(|r| r.checksum != report.rows[0].checksum) {
        return Err(BenchError::ChecksumMismatch {
            mode: bad.mode.clone(),
            threads: bad.threads,
            expected: report.rows[0].checksum,
            found: bad.checksum,
            report: Box::new(report.clone()),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::jtree::compile;
    use crate::oracle::random_network;

    /// Advances by one millisecond per reading.
    struct StepClock(Cell<u64>);

    impl Clock for StepClock {
        fn now(&self) -> Duration {
            let t = self.0.get();
            self.0.set(t + 1);
            Duration::from_millis(t)
        }
    }

    fn small() -> (BayesianNetwork, Arc<JunctionTree>) {
        let net = random_network(10, 3, 2, 0.4, 3);
        let tree = Arc::new(compile(&net).unwrap());
        (net, tree)
    }

    #[test]
    fn only_the_case_loop_is_timed() {
        let (net, tree) = small();
        let cfg = BenchmarkConfig {
            cases: 7,
            threads: vec![1, 2],
            ..Default::default()
        };
        let clock = StepClock(Cell::new(0));
        let report = run_benchmark(&net, tree, &StrategyRegistry::builtin(), &cfg, &clock).unwrap();
        // seq once, three others twice: two readings per timed case
        assert_eq!(report.rows.len(), 7);
        assert_eq!(clock.0.get(), 7 * 7 * 2);
        for r in &report.rows {
            assert!((r.total_s - 0.007).abs() < 1e-12);
            assert_eq!(r.median_ms, 1.0);
            assert_eq!(r.speedup, Some(1.0));
        }
    }

    #[test]
    fn seeded_sweeps_repeat() {
        let (net, tree) = small();
        let cfg = BenchmarkConfig {
            cases: 20,
            threads: vec![1, 3],
            seed: 11,
            chunk: 4,
            ..Default::default()
        };
        let reg = StrategyRegistry::builtin();
        let a = run_benchmark(&net, Arc::clone(&tree), &reg, &cfg, &MonotonicClock::default()).unwrap();
        let b = run_benchmark(&net, tree, &reg, &cfg, &MonotonicClock::default()).unwrap();
        assert!(a.checksums_agree());
        assert_eq!(a.rows[0].checksum, b.rows[0].checksum);
        assert_eq!(a.evidence_counts, vec![2; 20]);
        assert_eq!(generate_cases(&net, 20, 0.2, 11), generate_cases(&net, 20, 0.2, 11));
    }

    #[test]
    fn config_validation() {
        let ok = BenchmarkConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            BenchmarkConfig { cases: 0, ..ok.clone() },
            BenchmarkConfig { evidence_ratio: 1.5, ..ok.clone() },
            BenchmarkConfig { threads: vec![0], ..ok.clone() },
            BenchmarkConfig { modes: vec![], ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(BenchError::Config(_))));
        }
    }

    #[test]
    fn summary_statistics() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(median(&v), 10.5);
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&[4.0], 0.95), 4.0);
    }

    #[test]
    fn checksum_ignores_case_order_but_not_values() {
        let (net, tree) = small();
        let engine = InferenceEngine::new(tree, Box::new(crate::inference::Sequential), 1, 8).unwrap();
        let cases = generate_cases(&net, 2, 0.2, 5);
        let outs: Vec<_> = cases.iter().map(|e| engine.infer(e)).collect();
        let forward = case_checksum(0, &outs[0]).unwrap().wrapping_add(case_checksum(1, &outs[1]).unwrap());
        let backward = case_checksum(1, &outs[1]).unwrap().wrapping_add(case_checksum(0, &outs[0]).unwrap());
        assert_eq!(forward, backward);
        let mut tweaked = outs[0].as_ref().unwrap().clone();
        let q = tweaked.values_mut().next().unwrap();
        q.posterior[0] += 1e-6;
        assert_ne!(case_checksum(0, &Ok(tweaked)).unwrap(), case_checksum(0, &outs[0]).unwrap());
    }

    #[test]
    fn csv_layout() {
        let (net, tree) = small();
        let cfg = BenchmarkConfig {
            cases: 2,
            threads: vec![1],
            modes: vec!["hybrid".into()],
            ..Default::default()
        };
        let r = run_benchmark(&net, tree, &StrategyRegistry::builtin(), &cfg, &MonotonicClock::default()).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], BenchmarkReport::CSV_HEADER);
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("hybrid,1,2,"));
        assert_eq!(lines[1].split(',').count(), 10);
        assert!(!csv.contains('\r'));
    }
}
