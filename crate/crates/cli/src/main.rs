use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jtinfer::bench::{run_benchmark, BenchError, BenchmarkConfig, MonotonicClock, DEFAULT_MODES, DEFAULT_THREADS};
use jtinfer::inference::io::{parse_evidence_file, write_case, CSV_HEADER};
use jtinfer::inference::{InferenceEngine, StrategyRegistry, DEFAULT_CHUNK};
use jtinfer::jtree::{compile, JunctionTree, TreeReport};
use jtinfer::network::{parse_bif, BayesianNetwork, Evidence};

/// Exact inference on discrete Bayesian networks (BIF) with junction trees.
#[derive(Parser, Debug)]
#[command(name = "jtinfer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print junction-tree statistics for a network.
    Inspect {
        #[arg(long, value_name = "PATH")]
        net: PathBuf,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Posterior CSV for every case of an evidence file.
    Query(QueryArgs),
    /// Time seeded cases under each mode and thread count.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long, value_name = "PATH")]
    net: PathBuf,
    /// One case per line: `var=state,var=state`. Without it, one case with
    /// no evidence is run.
    #[arg(long, value_name = "PATH")]
    evidence_file: Option<PathBuf>,
    #[arg(long, default_value = "hybrid", value_parser = mode_name)]
    mode: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = DEFAULT_CHUNK)]
    chunk: usize,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_name = "PATH")]
    net: PathBuf,
    /// Comma-separated modes; all four by default.
    #[arg(long, value_delimiter = ',', value_parser = mode_name)]
    mode: Vec<String>,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    cases: usize,
    #[arg(long, default_value_t = 0.2)]
    evidence_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CHUNK)]
    chunk: usize,
    /// Write the report CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn mode_name(s: &str) -> Result<String, String> {
    StrategyRegistry::builtin()
        .create(s)
        .map(|st| st.name().to_string())
        .map_err(|e| e.to_string())
}

fn load(path: &Path) -> Result<(BayesianNetwork, Arc<JunctionTree>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut net = parse_bif(&text).with_context(|| format!("parsing {}", path.display()))?;
    if net.name.is_empty() || net.name == "unknown" {
        if let Some(stem) = path.file_stem() {
            net.name = stem.to_string_lossy().into_owned();
        }
    }
    let tree = compile(&net).with_context(|| format!("compiling {}", path.display()))?;
    Ok((net, Arc::new(tree)))
}

fn sink(output: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn inspect(net: &Path, json: bool) -> Result<()> {
    let (net, tree) = load(net)?;
    let report = TreeReport::new(&net, &tree);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{report}");
    }
    Ok(())
}

fn query(args: &QueryArgs) -> Result<()> {
    if args.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let (net, tree) = load(&args.net)?;
    let cases = match &args.evidence_file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_evidence_file(&net, &text).with_context(|| format!("in {}", p.display()))?
        }
        None => vec![Evidence::new()],
    };
    let strategy = StrategyRegistry::builtin().create(&args.mode)?;
    let engine = InferenceEngine::new(tree, strategy, args.threads, args.chunk)?;
    let mut state = engine.new_state();
    let mut out = sink(args.output.as_deref())?;
    writeln!(out, "{CSV_HEADER}")?;
    for (i, ev) in cases.iter().enumerate() {
        let outcome = engine.run_case(&mut state, ev);
        write_case(&mut out, &net, i, &outcome)?;
    }
    out.flush()?;
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let config = BenchmarkConfig {
        cases: args.cases,
        evidence_ratio: args.evidence_ratio,
        threads: if args.threads.is_empty() { DEFAULT_THREADS.to_vec() } else { args.threads.clone() },
        modes: if args.mode.is_empty() {
            DEFAULT_MODES.iter().map(|m| m.to_string()).collect()
        } else {
            args.mode.clone()
        },
        seed: args.seed,
        chunk: args.chunk,
    };
    config.validate()?;
    let (net, tree) = load(&args.net)?;
    let result = run_benchmark(&net, tree, &StrategyRegistry::builtin(), &config, &MonotonicClock::default());
    let report = match &result {
        Ok(r) => r,
        Err(BenchError::ChecksumMismatch { report, .. }) => report.as_ref(),
        Err(_) => return result.map(|_| ()).map_err(Into::into),
    };
    let mut out = sink(args.output.as_deref())?;
    out.write_all(report.to_csv().as_bytes())?;
    out.flush()?;
    result.map(|_| ()).map_err(Into::into)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Inspect { net, json } => inspect(&net, json),
        Command::Query(args) => query(&args),
        Command::Bench(args) => bench(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
