//! Exact inference on discrete Bayesian networks with junction trees.
//!
//! The pipeline is: parse a network ([`network`]), compile it into a
//! junction tree with a breadth-first layer schedule ([`jtree`]), then run
//! two-phase Hugin propagation with one of several interchangeable
//! execution strategies ([`inference`]). [`oracle`] provides brute-force
//! ground truth and [`bench`] the benchmark harness.
//!
//! ```
//! use std::sync::Arc;
//! use jtinfer::inference::{EngineConfig, InferenceEngine, StrategyRegistry};
//! use jtinfer::jtree::compile;
//! use jtinfer::network::{parse_bif, Evidence};
//!
//! let bif = "variable rain { type discrete [ 2 ] { yes, no }; }
//!            variable wet { type discrete [ 2 ] { yes, no }; }
//!            probability ( rain ) { table 0.2, 0.8; }
//!            probability ( wet | rain ) { (yes) 0.9, 0.1; (no) 0.1, 0.9; }";
//! let net = parse_bif(bif)?;
//! let tree = Arc::new(compile(&net)?);
//! let engine = InferenceEngine::from_config(tree, &StrategyRegistry::builtin(), &EngineConfig::new("hybrid", 2))?;
//! let wet = net.var_by_name("wet").unwrap();
//! let posteriors = engine.infer(&Evidence::from_pairs(&net, [(wet, 0)])?)?;
//! let rain = &posteriors[&net.var_by_name("rain").unwrap()].posterior;
//! assert!((rain[0] - 0.18 / 0.26).abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod network;
pub mod potential;
pub mod jtree;
pub mod inference;
pub mod oracle;
pub mod bench;
