#![allow(dead_code)]

use std::path::PathBuf;

use jtinfer::network::{parse_bif, BayesianNetwork};

pub const BUNDLED: [&str; 9] = [
    "asia", "cancer", "alarm", "child", "insurance", "hailfinder", "win95pts", "pathfinder", "water",
];

pub fn network_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks").join(format!("{name}.bif"))
}

pub fn load(name: &str) -> BayesianNetwork {
    let text = std::fs::read_to_string(network_path(name)).unwrap();
    parse_bif(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}
