//! Junction-tree propagation and the execution strategies that parallelize it.

mod engine;
mod executor;
pub mod io;
mod strategy;

pub use engine::{
    EngineConfig, InferenceEngine, InferenceState, Posteriors, QueryResult, Stage, RESCALE_THRESHOLD,
};
pub use executor::Executor;
pub use strategy::{
    build_layer_tasks, check_partition, layer_work, ExecutionStrategy, Hybrid, InterClique, IntraClique, LayerTasks, Phase,
    Sequential, StrategyFactory, StrategyRegistry, Task, TaskGroup, TaskOp, UnknownStrategy, WorkItem,
    DEFAULT_CHUNK,
};

use crate::network::EvidenceError;
use crate::potential::PotentialError;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("evidence has probability zero")]
    ZeroProbabilityEvidence,
    #[error("internal fault: {0}")]
    Fault(String),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error("could not start worker threads: {0}")]
    ThreadPool(String),
    #[error("wrong stage: {0}")]
    Stage(&'static str),
}

impl InferenceError {
    pub fn is_zero_probability(&self) -> bool {
        matches!(self, InferenceError::ZeroProbabilityEvidence)
    }
}
