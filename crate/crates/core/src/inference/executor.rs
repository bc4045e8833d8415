use std::fmt;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

use super::strategy::{ExecutionStrategy, Task, TaskGroup};

/// Runs task groups for one strategy on a dedicated pool of `threads`
/// workers. Groups run one after another; tasks inside a concurrent group
/// write disjoint destination ranges and need no locking.
pub struct Executor {
    strategy: Box<dyn ExecutionStrategy>,
    threads: usize,
    chunk: usize,
    pool: Option<ThreadPool>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor")
            .field("strategy", &self.strategy.name())
            .field("threads", &self.threads)
            .field("chunk", &self.chunk)
            .finish()
    }
}

impl Executor {
    /// Sequential strategies always get one thread.
    pub fn new(
        strategy: Box<dyn ExecutionStrategy>,
        threads: usize,
        chunk: usize,
    ) -> Result<Self, ThreadPoolBuildError> {
        let threads = if strategy.is_sequential() { 1 } else { threads.max(1) };
        let pool = if threads > 1 {
            Some(ThreadPoolBuilder::new().num_threads(threads).build()?)
        } else {
            None
        };
        Ok(Executor {
            strategy,
            threads,
            chunk: chunk.max(1),
            pool,
        })
    }

    pub fn strategy(&self) -> &dyn ExecutionStrategy {
        self.strategy.as_ref()
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn chunk(&self) -> usize {
        self.chunk
    }

    /// Executes one group against `buffers` (indexed by the tasks' node
    /// index). `kernel(task, dst)` fills `dst`, the `task.begin..task.end`
    /// slice of the node's buffer, and returns the largest value written.
    /// Returns the per-task maxima in task order.
    pub fn run_group<E, K>(
        &self,
        group: &TaskGroup,
        buffers: &mut [Vec<f64>],
        index: impl Fn(&Task) -> usize,
        kernel: &K,
    ) -> Result<Vec<f64>, E>
    where
        E: Send,
        K: Fn(&Task, &mut [f64]) -> Result<f64, E> + Sync,
    {
        let mut slots: Vec<Option<(usize, &mut [f64])>> =
            buffers.iter_mut().map(|b| Some((0, b.as_mut_slice()))).collect();
        let mut work: Vec<(&Task, &mut [f64])> = Vec::with_capacity(group.tasks.len());
        for task in &group.tasks {
            let i = index(task);
            let (offset, rest) = slots[i].take().expect("tasks of a node must be ordered");
            debug_assert!(task.begin >= offset, "overlapping tasks for one node");
            let (_, rest) = rest.split_at_mut(task.begin - offset);
            let (dst, rest) = rest.split_at_mut(task.len());
            slots[i] = Some((task.end, rest));
            work.push((task, dst));
        }
        match &self.pool {
            Some(pool) if group.concurrent && work.len() > 1 => pool.install(|| {
                work.into_par_iter()
                    .map(|(task, dst)| kernel(task, dst))
                    .collect()
            }),
            _ => work
                .into_iter()
                .map(|(task, dst)| kernel(task, dst))
                .collect(),
        }
    }

    /// `f(0..n)` in order, spread over the pool when the strategy allows it.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) if n > 1 => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            _ => (0..n).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::strategy::{Hybrid, Sequential, TaskOp, WorkItem};
    use crate::jtree::NodeId;

    #[test]
    fn sequential_forces_one_thread() {
        let e = Executor::new(Box::new(Sequential), 8, 4).unwrap();
        assert_eq!(e.threads(), 1);
    }

    #[test]
    fn disjoint_ranges_fill_every_entry_once() {
        let items: Vec<WorkItem> = [10usize, 6, 1]
            .iter()
            .enumerate()
            .map(|(i, &len)| WorkItem {
                node: NodeId::Separator(i),
                op: TaskOp::MarginalizeToSeparator,
                len,
            })
            .collect();
        let exec = Executor::new(Box::new(Hybrid), 3, 4).unwrap();
        let groups = exec.strategy().plan(&items, exec.chunk());
        let mut buffers = vec![vec![0.0; 10], vec![0.0; 6], vec![0.0; 1]];
        for g in &groups {
            let maxima = exec
                .run_group::<(), _>(
                    g,
                    &mut buffers,
                    |t| match t.node {
                        NodeId::Separator(s) => s,
                        NodeId::Clique(c) => c,
                    },
                    &|t, dst| {
                        for (k, v) in dst.iter_mut().enumerate() {
                            *v += (t.begin + k) as f64 + 1.0;
                        }
                        Ok(dst.iter().copied().fold(0.0, f64::max))
                    },
                )
                .unwrap();
            assert_eq!(maxima.len(), g.tasks.len());
        }
        for b in &buffers {
            let expect: Vec<f64> = (1..=b.len()).map(|x| x as f64).collect();
            assert_eq!(b, &expect);
        }
    }
}
