//! Execution strategy for the data-parallel scans.
//!
//! Every parallel entry point splits its work into a fixed list of tasks
//! whose boundaries do not depend on the thread count, and results are
//! merged in task order. Sequential and parallel runs therefore agree bit
//! for bit.

/// How a scan distributes its tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    /// Run every task on the calling thread.
    Sequential,
    /// Run tasks on the rayon pool. Falls back to sequential when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `task(i)` for `i in 0..count` and returns the results in index order.
pub(crate) fn map_tasks<T, F>(exec: Execution, count: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(task).collect();
    }
    let _ = exec;
    (0..count).map(task).collect()
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
