//! Replica fan-out. With the `parallel` feature the work is spread over the
//! current rayon pool; otherwise it runs in index order on the caller thread.
//! Either way the output vector is ordered by replica index, so reductions
//! over it do not depend on the worker count.

/// Execution strategy for replica batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Apply `f` to `0..n` and collect the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel => map_parallel(n, f),
    }
}

#[cfg(feature = "parallel")]
fn map_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_agree() {
        let a = map_indexed(1000, Execution::Sequential, |i| (i as f64).sqrt());
        let b = map_indexed(1000, Execution::Parallel, |i| (i as f64).sqrt());
        assert_eq!(a, b);
    }
}
