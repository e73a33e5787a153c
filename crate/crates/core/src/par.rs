//! Data-parallel map with a sequential fallback.
//!
//! Results always come back in input order so that any reduction performed
//! by the caller is bitwise identical across execution modes.

use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// `Parallel` when built with the `parallel` feature.
    pub fn available() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

static JOBS: OnceLock<usize> = OnceLock::new();

/// Sizes the global worker pool. Only the first call has any effect.
pub fn set_jobs(jobs: usize) {
    if JOBS.set(jobs).is_err() {
        return;
    }
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size worker pool: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| (*x as f64).sqrt() * 1.000_000_1;
        let a = map(Execution::Parallel, &items, f);
        let b = map(Execution::Sequential, &items, f);
        assert_eq!(a, b);
    }
}
