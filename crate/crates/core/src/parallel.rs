//! Data-parallel execution with a sequential fallback.
//!
//! Results are always collected in index order and every task draws from
//! its own ChaCha stream, so output does not depend on the mode or the
//! number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether `Parallel` actually runs in parallel in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `f(0), f(1), ..., f(n-1)` in index order.
    pub fn map_indices<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_indices(items.len(), |i| f(&items[i]))
    }
}

/// RNG for batch `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `total` samples into batches of `batch` (the last may be short).
pub fn batch_sizes(total: u64, batch: u64) -> Vec<u64> {
    let full = total / batch;
    let mut sizes = vec![batch; full as usize];
    if !total.is_multiple_of(batch) {
        sizes.push(total % batch);
    }
    sizes
}

/// Sets the global worker count. A no-op without the `parallel` feature.
pub fn install_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::InvalidParams("workers must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        // A second call keeps the first pool; that is fine for a CLI run.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn modes_agree() {
        let f = |i: usize| {
            let mut rng = stream_rng(42, i as u64);
            (0..100).map(|_| rng.random::<u32>() as u64).sum::<u64>()
        };
        assert_eq!(
            Exec::Sequential.map_indices(37, f),
            Exec::Parallel.map_indices(37, f)
        );
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).random();
        let b: u64 = stream_rng(1, 1).random();
        assert_ne!(a, b);
    }

    #[test]
    fn batches_cover_total() {
        assert_eq!(batch_sizes(10, 4), vec![4, 4, 2]);
        assert_eq!(batch_sizes(8, 4), vec![4, 4]);
        assert!(batch_sizes(0, 4).is_empty());
    }
}
