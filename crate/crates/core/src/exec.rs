//! Execution policy for data-parallel loops.
//!
//! Reductions split the index range into fixed-size chunks, evaluate the
//! chunks (in parallel when allowed), and fold the partial results in chunk
//! order. The result is therefore the same for every policy and thread
//! count.

use std::ops::Range;

/// Number of items per reduction chunk.
pub const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `Parallel` when the crate was built with rayon, `Sequential` otherwise.
    pub fn available() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    #[cfg(feature = "parallel")]
    fn parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `items`, keeping the input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Evaluates `part` on consecutive chunks of `0..len` and folds the
    /// results left to right with `combine`.
    pub fn chunked_reduce<A, P, C>(self, len: usize, part: P, combine: C) -> Option<A>
    where
        A: Send,
        P: Fn(Range<usize>) -> A + Sync + Send,
        C: Fn(A, A) -> A,
    {
        let ranges: Vec<Range<usize>> =
            (0..len).step_by(CHUNK).map(|s| s..(s + CHUNK).min(len)).collect();
        let partials = self.map(&ranges, |r| part(r.clone()));
        partials.into_iter().reduce(combine)
    }

    /// Runs `f` inside a pool of `jobs` workers when parallel, directly otherwise.
    pub fn with_jobs<R: Send>(self, jobs: usize, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if self.parallel() && jobs > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                return pool.install(f);
            }
        }
        let _ = jobs;
        f()
    }
}
