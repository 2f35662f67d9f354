//! Deterministic batch execution.
//!
//! Work is cut into batches of [`BATCH`] items. Batch `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `b`, so every item
//! sees the same random numbers whether batches run on one thread or many,
//! and results are concatenated in batch order.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BATCH: usize = 1024;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "KOLMO_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// RNG for batch `batch` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

#[cfg(feature = "parallel")]
fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let n: usize = std::env::var(THREADS_ENV).ok()?.trim().parse().ok()?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
    })
    .as_ref()
}

#[cfg(not(feature = "parallel"))]
#[allow(dead_code)]
fn pool() -> Option<&'static ()> {
    static NONE: OnceLock<()> = OnceLock::new();
    let _ = &NONE;
    None
}

/// Maps `f` over `0..n` batches; `f(b, rng)` returns the batch's items.
pub fn run_batches<T, F>(n: usize, seed: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>, &mut ChaCha8Rng) -> Vec<T> + Sync + Send,
{
    let batches = n.div_ceil(BATCH);
    let one = |b: usize| {
        let lo = b * BATCH;
        let hi = (lo + BATCH).min(n);
        let mut rng = batch_rng(seed, b as u64);
        f(lo..hi, &mut rng)
    };
    let nested: Vec<Vec<T>> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let go = || (0..batches).into_par_iter().map(one).collect();
            match pool() {
                Some(p) => p.install(go),
                None => go(),
            }
        }
        _ => (0..batches).map(one).collect(),
    };
    nested.into_iter().flatten().collect()
}

/// Order-preserving map over `0..n` without randomness.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let go = || (0..n).into_par_iter().map(&f).collect();
            match pool() {
                Some(p) => p.install(go),
                None => go(),
            }
        }
        _ => (0..n).map(f).collect(),
    }
}
