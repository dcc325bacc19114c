//! Block-parallel Monte Carlo driver.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{RandomStream, StreamFamily};

/// Number of samples drawn from one substream. Changing it changes results.
pub const BLOCK_SIZE: u64 = 1024;

/// Parallelism settings. `workers == 0` uses rayon's default pool size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Splits `n_samples` into [`BLOCK_SIZE`] blocks, runs `block` on each with
/// its own substream, and returns per-block results in block order.
///
/// `block` receives the block's substream, the global index of its first
/// sample, and the number of samples in the block.
pub fn run_blocks<A, F>(n_samples: u64, family: &StreamFamily, workers: usize, block: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(&mut RandomStream, u64, u64) -> Result<A> + Sync,
{
    let n_blocks = n_samples.div_ceil(BLOCK_SIZE);
    let run = || {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let start = b * BLOCK_SIZE;
                let count = BLOCK_SIZE.min(n_samples - start);
                let mut stream = family.substream(b);
                block(&mut stream, start, count)
            })
            .collect::<Result<Vec<A>>>()
    };
    if workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)
    }
}
