//! Command implementations behind the `specmix` binary: feature extraction
//! from a manifest, batched augmentation jobs with a provenance log,
//! provenance statistics and a built-in self-check.

mod error;
pub mod extract;
mod fsutil;
pub mod job;
pub mod manifest;
pub mod selfcheck;
pub mod stats;
pub mod tensorfile;

pub use error::{CliError, Result};

/// Environment variable that fixes the worker thread count.
pub const THREADS_ENV: &str = "SPECMIX_THREADS";

/// Build the worker pool, honouring `SPECMIX_THREADS` when it is set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}
