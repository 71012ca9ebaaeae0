//! Configuration, problem registry and experiment drivers used by the
//! command line tool and the acceptance tests.

pub mod config;
pub mod registry;
pub mod studies;

pub use config::RunConfig;
pub use registry::{lookup, registry};
pub use studies::{
    run_abp_study, run_consistency_study, run_convergence_study, run_solve, AbpRow, ReferenceCache,
    SolveOutcome, StudyRow,
};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "ISAACS_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

/// Sizes the global thread pool from [`WORKERS_ENV`]; a no-op when unset.
pub fn init_worker_pool() -> crate::Result<()> {
    if let Some(n) = workers_from_env() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| crate::Error::Config(format!("cannot start {n} workers: {e}")))?;
    }
    Ok(())
}
