//! Experiment harness: configuration, report rows, the experiments and the
//! command-line interface.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigFile, Experiment, ExperimentConfig, Overrides};
pub use experiments::run_experiment;
pub use report::{ExperimentReport, ReportRow};

/// Environment variable fixing the worker count; defaults to rayon's choice.
pub const THREADS_ENV: &str = "PCLI_LAB_THREADS";

/// Run `f` inside a pool sized by [`THREADS_ENV`]. Falls back to the
/// global pool when the variable is unset or unparsable.
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
