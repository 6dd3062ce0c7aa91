//! Thread-pool plumbing. Results never depend on the thread count: agents
//! and seeds share no mutable state and every random draw is keyed.

use avgq_core::{AgentExecutor, QTable};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

pub const THREADS_ENV: &str = "AVGQ_THREADS";

/// Runs the agents of one communication segment on the current rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl AgentExecutor for RayonExecutor {
    fn run_agents(&self, agents: &mut [QTable], work: &(dyn Fn(usize, &mut QTable) + Sync)) {
        agents
            .par_iter_mut()
            .enumerate()
            .for_each(|(m, q)| work(m, q));
    }
}

/// Thread cap from `AVGQ_THREADS`; `None` means rayon's default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}
