//! Repeated-seed experiments and their on-disk outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use avgq_core::oracle::DEFAULT_MAX_ITERS;
use avgq_core::{
    evaluate_policy_average, greedy_policy, run_fed, run_single, solve_average, Amdp,
    DeterministicPolicy, FedOptions, GainBias, QTable, RunRecord, ScheduleConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::exec::RayonExecutor;
use crate::generate::{generate_mdp, GeneratorSpec};
use crate::io::read_mdp;
use crate::records::{write_csv_file, read_csv_file};
use crate::stats::median;

pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const POLICY_EVAL_TOLERANCE: f64 = 1e-10;
pub const METADATA_FILE: &str = "metadata.json";
const CONSTANTS_OVERRIDDEN: &str = "theory constants not enforced";
const CONSTANTS_DEFAULT: &str = "default constants";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MdpSource {
    File { path: PathBuf },
    Generator { spec: GeneratorSpec },
}

impl MdpSource {
    pub fn load(&self) -> Result<Amdp> {
        match self {
            Self::File { path } => read_mdp(path),
            Self::Generator { spec } => generate_mdp(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: MdpSource,
    /// `states` and `actions` must match the loaded model.
    pub schedule: ScheduleConfig,
    pub epochs: usize,
    /// Seed of the first repetition; repetition `i` uses `seed + i`.
    pub seed: u64,
    pub seeds: usize,
    pub epsilon: Option<f64>,
    pub shared_stream: bool,
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(HarnessError::Config(format!("epsilon must lie in (0, 1], got {eps}")));
            }
        }
        self.schedule.check().map_err(avgq_core::LearnError::from)?;
        Ok(())
    }

    pub fn run_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds as u64).map(|i| self.seed.wrapping_add(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub q: QTable,
    pub policy: DeterministicPolicy,
    pub record: RunRecord,
    /// `J* - min_s J^pi(s)` for the greedy policy of the final table.
    pub policy_gap: f64,
    pub samples_to_epsilon: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub mdp: Amdp,
    pub oracle: GainBias,
    pub runs: Vec<SeedRun>,
    pub wall_clock_secs: f64,
}

impl Experiment {
    pub fn final_errors(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.record.final_error()).collect()
    }

    pub fn median_final_error(&self) -> f64 {
        median(&self.final_errors())
    }

    pub fn median_error_at_epoch(&self, k: usize) -> f64 {
        let errs: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.record.error_at_epoch_end(k))
            .collect();
        median(&errs)
    }

    pub fn median_policy_gap(&self) -> f64 {
        median(&self.runs.iter().map(|r| r.policy_gap).collect::<Vec<_>>())
    }

    /// Seeds that never reached `epsilon`.
    pub fn missed_target(&self, epsilon: f64) -> usize {
        self.runs
            .iter()
            .filter(|r| r.record.samples_to_reach(epsilon).is_none())
            .count()
    }
}

/// Solves the oracle once, then runs every seed on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.check()?;
    let start = Instant::now();
    let mdp = cfg.source.load()?;
    let oracle = solve_average(&mdp, ORACLE_TOLERANCE, DEFAULT_MAX_ITERS)?;
    let seeds: Vec<u64> = cfg.run_seeds().collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| run_seed(&mdp, &oracle, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        mdp,
        oracle,
        runs,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_seed(mdp: &Amdp, oracle: &GainBias, cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let (q, record) = if cfg.schedule.kind.is_federated() {
        let opts = FedOptions {
            shared_stream: cfg.shared_stream,
        };
        let out = run_fed(mdp, &cfg.schedule, cfg.epochs, seed, opts, &RayonExecutor, Some(oracle))?;
        (out.q, out.record)
    } else {
        run_single(mdp, &cfg.schedule, cfg.epochs, seed, Some(oracle))?
    };
    let policy = greedy_policy(&q);
    let values = evaluate_policy_average(mdp, &policy, POLICY_EVAL_TOLERANCE, DEFAULT_MAX_ITERS)?;
    let worst = values.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let samples_to_epsilon = cfg.epsilon.and_then(|e| record.samples_to_reach(e));
    Ok(SeedRun {
        seed,
        q,
        policy,
        record,
        policy_gap: oracle.gain - worst,
        samples_to_epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_err_inf: Option<f64>,
    pub samples_to_epsilon: Option<u64>,
    pub policy_gap: f64,
    pub comm_rounds: u64,
}

/// Everything needed to rerun the experiment, plus headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub oracle_gain: f64,
    pub oracle_span: f64,
    pub constants: String,
    pub wall_clock_secs: f64,
    pub runs: Vec<SeedSummary>,
}

impl Metadata {
    pub fn new(cfg: &ExperimentConfig, exp: &Experiment) -> Self {
        let constants = if cfg.schedule.overrides_constants() {
            CONSTANTS_OVERRIDDEN
        } else {
            CONSTANTS_DEFAULT
        };
        Self {
            config: cfg.clone(),
            oracle_gain: exp.oracle.gain,
            oracle_span: exp.oracle.span,
            constants: constants.to_string(),
            wall_clock_secs: exp.wall_clock_secs,
            runs: exp
                .runs
                .iter()
                .map(|r| SeedSummary {
                    seed: r.seed,
                    final_err_inf: r.record.final_error(),
                    samples_to_epsilon: r.samples_to_epsilon,
                    policy_gap: r.policy_gap,
                    comm_rounds: r.record.last().map_or(0, |row| row.comm_rounds_cum),
                })
                .collect(),
        }
    }
}

pub fn seed_csv_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

/// Writes `seed_<seed>.csv` per run and `metadata.json`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, exp: &Experiment) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for run in &exp.runs {
        write_csv_file(&seed_csv_path(dir, run.seed), &run.record)?;
    }
    let meta = serde_json::to_string_pretty(&Metadata::new(cfg, exp))?;
    let path = dir.join(METADATA_FILE);
    std::fs::write(&path, meta).map_err(|e| HarnessError::io(path, e))
}

pub fn read_metadata(dir: &Path) -> Result<Metadata> {
    let path = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads back every per-seed record listed in the metadata.
pub fn read_records(dir: &Path) -> Result<Vec<(u64, RunRecord)>> {
    read_metadata(dir)?
        .runs
        .iter()
        .map(|r| Ok((r.seed, read_csv_file(&seed_csv_path(dir, r.seed))?)))
        .collect()
}
