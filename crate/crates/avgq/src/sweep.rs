//! Speedup sweep over the number of agents at a fixed per-agent budget.

use std::io::Write;
use std::path::Path;

use avgq_core::epoch_plan;

use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::stats::{iqr, median, slope};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub median_err: f64,
    pub iqr_err: f64,
    pub comm_rounds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    /// Per-agent iterations `T_K`, identical for every `M`.
    pub per_agent_iters: u64,
    /// Fitted slope of `ln(median_err)` against `ln(M T_K)`.
    pub slope: Option<f64>,
}

fn per_agent_iters(cfg: &ExperimentConfig) -> Result<u64> {
    let mut sched = cfg.schedule.clone();
    if cfg.shared_stream {
        sched.agents = 1;
    }
    let mut total = 0;
    for k in 1..=cfg.epochs {
        total += epoch_plan(&sched, k).map_err(avgq_core::LearnError::from)?.n_k;
    }
    Ok(total)
}

pub fn sweep_speedup(base: &ExperimentConfig, m_list: &[usize]) -> Result<SweepSummary> {
    if m_list.is_empty() {
        return Err(HarnessError::Config("empty M list".into()));
    }
    if !base.schedule.kind.is_federated() {
        return Err(HarnessError::Config(format!(
            "sweep needs a federated schedule, got {}",
            base.schedule.kind
        )));
    }
    let configs: Vec<ExperimentConfig> = m_list
        .iter()
        .map(|&m| {
            let mut cfg = base.clone();
            cfg.schedule.agents = m;
            cfg
        })
        .collect();
    let budget = per_agent_iters(&configs[0])?;
    for cfg in &configs[1..] {
        let t = per_agent_iters(cfg)?;
        if t != budget {
            return Err(HarnessError::Config(format!(
                "per-agent budget differs across M ({budget} vs {t} at M={}); fix N_k with --force-nk",
                cfg.schedule.agents
            )));
        }
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let exp = run_experiment(cfg)?;
        let errs = exp.final_errors();
        rows.push(SweepRow {
            m: cfg.schedule.agents,
            median_err: median(&errs),
            iqr_err: iqr(&errs),
            comm_rounds: exp.runs[0].record.last().map_or(0, |r| r.comm_rounds_cum),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.median_err > 0.0)
        .map(|r| (((r.m as u64 * budget) as f64).ln(), r.median_err.ln()))
        .unzip();
    Ok(SweepSummary {
        slope: slope(&x, &y),
        rows,
        per_agent_iters: budget,
    })
}

/// Writes `summary.csv` through a temporary file and a rename.
pub fn write_summary(dir: &Path, summary: &SweepSummary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let tmp = dir.join(format!("{SUMMARY_FILE}.tmp"));
    {
        let file = std::fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["M", "median_err", "iqr_err", "comm_rounds"])?;
        for r in &summary.rows {
            w.write_record([
                r.m.to_string(),
                format!("{:.16e}", r.median_err),
                format!("{:.16e}", r.iqr_err),
                r.comm_rounds.to_string(),
            ])?;
        }
        let mut inner = w.into_inner().map_err(|e| HarnessError::io(&tmp, e.into_error()))?;
        inner.flush().map_err(|e| HarnessError::io(&tmp, e))?;
    }
    let dest = dir.join(SUMMARY_FILE);
    std::fs::rename(&tmp, &dest).map_err(|e| HarnessError::io(dest, e))
}
