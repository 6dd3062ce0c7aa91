//! Metric time series produced by the learners.

use alloc::vec::Vec;

/// One sample of a run's progress.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricRow {
    pub epoch: usize,
    /// Iterations completed so far, `T` (summed over epochs).
    pub iterations: u64,
    /// Per-agent samples, `S * A * iterations`.
    pub samples_per_agent: u64,
    pub comm_rounds_cum: u64,
    /// `||Q - J*||_inf`, when an oracle gain was supplied.
    pub err_inf: Option<f64>,
    /// `gamma_k` of the current epoch (`None` before the first epoch).
    pub gamma_k: Option<f64>,
    /// Last learning rate applied (`None` before the first update).
    pub eta_last: Option<f64>,
    pub m_agents: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<MetricRow>,
}

impl RunRecord {
    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    /// Final `err_inf`, if measured.
    pub fn final_error(&self) -> Option<f64> {
        self.last().and_then(|r| r.err_inf)
    }

    /// Error recorded at the end of `epoch`.
    pub fn error_at_epoch_end(&self, epoch: usize) -> Option<f64> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.epoch == epoch)
            .and_then(|r| r.err_inf)
    }

    /// First per-agent sample count at which `err_inf <= epsilon`.
    pub fn samples_to_reach(&self, epsilon: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.err_inf.is_some_and(|e| e <= epsilon))
            .map(|r| r.samples_per_agent)
    }

    /// Cumulative columns never decrease and errors are non-negative.
    pub fn is_consistent(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[0].iterations <= w[1].iterations
                && w[0].samples_per_agent <= w[1].samples_per_agent
                && w[0].comm_rounds_cum <= w[1].comm_rounds_cum
                && w[0].epoch <= w[1].epoch
        }) && self
            .rows
            .iter()
            .all(|r| r.err_inf.is_none_or(|e| e >= 0.0))
    }
}

/// Iterations between intra-epoch metric rows: `ceil(N_k / 16)`.
pub(crate) fn metric_stride(n_k: u64) -> u64 {
    n_k.div_ceil(16).max(1)
}
