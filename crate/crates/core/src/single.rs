//! Epoch-structured single-agent Q-learning.
//!
//! Within epoch `k` every iteration updates all `(s, a)` at once:
//!
//! ```text
//! Q_{k,t}(s,a) = (1 - eta) Q_{k,t-1}(s,a) + eta ((1 - gamma_k) r(s,a) + gamma_k V_hist(s'))
//! ```
//!
//! `V_hist` is refreshed before every iteration for group 1 and frozen at the
//! previous epoch's final value for group 2. `Q_{k,0}` carries over from the
//! previous epoch and `Q_{0,0} = 0`.

use crate::mdp::{inf_norm_gap, Amdp, QTable, VTable};
use crate::oracle::GainBias;
use crate::record::{metric_stride, MetricRow, RunRecord};
use crate::sampler::GenerativeModel;
use crate::schedule::{epoch_plan, validate_schedule, ScheduleConfig};
use crate::LearnError;

/// Synchronous update of every entry of `q`; `next_states[s * A + a]` is the sampled successor.
#[inline]
pub fn q_update(
    q: &mut QTable,
    rewards: &[f64],
    gamma: f64,
    eta: f64,
    v_hist: &VTable,
    next_states: &[usize],
) {
    let v = v_hist.as_slice();
    for ((entry, &r), &next) in q.as_mut_slice().iter_mut().zip(rewards).zip(next_states) {
        *entry = (1.0 - eta) * *entry + eta * ((1.0 - gamma) * r + gamma * v[next]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub epoch: usize,
    pub iteration: u64,
    pub q: QTable,
    /// Bootstrap value `V_{iota(k,t)}`.
    pub v_hist: VTable,
}

impl LearnerState {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            epoch: 0,
            iteration: 0,
            q: QTable::zeros(states, actions),
            v_hist: VTable::zeros(states),
        }
    }

    /// `v_hist <- max_a q(., a)`.
    pub fn refresh_value(&mut self) {
        self.q.values_into(&mut self.v_hist);
    }

    pub fn q_update(&mut self, mdp: &Amdp, gamma: f64, eta: f64, next_states: &[usize]) {
        q_update(&mut self.q, mdp.rewards(), gamma, eta, &self.v_hist, next_states);
        self.iteration += 1;
    }
}

pub(crate) fn check_shape(mdp: &Amdp, cfg: &ScheduleConfig) -> Result<(), LearnError> {
    if cfg.states != mdp.states() || cfg.actions != mdp.actions() {
        return Err(LearnError::ShapeMismatch {
            cfg_states: cfg.states,
            cfg_actions: cfg.actions,
            states: mdp.states(),
            actions: mdp.actions(),
        });
    }
    Ok(())
}

/// Runs `epochs` epochs and returns `Q_{K,N_K}` with its metric series.
///
/// Rows are emitted at the start, every `ceil(N_k / 16)` iterations and at every
/// epoch end. `err_inf` is filled when `oracle` is given.
pub fn run_single(
    mdp: &Amdp,
    cfg: &ScheduleConfig,
    epochs: usize,
    seed: u64,
    oracle: Option<&GainBias>,
) -> Result<(QTable, RunRecord), LearnError> {
    if cfg.kind.is_federated() {
        return Err(LearnError::WrongKind {
            kind: cfg.kind,
            learner: "single-agent",
        });
    }
    check_shape(mdp, cfg)?;
    validate_schedule(cfg, epochs)?;

    let sa = (mdp.states() * mdp.actions()) as u64;
    let model = GenerativeModel::new(mdp);
    let mut state = LearnerState::new(mdp.states(), mdp.actions());
    let mut next = alloc::vec![0usize; mdp.states() * mdp.actions()];
    let mut record = RunRecord::default();
    let mut total_iters: u64 = 0;
    let row = |epoch, iters: u64, q: &QTable, gamma, eta| MetricRow {
        epoch,
        iterations: iters,
        samples_per_agent: sa * iters,
        comm_rounds_cum: 0,
        err_inf: oracle.map(|o| inf_norm_gap(q, o.gain)),
        gamma_k: gamma,
        eta_last: eta,
        m_agents: 1,
    };
    record.rows.push(row(0, 0, &state.q, None, None));

    let refresh_each_iteration = !cfg.kind.freezes_epoch_value();
    for k in 1..=epochs {
        let plan = epoch_plan(cfg, k)?;
        let stride = metric_stride(plan.n_k);
        state.epoch = k;
        state.iteration = 0;
        // V_{k-1, N_{k-1}}: the frozen target for group 2, and V_{k,0} for group 1.
        state.refresh_value();
        for t in 1..=plan.n_k {
            if refresh_each_iteration && t > 1 {
                state.refresh_value();
            }
            model.draw_next_states(seed, 0, k as u64, t, &mut next);
            let eta = plan.learning_rate(t);
            state.q_update(mdp, plan.gamma_k, eta, &next);
            total_iters += 1;
            if t % stride == 0 || t == plan.n_k {
                debug_assert!(
                    state.q.as_slice().iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)),
                    "Q left [0, 1]"
                );
                record
                    .rows
                    .push(row(k, total_iters, &state.q, Some(plan.gamma_k), Some(eta)));
            }
        }
    }
    Ok((state.q, record))
}
