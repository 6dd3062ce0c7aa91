//! Federated Q-learning with periodic averaging.
//!
//! `M` agents run the single-agent update on independent sample streams,
//! bootstrapping from the last global value. At each communication point the
//! server averages the local tables and broadcasts the result. Between two
//! communication points the agents do not interact, so an [`AgentExecutor`]
//! may run them concurrently without changing any bit of the output.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{greedy_policy, inf_norm_gap, Amdp, DeterministicPolicy, QTable, VTable};
use crate::num::pairwise_sum;
use crate::oracle::GainBias;
use crate::record::{metric_stride, MetricRow, RunRecord};
use crate::sampler::GenerativeModel;
use crate::schedule::{epoch_plan, validate_schedule, ScheduleConfig};
use crate::single::{check_shape, q_update};
use crate::LearnError;

/// Runs per-agent work between two communication points.
///
/// `work(m, table)` must be called exactly once for every agent index.
pub trait AgentExecutor: Sync {
    fn run_agents(&self, agents: &mut [QTable], work: &(dyn Fn(usize, &mut QTable) + Sync));
}

/// Runs agents one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl AgentExecutor for Sequential {
    fn run_agents(&self, agents: &mut [QTable], work: &(dyn Fn(usize, &mut QTable) + Sync)) {
        for (m, q) in agents.iter_mut().enumerate() {
            work(m, q);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FedOptions {
    /// Every agent draws from agent 0's stream. Useful only as a diagnostic:
    /// the agents then carry the information of one, so the schedule is
    /// computed for `M = 1` and the run reproduces the one-agent trajectory.
    pub shared_stream: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedState {
    pub local_q: Vec<QTable>,
    pub global_q: QTable,
    /// `max_a global_q(., a)`, the bootstrap target of every local update.
    pub global_v: VTable,
    pub comm_count: u64,
}

impl FedState {
    pub fn new(states: usize, actions: usize, agents: usize) -> Self {
        Self {
            local_q: vec![QTable::zeros(states, actions); agents],
            global_q: QTable::zeros(states, actions),
            global_v: VTable::zeros(states),
            comm_count: 0,
        }
    }

    pub fn agents(&self) -> usize {
        self.local_q.len()
    }

    /// One update of agent `m` against the global value. Other agents are untouched.
    pub fn local_update(&mut self, m: usize, mdp: &Amdp, gamma: f64, eta: f64, next_states: &[usize]) {
        q_update(&mut self.local_q[m], mdp.rewards(), gamma, eta, &self.global_v, next_states);
    }

    /// Local value `max_a Q^m(., a)`; only computed on request.
    pub fn local_value(&self, m: usize) -> VTable {
        let q = &self.local_q[m];
        let mut v = VTable::zeros(q.states());
        q.values_into(&mut v);
        v
    }

    /// Averages the local tables, refreshes the global value and broadcasts.
    pub fn aggregate(&mut self) {
        let mut column = vec![0.0; self.local_q.len()];
        let inv = 1.0 / self.local_q.len() as f64;
        for (i, g) in self.global_q.as_mut_slice().iter_mut().enumerate() {
            for (c, q) in column.iter_mut().zip(&self.local_q) {
                *c = q.as_slice()[i];
            }
            // The mean of equal values is that value; summing would round.
            *g = if column.iter().all(|&x| x == column[0]) {
                column[0]
            } else {
                pairwise_sum(&column) * inv
            };
        }
        self.global_q.values_into(&mut self.global_v);
        for q in &mut self.local_q {
            q.as_mut_slice().copy_from_slice(self.global_q.as_slice());
        }
        self.comm_count += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedOutcome {
    /// Final global table.
    pub q: QTable,
    /// Greedy policy of `q`, lowest action index on ties.
    pub policy: DeterministicPolicy,
    pub record: RunRecord,
}

/// Runs `epochs` federated epochs with `cfg.agents` agents.
///
/// Metric rows are taken right after an aggregation, since that is when the
/// global table exists: at the start, at the first aggregation past every
/// `ceil(N_k / 16)` iterations and at every epoch end.
pub fn run_fed(
    mdp: &Amdp,
    cfg: &ScheduleConfig,
    epochs: usize,
    seed: u64,
    opts: FedOptions,
    executor: &dyn AgentExecutor,
    oracle: Option<&GainBias>,
) -> Result<FedOutcome, LearnError> {
    if !cfg.kind.is_federated() {
        return Err(LearnError::WrongKind {
            kind: cfg.kind,
            learner: "federated",
        });
    }
    check_shape(mdp, cfg)?;
    let agents = cfg.agents;
    let schedule_cfg = if opts.shared_stream {
        cfg.clone().with_agents(1)
    } else {
        cfg.clone()
    };
    let cfg = &schedule_cfg;
    validate_schedule(cfg, epochs)?;

    let pairs = mdp.states() * mdp.actions();
    let model = GenerativeModel::new(mdp);
    let mut state = FedState::new(mdp.states(), mdp.actions(), agents);
    let mut record = RunRecord::default();
    let mut total_iters: u64 = 0;
    let row = |epoch, iters: u64, st: &FedState, gamma, eta| MetricRow {
        epoch,
        iterations: iters,
        samples_per_agent: pairs as u64 * iters,
        comm_rounds_cum: st.comm_count,
        err_inf: oracle.map(|o| inf_norm_gap(&st.global_q, o.gain)),
        gamma_k: gamma,
        eta_last: eta,
        m_agents: agents,
    };
    record.rows.push(row(0, 0, &state, None, None));

    for k in 1..=epochs {
        let plan = epoch_plan(cfg, k)?;
        let stride = metric_stride(plan.n_k);
        let epoch_start = total_iters;
        let mut done: u64 = 0;
        let mut last_row: Option<u64> = None;
        for &c in &plan.comm_set {
            if c > done {
                let (from, to) = (done + 1, c);
                let global_v = &state.global_v;
                let plan = &plan;
                let model = &model;
                executor.run_agents(&mut state.local_q, &|m, q| {
                    let stream = if opts.shared_stream { 0 } else { m as u64 };
                    let mut next = vec![0usize; pairs];
                    for t in from..=to {
                        model.draw_next_states(seed, stream, k as u64, t, &mut next);
                        q_update(q, mdp.rewards(), plan.gamma_k, plan.learning_rate(t), global_v, &next);
                    }
                });
                done = c;
            }
            state.aggregate();
            let crossed = done / stride > last_row.unwrap_or(0) / stride || done == plan.n_k;
            if crossed && last_row != Some(done) {
                last_row = Some(done);
                record.rows.push(row(
                    k,
                    epoch_start + done,
                    &state,
                    Some(plan.gamma_k),
                    Some(plan.learning_rate(done)),
                ));
            }
        }
        debug_assert_eq!(done, plan.n_k);
        total_iters += plan.n_k;
        // Later duplicates of N_k add rounds after the end-of-epoch row.
        if let Some(last) = record.rows.last_mut() {
            last.comm_rounds_cum = state.comm_count;
        }
    }

    let policy = greedy_policy(&state.global_q);
    Ok(FedOutcome {
        q: state.global_q,
        policy,
        record,
    })
}
