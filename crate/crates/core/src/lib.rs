//! Average-reward tabular Q-learning.
//!
//! This crate holds the algorithmic core and performs no IO:
//!
//! * [`mdp`]: tabular models, Q/V tables, greedy policies and norms.
//! * [`oracle`]: exact reference solvers (optimal gain and bias, normalized
//!   discounted Q-functions, Cesàro policy evaluation) and the auxiliary
//!   quantities used to analyse the learners.
//! * [`schedule`]: epoch lengths, discount factors, learning rates,
//!   historical indices and communication sets for every parameter group.
//! * [`sampler`]: a counter-based generative model; every draw is a pure
//!   function of `(seed, agent, epoch, iteration, state, action)`.
//! * [`single`]: epoch-structured single-agent Q-learning.
//! * [`federated`]: M-agent Q-learning with scheduled averaging.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod federated;
pub mod mdp;
pub mod oracle;
pub mod record;
pub mod sampler;
pub mod schedule;
pub mod single;

mod num;

pub use federated::{run_fed, AgentExecutor, FedOptions, FedOutcome, FedState, Sequential};
pub use mdp::{
    greedy_policy, induced_chain, inf_norm_gap, span_norm, value_of, Amdp, DeterministicPolicy,
    InducedChain, MdpError, QTable, VTable,
};
pub use oracle::{
    analysis_bundle, evaluate_policy_average, solve_average, solve_discounted, AnalysisBundle,
    DiscountedSolution, GainBias, OracleError,
};
pub use record::{MetricRow, RunRecord};
pub use sampler::{GenerativeModel, SampleKey};
pub use schedule::{
    epoch_plan, historical_index, learning_rate, validate_schedule, EpochPlan, HistoricalIndex,
    Infeasibility, ScheduleConfig, ScheduleError, ScheduleKind,
};
pub use single::{q_update, run_single, LearnerState};

/// Errors surfaced by the learners.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("schedule {kind:?} cannot drive the {learner} learner")]
    WrongKind {
        kind: ScheduleKind,
        learner: &'static str,
    },
    #[error("schedule is sized for S={cfg_states}, A={cfg_actions} but the model has S={states}, A={actions}")]
    ShapeMismatch {
        cfg_states: usize,
        cfg_actions: usize,
        states: usize,
        actions: usize,
    },
}
