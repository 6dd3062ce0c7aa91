//! Epoch parameters for every parameter group.
//!
//! Each epoch `k >= 1` fixes a length `N_k`, a discount `gamma_k`, a
//! learning-rate rule `eta_{k,t}` and, for the federated kinds, a
//! communication set `C(k)`. All logarithms are natural.
//!
//! | kind             | `N_k`                                   | `gamma_k`                          | `eta_{k,t}`                                   |
//! |------------------|-----------------------------------------|------------------------------------|-----------------------------------------------|
//! | `SingleGroup1`   | `c_N 2^k`                               | `1 - 2 ln(4N)/N^(1/3)`             | `1/(1 + t^(2/3)/(8 ln 4t))`                   |
//! | `SingleGroup2`   | `c_N k^2 ln^5(k+1) ln^3(SA/delta)`      | `k/(k+1)`                          | `1/(1 + N/(4 ln T_k))`                        |
//! | `FedGroup1`      | `c_N 2^k`                               | `1 - 2 ln(4MN)/(MN)^(1/3)`         | `1/(1 + t^(2/3)/(8 M^(1/3) ln 4Mt))`          |
//! | `FedGroup2`      | `c_N max{k^2/M ln^5 ln^3, ln(Mk ln(SA/delta))}` | `k/(k+1)`                  | `1/(1 + N/(4 ln(M T_k)))`                     |
//! | `PolicyLearning` | `c_N 2^k`                               | `1 - (NM)^(-1/5)`                  | `1/(1 + t/(8 (NM)^(1/5) ln(MN)))`             |
//!
//! `T_k` is the running total `N_1 + ... + N_k`. Non-integer lengths round up.
//! `ln(SA/delta)` is floored at 1; with `desk` set every other logarithm in the
//! group-2 formulas is floored at 1 as well.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::num::{cbrt, ceil, ln, powf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScheduleKind {
    SingleGroup1,
    SingleGroup2,
    FedGroup1,
    FedGroup2,
    PolicyLearning,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 5] = [
        Self::SingleGroup1,
        Self::SingleGroup2,
        Self::FedGroup1,
        Self::FedGroup2,
        Self::PolicyLearning,
    ];

    pub fn is_federated(self) -> bool {
        matches!(
            self,
            Self::FedGroup1 | Self::FedGroup2 | Self::PolicyLearning
        )
    }

    /// Kinds with per-iteration decaying rates and exponentially growing epochs.
    pub fn is_group1(self) -> bool {
        matches!(self, Self::SingleGroup1 | Self::FedGroup1)
    }

    /// Kinds that bootstrap from the value frozen at the end of the previous epoch.
    pub fn freezes_epoch_value(self) -> bool {
        matches!(self, Self::SingleGroup2 | Self::FedGroup2)
    }

    /// Default `c_N`. Group 1 needs roughly `c_N >= 4700` before `gamma_1 > 0`.
    pub fn default_c_n(self) -> f64 {
        match self {
            Self::SingleGroup1 | Self::FedGroup1 => 5000.0,
            Self::SingleGroup2 | Self::FedGroup2 => 1.0,
            Self::PolicyLearning => 1000.0,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::SingleGroup1 => "sg1",
            Self::SingleGroup2 => "sg2",
            Self::FedGroup1 => "fg1",
            Self::FedGroup2 => "fg2",
            Self::PolicyLearning => "policy",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ScheduleKind {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .ok_or(ScheduleError::Config("unknown schedule kind"))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub c_n: f64,
    /// Number of agents `M`; 1 for the single-agent kinds.
    pub agents: usize,
    /// Confidence parameter, only used by the group-2 epoch lengths.
    pub delta: f64,
    pub states: usize,
    pub actions: usize,
    /// Overrides every `N_k` with a constant.
    pub force_nk: Option<u64>,
    /// Floors the group-2 logarithms at 1.
    pub desk: bool,
}

impl ScheduleConfig {
    pub const DEFAULT_DELTA: f64 = 0.1;

    pub fn new(kind: ScheduleKind, states: usize, actions: usize) -> Self {
        Self {
            kind,
            c_n: kind.default_c_n(),
            agents: 1,
            delta: Self::DEFAULT_DELTA,
            states,
            actions,
            force_nk: None,
            desk: false,
        }
    }

    pub fn with_agents(mut self, agents: usize) -> Self {
        self.agents = agents;
        self
    }

    pub fn with_c_n(mut self, c_n: f64) -> Self {
        self.c_n = c_n;
        self
    }

    pub fn with_force_nk(mut self, n: u64) -> Self {
        self.force_nk = Some(n);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn desk(mut self) -> Self {
        self.desk = true;
        self
    }

    /// True when any constant departs from the formulas' defaults.
    pub fn overrides_constants(&self) -> bool {
        self.desk || self.force_nk.is_some() || self.c_n != self.kind.default_c_n()
    }

    /// Static checks that do not depend on an epoch.
    pub fn check(&self) -> Result<(), ScheduleError> {
        if !(self.c_n > 0.0 && self.c_n.is_finite()) {
            return Err(ScheduleError::Config("c_N must be positive and finite"));
        }
        if self.agents == 0 {
            return Err(ScheduleError::Config("agent count M must be at least 1"));
        }
        if !self.kind.is_federated() && self.agents != 1 {
            return Err(ScheduleError::Config(
                "single-agent schedules require M = 1",
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ScheduleError::Config("delta must lie in (0, 1)"));
        }
        if self.states == 0 || self.actions == 0 {
            return Err(ScheduleError::Config("S and A must be positive"));
        }
        if self.force_nk == Some(0) {
            return Err(ScheduleError::Config("forced N_k must be at least 1"));
        }
        Ok(())
    }

    fn m(&self) -> f64 {
        self.agents as f64
    }

    fn log_sa_delta(&self) -> f64 {
        ln((self.states * self.actions) as f64 / self.delta).max(1.0)
    }

    fn log_maybe_floored(&self, x: f64) -> f64 {
        if self.desk {
            ln(x).max(1.0)
        } else {
            ln(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasibility {
    Gamma(f64),
    LearningRate { t: u64, eta: f64 },
    RestartGap { n_k: u64, g_k: u64 },
    InvalidGap(f64),
    EpochLength(f64),
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gamma(g) => write!(f, "gamma_k = {g} is outside (0, 1)"),
            Self::LearningRate { t, eta } => write!(f, "eta at t = {t} is {eta}, outside (0, 1]"),
            Self::RestartGap { n_k, g_k } => write!(f, "N_k = {n_k} < 2 g_k = {}", 2 * g_k),
            Self::InvalidGap(g) => write!(f, "communication gap g_k = {g} is not a positive integer"),
            Self::EpochLength(n) => write!(f, "epoch length {n} is not representable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("invalid schedule configuration: {0}")]
    Config(&'static str),
    #[error("epoch {k} is infeasible: {reason} (c_N too small for this epoch)")]
    InfeasibleEpoch { k: usize, reason: Infeasibility },
}

/// How `eta_{k,t}` depends on `t` within one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RateRule {
    /// `1/(1 + t^(2/3) / (8 m^(1/3) ln(4 m t)))`; `m = 1` for the single agent.
    Polynomial { agents: f64, single: bool },
    /// Constant over the epoch.
    Constant(f64),
    /// `1/(1 + t / scale)`.
    Harmonic { scale: f64 },
}

impl RateRule {
    fn eta(self, t: u64) -> f64 {
        let tf = t as f64;
        match self {
            Self::Polynomial { single: true, .. } => {
                1.0 / (1.0 + powf(tf, 2.0 / 3.0) / (8.0 * ln(4.0 * tf)))
            }
            Self::Polynomial { agents, .. } => {
                1.0 / (1.0 + powf(tf, 2.0 / 3.0) / (8.0 * cbrt(agents) * ln(4.0 * agents * tf)))
            }
            Self::Constant(eta) => eta,
            Self::Harmonic { scale } => 1.0 / (1.0 + tf / scale),
        }
    }
}

/// Parameters of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub k: usize,
    pub kind: ScheduleKind,
    pub n_k: u64,
    pub gamma_k: f64,
    /// Iterations at which agents aggregate, ascending. Always ends with `N_k`.
    /// For the policy-learning schedule each index `i` contributes one round,
    /// so rounding may repeat an iteration.
    pub comm_set: Vec<u64>,
    /// Communication period of `FedGroup1`.
    pub g_k: Option<u64>,
    /// `N_1 + ... + N_k`.
    pub prefix_iters: u64,
    rate: RateRule,
}

impl EpochPlan {
    /// `eta_{k,t}` for `t` in `[1, N_k]`.
    #[inline]
    pub fn learning_rate(&self, t: u64) -> f64 {
        self.rate.eta(t)
    }

    /// Number of communication rounds in this epoch.
    pub fn comm_rounds(&self) -> usize {
        self.comm_set.len()
    }
}

/// Epoch length `N_k`, `k >= 1`. `N_0 = 0`.
pub fn epoch_len(cfg: &ScheduleConfig, k: usize) -> Result<u64, ScheduleError> {
    if k == 0 {
        return Ok(0);
    }
    if let Some(n) = cfg.force_nk {
        return Ok(n);
    }
    let kf = k as f64;
    let raw = match cfg.kind {
        ScheduleKind::SingleGroup1 | ScheduleKind::FedGroup1 | ScheduleKind::PolicyLearning => {
            ceil(cfg.c_n) * powf(2.0, kf)
        }
        ScheduleKind::SingleGroup2 => {
            let l5 = powf(cfg.log_maybe_floored(kf + 1.0), 5.0);
            let l3 = powf(cfg.log_sa_delta(), 3.0);
            ceil(cfg.c_n * (kf * kf * l5 * l3))
        }
        ScheduleKind::FedGroup2 => {
            let l5 = powf(cfg.log_maybe_floored(kf + 1.0), 5.0);
            let l3 = powf(cfg.log_sa_delta(), 3.0);
            let bulk = kf * kf / cfg.m() * l5 * l3;
            let floor = cfg.log_maybe_floored(cfg.m() * kf * cfg.log_sa_delta());
            ceil(cfg.c_n * bulk.max(floor))
        }
    };
    if !(1.0..9.0e15).contains(&raw) {
        return Err(ScheduleError::InfeasibleEpoch {
            k,
            reason: Infeasibility::EpochLength(raw),
        });
    }
    Ok(raw as u64)
}

fn prefix_len(cfg: &ScheduleConfig, k: usize) -> Result<u64, ScheduleError> {
    let mut total: u64 = 0;
    for j in 1..=k {
        total = total
            .checked_add(epoch_len(cfg, j)?)
            .ok_or(ScheduleError::InfeasibleEpoch {
                k,
                reason: Infeasibility::EpochLength(f64::INFINITY),
            })?;
    }
    Ok(total)
}

fn gamma_for(cfg: &ScheduleConfig, k: usize, n_k: u64) -> f64 {
    let n = n_k as f64;
    let kf = k as f64;
    match cfg.kind {
        ScheduleKind::SingleGroup1 => 1.0 - 2.0 * ln(4.0 * n) / cbrt(n),
        ScheduleKind::FedGroup1 => {
            let mn = cfg.m() * n;
            1.0 - 2.0 * ln(4.0 * mn) / cbrt(mn)
        }
        ScheduleKind::SingleGroup2 | ScheduleKind::FedGroup2 => kf / (kf + 1.0),
        ScheduleKind::PolicyLearning => 1.0 - 1.0 / powf(n * cfg.m(), 0.2),
    }
}

fn rate_for(cfg: &ScheduleConfig, n_k: u64, prefix: u64) -> RateRule {
    let n = n_k as f64;
    match cfg.kind {
        ScheduleKind::SingleGroup1 => RateRule::Polynomial {
            agents: 1.0,
            single: true,
        },
        ScheduleKind::FedGroup1 => RateRule::Polynomial {
            agents: cfg.m(),
            single: false,
        },
        ScheduleKind::SingleGroup2 => {
            RateRule::Constant(1.0 / (1.0 + n / (4.0 * cfg.log_maybe_floored(prefix as f64))))
        }
        ScheduleKind::FedGroup2 => RateRule::Constant(
            1.0 / (1.0 + n / (4.0 * cfg.log_maybe_floored(cfg.m() * prefix as f64))),
        ),
        ScheduleKind::PolicyLearning => {
            let nm = n * cfg.m();
            RateRule::Harmonic {
                scale: 8.0 * powf(nm, 0.2) * ln(nm),
            }
        }
    }
}

/// `g_k = ceil(-ln((1 - gamma_k)^2) / eta_{k,N_k})`.
fn restart_gap(k: usize, gamma: f64, eta_end: f64) -> Result<u64, ScheduleError> {
    let one_minus = 1.0 - gamma;
    let g = ceil(-ln(one_minus * one_minus) / eta_end);
    if !(1.0..9.0e15).contains(&g) {
        return Err(ScheduleError::InfeasibleEpoch {
            k,
            reason: Infeasibility::InvalidGap(g),
        });
    }
    Ok(g as u64)
}

/// Terms `ceil(N ((1+gamma)/2)^(i-1))` for `i = 1..=ceil(4 ln(1-gamma) / ln((1+gamma)/2))`,
/// in generation order (non-increasing).
pub fn policy_comm_terms(n_k: u64, gamma: f64) -> Vec<u64> {
    let rho = 0.5 * (1.0 + gamma);
    let count = ceil(4.0 * ln(1.0 - gamma) / ln(rho)).max(1.0) as u64;
    let n = n_k as f64;
    (1..=count)
        .map(|i| (ceil(n * powf(rho, (i - 1) as f64)) as u64).clamp(1, n_k))
        .collect()
}

/// Parameters of epoch `k >= 1`.
pub fn epoch_plan(cfg: &ScheduleConfig, k: usize) -> Result<EpochPlan, ScheduleError> {
    cfg.check()?;
    if k == 0 {
        return Err(ScheduleError::Config("epochs are numbered from 1"));
    }
    let n_k = epoch_len(cfg, k)?;
    let prefix_iters = prefix_len(cfg, k)?;
    let gamma_k = gamma_for(cfg, k, n_k);
    if !(gamma_k > 0.0 && gamma_k < 1.0) {
        return Err(ScheduleError::InfeasibleEpoch {
            k,
            reason: Infeasibility::Gamma(gamma_k),
        });
    }
    let rate = rate_for(cfg, n_k, prefix_iters);
    let (comm_set, g_k) = match cfg.kind {
        ScheduleKind::FedGroup1 => {
            let g = restart_gap(k, gamma_k, rate.eta(n_k))?;
            let mut set: Vec<u64> = (1..=n_k / g).map(|i| i * g).collect();
            if n_k % g != 0 {
                set.push(n_k);
            }
            (set, Some(g))
        }
        ScheduleKind::PolicyLearning => {
            let mut terms = policy_comm_terms(n_k, gamma_k);
            terms.sort_unstable();
            (terms, None)
        }
        _ => (alloc::vec![n_k], None),
    };
    Ok(EpochPlan {
        k,
        kind: cfg.kind,
        n_k,
        gamma_k,
        comm_set,
        g_k,
        prefix_iters,
        rate,
    })
}

/// `eta_{k,t}`; `t_prefix` is `N_1 + ... + N_k` (only the group-2 kinds read it).
pub fn learning_rate(
    cfg: &ScheduleConfig,
    k: usize,
    t: u64,
    t_prefix: u64,
) -> Result<f64, ScheduleError> {
    let n_k = epoch_len(cfg, k)?;
    Ok(rate_for(cfg, n_k, t_prefix).eta(t))
}

/// Position `(epoch, iteration)` of the estimate that supplies the bootstrap value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoricalIndex {
    pub epoch: usize,
    pub iteration: u64,
}

/// `iota(k, t)` for iteration `t` of epoch `k`.
pub fn historical_index(
    cfg: &ScheduleConfig,
    k: usize,
    t: u64,
    comm_set: &[u64],
) -> Result<HistoricalIndex, ScheduleError> {
    Ok(match cfg.kind {
        ScheduleKind::SingleGroup1 => HistoricalIndex {
            epoch: k,
            iteration: t - 1,
        },
        ScheduleKind::SingleGroup2 | ScheduleKind::FedGroup2 => HistoricalIndex {
            epoch: k - 1,
            iteration: epoch_len(cfg, k - 1)?,
        },
        ScheduleKind::FedGroup1 | ScheduleKind::PolicyLearning => {
            let before = comm_set.partition_point(|&j| j < t);
            HistoricalIndex {
                epoch: k,
                iteration: if before == 0 { 0 } else { comm_set[before - 1] },
            }
        }
    })
}

/// Checks every epoch up to `epochs`: `gamma_k` in (0,1), `eta` in (0,1] at both
/// ends of the epoch (each rule is monotone in `t`), and `N_k >= 2 g_k` for group 1.
pub fn validate_schedule(cfg: &ScheduleConfig, epochs: usize) -> Result<(), ScheduleError> {
    cfg.check()?;
    for k in 1..=epochs {
        let plan = epoch_plan(cfg, k)?;
        for t in [1, plan.n_k] {
            let eta = plan.learning_rate(t);
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(ScheduleError::InfeasibleEpoch {
                    k,
                    reason: Infeasibility::LearningRate { t, eta },
                });
            }
        }
        if cfg.kind.is_group1() {
            let g = match plan.g_k {
                Some(g) => g,
                None => restart_gap(k, plan.gamma_k, plan.learning_rate(plan.n_k))?,
            };
            if plan.n_k < 2 * g {
                return Err(ScheduleError::InfeasibleEpoch {
                    k,
                    reason: Infeasibility::RestartGap { n_k: plan.n_k, g_k: g },
                });
            }
        }
    }
    Ok(())
}
