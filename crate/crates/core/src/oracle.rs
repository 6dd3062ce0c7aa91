//! Exact reference solvers.
//!
//! * [`solve_average`]: optimal gain `J*` and bias `h*` by damped relative
//!   value iteration. The damping `h <- (1-a) h + a (T h - (T h)(0))` is RVI
//!   on the lazy chain `(1-a) I + a P`, which is aperiodic, so the iteration
//!   converges on periodic models such as a deterministic cycle.
//! * [`solve_discounted`]: normalized discounted `Q*_gamma`, the fixed point of
//!   `Q = (1-gamma) r + gamma P max_a Q`, with entries in `[0, 1]`.
//! * [`evaluate_policy_average`]: per-start-state average reward `J^pi`.
//! * [`analysis_bundle`]: the centered `V*`, `Q*` and the auxiliary sequences
//!   `V_k* = J* + V*/k` and `Q_{k+1}*` used to analyse the epoch-wise learner.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{induced_chain, span_of, value_of, Amdp, DeterministicPolicy, QTable, VTable};
use crate::num::abs;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Damping weight of the relative value iteration and of the lazy chain used for
/// policy evaluation.
const DAMPING: f64 = 0.5;
/// Reference state pinned to zero by relative value iteration.
const REFERENCE_STATE: usize = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("discount factor must lie in [0, 1), got {0}")]
    Gamma(f64),
    #[error("analysis index k must be at least 1")]
    ZeroIndex,
    #[error("policy has {actual} entries or an out-of-range action for S={states}, A={actions}")]
    Policy {
        states: usize,
        actions: usize,
        actual: usize,
    },
}

/// Optimal gain, centered bias and span.
#[derive(Debug, Clone, PartialEq)]
pub struct GainBias {
    pub gain: f64,
    /// `h*` shifted so that `max + min = 0`.
    pub bias: VTable,
    pub span: f64,
    /// `max_s |(T h)(s) - gain - h(s)|` for the returned pair.
    pub residual: f64,
    pub iterations: usize,
}

impl GainBias {
    /// The bias Q-function `r + P h* - J*`, whose row maxima equal `h*`.
    pub fn bias_q(&self, mdp: &Amdp) -> QTable {
        let mut q = QTable::zeros(mdp.states(), mdp.actions());
        for s in 0..mdp.states() {
            for a in 0..mdp.actions() {
                q.set(s, a, mdp.reward(s, a) + mdp.expect(s, a, &self.bias.v) - self.gain);
            }
        }
        q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedSolution {
    pub gamma: f64,
    pub q: QTable,
    pub v: VTable,
    /// `||q - T_gamma q||_inf` for the returned table.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBundle {
    pub k: usize,
    pub gain: f64,
    /// Centering constant `c = (max h* + min h*) / 2`.
    pub shift_c: f64,
    pub v_star: VTable,
    pub q_star: QTable,
    /// `V_k* = J* + V*/k`.
    pub v_k: VTable,
    /// `Q_{k+1}*(s,a) = r/(k+1) + k/(k+1) E[V_k*(s')]`.
    pub q_k_next: QTable,
}

fn check_tol(tol: f64) -> Result<(), OracleError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(OracleError::Tolerance(tol))
    }
}

/// `(T h)(s) = max_a [ r(s,a) + sum_s' P(s'|s,a) h(s') ]`.
pub fn bellman_average(mdp: &Amdp, h: &[f64], out: &mut [f64]) {
    for (s, slot) in out.iter_mut().enumerate() {
        *slot = (0..mdp.actions())
            .map(|a| mdp.reward(s, a) + mdp.expect(s, a, h))
            .fold(f64::NEG_INFINITY, f64::max);
    }
}

/// `max_s |(T h)(s) - gain - h(s)|`.
pub fn average_residual(mdp: &Amdp, gain: f64, h: &[f64]) -> f64 {
    let mut th = vec![0.0; mdp.states()];
    bellman_average(mdp, h, &mut th);
    th.iter()
        .zip(h)
        .fold(0.0, |acc, (t, x)| acc.max(abs(t - gain - x)))
}

/// Solves `J* + h*(s) = max_a [r(s,a) + E h*(s')]` by damped relative value
/// iteration, stopping once `span(T h - h) <= tol`.
pub fn solve_average(mdp: &Amdp, tol: f64, max_iters: usize) -> Result<GainBias, OracleError> {
    check_tol(tol)?;
    let n = mdp.states();
    let mut h = vec![0.0; n];
    let mut th = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut last_span = f64::INFINITY;
    for iter in 1..=max_iters {
        bellman_average(mdp, &h, &mut th);
        for ((d, t), x) in diff.iter_mut().zip(&th).zip(&h) {
            *d = t - x;
        }
        last_span = span_of(&diff);
        if last_span <= tol {
            // h(ref) is exactly zero on every iterate, so the gain is (T h)(ref).
            let gain = th[REFERENCE_STATE] - h[REFERENCE_STATE];
            let (lo, hi) = min_max(&h);
            let c = 0.5 * (hi + lo);
            let bias: Vec<f64> = h.iter().map(|x| x - c).collect();
            let residual = average_residual(mdp, gain, &bias);
            return Ok(GainBias {
                gain,
                span: span_of(&bias),
                bias: VTable::new(bias),
                residual,
                iterations: iter,
            });
        }
        let pivot = th[REFERENCE_STATE];
        for (x, t) in h.iter_mut().zip(&th) {
            *x = (1.0 - DAMPING) * *x + DAMPING * (t - pivot);
        }
    }
    Err(OracleError::NonConvergence {
        iters: max_iters,
        residual: last_span,
    })
}

/// One application of the normalized discounted Bellman operator.
pub fn bellman_discounted(mdp: &Amdp, gamma: f64, q: &QTable) -> QTable {
    let v = value_of(q);
    let mut out = QTable::zeros(mdp.states(), mdp.actions());
    for s in 0..mdp.states() {
        for a in 0..mdp.actions() {
            out.set(
                s,
                a,
                (1.0 - gamma) * mdp.reward(s, a) + gamma * mdp.expect(s, a, &v.v),
            );
        }
    }
    out
}

/// Normalized discounted optimal Q-function by value iteration.
///
/// Stops when `gamma * ||q_{n+1} - q_n|| <= tol`, which bounds the Bellman
/// residual of the returned table by `tol`.
pub fn solve_discounted(
    mdp: &Amdp,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> Result<DiscountedSolution, OracleError> {
    check_tol(tol)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(OracleError::Gamma(gamma));
    }
    let mut q = QTable::from_flat(mdp.states(), mdp.actions(), mdp.rewards().to_vec());
    let mut step = f64::INFINITY;
    for iter in 1..=max_iters {
        let next = bellman_discounted(mdp, gamma, &q);
        step = next.max_abs_diff(&q);
        q = next;
        if gamma * step <= tol {
            let residual = bellman_discounted(mdp, gamma, &q).max_abs_diff(&q);
            return Ok(DiscountedSolution {
                gamma,
                v: value_of(&q),
                q,
                residual,
                iterations: iter,
            });
        }
    }
    Err(OracleError::NonConvergence {
        iters: max_iters,
        residual: gamma * step,
    })
}

/// Long-run average reward of `pi` from every start state.
///
/// Iterates `w <- (1-a) w + a P^pi w` from `w = r^pi`. The lazy chain has the
/// same Cesàro limit matrix as `P^pi` but no periodicity, so its powers converge
/// to `J^pi` per start state, including for multichain policies.
pub fn evaluate_policy_average(
    mdp: &Amdp,
    pi: &DeterministicPolicy,
    tol: f64,
    max_iters: usize,
) -> Result<VTable, OracleError> {
    check_tol(tol)?;
    if pi.action.len() != mdp.states() || pi.action.iter().any(|&a| a >= mdp.actions()) {
        return Err(OracleError::Policy {
            states: mdp.states(),
            actions: mdp.actions(),
            actual: pi.action.len(),
        });
    }
    let chain = induced_chain(mdp, pi);
    let n = chain.states;
    let mut w = chain.reward.clone();
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..max_iters {
        for (s, slot) in next.iter_mut().enumerate() {
            let pw: f64 = chain.row(s).iter().zip(&w).map(|(p, x)| p * x).sum();
            *slot = (1.0 - DAMPING) * w[s] + DAMPING * pw;
        }
        change = next
            .iter()
            .zip(&w)
            .fold(0.0, |acc, (a, b)| acc.max(abs(a - b)));
        core::mem::swap(&mut w, &mut next);
        if change <= tol {
            return Ok(VTable::new(w));
        }
    }
    Err(OracleError::NonConvergence {
        iters: max_iters,
        residual: change,
    })
}

/// Centered `V*`, `Q*` and the auxiliary `V_k*`, `Q_{k+1}*` for index `k >= 1`.
pub fn analysis_bundle(mdp: &Amdp, k: usize, tol: f64) -> Result<AnalysisBundle, OracleError> {
    if k == 0 {
        return Err(OracleError::ZeroIndex);
    }
    let sol = solve_average(mdp, tol, DEFAULT_MAX_ITERS)?;
    Ok(bundle_from_solution(mdp, &sol, k))
}

/// Same as [`analysis_bundle`] but reuses an existing solve.
///
/// # Panics
/// If `k == 0`.
pub fn bundle_from_solution(mdp: &Amdp, sol: &GainBias, k: usize) -> AnalysisBundle {
    assert!(k >= 1, "analysis index k must be at least 1");
    let (lo, hi) = min_max(&sol.bias.v);
    let shift_c = 0.5 * (hi + lo);
    let v_star: Vec<f64> = sol.bias.v.iter().map(|h| h - shift_c).collect();
    let kf = k as f64;
    let v_k: Vec<f64> = v_star.iter().map(|v| sol.gain + v / kf).collect();
    let (s_n, a_n) = (mdp.states(), mdp.actions());
    let mut q_star = QTable::zeros(s_n, a_n);
    let mut q_k_next = QTable::zeros(s_n, a_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let r = mdp.reward(s, a);
            q_star.set(s, a, r + mdp.expect(s, a, &v_star) - sol.gain);
            q_k_next.set(
                s,
                a,
                r / (kf + 1.0) + kf / (kf + 1.0) * mdp.expect(s, a, &v_k),
            );
        }
    }
    AnalysisBundle {
        k,
        gain: sol.gain,
        shift_c,
        v_star: VTable::new(v_star),
        q_star,
        v_k: VTable::new(v_k),
        q_k_next,
    }
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{greedy_policy, span_norm};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Gamma};

    fn single_state(r: f64) -> Amdp {
        Amdp::new(1, 1, vec![1.0], vec![r]).unwrap()
    }

    fn cycle2() -> Amdp {
        Amdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0]).unwrap()
    }

    fn dirichlet(states: usize, actions: usize, seed: u64) -> Amdp {
        let mut rng = StdRng::seed_from_u64(seed);
        let gamma = Gamma::new(1.0, 1.0).unwrap();
        let mut p = Vec::new();
        for _ in 0..states * actions {
            let row: Vec<f64> = (0..states).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = row.iter().sum();
            p.extend(row.iter().map(|x| x / total));
        }
        let r = (0..states * actions).map(|_| rng.random::<f64>()).collect();
        Amdp::new(states, actions, p, r).unwrap()
    }

    #[test]
    fn average_single_state() {
        let sol = solve_average(&single_state(0.7), 1e-10, 1000).unwrap();
        assert!((sol.gain - 0.7).abs() < 1e-15);
        assert_eq!(sol.bias.v, vec![0.0]);
        assert_eq!(sol.span, 0.0);
    }

    #[test]
    fn average_cycle2_matches_hand_solution() {
        let sol = solve_average(&cycle2(), 1e-10, 1000).unwrap();
        assert!((sol.gain - 0.5).abs() < 1e-12);
        assert!((sol.bias.v[0] - 0.25).abs() < 1e-12);
        assert!((sol.bias.v[1] + 0.25).abs() < 1e-12);
        assert!((sol.span - 0.5).abs() < 1e-12);
        assert!((span_norm(&sol.bias) - sol.span).abs() == 0.0);
    }

    #[test]
    fn average_random_instance_residual_reverified() {
        let mdp = dirichlet(5, 3, 11);
        let sol = solve_average(&mdp, 1e-10, DEFAULT_MAX_ITERS).unwrap();
        // Independent re-application of the Bellman operator.
        let mut max_dev: f64 = 0.0;
        for s in 0..5 {
            let mut best = f64::NEG_INFINITY;
            for a in 0..3 {
                let mut acc = mdp.reward(s, a);
                for s2 in 0..5 {
                    acc += mdp.transition(s, a)[s2] * sol.bias.v[s2];
                }
                best = best.max(acc);
            }
            max_dev = max_dev.max((best - sol.gain - sol.bias.v[s]).abs());
        }
        assert!(max_dev <= 1e-8, "{max_dev}");
        assert!(sol.residual <= 2e-10);
        let (lo, hi) = min_max(&sol.bias.v);
        assert!((hi + lo).abs() < 1e-15);
    }

    #[test]
    fn average_reports_non_convergence() {
        let err = solve_average(&dirichlet(4, 2, 3), 1e-10, 2).unwrap_err();
        assert!(matches!(err, OracleError::NonConvergence { iters: 2, .. }));
        assert!(matches!(
            solve_average(&cycle2(), 0.0, 10),
            Err(OracleError::Tolerance(_))
        ));
    }

    #[test]
    fn discounted_single_state_is_the_reward() {
        let sol = solve_discounted(&single_state(0.7), 0.9, 1e-10, 1000).unwrap();
        assert!((sol.q.get(0, 0) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn discounted_cycle2_closed_form_and_gap_bound() {
        let g = 0.9;
        let sol = solve_discounted(&cycle2(), g, 1e-12, 100_000).unwrap();
        assert!((sol.v.v[0] - 1.0 / (1.0 + g)).abs() < 1e-11);
        assert!((sol.v.v[1] - g / (1.0 + g)).abs() < 1e-11);
        for &v in &sol.v.v {
            assert!((v - 0.5).abs() <= 4.0 * (1.0 - g) * 0.5);
        }
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn discounted_rejects_bad_gamma() {
        assert!(matches!(
            solve_discounted(&cycle2(), 1.0, 1e-10, 10),
            Err(OracleError::Gamma(_))
        ));
    }

    #[test]
    fn discounted_iterates_contract_by_gamma() {
        let mdp = dirichlet(4, 3, 5);
        let g = 0.8;
        let mut q = QTable::zeros(4, 3);
        let mut prev_step = f64::INFINITY;
        for _ in 0..50 {
            let next = bellman_discounted(&mdp, g, &q);
            let step = next.max_abs_diff(&q);
            assert!(step <= g * prev_step + 1e-15);
            prev_step = step;
            q = next;
        }
    }

    #[test]
    fn policy_evaluation_examples() {
        let j = evaluate_policy_average(
            &single_state(0.3),
            &DeterministicPolicy::new(vec![0]),
            1e-12,
            1000,
        )
        .unwrap();
        assert!((j.v[0] - 0.3).abs() < 1e-15);
        let j = evaluate_policy_average(
            &cycle2(),
            &DeterministicPolicy::new(vec![0, 0]),
            1e-12,
            1000,
        )
        .unwrap();
        assert!((j.v[0] - 0.5).abs() < 1e-12 && (j.v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn greedy_policy_of_bias_q_is_gain_optimal() {
        let mdp = dirichlet(6, 3, 21);
        let sol = solve_average(&mdp, 1e-12, DEFAULT_MAX_ITERS).unwrap();
        let pi = greedy_policy(&sol.bias_q(&mdp));
        let j = evaluate_policy_average(&mdp, &pi, 1e-12, DEFAULT_MAX_ITERS).unwrap();
        for &x in &j.v {
            assert!((x - sol.gain).abs() <= 1e-6);
        }
    }

    #[test]
    fn policy_evaluation_matches_cesaro_average_on_multichain_policy() {
        // States 0 and 1 absorb with rewards 0.2 and 0.9; state 2 splits 30/70.
        let p = vec![
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.3, 0.7, 0.0,
        ];
        let mdp = Amdp::new(3, 1, p, vec![0.2, 0.9, 0.0]).unwrap();
        let pi = DeterministicPolicy::new(vec![0; 3]);
        let j = evaluate_policy_average(&mdp, &pi, 1e-13, 10_000).unwrap();
        // Brute-force Cesàro average (1/T) sum_{t<T} P^t r.
        let chain = induced_chain(&mdp, &pi);
        let t_max = 200_000;
        let mut w = chain.reward.clone();
        let mut acc = [0.0; 3];
        for _ in 0..t_max {
            for (slot, x) in acc.iter_mut().zip(&w) {
                *slot += x;
            }
            w = (0..3)
                .map(|s| chain.row(s).iter().zip(&w).map(|(p, x)| p * x).sum())
                .collect();
        }
        for (v, total) in j.v.iter().zip(acc) {
            assert!((v - total / t_max as f64).abs() < 1e-4);
        }
        assert!((j.v[2] - (0.3 * 0.2 + 0.7 * 0.9)).abs() < 1e-10);
    }

    #[test]
    fn bundle_examples() {
        let b = analysis_bundle(&single_state(0.7), 5, 1e-10).unwrap();
        assert_eq!(b.v_star.v, vec![0.0]);
        assert!(b.q_star.get(0, 0).abs() < 1e-15);
        assert!((b.q_k_next.get(0, 0) - 0.7).abs() < 1e-15);

        let b = analysis_bundle(&cycle2(), 1, 1e-10).unwrap();
        assert!((b.v_k.v[0] - 0.75).abs() < 1e-12);
        assert!((b.v_k.v[1] - 0.25).abs() < 1e-12);

        let mdp = dirichlet(5, 2, 8);
        let b = analysis_bundle(&mdp, 3, 1e-12).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                let expected = b.gain + b.q_star.get(s, a) / 4.0;
                assert!((b.q_k_next.get(s, a) - expected).abs() <= 1e-10);
            }
        }
        assert!(matches!(
            analysis_bundle(&mdp, 0, 1e-10),
            Err(OracleError::ZeroIndex)
        ));
    }

    #[test]
    fn discount_gap_bound_on_random_instances() {
        for seed in 0..10 {
            let mdp = dirichlet(4, 3, 100 + seed);
            let avg = solve_average(&mdp, 1e-12, DEFAULT_MAX_ITERS).unwrap();
            for g in [0.9, 0.99] {
                let disc = solve_discounted(&mdp, g, 1e-12, DEFAULT_MAX_ITERS).unwrap();
                let bound = 4.0 * (1.0 - g) * avg.span;
                for &x in disc.v.as_slice() {
                    assert!((x - avg.gain).abs() <= bound + 1e-10, "seed {seed} g {g}");
                }
                assert!(disc.q.as_slice().iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)));
            }
        }
    }

    #[test]
    fn q_gap_of_a_dominated_action_can_exceed_the_value_bound() {
        // One state, two self-loops: J* = 1, h* = 0, but the zero-reward action
        // has Q*_gamma = gamma, a gap of 1 - gamma that no multiple of the span covers.
        let mdp = Amdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let avg = solve_average(&mdp, 1e-12, 1000).unwrap();
        let disc = solve_discounted(&mdp, 0.9, 1e-13, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(avg.span, 0.0);
        assert!((disc.q.get(0, 1) - 0.9).abs() < 1e-12);
        assert!((disc.v.as_slice()[0] - 1.0).abs() < 1e-12);
    }
}
