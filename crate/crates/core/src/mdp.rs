//! Tabular average-reward MDPs and the tables learners operate on.
//!
//! States and actions are 0-indexed. Kernels are stored flat in
//! `(s, a, s')` order and rewards in `(s, a)` order.

use alloc::vec;
use alloc::vec::Vec;

use crate::num::abs;

/// Allowed deviation of a kernel row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("model must have at least one state and one action (got S={states}, A={actions})")]
    Empty { states: usize, actions: usize },
    #[error("{what} has {actual} entries, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("P(.|{state},{action}) sums to {sum}, not 1")]
    RowSum { state: usize, action: usize, sum: f64 },
    #[error("P({next}|{state},{action}) = {value} is not a probability")]
    Probability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    #[error("r({state},{action}) = {value} lies outside [0, 1]")]
    RewardRange { state: usize, action: usize, value: f64 },
}

/// A tabular AMDP `(S, A, P, r)` with deterministic rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Amdp {
    states: usize,
    actions: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
}

impl Amdp {
    /// Builds a model from flat arrays and validates it.
    pub fn new(
        states: usize,
        actions: usize,
        kernel: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let mdp = Self {
            states,
            actions,
            kernel,
            reward,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds a model from nested `P[s][a][s']` and `r[s][a]` arrays.
    pub fn from_nested(kernel: &[Vec<Vec<f64>>], reward: &[Vec<f64>]) -> Result<Self, MdpError> {
        let states = kernel.len();
        let actions = kernel.first().map_or(0, Vec::len);
        if states == 0 || actions == 0 {
            return Err(MdpError::Empty { states, actions });
        }
        let mut flat_p = Vec::with_capacity(states * actions * states);
        for row in kernel {
            check_len("P[s]", actions, row.len())?;
            for dist in row {
                check_len("P[s][a]", states, dist.len())?;
                flat_p.extend_from_slice(dist);
            }
        }
        check_len("r", states, reward.len())?;
        let mut flat_r = Vec::with_capacity(states * actions);
        for row in reward {
            check_len("r[s]", actions, row.len())?;
            flat_r.extend_from_slice(row);
        }
        Self::new(states, actions, flat_p, flat_r)
    }

    /// Checks every model invariant: shapes, probability rows and reward range.
    pub fn validate(&self) -> Result<(), MdpError> {
        let (s_n, a_n) = (self.states, self.actions);
        if s_n == 0 || a_n == 0 {
            return Err(MdpError::Empty {
                states: s_n,
                actions: a_n,
            });
        }
        check_len("P", s_n * a_n * s_n, self.kernel.len())?;
        check_len("r", s_n * a_n, self.reward.len())?;
        for s in 0..s_n {
            for a in 0..a_n {
                let row = self.transition(s, a);
                for (next, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(MdpError::Probability {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if abs(sum - 1.0) > ROW_SUM_TOLERANCE {
                    return Err(MdpError::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                let r = self.reward(s, a);
                if !(0.0..=1.0).contains(&r) {
                    return Err(MdpError::RewardRange {
                        state: s,
                        action: a,
                        value: r,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// The row `P(. | s, a)`.
    #[inline]
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.actions + a) * self.states;
        &self.kernel[start..start + self.states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.actions + a]
    }

    /// Rewards flattened in `(s, a)` order.
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// Kernel flattened in `(s, a, s')` order.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// `E_{s' ~ P(.|s,a)}[v(s')]`.
    #[inline]
    pub fn expect(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transition(s, a)
            .iter()
            .zip(v)
            .map(|(p, x)| p * x)
            .sum()
    }

    /// Nested `P[s][a][s']` copy, for serialization.
    pub fn kernel_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.states)
            .map(|s| {
                (0..self.actions)
                    .map(|a| self.transition(s, a).to_vec())
                    .collect()
            })
            .collect()
    }

    /// Nested `r[s][a]` copy, for serialization.
    pub fn reward_nested(&self) -> Vec<Vec<f64>> {
        self.reward
            .chunks(self.actions)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), MdpError> {
    if expected == actual {
        Ok(())
    } else {
        Err(MdpError::Shape {
            what,
            expected,
            actual,
        })
    }
}

/// A stationary deterministic policy `pi: S -> A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy {
    pub action: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(action: Vec<usize>) -> Self {
        Self { action }
    }
}

/// Estimate `Q(s, a)`, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self::filled(states, actions, 0.0)
    }

    pub fn filled(states: usize, actions: usize, value: f64) -> Self {
        Self {
            states,
            actions,
            q: vec![value; states * actions],
        }
    }

    /// Wraps flat `(s, a)`-ordered values.
    ///
    /// # Panics
    /// If `values.len() != states * actions`.
    pub fn from_flat(states: usize, actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), states * actions, "QTable shape mismatch");
        Self {
            states,
            actions,
            q: values,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.q[s * self.actions + a] = value;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.actions..(s + 1) * self.actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.q
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite())
    }

    /// Writes `max_a Q(s, a)` into `out` without allocating.
    pub fn values_into(&self, out: &mut VTable) {
        debug_assert_eq!(out.v.len(), self.states);
        for (s, slot) in out.v.iter_mut().enumerate() {
            *slot = row_max(self.row(s));
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .fold(0.0, |acc, (a, b)| acc.max(abs(a - b)))
    }
}

/// Value estimate `V(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VTable {
    pub v: Vec<f64>,
}

impl VTable {
    pub fn new(v: Vec<f64>) -> Self {
        Self { v }
    }

    pub fn zeros(states: usize) -> Self {
        Self { v: vec![0.0; states] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
    }
}

#[inline]
fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Greedy policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> DeterministicPolicy {
    let action = (0..q.states())
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for (a, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    DeterministicPolicy { action }
}

/// `V(s) = max_a Q(s, a)`.
pub fn value_of(q: &QTable) -> VTable {
    let mut out = VTable::zeros(q.states());
    q.values_into(&mut out);
    out
}

/// `max_s x(s) - min_s x(s)`.
pub fn span_norm(x: &VTable) -> f64 {
    span_of(&x.v)
}

pub(crate) fn span_of(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// `max_{s,a} |Q(s, a) - scalar|`, i.e. the sup-distance to a constant table.
pub fn inf_norm_gap(q: &QTable, scalar: f64) -> f64 {
    q.as_slice()
        .iter()
        .fold(0.0, |acc, &x| acc.max(abs(x - scalar)))
}

/// Markov chain induced by a deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    pub states: usize,
    /// Row-major `S x S` transition matrix.
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
}

impl InducedChain {
    pub fn row(&self, s: usize) -> &[f64] {
        &self.transition[s * self.states..(s + 1) * self.states]
    }
}

/// Builds `(P^pi, r^pi)`.
///
/// # Panics
/// If the policy length or any action is out of range for `mdp`.
pub fn induced_chain(mdp: &Amdp, pi: &DeterministicPolicy) -> InducedChain {
    let n = mdp.states();
    assert_eq!(pi.action.len(), n, "policy length must equal S");
    let mut transition = Vec::with_capacity(n * n);
    let mut reward = Vec::with_capacity(n);
    for (s, &a) in pi.action.iter().enumerate() {
        assert!(a < mdp.actions(), "policy action {a} out of range");
        transition.extend_from_slice(mdp.transition(s, a));
        reward.push(mdp.reward(s, a));
    }
    InducedChain {
        states: n,
        transition,
        reward,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_state(r: f64) -> Amdp {
        Amdp::new(1, 1, vec![1.0], vec![r]).unwrap()
    }

    fn cycle2() -> Amdp {
        Amdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn validate_accepts_degenerate_model() {
        assert!(single_state(0.7).validate().is_ok());
    }

    #[test]
    fn validate_rejects_bad_row_sum() {
        let err = Amdp::new(2, 1, vec![0.5, 0.6, 1.0, 0.0], vec![0.0, 0.0]).unwrap_err();
        match err {
            MdpError::RowSum { state, action, sum } => {
                assert_eq!((state, action), (0, 0));
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_reward_out_of_range() {
        let err = Amdp::new(1, 1, vec![1.0], vec![1.5]).unwrap_err();
        assert!(matches!(err, MdpError::RewardRange { value, .. } if value == 1.5));
    }

    #[test]
    fn validate_rejects_negative_probability_and_bad_shapes() {
        let err = Amdp::new(2, 1, vec![-0.5, 1.5, 1.0, 0.0], vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, MdpError::Probability { next: 0, .. }));
        let err = Amdp::new(2, 1, vec![1.0, 0.0], vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, MdpError::Shape { what: "P", .. }));
        let err = Amdp::new(0, 1, vec![], vec![]).unwrap_err();
        assert!(matches!(err, MdpError::Empty { .. }));
    }

    #[test]
    fn validate_tolerates_rounding_within_1e12() {
        let p = vec![0.1, 0.2, 0.7, 0.1, 0.2, 0.7, 0.1, 0.2, 0.7];
        assert!(Amdp::new(3, 1, p, vec![0.0; 3]).is_ok());
        let off = vec![0.5, 0.5 + 2e-12];
        assert!(matches!(
            Amdp::new(2, 1, [off.clone(), off].concat(), vec![0.0; 2]),
            Err(MdpError::RowSum { .. })
        ));
    }

    #[test]
    fn nested_constructor_matches_flat() {
        let nested = Amdp::from_nested(
            &[vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            &[vec![1.0], vec![0.0]],
        )
        .unwrap();
        assert_eq!(nested, cycle2());
        assert_eq!(nested.kernel_nested()[1][0], vec![1.0, 0.0]);
        assert_eq!(nested.reward_nested(), vec![vec![1.0], vec![0.0]]);
    }

    #[test]
    fn greedy_policy_examples() {
        let q = QTable::from_flat(1, 2, vec![0.1, 0.9]);
        assert_eq!(greedy_policy(&q).action, vec![1]);
        let q = QTable::from_flat(1, 2, vec![0.5, 0.5]);
        assert_eq!(greedy_policy(&q).action, vec![0]);
        let q = QTable::zeros(4, 3);
        assert_eq!(greedy_policy(&q).action, vec![0; 4]);
    }

    #[test]
    fn value_of_examples() {
        let q = QTable::from_flat(1, 2, vec![0.2, 0.8]);
        assert_eq!(value_of(&q).v, vec![0.8]);
        assert_eq!(value_of(&QTable::zeros(3, 2)).v, vec![0.0; 3]);
        // Normalized discounted Q of the 2-cycle at gamma = 0.9: one action, so V = Q.
        let g = 0.9;
        let q = QTable::from_flat(2, 1, vec![1.0 / (1.0 + g), g / (1.0 + g)]);
        assert_eq!(value_of(&q).v, q.as_slice());
    }

    #[test]
    fn span_norm_examples() {
        assert_eq!(span_norm(&VTable::new(vec![3.0, 3.0, 3.0])), 0.0);
        assert_eq!(span_norm(&VTable::new(vec![0.25, -0.25])), 0.5);
    }

    #[test]
    fn inf_norm_gap_examples() {
        assert_eq!(inf_norm_gap(&QTable::filled(2, 2, 0.5), 0.5), 0.0);
        let q = QTable::from_flat(1, 2, vec![0.4, 0.7]);
        assert!((inf_norm_gap(&q, 0.5) - 0.2).abs() < 1e-15);
        let g = 0.9;
        let q = QTable::from_flat(2, 1, vec![1.0 / (1.0 + g), g / (1.0 + g)]);
        let expected = (1.0 / (1.0 + g) - 0.5_f64).abs();
        assert!((inf_norm_gap(&q, 0.5) - expected).abs() < 1e-15);
        assert!((expected - 0.026_315_789_473_684_2).abs() < 1e-15);
    }

    #[test]
    fn induced_chain_examples() {
        let chain = induced_chain(&single_state(0.7), &DeterministicPolicy::new(vec![0]));
        assert_eq!(chain.transition, vec![1.0]);
        assert_eq!(chain.reward, vec![0.7]);
        let chain = induced_chain(&cycle2(), &DeterministicPolicy::new(vec![0, 0]));
        assert_eq!(chain.transition, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(chain.reward, vec![1.0, 0.0]);
    }

    #[test]
    fn induced_chain_rows_copy_kernel_rows() {
        let p = vec![
            0.2, 0.3, 0.5, 0.1, 0.1, 0.8, //
            1.0, 0.0, 0.0, 0.3, 0.3, 0.4, //
            0.6, 0.2, 0.2, 0.0, 0.5, 0.5,
        ];
        let mdp = Amdp::new(3, 2, p, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let pi = DeterministicPolicy::new(vec![1, 0, 1]);
        let chain = induced_chain(&mdp, &pi);
        for s in 0..3 {
            assert_eq!(chain.row(s), mdp.transition(s, pi.action[s]));
            assert_eq!(chain.reward[s], mdp.reward(s, pi.action[s]));
            assert!((chain.row(s).iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOLERANCE);
        }
    }

    proptest! {
        #[test]
        fn greedy_action_attains_value(
            (s_n, a_n, vals) in (1usize..6, 1usize..5)
                .prop_flat_map(|(s, a)| (Just(s), Just(a), prop::collection::vec(-1.0f64..1.0, s * a)))
        ) {
            let q = QTable::from_flat(s_n, a_n, vals);
            let pi = greedy_policy(&q);
            let v = value_of(&q);
            for s in 0..s_n {
                prop_assert_eq!(q.get(s, pi.action[s]), v.v[s]);
            }
        }

        #[test]
        fn span_is_shift_invariant(
            xs in prop::collection::vec(-10.0f64..10.0, 1..10),
            c in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let a = span_norm(&VTable::new(xs));
            let b = span_norm(&VTable::new(shifted));
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}
