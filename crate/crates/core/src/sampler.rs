//! Counter-based generative model.
//!
//! Every next-state draw is `F^{-1}_{P(.|s,a)}(u)` where `u` is a uniform
//! derived by hashing the full key `(seed, agent, epoch, iteration, state,
//! action)`. No generator state is carried between draws, so the result does
//! not depend on call order or on which thread performs the draw.

use alloc::vec::Vec;

use crate::mdp::Amdp;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN) ^ word)
}

#[inline]
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Identifies one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleKey {
    pub seed: u64,
    pub agent: u64,
    pub epoch: u64,
    pub iteration: u64,
    pub state: u64,
    pub action: u64,
}

impl SampleKey {
    #[inline]
    fn stream_prefix(seed: u64, agent: u64, epoch: u64, iteration: u64) -> u64 {
        let h = absorb(mix64(seed ^ 0x5851_f42d_4c95_7f2d), agent);
        absorb(absorb(h, epoch), iteration)
    }

    /// Uniform draw in `[0, 1)` for this key.
    pub fn uniform(&self) -> f64 {
        let prefix = Self::stream_prefix(self.seed, self.agent, self.epoch, self.iteration);
        to_unit(absorb(absorb(prefix, self.state), self.action))
    }
}

/// Smallest `j` with `u < cdf[j]`; falls back to the last state with positive mass.
#[inline]
pub fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    let j = cdf.partition_point(|&c| c <= u);
    if j < cdf.len() {
        j
    } else {
        // Rounding left the final cumulative sum just below u.
        let mut last = cdf.len() - 1;
        while last > 0 && cdf[last] == cdf[last - 1] {
            last -= 1;
        }
        last
    }
}

/// Sampling tables precomputed from a model.
#[derive(Debug, Clone)]
pub struct GenerativeModel {
    states: usize,
    actions: usize,
    cdf: Vec<f64>,
    /// `Some(j)` when `P(.|s,a)` is a point mass on `j`; the draw is then `j` for every `u`.
    point_mass: Vec<Option<usize>>,
}

impl GenerativeModel {
    pub fn new(mdp: &Amdp) -> Self {
        let (s_n, a_n) = (mdp.states(), mdp.actions());
        let mut cdf = Vec::with_capacity(s_n * a_n * s_n);
        let mut point_mass = Vec::with_capacity(s_n * a_n);
        for s in 0..s_n {
            for a in 0..a_n {
                let row = mdp.transition(s, a);
                let mut acc = 0.0;
                for &p in row {
                    acc += p;
                    cdf.push(acc);
                }
                let mut support = row.iter().enumerate().filter(|(_, &p)| p > 0.0);
                point_mass.push(match (support.next(), support.next()) {
                    (Some((j, _)), None) => Some(j),
                    _ => None,
                });
            }
        }
        Self {
            states: s_n,
            actions: a_n,
            cdf,
            point_mass,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    fn row_cdf(&self, pair: usize) -> &[f64] {
        &self.cdf[pair * self.states..(pair + 1) * self.states]
    }

    /// Next state for one `(s, a)` given an explicit uniform.
    pub fn next_state_for(&self, s: usize, a: usize, u: f64) -> usize {
        let pair = s * self.actions + a;
        match self.point_mass[pair] {
            Some(j) => j,
            None => inverse_cdf(self.row_cdf(pair), u),
        }
    }

    /// Fills `out[s * A + a]` with a draw from `P(.|s,a)` for every pair.
    pub fn draw_next_states(&self, seed: u64, agent: u64, epoch: u64, iteration: u64, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.states * self.actions);
        let prefix = SampleKey::stream_prefix(seed, agent, epoch, iteration);
        for s in 0..self.states {
            let hs = absorb(prefix, s as u64);
            for a in 0..self.actions {
                let pair = s * self.actions + a;
                out[pair] = match self.point_mass[pair] {
                    Some(j) => j,
                    None => inverse_cdf(self.row_cdf(pair), to_unit(absorb(hs, a as u64))),
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use std::collections::HashSet;

    fn model(rows: &[&[f64]]) -> (Amdp, GenerativeModel) {
        let s_n = rows[0].len();
        let a_n = rows.len() / s_n;
        let p: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let mdp = Amdp::new(s_n, a_n, p, vec![0.0; s_n * a_n]).unwrap();
        let gm = GenerativeModel::new(&mdp);
        (mdp, gm)
    }

    #[test]
    fn point_mass_rows_always_hit_their_atom() {
        let (_, gm) = model(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let mut out = vec![0; 2];
        for seed in 0..50 {
            gm.draw_next_states(seed, 0, 1, 1, &mut out);
            assert_eq!(out, vec![1, 0]);
        }
    }

    #[test]
    fn inverse_cdf_boundaries() {
        let (_, gm) = model(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(gm.next_state_for(0, 0, 0.49), 0);
        assert_eq!(gm.next_state_for(0, 0, 0.51), 1);
        assert_eq!(gm.next_state_for(0, 0, 0.5), 1);
        assert_eq!(gm.next_state_for(0, 0, 0.0), 0);
        // Zero-mass states are never selected, even at their boundary.
        assert_eq!(inverse_cdf(&[0.0, 0.0, 1.0], 0.0), 2);
        assert_eq!(inverse_cdf(&[0.3, 1.0 - 1e-16, 1.0 - 1e-16], 1.0 - 1e-17), 1);
    }

    #[test]
    fn empirical_frequencies_match_row() {
        let (_, gm) = model(&[&[0.2, 0.3, 0.5], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        let n = 100_000;
        let mut counts = [0usize; 3];
        let mut out = vec![0; 3];
        for t in 0..n {
            gm.draw_next_states(7, 0, 1, t, &mut out);
            counts[out[0]] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn draws_are_pure_functions_of_the_key() {
        let (_, gm) = model(&[&[0.25, 0.25, 0.5], &[0.1, 0.6, 0.3], &[0.3, 0.3, 0.4]]);
        let mut a = vec![0; 3];
        let mut b = vec![0; 3];
        gm.draw_next_states(3, 1, 2, 9, &mut a);
        // Interleave unrelated draws.
        gm.draw_next_states(4, 0, 0, 0, &mut b);
        gm.draw_next_states(3, 1, 2, 9, &mut b);
        assert_eq!(a, b);
        // The batched draw agrees with per-key uniforms.
        for (s, &drawn) in a.iter().enumerate() {
            let u = SampleKey {
                seed: 3,
                agent: 1,
                epoch: 2,
                iteration: 9,
                state: s as u64,
                action: 0,
            }
            .uniform();
            assert_eq!(drawn, gm.next_state_for(s, 0, u));
        }
    }

    #[test]
    fn key_fields_all_change_the_stream() {
        let base = SampleKey {
            seed: 1,
            agent: 0,
            epoch: 1,
            iteration: 1,
            state: 0,
            action: 0,
        };
        let variants = [
            SampleKey { seed: 2, ..base },
            SampleKey { agent: 1, ..base },
            SampleKey { epoch: 2, ..base },
            SampleKey { iteration: 2, ..base },
            SampleKey { state: 1, ..base },
            SampleKey { action: 1, ..base },
        ];
        let mut seen = HashSet::new();
        seen.insert(base.uniform().to_bits());
        for v in variants {
            assert!(seen.insert(v.uniform().to_bits()));
        }
    }

    #[test]
    fn agent_streams_are_uncorrelated() {
        let n = 50_000;
        let draws = |agent: u64| -> Vec<f64> {
            (0..n)
                .map(|t| {
                    SampleKey {
                        seed: 9,
                        agent,
                        epoch: 1,
                        iteration: t,
                        state: 0,
                        action: 0,
                    }
                    .uniform()
                })
                .collect()
        };
        let (x, y) = (draws(0), draws(1));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&x), mean(&y));
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n as f64;
        let corr = cov / (1.0 / 12.0);
        // Standard error of the sample correlation is about 1/sqrt(n).
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
        assert!((mx - 0.5).abs() < 0.01);
        assert!(x.iter().all(|u| (0.0..1.0).contains(u)));
    }
}
