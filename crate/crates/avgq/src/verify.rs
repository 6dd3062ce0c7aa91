//! Property suite behind `avgq verify`.
//!
//! Each check reports the worst measured value against its limit. A check
//! passes when `measured <= limit`.

use std::fmt;

use avgq_core::oracle::{average_residual, bundle_from_solution, DEFAULT_MAX_ITERS};
use avgq_core::{
    epoch_plan, run_fed, run_single, solve_average, solve_discounted, Amdp, FedOptions, GainBias,
    ScheduleConfig, ScheduleKind, Sequential,
};

use crate::error::Result;
use crate::generate::{generate_mdp, GeneratorKind, GeneratorSpec};

pub const BATTERY_SIZE: usize = 50;
pub const GAP_GAMMAS: [f64; 3] = [0.9, 0.99, 0.999];

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: &'static str,
    pub measured: f64,
    pub limit: f64,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.measured <= self.limit
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} worst={:.3e} limit={:.3e} slack={:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.limit,
            self.limit - self.measured
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Test hook: adds this amount to `eta_1` inside the weighted sum (but not
    /// the product) of the telescoping identity.
    pub perturb_eta: Option<f64>,
}

/// 50 Dirichlet instances with `2 <= S <= 8` and `1 <= A <= 4`.
pub fn dirichlet_battery() -> Vec<Amdp> {
    (0..BATTERY_SIZE)
        .map(|i| {
            let kind = GeneratorKind::RandomDirichlet {
                states: 2 + i % 7,
                actions: 1 + (i / 7) % 4,
                concentration: 1.0,
            };
            generate_mdp(&GeneratorSpec::new(kind, i as u64)).expect("battery parameters are valid")
        })
        .collect()
}

pub fn check_oracle_residuals(battery: &[Amdp], solutions: &[GainBias]) -> PropertyReport {
    let worst = battery
        .iter()
        .zip(solutions)
        .map(|(mdp, sol)| average_residual(mdp, sol.gain, sol.bias.as_slice()))
        .fold(0.0, f64::max);
    PropertyReport {
        name: "oracle_residual",
        measured: worst,
        limit: 1e-8,
    }
}

fn gap_ratio(gap: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        gap / bound
    } else if gap <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Worst `|X_gamma*(s,a) - J*| / (4 (1-gamma) span)` over the Q entries and over
/// the V entries respectively.
pub fn discount_gap_ratios(battery: &[Amdp], solutions: &[GainBias]) -> Result<(f64, f64)> {
    let (mut worst_q, mut worst_v) = (0.0f64, 0.0f64);
    for (mdp, sol) in battery.iter().zip(solutions) {
        for gamma in GAP_GAMMAS {
            let disc = solve_discounted(mdp, gamma, 1e-13, DEFAULT_MAX_ITERS)?;
            let bound = 4.0 * (1.0 - gamma) * sol.span;
            for &x in disc.q.as_slice() {
                worst_q = worst_q.max(gap_ratio((x - sol.gain).abs(), bound));
            }
            for &x in disc.v.as_slice() {
                worst_v = worst_v.max(gap_ratio((x - sol.gain).abs(), bound));
            }
        }
    }
    Ok((worst_q, worst_v))
}

fn group1_configs() -> [ScheduleConfig; 2] {
    [
        ScheduleConfig::new(ScheduleKind::SingleGroup1, 2, 2),
        ScheduleConfig::new(ScheduleKind::FedGroup1, 2, 2).with_agents(4),
    ]
}

fn group1_rates(cfg: &ScheduleConfig, t_max: u64) -> Vec<f64> {
    let plan = epoch_plan(cfg, 1).expect("default group-1 constants are feasible");
    (1..=t_max).map(|t| plan.learning_rate(t)).collect()
}

/// `sum_i eta_i prod_{j>i} (1 - eta_j) + prod_j (1 - eta_j) = 1` for every `t <= t_max`.
pub fn check_lr_telescoping(t_max: u64, perturb: Option<f64>) -> PropertyReport {
    let mut worst = 0.0f64;
    for cfg in group1_configs() {
        let etas = group1_rates(&cfg, t_max);
        for t in 1..=etas.len() {
            let mut tail = 1.0;
            let mut total = 0.0;
            for i in (0..t).rev() {
                let weight_eta = if i == 0 { etas[i] + perturb.unwrap_or(0.0) } else { etas[i] };
                total += weight_eta * tail;
                tail *= 1.0 - etas[i];
            }
            worst = worst.max((total + tail - 1.0).abs());
        }
    }
    PropertyReport {
        name: "lr_telescoping",
        measured: worst,
        limit: 1e-9,
    }
}

/// Worst `eta_i prod_{j=i+1}^t (1 - eta_j) / eta_t` over `i <= t <= t_max`.
pub fn check_lr_domination(t_max: u64) -> PropertyReport {
    let mut worst = 0.0f64;
    for cfg in group1_configs() {
        let etas = group1_rates(&cfg, t_max);
        for t in 1..=etas.len() {
            let mut tail = 1.0;
            for i in (0..t).rev() {
                worst = worst.max(etas[i] * tail / etas[t - 1]);
                tail *= 1.0 - etas[i];
            }
        }
    }
    PropertyReport {
        name: "lr_domination",
        measured: worst,
        limit: 1.0 + 1e-12,
    }
}

/// Shift identity, value consistency and the sup norm of the centred bias.
pub fn check_value_identities(battery: &[Amdp], solutions: &[GainBias]) -> [PropertyReport; 3] {
    let (mut shift, mut consistency, mut norm) = (0.0f64, 0.0f64, 0.0f64);
    for (mdp, sol) in battery.iter().zip(solutions) {
        let bundles: Vec<_> = (1..=21).map(|k| bundle_from_solution(mdp, sol, k)).collect();
        for pair in bundles.windows(2) {
            let (b, next) = (&pair[0], &pair[1]);
            let kf = b.k as f64;
            for s in 0..mdp.states() {
                let mut best = f64::NEG_INFINITY;
                for a in 0..mdp.actions() {
                    let q = b.q_k_next.get(s, a);
                    shift = shift.max((q - (b.gain + b.q_star.get(s, a) / (kf + 1.0))).abs());
                    best = best.max(q);
                }
                consistency = consistency.max((best - next.v_k.as_slice()[s]).abs());
            }
        }
        let sup = bundles[0].v_star.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        norm = norm.max((sup - sol.span).abs());
    }
    [
        PropertyReport {
            name: "q_shift_identity",
            measured: shift,
            limit: 1e-10,
        },
        PropertyReport {
            name: "q_value_consistency",
            measured: consistency,
            limit: 1e-12,
        },
        PropertyReport {
            name: "v_star_norm_equals_span",
            measured: norm,
            limit: 1e-10,
        },
    ]
}

/// Largest entry difference between one-agent group-2 federated runs and the single-agent runs.
pub fn check_fed_degeneracy() -> Result<PropertyReport> {
    let mut worst = 0.0f64;
    for spec in ["cycle2", "dirichlet:3:2:1"] {
        let mdp = generate_mdp(&GeneratorSpec::new(spec.parse()?, 3))?;
        let (s, a) = (mdp.states(), mdp.actions());
        let single = ScheduleConfig::new(ScheduleKind::SingleGroup2, s, a).desk();
        let fed = ScheduleConfig::new(ScheduleKind::FedGroup2, s, a).desk();
        let (q1, _) = run_single(&mdp, &single, 4, 9, None)?;
        let out = run_fed(&mdp, &fed, 4, 9, FedOptions::default(), &Sequential, None)?;
        for (x, y) in q1.as_slice().iter().zip(out.q.as_slice()) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(PropertyReport {
        name: "fed_one_agent_degeneracy",
        measured: worst,
        limit: 0.0,
    })
}

pub fn verify_suite(opts: VerifyOptions) -> Result<Vec<PropertyReport>> {
    let battery = dirichlet_battery();
    let solutions = battery
        .iter()
        .map(|m| solve_average(m, 1e-13, DEFAULT_MAX_ITERS))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (q_ratio, v_ratio) = discount_gap_ratios(&battery, &solutions)?;
    let mut out = vec![
        check_oracle_residuals(&battery, &solutions),
        PropertyReport {
            name: "discount_gap_q_ratio",
            measured: q_ratio,
            limit: 1.0,
        },
        PropertyReport {
            name: "discount_gap_v_ratio",
            measured: v_ratio,
            limit: 1.0,
        },
        check_lr_telescoping(10_000, opts.perturb_eta),
        check_lr_domination(1_000),
    ];
    out.extend(check_value_identities(&battery, &solutions));
    out.push(check_fed_degeneracy()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_breaks_the_identity() {
        assert!(check_lr_telescoping(50, None).passed());
        let broken = check_lr_telescoping(50, Some(0.1));
        assert!(!broken.passed());
        assert!((broken.measured - 0.1).abs() < 1e-12);
    }

    #[test]
    fn battery_shapes() {
        let b = dirichlet_battery();
        assert_eq!(b.len(), BATTERY_SIZE);
        assert!(b.iter().all(|m| (2..=8).contains(&m.states()) && (1..=4).contains(&m.actions())));
    }
}
