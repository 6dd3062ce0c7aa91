//! Instance generators.
//!
//! Generator strings: `cycle2`, `ring:S:slip`, `dirichlet:S:A:concentration`.

use std::fmt;
use std::str::FromStr;

use avgq_core::Amdp;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Rows drawn from a symmetric Dirichlet, rewards uniform on `[0, 1)`.
    RandomDirichlet {
        states: usize,
        actions: usize,
        concentration: f64,
    },
    /// Directed cycle with two actions. Action 0 advances with probability
    /// `1 - slip`, action 1 with `1 - 2 slip`; otherwise the state is kept.
    /// Reward 1 at state 0.
    Ring { states: usize, slip: f64 },
    /// Two states that swap deterministically, rewards `(1, 0)`.
    Cycle2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Only the Dirichlet generator is random.
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RandomDirichlet {
                states,
                actions,
                concentration,
            } => write!(f, "dirichlet:{states}:{actions}:{concentration}"),
            Self::Ring { states, slip } => write!(f, "ring:{states}:{slip}"),
            Self::Cycle2 => f.write_str("cycle2"),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::Config(format!("unrecognised generator `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let kind = match parts.as_slice() {
            ["cycle2"] => Self::Cycle2,
            ["ring", n, slip] => Self::Ring {
                states: n.parse().map_err(|_| bad())?,
                slip: slip.parse().map_err(|_| bad())?,
            },
            ["dirichlet", n, a, c] => Self::RandomDirichlet {
                states: n.parse().map_err(|_| bad())?,
                actions: a.parse().map_err(|_| bad())?,
                concentration: c.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        kind.check()?;
        Ok(kind)
    }
}

impl GeneratorKind {
    fn check(&self) -> Result<(), HarnessError> {
        let ok = match *self {
            Self::RandomDirichlet {
                states,
                actions,
                concentration,
            } => states > 0 && actions > 0 && concentration > 0.0 && concentration.is_finite(),
            Self::Ring { states, slip } => states > 0 && (0.0..=1.0).contains(&slip),
            Self::Cycle2 => true,
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("invalid generator parameters: {self}")))
        }
    }
}

pub fn generate_mdp(spec: &GeneratorSpec) -> Result<Amdp, HarnessError> {
    spec.kind.check()?;
    let mdp = match spec.kind {
        GeneratorKind::Cycle2 => Amdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0])?,
        GeneratorKind::Ring { states, slip } => ring(states, slip)?,
        GeneratorKind::RandomDirichlet {
            states,
            actions,
            concentration,
        } => dirichlet(states, actions, concentration, spec.seed)?,
    };
    Ok(mdp)
}

fn ring(n: usize, slip: f64) -> Result<Amdp, HarnessError> {
    let mut kernel = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    for s in 0..n {
        for (a, stay) in [slip, (2.0 * slip).min(1.0)].into_iter().enumerate() {
            let row = &mut kernel[(s * 2 + a) * n..(s * 2 + a + 1) * n];
            row[(s + 1) % n] += 1.0 - stay;
            row[s] += stay;
        }
    }
    reward[0] = 1.0;
    reward[1] = 1.0;
    Ok(Amdp::new(n, 2, kernel, reward)?)
}

fn dirichlet(n: usize, actions: usize, alpha: f64, seed: u64) -> Result<Amdp, HarnessError> {
    let mut rng = StdRng::seed_from_u64(seed);
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| HarnessError::Config(format!("concentration {alpha}: {e}")))?;
    let mut kernel = Vec::with_capacity(n * actions * n);
    for _ in 0..n * actions {
        let mut row: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
            // Put the rounding residue on the largest entry so the row sums to 1.
            let residue = 1.0 - row.iter().sum::<f64>();
            let big = (0..n)
                .max_by(|&i, &j| row[i].total_cmp(&row[j]))
                .expect("n > 0");
            row[big] += residue;
        } else {
            // Every gamma draw underflowed (tiny concentration): degenerate to a point mass.
            row[rng.random_range(0..n)] = 1.0;
        }
        kernel.extend(row);
    }
    let reward = (0..n * actions).map(|_| rng.random::<f64>()).collect();
    Ok(Amdp::new(n, actions, kernel, reward)?)
}
