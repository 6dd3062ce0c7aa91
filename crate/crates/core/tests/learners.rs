use avgq_core::{
    epoch_plan, historical_index, run_fed, value_of, AgentExecutor, Amdp, FedOptions,
    GenerativeModel, QTable, ScheduleConfig, ScheduleKind, Sequential,
};

fn two_by_two() -> Amdp {
    Amdp::new(
        2,
        2,
        vec![0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.9, 0.1],
        vec![0.2, 0.9, 0.4, 0.0],
    )
    .unwrap()
}

/// Runs agents from last to first.
struct Reversed;

impl AgentExecutor for Reversed {
    fn run_agents(&self, agents: &mut [QTable], work: &(dyn Fn(usize, &mut QTable) + Sync)) {
        for (m, q) in agents.iter_mut().enumerate().rev() {
            work(m, q);
        }
    }
}

#[test]
fn agent_order_does_not_matter() {
    let mdp = two_by_two();
    let cfg = ScheduleConfig::new(ScheduleKind::FedGroup1, 2, 2)
        .with_agents(3)
        .with_c_n(2500.0);
    let a = run_fed(&mdp, &cfg, 2, 5, FedOptions::default(), &Sequential, None).unwrap();
    let b = run_fed(&mdp, &cfg, 2, 5, FedOptions::default(), &Reversed, None).unwrap();
    assert_eq!(a, b);
}

/// Straight-line federated group-1 epoch that looks up its bootstrap value
/// through the historical index instead of tracking it incrementally.
#[test]
fn federated_epoch_follows_the_historical_index() {
    let mdp = two_by_two();
    let m_agents = 2;
    let cfg = ScheduleConfig::new(ScheduleKind::FedGroup1, 2, 2)
        .with_agents(m_agents)
        .with_c_n(2500.0);
    let plan = epoch_plan(&cfg, 1).unwrap();
    let model = GenerativeModel::new(&mdp);
    let seed = 21;

    let mut locals = vec![vec![0.0; 4]; m_agents];
    // Global tables after each aggregation, keyed by iteration.
    let mut snapshots: Vec<(u64, Vec<f64>)> = vec![(0, vec![0.0; 4])];
    let mut next = vec![0; 4];
    for t in 1..=plan.n_k {
        let iota = historical_index(&cfg, 1, t, &plan.comm_set).unwrap();
        assert_eq!(iota.epoch, 1);
        let global = &snapshots.iter().rev().find(|(j, _)| *j == iota.iteration).unwrap().1;
        let v = value_of(&QTable::from_flat(2, 2, global.clone()));
        let eta = plan.learning_rate(t);
        for (m, q) in locals.iter_mut().enumerate() {
            model.draw_next_states(seed, m as u64, 1, t, &mut next);
            for i in 0..4 {
                q[i] = (1.0 - eta) * q[i]
                    + eta * ((1.0 - plan.gamma_k) * mdp.rewards()[i] + plan.gamma_k * v.v[next[i]]);
            }
        }
        for _ in plan.comm_set.iter().filter(|&&c| c == t) {
            let mean: Vec<f64> = (0..4).map(|i| (locals[0][i] + locals[1][i]) / 2.0).collect();
            for q in &mut locals {
                q.copy_from_slice(&mean);
            }
            snapshots.push((t, mean));
        }
    }
    let out = run_fed(&mdp, &cfg, 1, seed, FedOptions::default(), &Sequential, None).unwrap();
    assert_eq!(out.q.as_slice(), snapshots.last().unwrap().1.as_slice());
    assert_eq!(out.record.last().unwrap().comm_rounds_cum, plan.comm_set.len() as u64);
}

#[test]
fn policy_learning_counts_repeated_rounds() {
    let mdp = two_by_two();
    let cfg = ScheduleConfig::new(ScheduleKind::PolicyLearning, 2, 2)
        .with_agents(2)
        .with_c_n(100.0);
    let plans: Vec<_> = (1..=3).map(|k| epoch_plan(&cfg, k).unwrap()).collect();
    assert!(plans.iter().any(|p| p.comm_set.windows(2).any(|w| w[0] == w[1])));
    let out = run_fed(&mdp, &cfg, 3, 0, FedOptions::default(), &Sequential, None).unwrap();
    let expected: u64 = plans.iter().map(|p| p.comm_set.len() as u64).sum();
    assert_eq!(out.record.last().unwrap().comm_rounds_cum, expected);
    assert!(out.record.is_consistent());
    assert_eq!(out.policy.action.len(), 2);
}
