use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avgq::exec::{pool, threads_from_env};
use avgq::experiment::read_metadata;
use avgq::io::{read_mdp, write_mdp};
use avgq::{
    generate_mdp, run_experiment, sweep_speedup, verify_suite, write_outputs, write_summary,
    Experiment, ExperimentConfig, GeneratorKind, GeneratorSpec, HarnessError, MdpSource, Result,
    VerifyOptions,
};
use avgq_core::oracle::{DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE};
use avgq_core::{solve_average, solve_discounted, ScheduleConfig, ScheduleKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avgq", version, about = "Average-reward Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model exactly and print gain, bias and span as JSON.
    Solve {
        mdp: PathBuf,
        /// Also solve the normalized discounted problem at this factor.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Write a generated instance to a model file.
    Generate {
        spec: String,
        #[arg(long, default_value_t = 0)]
        gen_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-agent learning (schedules sg1, sg2).
    RunSingle(RunArgs),
    /// Federated learning (schedules fg1, fg2).
    RunFed(RunArgs),
    /// Federated policy learning.
    RunPolicy(RunArgs),
    /// Repeat a run over several agent counts at equal per-agent budget.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        m_list: Vec<usize>,
    },
    /// Re-run the experiment recorded in a metadata file.
    Rerun {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the library's numerical properties.
    Verify {
        #[arg(long, hide = true)]
        perturb_eta: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    mdp: Option<PathBuf>,
    /// Generator: cycle2, ring:S:slip or dirichlet:S:A:concentration.
    #[arg(long)]
    gen: Option<String>,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    #[arg(long = "K")]
    epochs: usize,
    #[arg(long = "M", default_value_t = 1)]
    agents: usize,
    #[arg(long)]
    cn: Option<f64>,
    #[arg(long)]
    force_nk: Option<u64>,
    /// Floor the logarithmic factors at 1.
    #[arg(long)]
    desk: bool,
    #[arg(long, default_value_t = ScheduleConfig::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Exit with status 4 unless every seed reaches epsilon.
    #[arg(long, requires = "epsilon")]
    require_target: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long)]
    shared_stream: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, default_kind: ScheduleKind, allowed: &[ScheduleKind]) -> Result<ExperimentConfig> {
        let kind = self.schedule.unwrap_or(default_kind);
        if !allowed.contains(&kind) {
            return Err(HarnessError::Config(format!("schedule {kind} is not valid here")));
        }
        let source = match (&self.mdp, &self.gen) {
            (Some(path), _) => MdpSource::File { path: path.clone() },
            (None, Some(spec)) => MdpSource::Generator {
                spec: GeneratorSpec::new(spec.parse::<GeneratorKind>()?, self.gen_seed),
            },
            (None, None) => return Err(HarnessError::Config("give --mdp or --gen".into())),
        };
        let mdp = source.load()?;
        let mut schedule = ScheduleConfig::new(kind, mdp.states(), mdp.actions())
            .with_agents(self.agents)
            .with_delta(self.delta);
        if let Some(c) = self.cn {
            schedule = schedule.with_c_n(c);
        }
        if let Some(n) = self.force_nk {
            schedule = schedule.with_force_nk(n);
        }
        schedule.desk = self.desk;
        Ok(ExperimentConfig {
            source,
            schedule,
            epochs: self.epochs,
            seed: self.seed,
            seeds: self.seeds,
            epsilon: self.epsilon,
            shared_stream: self.shared_stream,
        })
    }
}

fn report(cfg: &ExperimentConfig, exp: &Experiment) {
    println!(
        "oracle gain={:.10} span={:.10} schedule={} K={} M={}",
        exp.oracle.gain, exp.oracle.span, cfg.schedule.kind, cfg.epochs, cfg.schedule.agents
    );
    for run in &exp.runs {
        let last = run.record.last().expect("records start with an initial row");
        println!(
            "seed {} err_inf={:.6e} samples_per_agent={} comm_rounds={} policy_gap={:.6e}{}",
            run.seed,
            last.err_inf.unwrap_or(f64::NAN),
            last.samples_per_agent,
            last.comm_rounds_cum,
            run.policy_gap,
            run.samples_to_epsilon
                .map(|n| format!(" samples_to_eps={n}"))
                .unwrap_or_default()
        );
    }
    println!(
        "median err_inf={:.6e} median policy_gap={:.6e} wall_clock={:.3}s",
        exp.median_final_error(),
        exp.median_policy_gap(),
        exp.wall_clock_secs
    );
}

fn run(cfg: &ExperimentConfig, out: Option<&Path>, require_target: bool) -> Result<()> {
    let exp = run_experiment(cfg)?;
    report(cfg, &exp);
    if let Some(dir) = out {
        write_outputs(dir, cfg, &exp)?;
    }
    if let (true, Some(eps)) = (require_target, cfg.epsilon) {
        let missed = exp.missed_target(eps);
        if missed > 0 {
            return Err(HarnessError::TargetNotMet {
                epsilon: eps,
                missed,
                seeds: exp.runs.len(),
            });
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    use ScheduleKind::*;
    match command {
        Command::Solve { mdp, gamma } => {
            let mdp = read_mdp(&mdp)?;
            let sol = solve_average(&mdp, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)?;
            let mut out = serde_json::json!({
                "gain": sol.gain,
                "span": sol.span,
                "bias": sol.bias.as_slice(),
                "residual": sol.residual,
                "iterations": sol.iterations,
            });
            if let Some(g) = gamma {
                let disc = solve_discounted(&mdp, g, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)?;
                out["discounted"] = serde_json::json!({
                    "gamma": g,
                    "q": disc.q.as_slice(),
                    "v": disc.v.as_slice(),
                });
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Generate { spec, gen_seed, out } => {
            let mdp = generate_mdp(&GeneratorSpec::new(spec.parse()?, gen_seed))?;
            write_mdp(&out, &mdp)
        }
        Command::RunSingle(args) => {
            let cfg = args.config(SingleGroup2, &[SingleGroup1, SingleGroup2])?;
            run(&cfg, args.out.as_deref(), args.require_target)
        }
        Command::RunFed(args) => {
            let cfg = args.config(FedGroup1, &[FedGroup1, FedGroup2])?;
            run(&cfg, args.out.as_deref(), args.require_target)
        }
        Command::RunPolicy(args) => {
            let cfg = args.config(PolicyLearning, &[PolicyLearning])?;
            run(&cfg, args.out.as_deref(), args.require_target)
        }
        Command::Sweep { run: args, m_list } => {
            let cfg = args.config(FedGroup1, &[FedGroup1, FedGroup2, PolicyLearning])?;
            let summary = sweep_speedup(&cfg, &m_list)?;
            println!("per-agent iterations T_K={}", summary.per_agent_iters);
            for r in &summary.rows {
                println!(
                    "M={} median_err={:.6e} iqr_err={:.6e} comm_rounds={}",
                    r.m, r.median_err, r.iqr_err, r.comm_rounds
                );
            }
            match summary.slope {
                Some(s) => println!("fitted slope of ln err vs ln(M T_K): {s:.4}"),
                None => println!("fitted slope unavailable"),
            }
            if let Some(dir) = &args.out {
                write_summary(dir, &summary)?;
            }
            Ok(())
        }
        Command::Rerun { dir, out } => {
            let meta = read_metadata(&dir)?;
            run(&meta.config, out.as_deref(), false)
        }
        Command::Verify { perturb_eta } => {
            let reports = verify_suite(VerifyOptions { perturb_eta })?;
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                return Err(HarnessError::PropertiesFailed(failed));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads_from_env()
        .and_then(pool)
        .and_then(|p| p.install(|| execute(cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
