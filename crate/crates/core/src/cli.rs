//! Command-line entry point.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::basisgen::{generate_basis, BasisGenConfig, BasisGenReport, SolverKind};
use crate::error::{Error, Result};
use crate::fomdp::{parse_domain_with, parse_instance, FomdpModel, Instance, LinearValueFunction};
use crate::logic::Reasoner;
use crate::oracle::{compare, instantiate, rollout, value_iteration, GroundMDP, InstantiateOptions};
use crate::solvers::extract_policy;
use crate::unidecomp::{build_generic_q, make_generic_goal, select_action, GenericQSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "fomdp", version, about = "First-order MDP solver")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Objects per type for bounded consistency checks.
    #[arg(long, global = true, default_value_t = 3)]
    bound: usize,
    /// Output directory for CSVs and dumps.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Record wall-clock times in CSVs (makes them nondeterministic).
    #[arg(long, global = true)]
    timing: bool,
    /// Seed for rollouts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Foalp,
    Foapi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Optimal policy of the ground MDP.
    Vi,
    /// Greedy policy of the first-order solution.
    Greedy,
    /// Per-goal decomposition of a universal reward.
    Decomposed,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    domain: PathBuf,
    #[arg(long, value_enum, default_value = "foalp")]
    solver: SolverArg,
    /// Discount override.
    #[arg(long)]
    gamma: Option<f64>,
    /// Value and weight-discard threshold.
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// Basis-generation iteration limit.
    #[arg(long = "iters", short = 'n', default_value_t = 3)]
    iters: usize,
    /// Solve the generic-goal model of a universal reward.
    #[arg(long)]
    generic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a domain (and optionally an instance).
    Check {
        domain: PathBuf,
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Generate a basis and solve; writes weights and statistics.
    Solve(SolveArgs),
    /// Run basis generation only; writes the per-iteration log.
    Genbasis(SolveArgs),
    /// Choose an action for a ground state by goal decomposition.
    Act {
        #[command(flatten)]
        solve: SolveArgs,
        instance: PathBuf,
        /// State in instance syntax; the instance's initial state by default.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Simulate a policy on the instance's ground MDP.
    Rollout {
        #[command(flatten)]
        solve: SolveArgs,
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "vi")]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
    },
    /// Compare the first-order solution with the ground MDP.
    OracleCompare {
        #[command(flatten)]
        solve: SolveArgs,
        instance: PathBuf,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                EXIT_SOLVER
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Error::Model(format!("{}: {e}", p.display())))
}

fn write(cli: &Cli, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    fs::write(cli.out.join(name), text)?;
    Ok(())
}

fn load_model(cli: &Cli, a: &SolveArgs) -> Result<FomdpModel> {
    let mut m = parse_domain_with(&read(&a.domain)?, Reasoner::with_bound(cli.bound))?;
    if let Some(g) = a.gamma {
        m = m.with_discount(g);
    }
    m.validate()?;
    Ok(m)
}

fn gen_config(cli: &Cli, a: &SolveArgs) -> BasisGenConfig {
    let mut cfg = BasisGenConfig {
        tau: a.tau,
        max_iters: a.iters.max(1),
        solver: match a.solver {
            SolverArg::Foalp => SolverKind::Foalp,
            SolverArg::Foapi => SolverKind::Foapi,
        },
        ..Default::default()
    };
    cfg.solve.folp.timing = cli.timing;
    cfg
}

fn run_genbasis(cli: &Cli, model: &FomdpModel, a: &SolveArgs) -> Result<BasisGenReport> {
    generate_basis(model, &gen_config(cli, a)).map_err(|f| {
        let _ = write(cli, "genbasis.csv", &gen_csv(&f.iterations));
        f.error
    })
}

fn gen_csv(rows: &[crate::basisgen::GenIter]) -> String {
    BasisGenReport {
        lvf: LinearValueFunction::default(),
        solve: Default::default(),
        iterations: rows.to_vec(),
        ledger: Default::default(),
        solver_calls: rows.len(),
    }
    .csv()
}

fn solve_model(cli: &Cli, a: &SolveArgs) -> Result<(FomdpModel, BasisGenReport)> {
    let model = load_model(cli, a)?;
    let model = if a.generic { make_generic_goal(&model)?.0 } else { model };
    let rep = run_genbasis(cli, &model, a)?;
    Ok((model, rep))
}

fn generic_q(cli: &Cli, a: &SolveArgs) -> Result<(FomdpModel, GenericQSet)> {
    let model = load_model(cli, a)?;
    let (g, goal) = make_generic_goal(&model)?;
    let rep = run_genbasis(cli, &g, a)?;
    let q = build_generic_q(&g, &rep.lvf, &goal)?;
    Ok((model, q))
}

fn load_instance(model: &FomdpModel, p: &Path) -> Result<Instance> {
    parse_instance(&read(p)?, model)
}

fn ground(model: &FomdpModel, inst: &Instance) -> Result<GroundMDP> {
    instantiate(model, inst, InstantiateOptions::default())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Command::Check { domain, instance } => {
            let model = parse_domain_with(&read(domain)?, Reasoner::with_bound(cli.bound))?;
            model.validate()?;
            let mut summary = format!(
                "domain {}: {} templates, {} axioms, discount {}\n",
                model.name,
                model.templates.len(),
                model.theory.ssas.len(),
                model.discount
            );
            if let Some(p) = instance {
                let inst = load_instance(&model, p)?;
                let _ = writeln!(summary, "instance: {} atoms, {} goals", inst.init.atoms.len(), inst.goals.len());
            }
            print!("{summary}");
            Ok(())
        }
        Command::Solve(a) => {
            let (_, rep) = solve_model(cli, a)?;
            write(cli, "weights.tsv", &rep.lvf.dump())?;
            write(cli, "stats.csv", &crate::folp::stats_csv(&rep.solve.stats))?;
            write(cli, "solve.csv", &rep.solve.csv())?;
            print!("{}", rep.lvf.dump());
            Ok(())
        }
        Command::Genbasis(a) => {
            let (_, rep) = solve_model(cli, a)?;
            write(cli, "genbasis.csv", &rep.csv())?;
            write(cli, "weights.tsv", &rep.lvf.dump())?;
            print!("{}", rep.csv());
            Ok(())
        }
        Command::Act { solve, instance, state } => {
            let (model, q) = generic_q(cli, solve)?;
            let inst = load_instance(&model, instance)?;
            let s = match state {
                Some(p) => load_instance(&model, p)?.init,
                None => inst.init.clone(),
            };
            let sel = select_action(&q, &inst.goals, &s)?;
            write(cli, "act.csv", &sel.csv())?;
            println!("{}\t{:.9}", sel.action, sel.score);
            Ok(())
        }
        Command::Rollout {
            solve,
            instance,
            policy,
            episodes,
            horizon,
        } => {
            let model = load_model(cli, solve)?;
            let inst = load_instance(&model, instance)?;
            let m = ground(&model, &inst)?;
            let pol: Vec<usize> = match policy {
                PolicyArg::Vi => value_iteration(&m, 1e-9).policy,
                PolicyArg::Greedy => {
                    let rep = run_genbasis(cli, &model, solve)?;
                    let p = extract_policy(&model, &rep.lvf)?;
                    state_policy(&m, |s| Ok(p.action_at(s)?.map(|x| x.0)))?
                }
                PolicyArg::Decomposed => {
                    let (_, q) = generic_q(cli, solve)?;
                    state_policy(&m, |s| Ok(Some(select_action(&q, &inst.goals, s)?.action)))?
                }
            };
            let r = rollout(&m, &pol, *horizon, *episodes, cli.seed);
            let csv = format!(
                "metric,value\nmean,{:.9}\nstderr,{:.9}\nepisodes,{}\n",
                r.mean, r.stderr, r.episodes
            );
            write(cli, "rollout.csv", &csv)?;
            print!("{csv}");
            Ok(())
        }
        Command::OracleCompare { solve, instance } => {
            let (model, rep) = solve_model(cli, solve)?;
            let inst = load_instance(&model, instance)?;
            let m = ground(&model, &inst)?;
            let v = value_iteration(&m, 1e-9);
            let p = extract_policy(&model, &rep.lvf)?;
            let pol = state_policy(&m, |s| Ok(p.action_at(s)?.map(|x| x.0)))?;
            let c = compare(&rep.lvf, &m, &v, Some(&pol))?;
            write(cli, "compare.csv", &c.csv())?;
            print!("{}", c.csv());
            Ok(())
        }
    }
}

/// Index of the chosen action in every state of the ground MDP.
fn state_policy(
    m: &GroundMDP,
    choose: impl Fn(&crate::logic::GroundState) -> Result<Option<crate::logic::GroundAction>>,
) -> Result<Vec<usize>> {
    m.states
        .iter()
        .map(|s| {
            let a = choose(s)?.ok_or_else(|| Error::PartitionViolation(format!("no policy partition holds in {s}")))?;
            m.action_index(&a)
                .ok_or_else(|| Error::Model(format!("action {a} is not in the ground MDP")))
        })
        .collect()
}
