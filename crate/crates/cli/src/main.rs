use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use mappop_core::bus::Bus;
use mappop_core::coordinator::{Budget, SolveOutcome};
use mappop_core::frontend::{parse_dir, FrontendError};
use mappop_core::harness::{
    parse_plan, rebuild_plan, run_corpus, run_task, satellite_suite, satellite_suite_seeded, task_name, to_csv,
    to_table, HarnessError, RunConfig,
};
use mappop_core::rpg::build_dis_rpg;
use mappop_core::task::MapTask;
use mappop_core::validator::{coupling_level, simulate, validate, Simulation};

const SOLVED: u8 = 0;
const FAILED: u8 = 1;
const BUDGET: u8 = 2;
const USAGE: u8 = 3;

/// Cooperative multi-agent partial-order planner.
#[derive(Parser, Debug)]
#[command(name = "mappop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for plan sampling and instance generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Refinements each agent proposes per goal.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Search nodes each refinement call may expand.
    #[arg(long, global = true)]
    node_budget: Option<usize>,
    /// Cap on coordination iterations.
    #[arg(long, global = true)]
    iters: Option<usize>,
    /// Wall-clock limit per task, in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Write the message trace here (a directory for `bench`).
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Run the agents' local work on a thread pool.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the task files.
    Parse { task: PathBuf },
    /// List each agent's ground actions.
    Ground { task: PathBuf },
    /// Build the distributed relaxed planning graph and print each agent's copy.
    Rpg { task: PathBuf },
    /// Plan, printing the plan file (or writing it to --out) and its metrics.
    Solve {
        task: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check a plan file against a task.
    Validate { task: PathBuf, plan: PathBuf },
    /// Solve every task directory below CORPUS and tabulate the results.
    Bench {
        corpus: PathBuf,
        /// Write the CSV here instead of printing it.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the n-agent satellite instance, one independent goal per agent.
    Generate {
        out: PathBuf,
        #[arg(long)]
        agents: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure { code: USAGE, message: message.to_string() }
    }
}

impl From<FrontendError> for Failure {
    fn from(e: FrontendError) -> Self {
        Failure::usage(e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Bus(b) => Failure { code: FAILED, message: format!("internal error: {b}") },
            other => Failure::usage(other),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(dir: &Path) -> Result<MapTask, Failure> {
    Ok(parse_dir(dir)?.build()?)
}

fn config(cli: &Cli) -> Result<RunConfig, Failure> {
    let d = RunConfig::default();
    let timeout = match cli.timeout {
        Some(t) if !(t > 0.0 && t.is_finite()) => return Err(Failure::usage("--timeout must be a positive number")),
        t => t.map(Duration::from_secs_f64),
    };
    let cfg = RunConfig {
        k: cli.k.unwrap_or(d.k),
        node_budget: cli.node_budget.unwrap_or(d.node_budget),
        iterations: cli.iters.unwrap_or(d.iterations),
        seed: cli.seed.unwrap_or(d.seed),
        trace: cli.trace.is_some(),
        timeout,
        parallel: cli.parallel,
    };
    cfg.check().map_err(Failure::usage)?;
    Ok(cfg)
}

fn outcome_code(o: &SolveOutcome) -> u8 {
    match o {
        SolveOutcome::Solution(_) => SOLVED,
        SolveOutcome::Unsolvable(_) => FAILED,
        SolveOutcome::BudgetExhausted(Budget::Iterations | Budget::Timeout) => BUDGET,
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Parse { task } => {
            let files = parse_dir(task)?;
            let t = files.build()?;
            println!(
                "ok: domain {}, {} agents, {} schemas, {} ground actions",
                files.domain.name,
                t.num_agents(),
                files.domain.actions.len(),
                t.actions().len()
            );
            Ok(SOLVED)
        }
        Command::Ground { task } => {
            let t = load(task)?;
            for (i, ag) in t.agents().iter().enumerate() {
                println!("agent {} ({} actions)", ag.name, ag.actions.len());
                for &id in &ag.actions {
                    let owners = t.action(id).owners.len();
                    let mark = if owners > 1 { format!("  shared by {owners}") } else { String::new() };
                    println!("  {}{}", t.action_label(id), mark);
                }
                if i + 1 < t.num_agents() {
                    println!();
                }
            }
            println!("coupling {:.1}%", coupling_level(&t));
            Ok(SOLVED)
        }
        Command::Rpg { task } => {
            let t = load(task)?;
            let mut bus = Bus::new(&t);
            let dis = build_dis_rpg(&t, &mut bus).map_err(|e| Failure { code: FAILED, message: e.to_string() })?;
            for (i, g) in dis.graphs.iter().enumerate() {
                println!("agent {}", t.agents()[i].name);
                print!("{}", g.dump(&t));
            }
            println!("rounds {}", dis.rounds);
            save_trace(cli, None, &t, &bus.into_trace())?;
            Ok(SOLVED)
        }
        Command::Solve { task, out } => {
            let t = load(task)?;
            let r = run_task(&t, &task_name(task), &cfg)?;
            save_trace(cli, None, &t, &r.report.trace)?;
            let Some(text) = &r.plan_text else {
                println!("{}", r.report.outcome);
                return Ok(outcome_code(&r.report.outcome));
            };
            let m = r.row.metrics.expect("solved rows carry metrics");
            let line = format!(
                "acts={} ts={} partics={} iterations={} time={:.3}s",
                m.acts, m.time_steps, m.participants, r.report.iterations, r.row.seconds
            );
            match out {
                Some(path) => {
                    write(path, text)?;
                    println!("{line}");
                }
                None => {
                    print!("{text}");
                    eprintln!("{line}");
                }
            }
            if !r.is_sound() {
                let v = r.validation.as_ref().map(|v| v.to_string()).unwrap_or_default();
                eprintln!("plan failed its own check\n{v}");
                return Ok(FAILED);
            }
            Ok(SOLVED)
        }
        Command::Validate { task, plan } => {
            let t = load(task)?;
            let text = fs::read_to_string(plan).map_err(|e| Failure::usage(format!("{}: {e}", plan.display())))?;
            let file = parse_plan(&text).map_err(|e| Failure::usage(format!("{}: {e}", plan.display())))?;
            let p = rebuild_plan(&t, &file).map_err(|e| Failure::usage(format!("{}: {e}", plan.display())))?;
            let report = validate(&p, &t);
            println!("{report}");
            let m = report.metrics;
            if let Some(c) = file.claimed.filter(|c| *c != m) {
                println!(
                    "footer claims acts={} ts={} partics={}, which does not match",
                    c.acts, c.time_steps, c.participants
                );
                return Ok(FAILED);
            }
            if !report.is_valid() {
                return Ok(FAILED);
            }
            match simulate(&p, &t, cfg.seed) {
                Simulation::Success { orders } => {
                    println!("executed {orders} sampled orders");
                    Ok(SOLVED)
                }
                Simulation::Failure { step, reason, .. } => {
                    println!("execution fails at step {}: {reason}", step.index());
                    Ok(FAILED)
                }
            }
        }
        Command::Bench { corpus, csv } => {
            let results = run_corpus(corpus, &cfg)?;
            let rows: Vec<_> = results.iter().map(|r| r.row.clone()).collect();
            if let Some(dir) = &cli.trace {
                fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
                for (path, r) in mappop_core::harness::corpus_tasks(corpus)?.iter().zip(&results) {
                    let t = load(path)?;
                    save_trace(cli, Some(&format!("{}.trace", task_name(path))), &t, &r.report.trace)?;
                }
            }
            match csv {
                Some(path) => write(path, &to_csv(&rows))?,
                None => println!("{}", to_csv(&rows)),
            }
            print!("{}", to_table(&rows));
            let unsound = results.iter().filter(|r| r.report.plan().is_some() && !r.is_sound()).count();
            Ok(if unsound > 0 { FAILED } else { SOLVED })
        }
        Command::Generate { out, agents } => {
            let text = match cli.seed {
                Some(s) => satellite_suite_seeded(*agents, s),
                None => satellite_suite(*agents),
            }
            .map_err(Failure::usage)?;
            text.write(out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))?;
            println!("wrote {} ({} agents) to {}", text.name, agents, out.display());
            Ok(SOLVED)
        }
    }
}

fn save_trace(cli: &Cli, file: Option<&str>, task: &MapTask, trace: &mappop_core::bus::Trace) -> Result<(), Failure> {
    let Some(base) = &cli.trace else { return Ok(()) };
    let path = match file {
        Some(f) => base.join(f),
        None => base.clone(),
    };
    write(&path, &trace.export(task))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { SOLVED };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
