//! Running tasks and reporting results.

mod generate;
mod planfile;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

pub use generate::{
    describe_task, random_shared_task, random_task, satellite_suite, satellite_suite_seeded, Band, TaskText,
    MAX_SCALING_AGENTS, SATELLITE_DOMAIN,
};
pub use planfile::{parse_plan, rebuild_plan, write_plan, PlanFile, PlanFileError};

use crate::bus::{BusError, Mode};
use crate::coordinator::{solve, SolveConfig, SolveReport};
use crate::frontend::{parse_dir, FrontendError};
use crate::pop::RefineConfig;
use crate::task::MapTask;
use crate::validator::{coupling_level, metrics, simulate_n, validate, Metrics, Simulation, ValidationReport, MIN_SAMPLES};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Refinements each agent returns per call.
    pub k: usize,
    /// Search nodes each refinement call may expand.
    pub node_budget: usize,
    pub iterations: usize,
    /// Seeds the linearization sampling of the post-solve check.
    pub seed: u64,
    pub trace: bool,
    pub timeout: Option<Duration>,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolveConfig::default();
        RunConfig {
            k: s.refine.max_plans,
            node_budget: s.refine.max_expansions,
            iterations: s.max_iterations,
            seed: 0,
            trace: false,
            timeout: None,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [("k", self.k), ("node budget", self.node_budget), ("iteration cap", self.iterations)] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.timeout.is_some_and(|t| t.is_zero()) {
            return Err("timeout must be positive".into());
        }
        Ok(())
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            refine: RefineConfig { max_expansions: self.node_budget, max_plans: self.k, ..RefineConfig::default() },
            max_iterations: self.iterations,
            mode: if self.parallel { Mode::Parallel } else { Mode::Sequential },
            timeout: self.timeout,
            ..SolveConfig::default()
        }
    }
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub problem: String,
    pub agents: usize,
    /// Percentage, 0 to 100.
    pub coupling: f64,
    pub domain_actions: usize,
    /// `None` when no plan was found.
    pub metrics: Option<Metrics>,
    pub seconds: f64,
}

pub const CSV_HEADER: &str = "problem,agents,coupling,domain_actions,acts,ts,partics,time";

impl ResultRow {
    pub fn csv(&self) -> String {
        let m = |f: fn(&Metrics) -> usize| self.metrics.as_ref().map(|x| f(x).to_string()).unwrap_or_default();
        format!(
            "{},{},{:.1},{},{},{},{},{:.3}",
            self.problem,
            self.agents,
            self.coupling,
            self.domain_actions,
            m(|x| x.acts),
            m(|x| x.time_steps),
            m(|x| x.participants),
            self.seconds
        )
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// The rows as a right-aligned text table, `-` marking unsolved tasks.
pub fn to_table(rows: &[ResultRow]) -> String {
    let head = ["Problem", "#Agents", "Coupling%", "#DomActs", "#Acts", "#TS", "#Partics", "Time(s)"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let m = |f: fn(&Metrics) -> usize| r.metrics.as_ref().map_or("-".to_string(), |x| f(x).to_string());
            vec![
                r.problem.clone(),
                r.agents.to_string(),
                format!("{:.1}", r.coupling),
                r.domain_actions.to_string(),
                m(|x| x.acts),
                m(|x| x.time_steps),
                m(|x| x.participants),
                format!("{:.3}", r.seconds),
            ]
        })
        .collect();
    let width: Vec<usize> =
        (0..head.len()).map(|c| cells.iter().map(|r| r[c].len()).chain([head[c].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let mut line = |row: Vec<&str>| {
        let parts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = width[c]) } else { format!("{s:>w$}", w = width[c]) })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(head.to_vec());
    for r in &cells {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("{path}: {error}")]
    Io { path: String, error: std::io::Error },
}

/// Everything one solver run produced.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub row: ResultRow,
    pub report: SolveReport,
    /// Present when a plan was found.
    pub validation: Option<ValidationReport>,
    pub simulation: Option<Simulation>,
    pub plan_text: Option<String>,
}

impl RunResult {
    /// Solved, valid and every sampled linearization executes.
    pub fn is_sound(&self) -> bool {
        self.validation.as_ref().is_some_and(|v| v.is_valid())
            && self.simulation.as_ref().is_some_and(|s| s.is_success())
    }
}

/// Solves `task`, then validates and simulates the plan.
pub fn run_task(task: &MapTask, problem: &str, cfg: &RunConfig) -> Result<RunResult, HarnessError> {
    let start = Instant::now();
    let report = solve(task, &cfg.solve_config())?;
    let seconds = start.elapsed().as_secs_f64();
    let plan = report.plan().cloned();
    let row = ResultRow {
        problem: problem.to_string(),
        agents: task.num_agents(),
        coupling: coupling_level(task),
        domain_actions: task.actions().len(),
        metrics: plan.as_ref().map(|p| metrics(p, task)),
        seconds,
    };
    Ok(RunResult {
        row,
        validation: plan.as_ref().map(|p| validate(p, task)),
        simulation: plan.as_ref().map(|p| simulate_n(p, task, cfg.seed, MIN_SAMPLES)),
        plan_text: plan.as_ref().map(|p| write_plan(task, p, problem)),
        report,
    })
}

/// Task directories directly below `dir`, sorted by name.
pub fn corpus_tasks(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |error| HarnessError::Io { path: dir.display().to_string(), error };
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(io)? {
        let p = e.map_err(io)?.path();
        if p.join("domain.pddl").is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn task_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Runs every task directory of a corpus.
pub fn run_corpus(dir: &Path, cfg: &RunConfig) -> Result<Vec<RunResult>, HarnessError> {
    corpus_tasks(dir)?
        .iter()
        .map(|t| {
            let task = parse_dir(t)?.build()?;
            run_task(&task, &task_name(t), cfg)
        })
        .collect()
}
