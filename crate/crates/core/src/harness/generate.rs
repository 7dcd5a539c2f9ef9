//! Task generators: the independent-goal satellite suite written as task
//! files, and random ground tasks for property checks.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frontend::{parse_domain, parse_problem, parse_shared, FrontendError, TaskFiles};
use crate::task::{AgentId, Effect, Formula, MapTask, ObjId, State, TaskBuilder, Truth, Value, VarId};
use crate::validator::coupling_level;

pub const MAX_SCALING_AGENTS: usize = 14;

/// A task as file contents: `domain.pddl` plus `(file name, text)` pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskText {
    pub name: String,
    pub domain: String,
    pub files: Vec<(String, String)>,
}

impl TaskText {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("domain.pddl"), &self.domain)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    /// Parses the files the same way a task directory is read.
    pub fn parse(&self) -> Result<TaskFiles, FrontendError> {
        let wrap = |file: &str| {
            let file = file.to_string();
            move |error| FrontendError::Parse { file: file.clone(), error }
        };
        let domain = parse_domain(&self.domain).map_err(wrap("domain.pddl"))?;
        let mut names: Vec<&(String, String)> = self.files.iter().filter(|(n, _)| n.ends_with(".problem.pddl")).collect();
        names.sort();
        let mut files = TaskFiles { domain, problems: Vec::new(), shared: Vec::new(), paths: Vec::new() };
        for (name, text) in names {
            files.problems.push(parse_problem(text, &files.domain).map_err(wrap(name))?);
            let stem = name.trim_end_matches(".problem.pddl");
            let shared = self.files.iter().find(|(n, _)| *n == format!("{stem}.shared.pddl"));
            files.shared.push(match shared {
                Some((n, t)) => Some(parse_shared(t, &files.domain).map_err(wrap(n))?),
                None => None,
            });
        }
        Ok(files)
    }

    pub fn build(&self) -> Result<MapTask, FrontendError> {
        self.parse()?.build()
    }
}

pub const SATELLITE_DOMAIN: &str = "\
; one satellite per agent; every goal is an image only its owner can take
(define (domain satellite)
  (:types is-on is-off - power is-yes is-no - flag
          satellite direction instrument mode power flag)
  (:variables
    (pointing ?s - satellite - direction)
    (carrier ?i - instrument - satellite)
    (calib-target ?i - instrument - direction)
    (supports ?i - instrument ?m - mode - flag)
    (power ?i - instrument - power)
    (calibrated ?i - instrument - flag)
    (have-image ?d - direction ?m - mode - flag))
  (:action turn-to
    :parameters (?s - satellite ?from ?to - direction)
    :precondition (and (= (pointing ?s) ?from) (!= ?from ?to))
    :effect (and (assign (pointing ?s) ?to)))
  (:action switch-on
    :parameters (?i - instrument ?s - satellite ?off - is-off ?on - is-on ?no - is-no)
    :precondition (and (= (carrier ?i) ?s) (= (power ?i) ?off))
    :effect (and (assign (power ?i) ?on) (assign (calibrated ?i) ?no)))
  (:action calibrate
    :parameters (?s - satellite ?i - instrument ?d - direction ?on - is-on ?yes - is-yes)
    :precondition (and (= (carrier ?i) ?s) (= (power ?i) ?on) (= (pointing ?s) ?d) (= (calib-target ?i) ?d))
    :effect (and (assign (calibrated ?i) ?yes)))
  (:action take-image
    :parameters (?s - satellite ?d - direction ?i - instrument ?m - mode ?yes - is-yes)
    :precondition (and (= (carrier ?i) ?s) (= (calibrated ?i) ?yes) (= (pointing ?s) ?d) (= (supports ?i ?m) ?yes))
    :effect (and (assign (have-image ?d ?m) ?yes))))
";

/// One satellite problem: agent `sat{i}` must take the image `target{i}` in
/// mode `mode{i}`; `pos` picks where the satellite points initially.
fn satellite_problem(i: usize, pos: usize) -> String {
    let start = ["home", "star", "target"][pos % 3];
    format!(
        "(define (problem sat{i})
  (:domain satellite)
  (:objects sat{i} - satellite home{i} star{i} target{i} - direction inst{i} - instrument mode{i} - mode
            on - is-on off - is-off yes - is-yes no - is-no)
  (:init (= (pointing sat{i}) {start}{i}) (= (carrier inst{i}) sat{i}) (= (calib-target inst{i}) star{i})
         (= (supports inst{i} mode{i}) yes) (= (power inst{i}) off) (= (calibrated inst{i}) no)
         (= (have-image target{i} mode{i}) no))
  (:goal (and (= (have-image target{i} mode{i}) yes))))
"
    )
}

/// The `n`-agent satellite instance: each agent achieves exactly one goal
/// with its own satellite, so every agent has to take part.
pub fn satellite_suite(n: usize) -> Result<TaskText, String> {
    if !(1..=MAX_SCALING_AGENTS).contains(&n) {
        return Err(format!("agent count must be in 1..={MAX_SCALING_AGENTS}, got {n}"));
    }
    let files = (1..=n).map(|i| (format!("sat{i:02}.problem.pddl"), satellite_problem(i, 0))).collect();
    Ok(TaskText { name: format!("satellite-{n}"), domain: SATELLITE_DOMAIN.to_string(), files })
}

/// Same construction, with initial pointings drawn from `seed`.
pub fn satellite_suite_seeded(n: usize, seed: u64) -> Result<TaskText, String> {
    let mut t = satellite_suite(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, (_, text)) in t.files.iter_mut().enumerate() {
        *text = satellite_problem(i + 1, rng.gen_range(0..3));
    }
    t.name = format!("satellite-{n}-s{seed}");
    Ok(t)
}

/// Between `lo` and `hi` distinct elements of `xs`.
fn sample<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T], lo: usize, hi: usize) -> Vec<T> {
    let k = rng.gen_range(lo..=hi).min(xs.len());
    xs.choose_multiple(rng, k).copied().collect()
}

fn random_body(
    rng: &mut ChaCha8Rng,
    vars: &[VarId],
    dom: &dyn Fn(VarId) -> Vec<ObjId>,
    max_pre: usize,
    max_eff: usize,
) -> (Vec<Formula>, Vec<Effect>) {
    let pre_vars = sample(rng, vars, 0, max_pre);
    let pre = pre_vars
        .iter()
        .map(|&v| {
            let d = *dom(v).choose(rng).expect("non-empty domain");
            Formula { var: v, value: d, positive: rng.gen_bool(0.8) }
        })
        .collect();
    let eff_vars = sample(rng, vars, 1, max_eff);
    let eff = eff_vars
        .iter()
        .map(|&v| {
            let d = *dom(v).choose(rng).expect("non-empty domain");
            if rng.gen_bool(0.85) {
                Effect::assign(v, d)
            } else {
                Effect::unassign(v, d)
            }
        })
        .collect();
    (pre, eff)
}

/// A random task where every agent sees every variable and value: 1 to 4
/// agents and at most 60 ground actions, some owned by several agents.
pub fn random_shared_task(seed: u64) -> MapTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TaskBuilder::new(&format!("shared-{seed}"));
    let n = rng.gen_range(1..=4);
    let objs: Vec<ObjId> = (0..4).map(|k| b.object(&format!("o{k}"))).collect();
    let nvars = rng.gen_range(2..=6);
    let mut doms = Vec::new();
    let vars: Vec<VarId> = (0..nvars)
        .map(|k| {
            let size = rng.gen_range(2..=objs.len());
            doms.push(sample(&mut rng, &objs, size, size));
            b.variable(&format!("v{k}"))
        })
        .collect();
    let agents: Vec<AgentId> = (0..n).map(|i| b.agent(&format!("ag{i}"))).collect();
    for &a in &agents {
        for (k, &v) in vars.iter().enumerate() {
            b.grant(a, v, doms[k].iter().copied());
        }
    }
    for (k, &v) in vars.iter().enumerate() {
        if rng.gen_bool(0.8) {
            let d = *doms[k].choose(&mut rng).expect("domain");
            b.init(agents[0], v, d);
        }
    }
    let dom = |v: VarId| doms[v.index()].clone();
    let nactions = rng.gen_range(3..=60 / n.max(1)).min(60);
    for k in 0..nactions {
        let (pre, eff) = random_body(&mut rng, &vars, &dom, 2, 2);
        let owners = sample(&mut rng, &agents, 1, n.min(2));
        for a in owners {
            b.action(a, &format!("act{k}"), Vec::new(), pre.clone(), eff.clone());
        }
    }
    b.build().expect("generated task is well formed")
}

/// Coupling band targeted by [`random_task`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    Loose,
    Medium,
    Tight,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Loose, Band::Medium, Band::Tight];

    /// The band a coupling percentage falls in.
    pub fn of(coupling: f64) -> Band {
        if coupling < 10.0 {
            Band::Loose
        } else if coupling <= 50.0 {
            Band::Medium
        } else {
            Band::Tight
        }
    }

    fn shared_probability(self) -> f64 {
        match self {
            Band::Loose => 0.0,
            Band::Medium => 0.25,
            Band::Tight => 0.9,
        }
    }
}

/// A random task with private variables per agent and public variables
/// whose values some agents see only partly. Goals come from a random walk
/// over the actions, so the task has a plan. Draws are repeated until the
/// coupling level falls in `band`.
pub fn random_task(seed: u64, band: Band) -> MapTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(t) = try_random_task(&mut rng, seed, band).filter(|t| Band::of(coupling_level(t)) == band) {
            return t;
        }
    }
}

fn try_random_task(rng: &mut ChaCha8Rng, seed: u64, band: Band) -> Option<MapTask> {
    let mut b = TaskBuilder::new(&format!("random-{seed}"));
    let n = if band == Band::Loose { rng.gen_range(1..=4) } else { rng.gen_range(2..=4) };
    let objs: Vec<ObjId> = (0..3).map(|k| b.object(&format!("o{k}"))).collect();
    let agents: Vec<AgentId> = (0..n).map(|i| b.agent(&format!("ag{i}"))).collect();
    // (variable, domain) per agent
    let mut sees: Vec<Vec<(VarId, Vec<ObjId>)>> = vec![Vec::new(); n];
    let mut private: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for (i, &a) in agents.iter().enumerate() {
        for k in 0..rng.gen_range(2..=4) {
            let v = b.variable(&format!("p{i}-{k}"));
            let dom = sample(rng, &objs, 2, 3);
            b.grant(a, v, dom.iter().copied());
            let d = *dom.choose(rng).expect("domain");
            b.init(a, v, d);
            sees[i].push((v, dom));
            private[i].push(v);
        }
    }
    let public: Vec<VarId> = (0..rng.gen_range(1..=2)).map(|k| b.variable(&format!("s{k}"))).collect();
    for &v in &public {
        for (i, &a) in agents.iter().enumerate() {
            let dom = if i == 0 || rng.gen_bool(0.7) { objs.clone() } else { sample(rng, &objs, 2, 2) };
            b.grant(a, v, dom.iter().copied());
            sees[i].push((v, dom));
        }
        b.init(agents[0], v, *objs.choose(rng).expect("objects"));
    }
    let share = band.shared_probability();
    for (i, &a) in agents.iter().enumerate() {
        let table = sees[i].clone();
        let dom = |v: VarId| table.iter().find(|(x, _)| *x == v).map(|(_, d)| d.clone()).expect("seen");
        for k in 0..rng.gen_range(3..=7) {
            let pool: Vec<VarId> = if rng.gen_bool(share) {
                public.iter().chain(private[i].iter()).copied().collect()
            } else {
                private[i].clone()
            };
            let (pre, mut eff) = random_body(rng, &pool, &dom, 2, 2);
            if rng.gen_bool(share) {
                let v = *public.choose(rng).expect("public");
                eff.retain(|e| e.var != v);
                eff.push(Effect::assign(v, *dom(v).choose(rng).expect("domain")));
            }
            b.action(a, &format!("ag{i}-act{k}"), Vec::new(), pre, eff);
        }
    }
    let base = b.clone().build().ok()?;

    // walk to a state that differs from the initial one
    let mut state: State = base.init().clone();
    for _ in 0..rng.gen_range(2..=8) {
        let applicable: Vec<_> = base
            .actions()
            .iter()
            .filter(|a| a.pre.iter().all(|p| state.evaluate(p) == Truth::True))
            .collect();
        let Some(a) = applicable.choose(rng) else { break };
        state = state.apply(a, base.symbols()).ok()?;
    }
    let mut changed: Vec<Formula> = state
        .iter()
        .filter(|f| f.positive && !base.init().contains(f))
        .filter_map(|f| f.as_formula())
        .collect();
    changed.shuffle(rng);
    if changed.is_empty() {
        return None;
    }
    for g in changed.into_iter().take(3) {
        let owners: Vec<AgentId> = agents.iter().copied().filter(|&a| base.sees(a, g.var, Value::Obj(g.value))).collect();
        b.goal(*owners.choose(rng)?, g);
    }
    b.build().ok()
}

/// Text summary of a task, one line per action; handy in test failures.
pub fn describe_task(task: &MapTask) -> String {
    let sy = task.symbols();
    let mut out = String::new();
    for (k, a) in task.actions().iter().enumerate() {
        let pre: Vec<String> = a.pre.iter().map(|p| sy.formula_label(p)).collect();
        let eff: Vec<String> = a
            .eff
            .iter()
            .map(|e| format!("{}{}{}", sy.var_name(e.var), if e.assign { ":=" } else { "!=" }, sy.obj_name(e.value)))
            .collect();
        let owners: Vec<&str> = a.owners.iter().map(|&o| sy.agent_name(o)).collect();
        let _ = writeln!(out, "{} [{}] pre {} eff {}", task.action_label(k.into()), owners.join(","), pre.join(" "), eff.join(" "));
    }
    let goals: Vec<String> = task.goals().iter().map(|g| sy.formula_label(g)).collect();
    let _ = writeln!(out, "goals {}", goals.join(" "));
    out
}
