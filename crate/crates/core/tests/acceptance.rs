//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use mappop_core::bus::{audit_privacy, Bus};
use mappop_core::coordinator::{solve, SolveOutcome, Unsolvable};
use mappop_core::frontend::load_dir;
use mappop_core::harness::{random_shared_task, random_task, run_task, satellite_suite_seeded, Band, RunConfig, RunResult};
use mappop_core::pop::{refine, refinement_plans, PartialPlan, RefineConfig, GOAL_STEP, INIT_STEP};
use mappop_core::rpg::{build_dis_rpg, build_initial_rpg};
use mappop_core::task::MapTask;

use common::{brute_force_skeletons, canonical, central_costs, micro_task, End, Skeleton};

// pinned tolerances and budgets
const SHARED_TASKS: u64 = 25;
const RPG_SECONDS: f64 = 5.0;
const SOUNDNESS_TASKS: [(Band, u64); 3] = [(Band::Loose, 34), (Band::Medium, 33), (Band::Tight, 33)];
const SOUNDNESS_TIMEOUT: Duration = Duration::from_secs(30);
const MICRO_TASKS: u64 = 300;
const MICRO_STEPS: usize = 3;
const LOGISTICS_SECONDS: f64 = 60.0;
const SCALING_MAX_N: usize = 8;
const SCALING_SECONDS: f64 = 120.0;
const SCALING_SEEDS: [u64; 3] = [1, 2, 3];
const SCALING_REPEATS: usize = 3;
/// A mean time may sit this far below the slowest smaller instance before
/// growth counts as broken; sub-millisecond runs are noisy.
const MONOTONE_SLACK: f64 = 0.25;
const MONOTONE_FLOOR: f64 = 0.002;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, o: &Outcome) {
    println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

/// Plan text and exported trace of a run; equal fingerprints mean identical
/// runs up to wall time.
fn fingerprint(task: &MapTask, r: &RunResult) -> (Option<String>, String) {
    (r.plan_text.clone(), r.report.trace.export(task))
}

fn privacy_violations(task: &MapTask, r: &RunResult) -> usize {
    audit_privacy(&r.report.trace, task).len()
}

#[derive(Default)]
struct Runs {
    fingerprints: Vec<(Option<String>, String)>,
    violations: usize,
    traces: usize,
}

impl Runs {
    fn record(&mut self, task: &MapTask, r: &RunResult) {
        self.fingerprints.push(fingerprint(task, r));
        self.violations += privacy_violations(task, r);
        self.traces += 1;
    }
}

fn rpg_oracle() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut graphs = 0;
    for seed in 0..SHARED_TASKS {
        let task = random_shared_task(seed);
        assert!(task.num_agents() <= 4 && task.actions().len() <= 60);
        let expected = central_costs(&task);
        let mut bus = Bus::new(&task);
        let dis = build_dis_rpg(&task, &mut bus).expect("bus");
        for a in task.agent_ids() {
            graphs += 1;
            if dis.graph(a).cost_map() != expected {
                mismatches.push(format!("seed {seed} agent {}", task.symbols().agent_name(a)));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: mismatches.is_empty() && secs < RPG_SECONDS,
        detail: format!(
            "{SHARED_TASKS} tasks, {graphs} agent graphs, {} mismatches, {secs:.2}s (limit {RPG_SECONDS}s){}",
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" first: {}", mismatches[0]) }
        ),
    }
}

fn soundness(runs: &mut Runs) -> Outcome {
    let cfg = RunConfig { timeout: Some(SOUNDNESS_TIMEOUT), ..RunConfig::default() };
    let (mut total, mut solved, mut sound) = (0, 0, 0);
    let mut bad = Vec::new();
    for (band, count) in SOUNDNESS_TASKS {
        for seed in 0..count {
            let task = random_task(seed, band);
            let r = run_task(&task, task.name(), &cfg).expect("run");
            total += 1;
            if r.report.plan().is_some() {
                solved += 1;
                if r.is_sound() {
                    sound += 1;
                } else {
                    bad.push(format!("{band:?}/{seed}"));
                }
            }
            runs.record(&task, &r);
        }
    }
    Outcome {
        pass: sound == solved,
        detail: format!(
            "{total} tasks, {solved} solved, {sound}/{solved} returned plans valid and simulated{}",
            if bad.is_empty() { String::new() } else { format!(" unsound: {}", bad.join(" ")) }
        ),
    }
}

fn skeleton_of(plan: &PartialPlan) -> Skeleton {
    let steps: Vec<_> = plan.action_steps().collect();
    let index = |s| steps.iter().position(|&(id, _, _)| id == s).expect("action step");
    let end = |s| match s {
        INIT_STEP => End::Init,
        GOAL_STEP => End::Goal,
        s => End::Step(index(s)),
    };
    let links: Vec<_> = plan.links.iter().map(|l| (end(l.producer), end(l.consumer), l.formula)).collect();
    let actions: Vec<_> = steps.iter().map(|&(_, a, _)| a).collect();
    canonical(&actions, &links)
}

fn brute_force() -> Outcome {
    let cfg = RefineConfig {
        max_expansions: 1_000_000,
        max_plans: usize::MAX,
        max_new_steps: Some(MICRO_STEPS),
        ..RefineConfig::default()
    };
    let (mut compared, mut nonempty) = (0, 0);
    let mut bad = Vec::new();
    for seed in 0..MICRO_TASKS {
        let task = micro_task(seed);
        let agent = task.agent_ids().next().expect("one agent");
        let base = PartialPlan::initial(&task);
        let goal = *base.open_goals.iter().next().expect("one goal");
        let rpg = build_initial_rpg(agent, &task);
        let steps = refine(&task, &base, goal, agent, &rpg, &cfg);
        let found: std::collections::BTreeSet<Skeleton> =
            refinement_plans(&task, &base, &steps).iter().map(skeleton_of).collect();
        let expected = brute_force_skeletons(&task, MICRO_STEPS);
        compared += 1;
        nonempty += usize::from(!expected.is_empty());
        if found != expected {
            bad.push(format!("seed {seed} (search {}, exhaustive {})", found.len(), expected.len()));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "{compared} micro tasks ({nonempty} solvable), up to {MICRO_STEPS} steps, {} mismatches{}",
            bad.len(),
            bad.first().map(|b| format!(" first: {b}")).unwrap_or_default()
        ),
    }
}

fn cooperation(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let task = load_dir(&corpus("logistics-1")).expect("corpus task");
    let cfg = RunConfig::default();
    let r = run_task(&task, "logistics-1", &cfg).expect("run");
    runs.record(&task, &r);
    let partics = r.row.metrics.map(|m| m.participants);
    let mut restricted = Vec::new();
    for a in task.agent_ids() {
        let sub = task.restrict_actions_to(a);
        let rep = solve(&sub, &cfg.solve_config()).expect("solve");
        runs.violations += audit_privacy(&rep.trace, &sub).len();
        runs.traces += 1;
        let unsolvable = matches!(rep.outcome, SolveOutcome::Unsolvable(Unsolvable::UnreachableGoal(_) | Unsolvable::PoolExhausted));
        restricted.push((task.symbols().agent_name(a).to_string(), unsolvable));
    }
    let secs = start.elapsed().as_secs_f64();
    let all_unsolvable = restricted.iter().all(|(_, u)| *u);
    Outcome {
        pass: r.is_sound() && partics == Some(2) && all_unsolvable && secs < LOGISTICS_SECONDS,
        detail: format!(
            "partics={} sound={} restrictions unsolvable: {} ({secs:.2}s, limit {LOGISTICS_SECONDS}s)",
            partics.map_or("-".into(), |p| p.to_string()),
            r.is_sound(),
            restricted.iter().map(|(n, u)| format!("{n}={u}")).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn scaling(runs: &mut Runs, timed: bool) -> Outcome {
    let cfg = RunConfig { timeout: Some(Duration::from_secs_f64(SCALING_SECONDS)), ..RunConfig::default() };
    let mut problems = Vec::new();
    let mut means = Vec::new();
    for n in 1..=SCALING_MAX_N {
        let mut sum = 0.0;
        for seed in SCALING_SEEDS {
            let text = satellite_suite_seeded(n, seed).expect("suite size");
            let task = text.build().expect("generated task parses");
            let mut best = f64::INFINITY;
            let repeats = if timed { SCALING_REPEATS } else { 1 };
            for k in 0..repeats {
                let r = run_task(&task, &text.name, &cfg).expect("run");
                best = best.min(r.row.seconds);
                let partics = r.row.metrics.map(|m| m.participants);
                if !r.is_sound() || partics != Some(n) || r.row.seconds >= SCALING_SECONDS {
                    problems.push(format!("n={n} seed={seed} partics={partics:?} sound={}", r.is_sound()));
                }
                if k == 0 {
                    runs.record(&task, &r);
                }
            }
            sum += best;
        }
        means.push(sum / SCALING_SEEDS.len() as f64);
    }
    let mut monotone = true;
    let mut peak: f64 = 0.0;
    for &m in &means {
        if m < peak * (1.0 - MONOTONE_SLACK) && peak > MONOTONE_FLOOR {
            monotone = false;
        }
        peak = peak.max(m);
    }
    let grows = means.last() > means.first();
    let shown: Vec<String> = means.iter().map(|m| format!("{:.1}", m * 1e3)).collect();
    Outcome {
        pass: problems.is_empty() && (!timed || (monotone && grows)),
        detail: format!(
            "n=1..{SCALING_MAX_N} x {} seeds, mean ms [{}], monotone within {:.0}%: {monotone}{}",
            SCALING_SEEDS.len(),
            shown.join(" "),
            MONOTONE_SLACK * 100.0,
            problems.first().map(|p| format!(" first problem: {p}")).unwrap_or_default()
        ),
    }
}

fn main() {
    let mut outcomes = Vec::new();

    let o = rpg_oracle();
    report(1, "distributed graph equals centralized graph", &o);
    outcomes.push(o.pass);

    let mut first = Runs::default();
    let o = soundness(&mut first);
    report(2, "every returned plan is valid and executes", &o);
    outcomes.push(o.pass);

    let o = brute_force();
    report(3, "search finds exactly the exhaustive solution set", &o);
    outcomes.push(o.pass);

    let o = cooperation(&mut first);
    report(4, "logistics needs both agents", &o);
    outcomes.push(o.pass);

    let o = scaling(&mut first, true);
    report(5, "independent-goal satellite suite scales", &o);
    outcomes.push(o.pass);

    let o = Outcome {
        pass: first.violations == 0,
        detail: format!("{} traces audited, {} violations", first.traces, first.violations),
    };
    report(6, "no fluent reaches an agent that cannot see it", &o);
    outcomes.push(o.pass);

    let mut second = Runs::default();
    soundness(&mut second);
    cooperation(&mut second);
    scaling(&mut second, false);
    let differing = first.fingerprints.iter().zip(&second.fingerprints).filter(|(a, b)| a != b).count();
    let same_len = first.fingerprints.len() == second.fingerprints.len();
    let o = Outcome {
        pass: same_len && differing == 0,
        detail: format!("{} runs repeated, {differing} differ in plan or trace", first.fingerprints.len()),
    };
    report(7, "reruns reproduce plans and traces", &o);
    outcomes.push(o.pass);

    let failed = outcomes.iter().filter(|p| !**p).count();
    println!("{} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
