//! Plan checking that does not rely on the planner's own code paths.
//!
//! Rules:
//! 1. orderings are acyclic, `a0` comes first and `a∞` last;
//! 2. every precondition has exactly one valid supporting link;
//! 3. no threats under any agent's projection, nor under full information;
//! 4. unordered steps never need conflicting values;
//! 5. no agent sees an open goal.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pop::{PartialPlan, Step, StepId};
use crate::task::{AgentId, Effect, Formula, MapTask, State, Truth, Value, VarId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub rule: u8,
    pub location: String,
    pub description: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} at {}: {}", self.rule, self.location, self.description)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub acts: usize,
    pub time_steps: usize,
    pub participants: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub metrics: Metrics,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn rules(&self) -> BTreeSet<u8> {
        self.findings.iter().map(|f| f.rule).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", if self.is_valid() { "valid" } else { "invalid" })?;
        for x in &self.findings {
            writeln!(f, "{x}")?;
        }
        write!(
            f,
            "acts={} ts={} partics={}",
            self.metrics.acts, self.metrics.time_steps, self.metrics.participants
        )
    }
}

/// Dense boolean transitive closure (Floyd–Warshall).
struct Order {
    n: usize,
    m: Vec<bool>,
}

impl Order {
    fn new(plan: &PartialPlan) -> Self {
        let n = plan.steps.len();
        let mut m = vec![false; n * n];
        for &(a, b) in &plan.orderings {
            if a.index() < n && b.index() < n {
                m[a.index() * n + b.index()] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if m[i * n + k] {
                    for j in 0..n {
                        if m[k * n + j] {
                            m[i * n + j] = true;
                        }
                    }
                }
            }
        }
        Order { n, m }
    }

    fn lt(&self, a: usize, b: usize) -> bool {
        self.m[a * self.n + b]
    }

    fn parallel(&self, a: usize, b: usize) -> bool {
        a != b && !self.lt(a, b) && !self.lt(b, a)
    }
}

fn pre_of<'t>(task: &'t MapTask, step: &Step) -> &'t [Formula] {
    match step {
        Step::Init => &[],
        Step::Goal => task.goals(),
        Step::Action { action, .. } => &task.action(*action).pre,
    }
}

fn eff_of(task: &MapTask, step: &Step) -> Vec<Effect> {
    match step {
        Step::Init => task.init_effects().to_vec(),
        Step::Goal => Vec::new(),
        Step::Action { action, .. } => task.action(*action).eff.clone(),
    }
}

fn makes_true(e: &Effect, f: &Formula) -> bool {
    e.var == f.var
        && if e.assign {
            (e.value == f.value) == f.positive
        } else {
            !f.positive && e.value == f.value
        }
}

/// A value as some observer sees it: `None` when the variable is unknown.
fn seen(task: &MapTask, who: Option<AgentId>, v: VarId, d: Value) -> Option<Value> {
    match who {
        None => Some(d),
        Some(a) if !task.sees_var(a, v) => None,
        Some(a) if task.sees(a, v, d) => Some(d),
        Some(_) => Some(Value::Undefined),
    }
}

/// Can the effect undo the link formula, for this observer?
fn clobbers(task: &MapTask, who: Option<AgentId>, e: &Effect, f: &Formula) -> bool {
    if e.var != f.var {
        return false;
    }
    let (Some(ev), Some(fv)) = (seen(task, who, e.var, Value::Obj(e.value)), seen(task, who, f.var, Value::Obj(f.value)))
    else {
        return false;
    };
    if ev == Value::Undefined || fv == Value::Undefined {
        return true;
    }
    if f.positive {
        if e.assign {
            ev != fv
        } else {
            ev == fv
        }
    } else {
        e.assign && ev == fv
    }
}

fn clash(a: &Formula, b: &Formula) -> bool {
    if a.var != b.var {
        return false;
    }
    if a.positive && b.positive {
        a.value != b.value
    } else {
        a.positive != b.positive && a.value == b.value
    }
}

fn step_name(task: &MapTask, plan: &PartialPlan, s: usize) -> String {
    match plan.steps[s] {
        Step::Init => "step 0 (a0)".into(),
        Step::Goal => "step 1 (a∞)".into(),
        Step::Action { action, agent } => {
            format!("step {} ({} {})", s, task.symbols().agent_name(agent), task.action_label(action))
        }
    }
}

pub fn validate(plan: &PartialPlan, task: &MapTask) -> ValidationReport {
    let mut findings = Vec::new();
    let mut add = |rule: u8, location: String, description: String| {
        findings.push(Finding { rule, location, description });
    };
    let n = plan.steps.len();
    let sy = task.symbols();

    // 1
    if n < 2 || plan.steps[0] != Step::Init || plan.steps[1] != Step::Goal {
        add(1, "steps".into(), "steps 0 and 1 must be a0 and a∞".into());
        return ValidationReport { findings, metrics: Metrics::default() };
    }
    for &(a, b) in &plan.orderings {
        if a.index() >= n || b.index() >= n {
            add(1, format!("ordering {} < {}", a.0, b.0), "unknown step".into());
        }
    }
    let ord = Order::new(plan);
    let cyclic: Vec<usize> = (0..n).filter(|&i| ord.lt(i, i)).collect();
    if !cyclic.is_empty() {
        add(1, format!("step {}", cyclic[0]), "orderings are cyclic".into());
        return ValidationReport { findings, metrics: Metrics::default() };
    }
    for s in 2..n {
        if plan.steps[s].is_synthetic() {
            add(1, format!("step {s}"), "extra synthetic step".into());
        }
        if !ord.lt(0, s) {
            add(1, step_name(task, plan, s), "not after a0".into());
        }
        if !ord.lt(s, 1) {
            add(1, step_name(task, plan, s), "not before a∞".into());
        }
    }

    // 2
    let effects: Vec<Vec<Effect>> = plan.steps.iter().map(|s| eff_of(task, s)).collect();
    for l in &plan.links {
        let (p, c) = (l.producer.index(), l.consumer.index());
        let loc = format!("link {} -> {} {}", l.producer.0, l.consumer.0, sy.formula_label(&l.formula));
        if p >= n || c >= n {
            add(2, loc, "unknown step".into());
            continue;
        }
        if !ord.lt(p, c) {
            add(2, loc.clone(), "producer is not ordered before consumer".into());
        }
        if !effects[p].iter().any(|e| makes_true(e, &l.formula)) {
            add(2, loc.clone(), "producer does not achieve the formula".into());
        }
        if !pre_of(task, &plan.steps[c]).contains(&l.formula) {
            add(2, loc, "consumer does not need the formula".into());
        }
    }
    for c in 0..n {
        for f in pre_of(task, &plan.steps[c]) {
            let k = plan.links.iter().filter(|l| l.consumer.index() == c && l.formula == *f).count();
            if k != 1 {
                add(
                    2,
                    step_name(task, plan, c),
                    format!("precondition {} has {} supporting links", sy.formula_label(f), k),
                );
            }
        }
    }

    // 3
    let observers: Vec<Option<AgentId>> = std::iter::once(None).chain(task.agent_ids().map(Some)).collect();
    for l in &plan.links {
        let (p, c) = (l.producer.index(), l.consumer.index());
        if p >= n || c >= n {
            continue;
        }
        for (s, eff) in effects.iter().enumerate().take(n) {
            if s == p || s == c || ord.lt(s, p) || ord.lt(c, s) {
                continue;
            }
            for who in &observers {
                if eff.iter().any(|e| clobbers(task, *who, e, &l.formula)) {
                    let viewer = who.map_or("full view".to_string(), |a| sy.agent_name(a).to_string());
                    add(
                        3,
                        step_name(task, plan, s),
                        format!(
                            "threatens link {} -> {} {} in the {} view",
                            l.producer.0,
                            l.consumer.0,
                            sy.formula_label(&l.formula),
                            viewer
                        ),
                    );
                    break;
                }
            }
        }
    }

    // 4
    let supported: Vec<(usize, Formula)> =
        plan.links.iter().filter(|l| l.consumer.index() < n).map(|l| (l.consumer.index(), l.formula)).collect();
    for (i, (a, fa)) in supported.iter().enumerate() {
        for (b, fb) in &supported[i + 1..] {
            if ord.parallel(*a, *b) && clash(fa, fb) {
                add(
                    4,
                    format!("{} / {}", step_name(task, plan, *a), step_name(task, plan, *b)),
                    format!("unordered steps need {} and {}", sy.formula_label(fa), sy.formula_label(fb)),
                );
            }
        }
    }

    // 5
    for a in task.agent_ids() {
        let open: Vec<String> = plan
            .open_goals
            .iter()
            .filter(|g| task.sees_var(a, g.formula.var))
            .map(|g| format!("{}@{}", sy.formula_label(&g.formula), g.step.0))
            .collect();
        if !open.is_empty() {
            add(5, format!("agent {}", sy.agent_name(a)), format!("sees open goals {}", open.join(", ")));
        }
    }

    ValidationReport { findings, metrics: metrics(plan, task) }
}

/// Chain level of each action step (1-based), `0` for `a0` and `a∞`.
pub fn levels(plan: &PartialPlan) -> Vec<usize> {
    let n = plan.steps.len();
    let ord = Order::new(plan);
    let mut level = vec![0usize; n];
    // predecessors have strictly fewer predecessors, so sort by that count
    let mut order: Vec<usize> = (0..n).filter(|&s| !plan.steps[s].is_synthetic()).collect();
    order.sort_by_key(|&s| (0..n).filter(|&p| ord.lt(p, s)).count());
    for &s in &order {
        level[s] = 1 + order.iter().filter(|&&p| ord.lt(p, s)).map(|&p| level[p]).max().unwrap_or(0);
    }
    level
}

/// Action steps grouped by chain level, each group sorted by step id.
pub fn layers(plan: &PartialPlan) -> Vec<Vec<StepId>> {
    let lv = levels(plan);
    let depth = lv.iter().copied().max().unwrap_or(0);
    let mut out = vec![Vec::new(); depth];
    for (s, &l) in lv.iter().enumerate() {
        if l > 0 {
            out[l - 1].push(StepId::from(s));
        }
    }
    out
}

/// `#Acts`, `#TS` (longest chain of action steps) and `#Partics`.
pub fn metrics(plan: &PartialPlan, _task: &MapTask) -> Metrics {
    let agents: BTreeSet<AgentId> = plan.steps.iter().filter_map(|s| s.agent()).collect();
    Metrics {
        acts: plan.steps.iter().filter(|s| !s.is_synthetic()).count(),
        time_steps: levels(plan).into_iter().max().unwrap_or(0),
        participants: agents.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Simulation {
    Success { orders: usize },
    Failure { order: Vec<StepId>, step: StepId, reason: String },
}

impl Simulation {
    pub fn is_success(&self) -> bool {
        matches!(self, Simulation::Success { .. })
    }
}

/// Minimum number of linearizations sampled by [`simulate`].
pub const MIN_SAMPLES: usize = 10;

/// A random topological order of the steps, `a0` first and `a∞` last.
fn linearize(plan: &PartialPlan, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = plan.steps.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in &plan.orderings {
        if a != b {
            succ[a.index()].push(b.index());
            indeg[b.index()] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while !ready.is_empty() {
        ready.sort_unstable();
        let k = *ready.choose(rng).expect("non-empty");
        ready.retain(|&x| x != k);
        out.push(k);
        for &j in &succ[k] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(j);
            }
        }
    }
    out
}

/// Executes `samples` seeded linearizations under full information from the
/// merged initial state.
pub fn simulate_n(plan: &PartialPlan, task: &MapTask, seed: u64, samples: usize) -> Simulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let order = linearize(plan, &mut rng);
        let ids: Vec<StepId> = order.iter().map(|&i| StepId::from(i)).collect();
        if order.len() != plan.steps.len() {
            return Simulation::Failure { order: ids, step: StepId(0), reason: "orderings are cyclic".into() };
        }
        let mut state: State = task.init().clone();
        for &s in &order {
            match plan.steps[s] {
                Step::Init => {}
                Step::Goal => {
                    if let Some(g) = task.goals().iter().find(|g| state.evaluate(g) != Truth::True) {
                        let reason = format!("goal {} does not hold", task.symbols().formula_label(g));
                        return Simulation::Failure { order: ids, step: StepId::from(s), reason };
                    }
                }
                Step::Action { action, .. } => match state.apply(task.action(action), task.symbols()) {
                    Ok(next) => state = next,
                    Err(e) => return Simulation::Failure { order: ids, step: StepId::from(s), reason: e.to_string() },
                },
            }
        }
    }
    Simulation::Success { orders: samples }
}

pub fn simulate(plan: &PartialPlan, task: &MapTask, seed: u64) -> Simulation {
    simulate_n(plan, task, seed, MIN_SAMPLES)
}

/// An action is public when one of its conditions or effects is fully
/// visible to some agent other than `owner`.
pub fn is_public(task: &MapTask, owner: AgentId, action: crate::task::ActionId) -> bool {
    let a = task.action(action);
    let pairs = a.pre.iter().map(|f| (f.var, f.value)).chain(a.eff.iter().map(|e| (e.var, e.value)));
    let pairs: Vec<_> = pairs.collect();
    task.agent_ids().any(|j| j != owner && pairs.iter().any(|&(v, d)| task.sees(j, v, Value::Obj(d))))
}

/// Mean over agents with actions of the share of public actions, in percent.
pub fn coupling_level(task: &MapTask) -> f64 {
    let shares: Vec<f64> = task
        .agent_ids()
        .filter(|&a| !task.agent(a).actions.is_empty())
        .map(|a| {
            let acts = &task.agent(a).actions;
            let public = acts.iter().filter(|&&id| is_public(task, a, id)).count();
            public as f64 / acts.len() as f64
        })
        .collect();
    if shares.is_empty() {
        return 0.0;
    }
    100.0 * shares.iter().sum::<f64>() / shares.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pop::{CausalLink, GOAL_STEP, INIT_STEP};
    use crate::task::{ActionId, TaskBuilder};

    fn micro() -> MapTask {
        let mut b = TaskBuilder::new("micro");
        let a = b.agent("a");
        let at = b.variable("at");
        let l1 = b.object("L1");
        let l2 = b.object("L2");
        b.grant(a, at, [l1, l2]);
        b.init(a, at, l1);
        b.goal(a, Formula::pos(at, l2));
        b.action(a, "move", vec![l1, l2], vec![Formula::pos(at, l1)], vec![Effect::assign(at, l2)]);
        b.build().unwrap()
    }

    fn micro_plan(t: &MapTask) -> PartialPlan {
        let at = t.symbols().find_var("at").unwrap();
        let l1 = t.symbols().find_obj("L1").unwrap();
        let l2 = t.symbols().find_obj("L2").unwrap();
        let mut p = PartialPlan::initial(t);
        let s = p.add_step(Step::Action { action: ActionId(0), agent: AgentId(0) });
        p.orderings.extend([(INIT_STEP, s), (s, GOAL_STEP)]);
        p.links.insert(CausalLink { producer: INIT_STEP, consumer: s, formula: Formula::pos(at, l1) });
        p.links.insert(CausalLink { producer: s, consumer: GOAL_STEP, formula: Formula::pos(at, l2) });
        p.open_goals.clear();
        p
    }

    #[test]
    fn micro_plan_is_valid_and_simulates() {
        let t = micro();
        let p = micro_plan(&t);
        let r = validate(&p, &t);
        assert!(r.is_valid(), "{r}");
        assert_eq!(r.metrics, Metrics { acts: 1, time_steps: 1, participants: 1 });
        assert!(simulate(&p, &t, 7).is_success());
    }

    #[test]
    fn deleted_link_breaks_rule_2() {
        let t = micro();
        let mut p = micro_plan(&t);
        let first = *p.links.iter().next().unwrap();
        p.links.remove(&first);
        assert!(validate(&p, &t).rules().contains(&2));
    }

    #[test]
    fn empty_plan_with_no_goals_simulates() {
        let mut b = TaskBuilder::new("none");
        b.agent("a");
        let t = b.build().unwrap();
        let p = PartialPlan::initial(&t);
        assert!(validate(&p, &t).is_valid());
        assert!(simulate(&p, &t, 0).is_success());
    }

    #[test]
    fn parallel_actions_share_a_time_step() {
        let mut b = TaskBuilder::new("par");
        let x = b.agent("x");
        let y = b.agent("y");
        let u = b.variable("u");
        let w = b.variable("w");
        let d = b.object("d");
        b.grant(x, u, [d]);
        b.grant(y, w, [d]);
        b.action(x, "su", vec![], vec![], vec![Effect::assign(u, d)]);
        b.action(y, "sw", vec![], vec![], vec![Effect::assign(w, d)]);
        let t = b.build().unwrap();
        let mut p = PartialPlan::initial(&t);
        let s1 = p.add_step(Step::Action { action: ActionId(0), agent: x });
        let s2 = p.add_step(Step::Action { action: ActionId(1), agent: y });
        for s in [s1, s2] {
            p.orderings.extend([(INIT_STEP, s), (s, GOAL_STEP)]);
        }
        assert_eq!(metrics(&p, &t), Metrics { acts: 2, time_steps: 1, participants: 2 });
        assert_eq!(layers(&p), vec![vec![s1, s2]]);
    }

    #[test]
    fn coupling_extremes() {
        let mut b = TaskBuilder::new("private");
        let x = b.agent("x");
        let y = b.agent("y");
        let u = b.variable("u");
        let w = b.variable("w");
        let d = b.object("d");
        b.grant(x, u, [d]);
        b.grant(y, w, [d]);
        b.action(x, "su", vec![], vec![], vec![Effect::assign(u, d)]);
        b.action(y, "sw", vec![], vec![], vec![Effect::assign(w, d)]);
        assert_eq!(coupling_level(&b.build().unwrap()), 0.0);

        let mut b = TaskBuilder::new("shared");
        let x = b.agent("x");
        let y = b.agent("y");
        let u = b.variable("u");
        let d = b.object("d");
        b.grant(x, u, [d]);
        b.grant(y, u, [d]);
        b.action(x, "s", vec![], vec![], vec![Effect::assign(u, d)]);
        b.action(y, "t", vec![], vec![], vec![Effect::assign(u, d)]);
        assert_eq!(coupling_level(&b.build().unwrap()), 100.0);
    }
}
