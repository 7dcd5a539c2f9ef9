//! A* over plan space, run by one agent to refine a base plan for one goal.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use super::compose::{compose, open_goals_of, RefinementStep};
use super::heuristic::{heuristic_f, DEFAULT_UNKNOWN_PENALTY};
use super::plan::{CausalLink, OpenGoal, PartialPlan, Step, StepId, GOAL_STEP, INIT_STEP};
use super::threat::{resolve_threat, threats_with};
use crate::rpg::RelaxedPlanningGraph;
use crate::task::{AgentId, MapTask, Truth, Value, Viewer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    /// Maximum number of search nodes expanded per call.
    pub max_expansions: usize,
    /// Maximum number of refinements returned per call.
    pub max_plans: usize,
    /// Cap on the number of steps one refinement may add; `None` searches
    /// without a size bound.
    pub max_new_steps: Option<usize>,
    pub unknown_penalty: f64,
    /// The search stops with what it has found once this passes.
    pub deadline: Option<Instant>,
}

/// Default for [`RefineConfig::max_new_steps`]. Without a bound, a goal that
/// has one cheap solution and an endless self-supporting alternative spends
/// the whole expansion budget on ever longer plans.
pub const DEFAULT_MAX_NEW_STEPS: usize = 12;

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_expansions: 10_000,
            max_plans: 4,
            max_new_steps: Some(DEFAULT_MAX_NEW_STEPS),
            unknown_penalty: DEFAULT_UNKNOWN_PENALTY,
            deadline: None,
        }
    }
}

struct Node {
    f: f64,
    actions: usize,
    signature: String,
    plan: PartialPlan,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.actions.cmp(&self.actions))
            .then_with(|| other.signature.cmp(&self.signature))
    }
}

struct Search<'a> {
    task: &'a MapTask,
    base: &'a PartialPlan,
    goal: OpenGoal,
    agent: AgentId,
    rpg: &'a RelaxedPlanningGraph,
    cfg: RefineConfig,
}

impl Search<'_> {
    /// Open goals this refinement must close: `g` itself and anything a new
    /// step needs over a variable only this agent knows.
    fn agenda(&self, plan: &PartialPlan) -> Vec<OpenGoal> {
        let base_len = self.base.steps.len();
        plan.open_goals
            .iter()
            .filter(|o| {
                **o == self.goal || (o.step.index() >= base_len && self.task.is_private_to(self.agent, o.formula.var))
            })
            .copied()
            .collect()
    }

    fn node(&self, plan: PartialPlan) -> Option<Node> {
        let view = self.task.project_plan(&plan, Viewer::Agent(self.agent));
        let h = heuristic_f(&view, self.rpg, self.cfg.unknown_penalty);
        if !h.is_finite() {
            return None;
        }
        let actions = plan.num_actions();
        Some(Node { f: h + actions as f64, actions, signature: plan.signature(self.task), plan })
    }

    /// Threats that involve something new; the base is already threat-free.
    fn first_threat(&self, plan: &PartialPlan) -> Option<super::threat::Threat> {
        let base_len = self.base.steps.len();
        let reach = plan.closure();
        threats_with(self.task, plan, &reach, |s, l| s.index() >= base_len || !self.base.links.contains(l))
            .into_iter()
            .next()
    }

    fn supports(&self, plan: &PartialPlan, g: OpenGoal) -> Vec<PartialPlan> {
        let task = self.task;
        let me = task.agent(self.agent);
        let phi = g.formula;
        let reach = plan.closure();
        let mut out = Vec::new();
        let link = |mut p: PartialPlan, producer: StepId| {
            p.open_goals.remove(&g);
            p.orderings.insert((producer, g.step));
            p.links.insert(CausalLink { producer, consumer: g.step, formula: phi });
            p
        };
        if !me.sees_formula(&phi) {
            return out;
        }
        for s in plan.step_ids() {
            if s == g.step || s == GOAL_STEP || reach.before(g.step, s) {
                continue;
            }
            let ok = if s == INIT_STEP {
                me.init.evaluate(&phi) == Truth::True
            } else {
                plan.effects(task, s).iter().any(|e| e.entails(&phi) && me.sees(e.var, Value::Obj(e.value)))
            };
            if ok {
                out.push(link(plan.clone(), s));
            }
        }
        let added = plan.steps.len() - self.base.steps.len();
        if self.cfg.max_new_steps.is_some_and(|m| added >= m) {
            return out;
        }
        for (id, action) in task.agent_actions(self.agent) {
            if !action.eff.iter().any(|e| e.entails(&phi)) {
                continue;
            }
            let mut p = plan.clone();
            let s = p.add_step(Step::Action { action: id, agent: self.agent });
            p.orderings.insert((INIT_STEP, s));
            p.orderings.insert((s, GOAL_STEP));
            for &formula in &action.pre {
                p.open_goals.insert(OpenGoal { step: s, formula });
            }
            out.push(link(p, s));
        }
        out
    }

    fn run(&self) -> Vec<RefinementStep> {
        let mut found = Vec::new();
        if self.cfg.max_plans == 0 {
            return found;
        }
        let mut heap = BinaryHeap::new();
        let mut seen = HashSet::new();
        if let Some(root) = self.node(self.base.clone()) {
            seen.insert(root.signature.clone());
            heap.push(root);
        }
        let mut expansions = 0;
        while let Some(node) = heap.pop() {
            if expansions >= self.cfg.max_expansions {
                break;
            }
            if expansions % 64 == 0 && self.cfg.deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
            expansions += 1;
            let plan = node.plan;
            let children = if let Some(t) = self.first_threat(&plan) {
                resolve_threat(&plan, &t)
            } else {
                let agenda = self.agenda(&plan);
                match agenda.first() {
                    None => {
                        let step = RefinementStep::diff(self.agent, self.goal, self.base, &plan);
                        if compose(self.task, self.base, &step).is_ok() {
                            found.push(step);
                            if found.len() >= self.cfg.max_plans {
                                break;
                            }
                        }
                        continue;
                    }
                    Some(&g) => self.supports(&plan, g),
                }
            };
            for child in children {
                if let Some(n) = self.node(child) {
                    if seen.insert(n.signature.clone()) {
                        heap.push(n);
                    }
                }
            }
        }
        found
    }
}

/// Computes up to `cfg.max_plans` refinements of `base` that close `goal`
/// and every newly arising open goal over variables private to `agent`.
///
/// Panics if `agent` does not know the goal's variable.
pub fn refine(
    task: &MapTask,
    base: &PartialPlan,
    goal: OpenGoal,
    agent: AgentId,
    rpg: &RelaxedPlanningGraph,
    cfg: &RefineConfig,
) -> Vec<RefinementStep> {
    assert!(
        task.sees_var(agent, goal.formula.var),
        "agent {} cannot refine a goal over {}",
        task.symbols().agent_name(agent),
        task.symbols().var_name(goal.formula.var)
    );
    debug_assert_eq!(base.open_goals, open_goals_of(task, base));
    if !base.open_goals.contains(&goal) {
        return Vec::new();
    }
    Search { task, base, goal, agent, rpg, cfg: *cfg }.run()
}

/// Composes every refinement with the base, in order.
pub fn refinement_plans(task: &MapTask, base: &PartialPlan, steps: &[RefinementStep]) -> Vec<PartialPlan> {
    steps.iter().filter_map(|s| compose(task, base, s).ok()).collect()
}
