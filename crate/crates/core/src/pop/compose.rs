use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::plan::{CausalLink, OpenGoal, PartialPlan, Step, StepId, GOAL_STEP, INIT_STEP};
use super::threat::plan_threats;
use crate::task::{AgentId, Formula, MapTask};

/// What one agent proposes on top of a base plan: new steps (appended after
/// the base's `base_len` steps), new orderings and new causal links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementStep {
    pub agent: AgentId,
    pub goal: OpenGoal,
    pub base_len: usize,
    pub new_steps: Vec<Step>,
    pub orderings: BTreeSet<(StepId, StepId)>,
    pub links: BTreeSet<CausalLink>,
}

impl RefinementStep {
    /// The part of `plan` that is not already in `base`.
    pub fn diff(agent: AgentId, goal: OpenGoal, base: &PartialPlan, plan: &PartialPlan) -> Self {
        RefinementStep {
            agent,
            goal,
            base_len: base.steps.len(),
            new_steps: plan.steps[base.steps.len()..].to_vec(),
            orderings: plan.orderings.difference(&base.orderings).copied().collect(),
            links: plan.links.difference(&base.links).copied().collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComposeError {
    #[error("refinement built on a {expected}-step base, got {actual} steps")]
    BaseMismatch { expected: usize, actual: usize },
    #[error("composition is not a concurrent plan: {0}")]
    Inconsistent(String),
}

/// Two formulas over one variable that cannot hold together.
pub fn formulas_conflict(a: &Formula, b: &Formula) -> bool {
    a.var == b.var
        && match (a.positive, b.positive) {
            (true, true) => a.value != b.value,
            (false, false) => false,
            _ => a.value == b.value,
        }
}

/// Every precondition of every step without a supporting link.
pub fn open_goals_of(task: &MapTask, plan: &PartialPlan) -> BTreeSet<OpenGoal> {
    let supported: BTreeSet<(StepId, Formula)> = plan.links.iter().map(|l| (l.consumer, l.formula)).collect();
    let mut out = BTreeSet::new();
    for s in plan.step_ids() {
        for &formula in plan.preconditions(task, s) {
            if !supported.contains(&(s, formula)) {
                out.insert(OpenGoal { step: s, formula });
            }
        }
    }
    out
}

/// `Π^g ∘ Π_i`: unions the refinement into the base and checks the result is
/// a threat-free concurrent plan.
pub fn compose(task: &MapTask, base: &PartialPlan, step: &RefinementStep) -> Result<PartialPlan, ComposeError> {
    if base.steps.len() != step.base_len {
        return Err(ComposeError::BaseMismatch { expected: step.base_len, actual: base.steps.len() });
    }
    let mut plan = base.clone();
    for &s in &step.new_steps {
        if s.is_synthetic() {
            return Err(ComposeError::Inconsistent("synthetic step in refinement".into()));
        }
        let id = plan.add_step(s);
        plan.orderings.insert((INIT_STEP, id));
        plan.orderings.insert((id, GOAL_STEP));
    }
    plan.orderings.extend(step.orderings.iter().copied());
    plan.links.extend(step.links.iter().copied());
    plan.open_goals = open_goals_of(task, &plan);
    check_consistent(task, &plan)?;
    Ok(plan)
}

/// Structural and concurrency checks shared by [`compose`] and the search.
pub fn check_consistent(task: &MapTask, plan: &PartialPlan) -> Result<(), ComposeError> {
    let bad = |m: String| Err(ComposeError::Inconsistent(m));
    let n = plan.steps.len();
    if let Some(&(a, b)) = plan.orderings.iter().find(|(a, b)| a.index() >= n || b.index() >= n) {
        return bad(format!("ordering {} < {} names a missing step", a.0, b.0));
    }
    let reach = plan.closure();
    if !reach.is_acyclic() {
        return bad("orderings are cyclic".into());
    }
    let mut per_pre: BTreeMap<(StepId, Formula), usize> = BTreeMap::new();
    for l in &plan.links {
        if l.producer.index() >= n || l.consumer.index() >= n {
            return bad(format!("link {} -> {} names a missing step", l.producer.0, l.consumer.0));
        }
        if !reach.before(l.producer, l.consumer) {
            return bad(format!("link {} -> {} is not ordered", l.producer.0, l.consumer.0));
        }
        if !plan.effects(task, l.producer).iter().any(|e| e.entails(&l.formula)) {
            return bad(format!("step {} does not produce {}", l.producer.0, task.symbols().formula_label(&l.formula)));
        }
        if !plan.preconditions(task, l.consumer).contains(&l.formula) {
            return bad(format!("step {} does not need {}", l.consumer.0, task.symbols().formula_label(&l.formula)));
        }
        *per_pre.entry((l.consumer, l.formula)).or_default() += 1;
    }
    if let Some(((s, f), _)) = per_pre.iter().find(|(_, &c)| c > 1) {
        return bad(format!("precondition {} of step {} has several links", task.symbols().formula_label(f), s.0));
    }
    if let Some(t) = plan_threats(task, plan).into_iter().next() {
        return bad(format!("step {} threatens link {} -> {}", t.step.0, t.producer.0, t.consumer.0));
    }
    let links: Vec<&CausalLink> = plan.links.iter().collect();
    for (i, a) in links.iter().enumerate() {
        for b in &links[i + 1..] {
            if a.consumer != b.consumer && reach.unordered(a.consumer, b.consumer) && formulas_conflict(&a.formula, &b.formula) {
                return bad(format!("steps {} and {} need conflicting values", a.consumer.0, b.consumer.0));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{ActionId, Effect, TaskBuilder};

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

    fn move_refinement(t: &MapTask) -> RefinementStep {
        let at = t.symbols().find_var("at").unwrap();
        let l1 = t.symbols().find_obj("L1").unwrap();
        let l2 = t.symbols().find_obj("L2").unwrap();
        let s = StepId(2);
        RefinementStep {
            agent: AgentId(0),
            goal: OpenGoal { step: GOAL_STEP, formula: Formula::pos(at, l2) },
            base_len: 2,
            new_steps: vec![Step::Action { action: ActionId(0), agent: AgentId(0) }],
            orderings: [(INIT_STEP, s), (s, GOAL_STEP)].into(),
            links: [
                CausalLink { producer: INIT_STEP, consumer: s, formula: Formula::pos(at, l1) },
                CausalLink { producer: s, consumer: GOAL_STEP, formula: Formula::pos(at, l2) },
            ]
            .into(),
        }
    }

    #[test]
    fn composing_the_move_closes_every_goal() {
        let t = micro();
        let p = compose(&t, &PartialPlan::initial(&t), &move_refinement(&t)).unwrap();
        assert_eq!(p.steps.len(), 3);
        assert!(p.open_goals.is_empty());
    }

    #[test]
    fn wrong_base_is_rejected() {
        let t = micro();
        let p = compose(&t, &PartialPlan::initial(&t), &move_refinement(&t)).unwrap();
        assert!(matches!(compose(&t, &p, &move_refinement(&t)), Err(ComposeError::BaseMismatch { .. })));
    }

    #[test]
    fn ordering_only_refinement_extends_orderings() {
        let t = micro();
        let p = compose(&t, &PartialPlan::initial(&t), &move_refinement(&t)).unwrap();
        let mut q = p.clone();
        let s2 = q.add_step(Step::Action { action: ActionId(0), agent: AgentId(0) });
        q.orderings.extend([(INIT_STEP, s2), (s2, GOAL_STEP)]);
        q.open_goals = open_goals_of(&t, &q);
        let r = RefinementStep {
            agent: AgentId(0),
            goal: *q.open_goals.iter().next().unwrap(),
            base_len: 4,
            new_steps: vec![],
            orderings: [(StepId(2), s2)].into(),
            links: BTreeSet::new(),
        };
        let out = compose(&t, &q, &r).unwrap();
        assert_eq!(out.orderings.len(), q.orderings.len() + 1);
        assert_eq!(out.steps, q.steps);
    }

    #[test]
    fn unordered_conflicting_consumers_are_inconsistent() {
        // two unordered observers need at=L1 and at=L2
        let mut b = TaskBuilder::new("c");
        let a = b.agent("a");
        let at = b.variable("at");
        let seen = b.variable("seen");
        let l1 = b.object("L1");
        let l2 = b.object("L2");
        b.grant(a, at, [l1, l2]);
        b.grant(a, seen, [l1, l2]);
        b.init(a, at, l1);
        b.action(a, "look", vec![l1], vec![Formula::pos(at, l1)], vec![Effect::assign(seen, l1)]);
        b.action(a, "look", vec![l2], vec![Formula::pos(at, l2)], vec![Effect::assign(seen, l2)]);
        b.action(a, "put", vec![l2], vec![], vec![Effect::assign(at, l2)]);
        let t = b.build().unwrap();
        let mut p = PartialPlan::initial(&t);
        let look1 = p.add_step(Step::Action { action: ActionId(0), agent: a });
        let look2 = p.add_step(Step::Action { action: ActionId(1), agent: a });
        let put = p.add_step(Step::Action { action: ActionId(2), agent: a });
        for s in [look1, look2, put] {
            p.orderings.extend([(INIT_STEP, s), (s, GOAL_STEP)]);
        }
        let base_len = p.steps.len();
        let r = RefinementStep {
            agent: a,
            goal: OpenGoal { step: look1, formula: Formula::pos(at, l1) },
            base_len,
            new_steps: vec![],
            orderings: [(put, look2)].into(),
            links: [
                CausalLink { producer: INIT_STEP, consumer: look1, formula: Formula::pos(at, l1) },
                CausalLink { producer: put, consumer: look2, formula: Formula::pos(at, l2) },
            ]
            .into(),
        };
        assert!(matches!(compose(&t, &p, &r), Err(ComposeError::Inconsistent(_))));
    }

    #[test]
    fn conflict_table() {
        let v = crate::task::VarId(0);
        let (d, e) = (crate::task::ObjId(0), crate::task::ObjId(1));
        assert!(formulas_conflict(&Formula::pos(v, d), &Formula::pos(v, e)));
        assert!(!formulas_conflict(&Formula::pos(v, d), &Formula::pos(v, d)));
        assert!(formulas_conflict(&Formula::pos(v, d), &Formula::neg(v, d)));
        assert!(!formulas_conflict(&Formula::pos(v, d), &Formula::neg(v, e)));
        assert!(!formulas_conflict(&Formula::neg(v, d), &Formula::neg(v, e)));
    }
}
