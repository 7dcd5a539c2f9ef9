use std::collections::BTreeSet;

use super::fluent::{AgentId, Effect, Fluent, Value, VarId};
use super::model::MapTask;
use crate::pop::{PartialPlan, Step, StepId};

/// Whose eyes a plan is seen through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Viewer {
    /// Omniscient view, used by checkers.
    Full,
    Agent(AgentId),
}

/// An effect as some viewer sees it; the value may be ⊥.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewEffect {
    pub var: VarId,
    pub value: Value,
    pub assign: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewLink {
    pub producer: StepId,
    pub consumer: StepId,
    pub fluent: Fluent,
}

/// `view_i(Π)`: steps and orderings unchanged, fluents projected, open goals
/// restricted to visible variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanView {
    pub viewer: Viewer,
    pub steps: Vec<Step>,
    pub effects: Vec<Vec<ViewEffect>>,
    pub preconditions: Vec<Vec<Fluent>>,
    pub orderings: BTreeSet<(StepId, StepId)>,
    pub links: Vec<ViewLink>,
    pub open_goals: Vec<(StepId, Fluent)>,
}

impl MapTask {
    /// Full visibility returns the fluent, partial visibility `<v, ⊥>`, no
    /// visibility `None`.
    pub fn project_fluent(&self, f: &Fluent, a: AgentId) -> Option<Fluent> {
        if !self.sees_var(a, f.var) {
            return None;
        }
        if self.sees(a, f.var, f.value) {
            Some(*f)
        } else {
            Some(Fluent::undefined(f.var))
        }
    }

    pub fn project_effect(&self, e: &Effect, viewer: Viewer) -> Option<ViewEffect> {
        let value = Value::Obj(e.value);
        match viewer {
            Viewer::Full => Some(ViewEffect { var: e.var, value, assign: e.assign }),
            Viewer::Agent(a) => {
                if !self.sees_var(a, e.var) {
                    return None;
                }
                let value = if self.sees(a, e.var, value) { value } else { Value::Undefined };
                Some(ViewEffect { var: e.var, value, assign: e.assign })
            }
        }
    }

    pub fn project_for(&self, f: &Fluent, viewer: Viewer) -> Option<Fluent> {
        match viewer {
            Viewer::Full => Some(*f),
            Viewer::Agent(a) => self.project_fluent(f, a),
        }
    }

    /// Projects a plan onto a viewer.
    pub fn project_plan(&self, plan: &PartialPlan, viewer: Viewer) -> PlanView {
        let effects = plan
            .step_ids()
            .map(|s| plan.effects(self, s).iter().filter_map(|e| self.project_effect(e, viewer)).collect())
            .collect();
        let preconditions = plan
            .step_ids()
            .map(|s| {
                plan.preconditions(self, s).iter().filter_map(|p| self.project_for(&p.fluent(), viewer)).collect()
            })
            .collect();
        let links = plan
            .links
            .iter()
            .filter_map(|l| {
                self.project_for(&l.formula.fluent(), viewer).map(|fluent| ViewLink {
                    producer: l.producer,
                    consumer: l.consumer,
                    fluent,
                })
            })
            .collect();
        let open_goals = plan
            .open_goals
            .iter()
            .filter_map(|g| self.project_for(&g.formula.fluent(), viewer).map(|f| (g.step, f)))
            .collect();
        PlanView {
            viewer,
            steps: plan.steps.clone(),
            effects,
            preconditions,
            orderings: plan.orderings.clone(),
            links,
            open_goals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pop::{CausalLink, OpenGoal, GOAL_STEP, INIT_STEP};
    use crate::task::{Formula, TaskBuilder};

    fn two_agent_task() -> (MapTask, AgentId, AgentId, VarId, VarId) {
        let mut b = TaskBuilder::new("t");
        let x = b.agent("x");
        let y = b.agent("y");
        let at = b.variable("at");
        let fuel = b.variable("fuel");
        let l1 = b.object("L1");
        let l2 = b.object("L2");
        b.grant(x, at, [l1, l2]);
        b.grant(x, fuel, [l1]);
        b.grant(y, at, [l2]);
        b.init(x, at, l1);
        b.goal(x, Formula::pos(at, l1));
        b.goal(x, Formula::pos(fuel, l1));
        (b.build().unwrap(), x, y, at, fuel)
    }

    #[test]
    fn fluent_projection_covers_the_three_visibility_cases() {
        let (task, x, y, at, fuel) = two_agent_task();
        let l1 = task.symbols().find_obj("L1").unwrap();
        let f = Fluent::new(at, l1, true);
        assert_eq!(task.project_fluent(&f, x), Some(f));
        assert_eq!(task.project_fluent(&f, y), Some(Fluent::undefined(at)));
        assert_eq!(task.project_fluent(&Fluent::new(fuel, l1, true), y), None);
    }

    #[test]
    fn projection_is_idempotent() {
        let (task, x, y, at, _) = two_agent_task();
        let l1 = task.symbols().find_obj("L1").unwrap();
        for a in [x, y] {
            let once = task.project_fluent(&Fluent::new(at, l1, true), a).unwrap();
            assert_eq!(task.project_fluent(&once, a), Some(once));
        }
    }

    #[test]
    fn plan_view_filters_goals_and_hides_values() {
        let (task, x, y, at, _) = two_agent_task();
        let l1 = task.symbols().find_obj("L1").unwrap();
        let mut plan = PartialPlan::initial(&task);
        let full = task.project_plan(&plan, Viewer::Agent(x));
        assert_eq!(full.open_goals.len(), 2);
        let vy = task.project_plan(&plan, Viewer::Agent(y));
        // fuel is invisible to y, at=L1 shows up as at=⊥
        assert_eq!(vy.open_goals, vec![(GOAL_STEP, Fluent::undefined(at))]);

        plan.open_goals.remove(&OpenGoal { step: GOAL_STEP, formula: Formula::pos(at, l1) });
        plan.links.insert(CausalLink { producer: INIT_STEP, consumer: GOAL_STEP, formula: Formula::pos(at, l1) });
        let vy = task.project_plan(&plan, Viewer::Agent(y));
        assert_eq!(vy.links[0].fluent, Fluent::undefined(at));
        assert!(vy.open_goals.is_empty());
        assert_eq!(vy.orderings, plan.orderings);
    }
}
