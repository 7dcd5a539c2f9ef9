use super::threat::detect_threats;
use crate::rpg::RelaxedPlanningGraph;
use crate::task::PlanView;

/// Cost charged for an open goal the viewer sees as ⊥.
pub const DEFAULT_UNKNOWN_PENALTY: f64 = 1.0;

/// `F(view)`: summed graph cost of the visible open goals plus the number of
/// threats in the view. Goals missing from the graph cost `+∞`.
pub fn heuristic_f(view: &PlanView, rpg: &RelaxedPlanningGraph, unknown_penalty: f64) -> f64 {
    let mut total = 0.0;
    for (_, g) in &view.open_goals {
        total += match g.as_formula() {
            None => unknown_penalty,
            Some(f) => match rpg.cost(&f) {
                Some(c) => c as f64,
                None => return f64::INFINITY,
            },
        };
    }
    total + detect_threats(view).len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pop::PartialPlan;
    use crate::rpg::build_initial_rpg;
    use crate::task::{AgentId, Effect, Formula, TaskBuilder, Viewer};

    fn chain_with_goal(goal: &str) -> crate::task::MapTask {
        let mut b = TaskBuilder::new("chain");
        let a = b.agent("a");
        let at = b.variable("at");
        let locs: Vec<_> = ["L1", "L2", "L3", "L4"].iter().map(|n| b.object(n)).collect();
        b.grant(a, at, locs.iter().copied());
        b.init(a, at, locs[0]);
        for w in locs[..3].windows(2) {
            b.action(a, "move", vec![w[0], w[1]], vec![Formula::pos(at, w[0])], vec![Effect::assign(at, w[1])]);
        }
        if !goal.is_empty() {
            let g = b.object(goal);
            b.goal(a, Formula::pos(at, g));
        }
        b.build().unwrap()
    }

    #[test]
    fn no_goals_costs_zero() {
        let t = chain_with_goal("");
        let g = build_initial_rpg(AgentId(0), &t);
        let v = t.project_plan(&PartialPlan::initial(&t), Viewer::Agent(AgentId(0)));
        assert_eq!(heuristic_f(&v, &g, 1.0), 0.0);
    }

    #[test]
    fn goal_cost_comes_from_the_graph() {
        let t = chain_with_goal("L3");
        let g = build_initial_rpg(AgentId(0), &t);
        let v = t.project_plan(&PartialPlan::initial(&t), Viewer::Agent(AgentId(0)));
        assert_eq!(heuristic_f(&v, &g, 1.0), 2.0);
    }

    #[test]
    fn unreachable_goal_is_infinite() {
        let t = chain_with_goal("L4");
        let g = build_initial_rpg(AgentId(0), &t);
        let v = t.project_plan(&PartialPlan::initial(&t), Viewer::Agent(AgentId(0)));
        assert!(heuristic_f(&v, &g, 1.0).is_infinite());
    }
}
