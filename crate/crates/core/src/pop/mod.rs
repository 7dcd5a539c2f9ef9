//! Partial-order causal-link planning: plans, threats, the plan heuristic,
//! refinement composition and the per-agent A* refinement search.

mod compose;
mod heuristic;
mod plan;
mod search;
mod threat;

pub use compose::{check_consistent, compose, formulas_conflict, open_goals_of, ComposeError, RefinementStep};
pub use heuristic::{heuristic_f, DEFAULT_UNKNOWN_PENALTY};
pub use plan::{CausalLink, OpenGoal, PartialPlan, Reach, Step, StepId, GOAL_STEP, INIT_STEP};
pub use search::{refine, refinement_plans, RefineConfig, DEFAULT_MAX_NEW_STEPS};
pub use threat::{can_interleave, detect_threats, effect_conflicts, plan_threats, resolve_threat, robust_conflict, Threat};
