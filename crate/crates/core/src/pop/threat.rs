use std::collections::BTreeSet;

use super::plan::{CausalLink, PartialPlan, Reach, StepId};
use crate::task::{Effect, Fluent, MapTask, PlanView, Value, ViewEffect};

/// Step `step` may clobber the link `producer → consumer` carrying `fluent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threat {
    pub step: StepId,
    pub producer: StepId,
    pub consumer: StepId,
    pub fluent: Fluent,
}

/// Whether an effect, as some viewer sees it, can falsify a link fluent over
/// the same variable. ⊥ on either side always conflicts, ⊥ against ⊥ too.
pub fn effect_conflicts(e: &ViewEffect, f: &Fluent) -> bool {
    if e.var != f.var {
        return false;
    }
    let (Value::Obj(d), Value::Obj(l)) = (e.value, f.value) else {
        return true;
    };
    match (f.positive, e.assign) {
        (true, true) => d != l,
        (true, false) => d == l,
        (false, true) => d == l,
        (false, false) => false,
    }
}

/// `s` lies possibly inside the interval of the link: `s ∉ {p, c}`, not
/// `s ≺+ p`, not `c ≺+ s`.
pub fn can_interleave(reach: &Reach, s: StepId, producer: StepId, consumer: StepId) -> bool {
    s != producer && s != consumer && !reach.before(s, producer) && !reach.before(consumer, s)
}

/// All threats in one viewer's projection of a plan.
pub fn detect_threats(view: &PlanView) -> BTreeSet<Threat> {
    let reach = Reach::new(view.steps.len(), view.orderings.iter().copied());
    let mut out = BTreeSet::new();
    for link in &view.links {
        for (i, effects) in view.effects.iter().enumerate() {
            let s = StepId::from(i);
            if !can_interleave(&reach, s, link.producer, link.consumer) {
                continue;
            }
            if effects.iter().any(|e| effect_conflicts(e, &link.fluent)) {
                out.insert(Threat { step: s, producer: link.producer, consumer: link.consumer, fluent: link.fluent });
            }
        }
    }
    out
}

/// Conflict between a concrete effect and a concrete link, seen through every
/// agent's eyes at once: it conflicts outright, or some agent that knows the
/// variable sees either value as ⊥.
pub fn robust_conflict(task: &MapTask, e: &Effect, link: &CausalLink) -> bool {
    let f = link.formula;
    if e.var != f.var {
        return false;
    }
    let concrete = ViewEffect { var: e.var, value: Value::Obj(e.value), assign: e.assign };
    effect_conflicts(&concrete, &f.fluent()) || task.hidden_from_some(e.var, e.value) || task.hidden_from_some(f.var, f.value)
}

/// Threats of a full plan under the union of every agent's projection.
pub fn plan_threats(task: &MapTask, plan: &PartialPlan) -> BTreeSet<Threat> {
    threats_with(task, plan, &plan.closure(), |_, _| true)
}

/// Like [`plan_threats`] but only over (step, link) pairs accepted by `filter`.
pub(crate) fn threats_with(
    task: &MapTask,
    plan: &PartialPlan,
    reach: &Reach,
    filter: impl Fn(StepId, &CausalLink) -> bool,
) -> BTreeSet<Threat> {
    let effects: Vec<Vec<Effect>> = plan.step_ids().map(|s| plan.effects(task, s)).collect();
    let mut out = BTreeSet::new();
    for link in &plan.links {
        for (i, eff) in effects.iter().enumerate() {
            let s = StepId::from(i);
            if !filter(s, link) || !can_interleave(reach, s, link.producer, link.consumer) {
                continue;
            }
            if eff.iter().any(|e| robust_conflict(task, e, link)) {
                out.insert(Threat {
                    step: s,
                    producer: link.producer,
                    consumer: link.consumer,
                    fluent: link.formula.fluent(),
                });
            }
        }
    }
    out
}

/// Promotion (`consumer ≺ step`) then demotion (`step ≺ producer`); children
/// whose ordering would be cyclic are dropped.
pub fn resolve_threat(plan: &PartialPlan, t: &Threat) -> Vec<PartialPlan> {
    let reach = plan.closure();
    let mut out = Vec::new();
    for (a, b) in [(t.consumer, t.step), (t.step, t.producer)] {
        if a == b || reach.before(b, a) {
            continue;
        }
        let mut child = plan.clone();
        child.orderings.insert((a, b));
        out.push(child);
    }
    out
}
