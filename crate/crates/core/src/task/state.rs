use std::collections::BTreeSet;

use super::fluent::{Effect, Fluent, Formula, Truth, Value, VarId};
use super::model::{GroundAction, Symbols, TaskError};

/// A set of positive and negative fluents. Negative fluents are stored
/// explicitly; a variable with no positive fluent has an unknown value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct State {
    fluents: BTreeSet<Fluent>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    /// Builds a state, rejecting sets that violate the state invariants.
    pub fn from_fluents(fluents: impl IntoIterator<Item = Fluent>) -> Result<Self, TaskError> {
        let state = State { fluents: fluents.into_iter().collect() };
        state.check()?;
        Ok(state)
    }

    pub(crate) fn from_fluents_unchecked(fluents: BTreeSet<Fluent>) -> Self {
        State { fluents }
    }

    pub fn contains(&self, fluent: &Fluent) -> bool {
        self.fluents.contains(fluent)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fluent> {
        self.fluents.iter()
    }

    pub fn len(&self) -> usize {
        self.fluents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluents.is_empty()
    }

    /// Fluents over a single variable.
    pub fn on_var(&self, var: VarId) -> impl Iterator<Item = &Fluent> {
        let lo = Fluent { var, value: Value::Obj(0.into()), positive: false };
        self.fluents.range(lo..).take_while(move |f| f.var == var)
    }

    /// The single positive concrete value of `var`, if known.
    pub fn value_of(&self, var: VarId) -> Option<Value> {
        self.on_var(var).find(|f| f.positive).map(|f| f.value)
    }

    pub fn evaluate(&self, formula: &Formula) -> Truth {
        evaluate(formula, self)
    }

    /// Checks the two state invariants: one positive concrete value per
    /// variable, and no `<v,d>` together with `<v,¬d>`.
    pub fn check(&self) -> Result<(), TaskError> {
        let mut last_positive: Option<Fluent> = None;
        for f in &self.fluents {
            if f.value.is_undefined() && !f.positive {
                return Err(TaskError::InvalidState(format!("negated undefined value on variable {}", f.var.0)));
            }
            if f.positive && !f.value.is_undefined() {
                if let Some(prev) = last_positive {
                    if prev.var == f.var {
                        return Err(TaskError::InvalidState(format!(
                            "variable {} holds two positive values",
                            f.var.0
                        )));
                    }
                }
                last_positive = Some(*f);
                let opposite = Fluent { positive: false, ..*f };
                if self.fluents.contains(&opposite) {
                    return Err(TaskError::InvalidState(format!(
                        "variable {} holds a value and its negation",
                        f.var.0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies `action` under full information. Preconditions must all
    /// evaluate to true.
    pub fn apply(&self, action: &GroundAction, symbols: &Symbols) -> Result<State, TaskError> {
        if let Some(p) = action.pre.iter().find(|p| self.evaluate(p) != Truth::True) {
            return Err(TaskError::PreconditionUnsatisfied {
                action: action.label(symbols),
                formula: symbols.formula_label(p),
            });
        }
        let mut next = self.fluents.clone();
        let (assigns, unassigns): (Vec<&Effect>, Vec<&Effect>) = action.eff.iter().partition(|e| e.assign);
        for e in assigns {
            next.retain(|f| f.var != e.var);
            for &d in symbols.domain(e.var) {
                next.insert(Fluent::new(e.var, d, d == e.value));
            }
            next.insert(Fluent::new(e.var, e.value, true));
        }
        for e in unassigns {
            next.remove(&Fluent::new(e.var, e.value, true));
            next.remove(&Fluent::undefined(e.var));
            next.insert(Fluent::new(e.var, e.value, false));
        }
        Ok(State { fluents: next })
    }
}

impl FromIterator<Fluent> for State {
    fn from_iter<T: IntoIterator<Item = Fluent>>(iter: T) -> Self {
        State { fluents: iter.into_iter().collect() }
    }
}

/// Tri-state evaluation of a formula against a state.
pub fn evaluate(formula: &Formula, state: &State) -> Truth {
    let f = formula.fluent();
    if state.contains(&f) {
        Truth::True
    } else if state.contains(&formula.negated().fluent()) {
        Truth::False
    } else {
        Truth::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::fluent::ObjId;
    use crate::task::model::TaskBuilder;

    fn three_locations() -> (crate::task::MapTask, VarId, [ObjId; 3]) {
        let mut b = TaskBuilder::new("t");
        let a = b.agent("a");
        let at = b.variable("at");
        let l = [b.object("L1"), b.object("L2"), b.object("L3")];
        b.grant(a, at, l);
        for (i, &d) in l.iter().enumerate() {
            b.action(a, &format!("set{}", i + 1), vec![], vec![], vec![Effect::assign(at, d)]);
            b.action(a, &format!("clear{}", i + 1), vec![], vec![], vec![Effect::unassign(at, d)]);
        }
        b.action(a, "need1", vec![], vec![Formula::pos(at, l[0])], vec![]);
        (b.build().unwrap(), at, l)
    }

    fn act<'a>(task: &'a crate::task::MapTask, name: &str) -> &'a GroundAction {
        task.actions().iter().find(|a| a.name == name).unwrap()
    }

    #[test]
    fn evaluate_is_tri_state() {
        let at = VarId(0);
        let l1 = ObjId(0);
        let present = State::from_iter([Fluent::new(at, l1, true)]);
        let negated = State::from_iter([Fluent::new(at, l1, false)]);
        assert_eq!(evaluate(&Formula::pos(at, l1), &present), Truth::True);
        assert_eq!(evaluate(&Formula::pos(at, l1), &negated), Truth::False);
        assert_eq!(evaluate(&Formula::pos(at, l1), &State::new()), Truth::Unknown);
    }

    #[test]
    fn assign_materializes_negations_over_the_domain() {
        let (task, at, l) = three_locations();
        let s = State::new().apply(act(&task, "set1"), task.symbols()).unwrap();
        let expected = State::from_iter([
            Fluent::new(at, l[0], true),
            Fluent::new(at, l[1], false),
            Fluent::new(at, l[2], false),
        ]);
        assert_eq!(s, expected);
    }

    #[test]
    fn unassign_leaves_the_value_unknown() {
        let (task, at, l) = three_locations();
        let s = State::from_iter([
            Fluent::new(at, l[0], true),
            Fluent::new(at, l[1], false),
            Fluent::new(at, l[2], false),
        ]);
        let s = s.apply(act(&task, "clear1"), task.symbols()).unwrap();
        let expected = State::from_iter([
            Fluent::new(at, l[0], false),
            Fluent::new(at, l[1], false),
            Fluent::new(at, l[2], false),
        ]);
        assert_eq!(s, expected);
        assert_eq!(s.value_of(at), None);
    }

    #[test]
    fn unsatisfied_precondition_is_reported() {
        let (task, _, _) = three_locations();
        let err = State::new().apply(act(&task, "need1"), task.symbols()).unwrap_err();
        match err {
            TaskError::PreconditionUnsatisfied { formula, .. } => assert_eq!(formula, "at=L1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn check_rejects_two_positive_values() {
        let at = VarId(0);
        let bad = State::from_fluents([Fluent::new(at, ObjId(0), true), Fluent::new(at, ObjId(1), true)]);
        assert!(bad.is_err());
        let contradiction =
            State::from_fluents([Fluent::new(at, ObjId(0), true), Fluent::new(at, ObjId(0), false)]);
        assert!(contradiction.is_err());
    }
}
