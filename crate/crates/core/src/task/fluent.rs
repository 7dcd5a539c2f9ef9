use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }
    };
}

id_type!(
    /// An object of the planning domain; values of state variables are objects.
    ObjId
);
id_type!(
    /// A ground state variable such as `at(pkg1)`.
    VarId
);
id_type!(AgentId);
id_type!(ActionId);

/// The value half of a fluent. `Undefined` is what an agent sees in place of a
/// value outside its view of the variable's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Obj(ObjId),
    Undefined,
}

impl Value {
    pub fn obj(self) -> Option<ObjId> {
        match self {
            Value::Obj(o) => Some(o),
            Value::Undefined => None,
        }
    }

    pub fn is_undefined(self) -> bool {
        matches!(self, Value::Undefined)
    }
}

/// `<v, d>` when `positive`, `<v, ¬d>` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fluent {
    pub var: VarId,
    pub value: Value,
    pub positive: bool,
}

impl Fluent {
    pub fn new(var: VarId, value: ObjId, positive: bool) -> Self {
        Fluent { var, value: Value::Obj(value), positive }
    }

    /// `<v, ⊥>`. Undefined values are never negated.
    pub fn undefined(var: VarId) -> Self {
        Fluent { var, value: Value::Undefined, positive: true }
    }

    pub fn as_formula(&self) -> Option<Formula> {
        self.value.obj().map(|value| Formula { var: self.var, value, positive: self.positive })
    }
}

/// A concrete condition `(v, d)` or `(v, ¬d)`. Formulas never carry ⊥.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Formula {
    pub var: VarId,
    pub value: ObjId,
    pub positive: bool,
}

impl Formula {
    pub fn pos(var: VarId, value: ObjId) -> Self {
        Formula { var, value, positive: true }
    }

    pub fn neg(var: VarId, value: ObjId) -> Self {
        Formula { var, value, positive: false }
    }

    pub fn fluent(&self) -> Fluent {
        Fluent::new(self.var, self.value, self.positive)
    }

    pub fn negated(&self) -> Formula {
        Formula { positive: !self.positive, ..*self }
    }
}

/// `assign(v, d)` encodes `(v = d)`, `unassign(v, d)` encodes `(v ≠ d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Effect {
    pub var: VarId,
    pub value: ObjId,
    pub assign: bool,
}

impl Effect {
    pub fn assign(var: VarId, value: ObjId) -> Self {
        Effect { var, value, assign: true }
    }

    pub fn unassign(var: VarId, value: ObjId) -> Self {
        Effect { var, value, assign: false }
    }

    /// Whether the effect makes `formula` true. An assignment also entails every
    /// `(v, ¬d')` with `d' ≠ d`.
    pub fn entails(&self, formula: &Formula) -> bool {
        if self.var != formula.var {
            return false;
        }
        match (self.assign, formula.positive) {
            (true, true) => self.value == formula.value,
            (true, false) => self.value != formula.value,
            (false, true) => false,
            (false, false) => self.value == formula.value,
        }
    }
}

/// Result of evaluating a formula against an open-world state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::True => "true",
            Truth::False => "false",
            Truth::Unknown => "unknown",
        })
    }
}
