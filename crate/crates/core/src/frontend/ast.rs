use std::fmt::{self, Write as _};

/// `name - type` in a typed list; types use `parent` instead of `ty`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Typed {
    pub name: String,
    pub ty: String,
}

/// A state-variable template `(var ?p - t ... - valuetype)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarSchema {
    pub name: String,
    pub params: Vec<Typed>,
    pub value_type: String,
}

/// `(var arg ...)`; arguments are `?params` in schemas and objects elsewhere.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub var: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    /// `(= (var args) value)`
    Eq(Term, String),
    /// `(!= (var args) value)`
    Ne(Term, String),
    /// `(!= ?a ?b)`: two parameters must be bound to different objects.
    Distinct(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectAst {
    pub assign: bool,
    pub term: Term,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Typed>,
    pub pre: Vec<Condition>,
    pub eff: Vec<EffectAst>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainAst {
    pub name: String,
    pub requirements: Vec<String>,
    /// Each declared type with its parent; `object` is implicit.
    pub types: Vec<Typed>,
    pub variables: Vec<VarSchema>,
    pub actions: Vec<ActionSchema>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemAst {
    pub name: String,
    pub domain: Option<String>,
    /// Agent owning this problem; defaults to the problem name.
    pub agent: Option<String>,
    pub objects: Vec<Typed>,
    pub init: Vec<(Term, String)>,
    /// Only `Eq` and `Ne` appear here.
    pub goals: Vec<Condition>,
}

impl ProblemAst {
    pub fn agent_name(&self) -> &str {
        self.agent.as_deref().unwrap_or(&self.name)
    }
}

/// One `((var args) :with (agent :values (obj ...)) ...)` entry. Arguments
/// may be `?x` wildcards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedEntry {
    pub term: Term,
    pub grants: Vec<(String, Vec<String>)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SharedDataDecl {
    pub entries: Vec<SharedEntry>,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.var)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Eq(t, v) => write!(f, "(= {t} {v})"),
            Condition::Ne(t, v) => write!(f, "(!= {t} {v})"),
            Condition::Distinct(a, b) => write!(f, "(!= {a} {b})"),
        }
    }
}

impl fmt::Display for EffectAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.assign { "assign" } else { "unassign" };
        write!(f, "({op} {} {})", self.term, self.value)
    }
}

fn typed_list(items: &[Typed]) -> String {
    let mut out = String::new();
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{} - {}", t.name, t.ty);
    }
    out
}

fn and_list(items: impl Iterator<Item = String>) -> String {
    let items: Vec<String> = items.collect();
    format!("(and{}{})", if items.is_empty() { "" } else { " " }, items.join(" "))
}

impl fmt::Display for DomainAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        writeln!(f, "  (:types {})", typed_list(&self.types))?;
        writeln!(f, "  (:variables")?;
        for v in &self.variables {
            let sep = if v.params.is_empty() { "" } else { " " };
            writeln!(f, "    ({}{}{} - {})", v.name, sep, typed_list(&v.params), v.value_type)?;
        }
        write!(f, "  )")?;
        for a in &self.actions {
            writeln!(f)?;
            writeln!(f, "  (:action {}", a.name)?;
            writeln!(f, "    :parameters ({})", typed_list(&a.params))?;
            writeln!(f, "    :precondition {}", and_list(a.pre.iter().map(|c| c.to_string())))?;
            write!(f, "    :effect {})", and_list(a.eff.iter().map(|e| e.to_string())))?;
        }
        writeln!(f, ")")
    }
}

impl fmt::Display for ProblemAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        if let Some(d) = &self.domain {
            writeln!(f, "  (:domain {d})")?;
        }
        if let Some(a) = &self.agent {
            writeln!(f, "  (:agent {a})")?;
        }
        writeln!(f, "  (:objects {})", typed_list(&self.objects))?;
        writeln!(f, "  (:init")?;
        for (t, v) in &self.init {
            writeln!(f, "    (= {t} {v})")?;
        }
        writeln!(f, "  )")?;
        writeln!(f, "  (:goal {}))", and_list(self.goals.iter().map(|g| g.to_string())))
    }
}

impl fmt::Display for SharedDataDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(:shared-data")?;
        for e in &self.entries {
            write!(f, "  ({} :with", e.term)?;
            for (agent, values) in &e.grants {
                write!(f, " ({agent} :values ({}))", values.join(" "))?;
            }
            writeln!(f, ")")?;
        }
        writeln!(f, ")")
    }
}
