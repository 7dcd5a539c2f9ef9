//! From parsed files to a ground [`MapTask`].
//!
//! An agent knows a ground variable when every argument is one of the objects
//! in its own problem file, and sees the values of the variable's type that it
//! also declares. Shared-data entries add variables and values to other
//! agents' views. Actions are grounded over all objects and kept for an agent
//! only when it sees every condition and effect.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::{ActionSchema, Condition, DomainAst, ProblemAst, SharedDataDecl, Term, Typed};
use super::FrontendError;
use crate::task::{Effect, Formula, MapTask, ObjId, TaskBuilder, VarId};

/// `at(pkg1)`, or just `name` without arguments.
pub fn var_label(var: &str, args: &[String]) -> String {
    if args.is_empty() {
        var.to_string()
    } else {
        format!("{}({})", var, args.join(","))
    }
}

fn sem(token: &str, message: &str) -> FrontendError {
    FrontendError::Semantic { token: token.into(), message: message.into() }
}

struct Types<'a> {
    parent: BTreeMap<&'a str, &'a str>,
}

impl<'a> Types<'a> {
    fn new(d: &'a DomainAst) -> Self {
        Types { parent: d.types.iter().map(|t| (t.name.as_str(), t.ty.as_str())).collect() }
    }

    fn is_sub<'s>(&'s self, mut t: &'s str, sup: &str) -> bool {
        if sup == "object" {
            return true;
        }
        for _ in 0..=self.parent.len() {
            if t == sup {
                return true;
            }
            match self.parent.get(t) {
                Some(p) => t = p,
                None => return false,
            }
        }
        false
    }

    fn of_type<'o>(&self, objs: &'o [Typed], ty: &str) -> Vec<&'o str> {
        objs.iter().filter(|o| self.is_sub(&o.ty, ty)).map(|o| o.name.as_str()).collect()
    }
}

fn cartesian(choices: &[Vec<&str>]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<String>| {
                c.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x.to_string());
                    p
                })
            })
            .collect();
    }
    out
}

/// `V_i` with `D_{v_i}`, keyed by variable label, values by object name.
pub type View = BTreeMap<String, BTreeSet<String>>;

/// Computes every agent's view from its objects and the shared-data grants.
pub fn agent_views(
    domain: &DomainAst,
    problems: &[ProblemAst],
    shared: &[Option<SharedDataDecl>],
) -> Result<Vec<View>, FrontendError> {
    let types = Types::new(domain);
    let all: BTreeMap<&str, &str> =
        problems.iter().flat_map(|p| p.objects.iter()).map(|o| (o.name.as_str(), o.ty.as_str())).collect();
    let mut views: Vec<View> = vec![BTreeMap::new(); problems.len()];
    for (i, p) in problems.iter().enumerate() {
        for schema in &domain.variables {
            let choices: Vec<Vec<&str>> = schema.params.iter().map(|t| types.of_type(&p.objects, &t.ty)).collect();
            let values: BTreeSet<String> =
                types.of_type(&p.objects, &schema.value_type).into_iter().map(String::from).collect();
            for args in cartesian(&choices) {
                views[i].entry(var_label(&schema.name, &args)).or_default().extend(values.iter().cloned());
            }
        }
    }
    let own = views.clone();
    for (i, decl) in shared.iter().enumerate() {
        let Some(decl) = decl else { continue };
        let p = &problems[i];
        for entry in &decl.entries {
            let schema = domain
                .variables
                .iter()
                .find(|s| s.name == entry.term.var)
                .ok_or_else(|| sem(&entry.term.var, "undeclared variable"))?;
            let choices: Vec<Vec<&str>> = entry
                .term
                .args
                .iter()
                .zip(&schema.params)
                .map(|(a, t)| {
                    if a.starts_with('?') {
                        types.of_type(&p.objects, &t.ty)
                    } else {
                        vec![a.as_str()]
                    }
                })
                .collect();
            let matching: Vec<String> = cartesian(&choices)
                .into_iter()
                .map(|args| var_label(&schema.name, &args))
                .filter(|l| own[i].contains_key(l))
                .collect();
            for (to, values) in &entry.grants {
                let Some(j) = problems.iter().position(|q| q.agent_name() == to) else {
                    return Err(sem(to, "unknown agent in shared-data"));
                };
                for v in values {
                    match all.get(v.as_str()) {
                        None => return Err(sem(v, "undeclared object in shared-data")),
                        Some(ty) if !types.is_sub(ty, &schema.value_type) => {
                            return Err(sem(v, "value outside the variable's domain"))
                        }
                        Some(_) => {}
                    }
                }
                for label in &matching {
                    views[j].entry(label.clone()).or_default().extend(values.iter().cloned());
                }
            }
        }
    }
    Ok(views)
}

/// A schema instance: arguments, conditions and effects, still by name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundSpec {
    pub name: String,
    pub args: Vec<String>,
    /// `(variable label, value, positive)`
    pub pre: Vec<(String, String, bool)>,
    /// `(variable label, value, assign)`
    pub eff: Vec<(String, String, bool)>,
}

/// Typed substitutions of every schema over `objects` that respect the
/// inequality constraints and stay inside `view`, sorted by name then
/// arguments. Parameters are bound one at a time so that invisible partial
/// groundings are cut early.
pub fn ground(domain: &DomainAst, objects: &[Typed], view: &View) -> Vec<GroundSpec> {
    let types = Types::new(domain);
    let mut out = Vec::new();
    for schema in &domain.actions {
        ground_schema(&types, schema, objects, view, &mut out);
    }
    out.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));
    out.dedup();
    out
}

fn ground_schema(types: &Types<'_>, schema: &ActionSchema, objects: &[Typed], view: &View, out: &mut Vec<GroundSpec>) {
    let n = schema.params.len();
    let choices: Vec<Vec<&str>> = schema.params.iter().map(|p| types.of_type(objects, &p.ty)).collect();
    let index: HashMap<&str, usize> = schema.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let bind = |s: &str, b: &[&str]| -> String { index.get(s).map_or_else(|| s.to_string(), |&i| b[i].to_string()) };
    let label = |t: &Term, b: &[&str]| var_label(&t.var, &t.args.iter().map(|a| bind(a, b)).collect::<Vec<_>>());
    let visible = |t: &Term, value: &str, b: &[&str]| view.get(&label(t, b)).is_some_and(|vals| vals.contains(&bind(value, b)));

    // each check runs once its last parameter is bound
    let depth = |names: &[&str]| names.iter().filter_map(|a| index.get(a).copied()).max().unwrap_or(0);
    let mut checks: Vec<Vec<Check>> = vec![Vec::new(); n.max(1)];
    for c in &schema.pre {
        match c {
            Condition::Eq(t, v) | Condition::Ne(t, v) => {
                let names: Vec<&str> = t.args.iter().map(String::as_str).chain([v.as_str()]).collect();
                checks[depth(&names)].push(Check::Visible(t, v));
            }
            Condition::Distinct(x, y) => checks[depth(&[x, y])].push(Check::Distinct(x, y)),
        }
    }
    for e in &schema.eff {
        let names: Vec<&str> = e.term.args.iter().map(String::as_str).chain([e.value.as_str()]).collect();
        checks[depth(&names)].push(Check::Visible(&e.term, &e.value));
    }
    let ok = |d: usize, b: &[&str]| {
        checks[d].iter().all(|c| match c {
            Check::Visible(t, v) => visible(t, v, b),
            Check::Distinct(x, y) => bind(x, b) != bind(y, b),
        })
    };

    let mut bindings: Vec<Vec<&str>> = Vec::new();
    if n == 0 {
        if ok(0, &[]) {
            bindings.push(Vec::new());
        }
    } else {
        let mut stack: Vec<Vec<&str>> = vec![Vec::new()];
        while let Some(b) = stack.pop() {
            let d = b.len();
            for o in &choices[d] {
                let mut nb = b.clone();
                nb.push(o);
                if !ok(d, &nb) {
                    continue;
                }
                if nb.len() == n {
                    bindings.push(nb);
                } else {
                    stack.push(nb);
                }
            }
        }
    }
    for b in bindings {
        let pre = schema
            .pre
            .iter()
            .filter_map(|c| match c {
                Condition::Eq(t, v) => Some((label(t, &b), bind(v, &b), true)),
                Condition::Ne(t, v) => Some((label(t, &b), bind(v, &b), false)),
                Condition::Distinct(..) => None,
            })
            .collect();
        let eff = schema.eff.iter().map(|e| (label(&e.term, &b), bind(&e.value, &b), e.assign)).collect();
        out.push(GroundSpec { name: schema.name.clone(), args: b.iter().map(|s| s.to_string()).collect(), pre, eff });
    }
}

#[derive(Clone, Copy)]
enum Check<'a> {
    Visible(&'a Term, &'a str),
    Distinct(&'a str, &'a str),
}

/// Builds the task from a domain, one problem per agent and each agent's
/// optional shared-data declaration (same order as `problems`).
pub fn build_task(
    domain: &DomainAst,
    problems: &[ProblemAst],
    shared: &[Option<SharedDataDecl>],
) -> Result<MapTask, FrontendError> {
    if problems.is_empty() {
        return Err(sem("", "no problem files"));
    }
    let mut objects: Vec<Typed> = Vec::new();
    for o in problems.iter().flat_map(|p| p.objects.iter()) {
        match objects.iter().find(|x| x.name == o.name) {
            Some(x) if x.ty != o.ty => return Err(sem(&o.name, "object declared with two types")),
            Some(_) => {}
            None => objects.push(o.clone()),
        }
    }
    let views = agent_views(domain, problems, shared)?;

    let mut b = TaskBuilder::new(&problems[0].name);
    for o in &objects {
        b.object(&o.name);
    }
    let mut agents = Vec::new();
    for p in problems {
        if problems.iter().filter(|q| q.agent_name() == p.agent_name()).count() > 1 {
            return Err(sem(p.agent_name(), "agent defined twice"));
        }
        agents.push(b.agent(p.agent_name()));
    }
    let mut vars: HashMap<String, VarId> = HashMap::new();
    for (i, view) in views.iter().enumerate() {
        for (label, values) in view {
            let v = b.variable(label);
            vars.insert(label.clone(), v);
            let ids: Vec<ObjId> = values.iter().map(|o| b.object(o)).collect();
            b.grant(agents[i], v, ids);
        }
    }
    for (i, p) in problems.iter().enumerate() {
        let a = agents[i];
        for (t, val) in &p.init {
            let l = var_label(&t.var, &t.args);
            let v = *vars.get(&l).ok_or_else(|| sem(&l, "initial value for a variable no agent knows"))?;
            let d = b.object(val);
            b.init(a, v, d);
        }
        for g in &p.goals {
            let (t, val, positive) = match g {
                Condition::Eq(t, v) => (t, v, true),
                Condition::Ne(t, v) => (t, v, false),
                Condition::Distinct(x, _) => return Err(sem(x, "inequality constraint used as a goal")),
            };
            let l = var_label(&t.var, &t.args);
            let v = *vars.get(&l).ok_or_else(|| sem(&l, "goal over a variable the agent does not know"))?;
            let d = b.object(val);
            b.goal(a, Formula { var: v, value: d, positive });
        }
    }
    for (i, view) in views.iter().enumerate() {
        for spec in ground(domain, &objects, view) {
            let args = spec.args.iter().map(|o| b.object(o)).collect();
            let pre = spec.pre.iter().map(|(l, v, pos)| Formula { var: vars[l], value: b.object(v), positive: *pos }).collect();
            let eff = spec
                .eff
                .iter()
                .map(|(l, v, assign)| {
                    let (var, value) = (vars[l], b.object(v));
                    if *assign {
                        Effect::assign(var, value)
                    } else {
                        Effect::unassign(var, value)
                    }
                })
                .collect();
            b.action(agents[i], &spec.name, args, pre, eff);
        }
    }
    b.build().map_err(FrontendError::Task)
}
