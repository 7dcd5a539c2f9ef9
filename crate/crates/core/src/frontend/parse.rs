use std::collections::{BTreeMap, BTreeSet};

use super::ast::{ActionSchema, Condition, DomainAst, EffectAst, ProblemAst, SharedDataDecl, SharedEntry, Term, Typed, VarSchema};
use super::sexpr::{parse_one, Pos, SExpr};
use super::ParseError;

type Res<T> = Result<T, ParseError>;

fn list<'a>(e: &'a SExpr, what: &str) -> Res<&'a [SExpr]> {
    e.list().ok_or_else(|| ParseError::syntax(e.pos(), &format!("expected {what}, found `{}`", e.atom().unwrap_or(""))))
}

fn atom<'a>(e: &'a SExpr, what: &str) -> Res<&'a str> {
    e.atom().ok_or_else(|| ParseError::syntax(e.pos(), &format!("expected {what}, found a list")))
}

fn unknown(e: &SExpr, what: &str) -> ParseError {
    let token = e.atom().or_else(|| e.head()).unwrap_or("()");
    ParseError::semantic(e.pos(), token, &format!("unknown {what}"))
}

/// `a b - t c` → `[a - t, b - t, c - object]`.
fn typed_list(items: &[SExpr]) -> Res<Vec<Typed>> {
    let mut out = Vec::new();
    let mut pending = Vec::new();
    let mut it = items.iter();
    while let Some(e) = it.next() {
        let s = atom(e, "a name")?;
        if s == "-" {
            let Some(t) = it.next() else {
                return Err(ParseError::syntax(e.pos(), "missing type after '-'"));
            };
            let ty = atom(t, "a type")?;
            if pending.is_empty() {
                return Err(ParseError::syntax(e.pos(), "'-' without names"));
            }
            out.extend(pending.drain(..).map(|name| Typed { name, ty: ty.to_string() }));
        } else {
            pending.push(s.to_string());
        }
    }
    out.extend(pending.into_iter().map(|name| Typed { name, ty: "object".into() }));
    Ok(out)
}

fn term(e: &SExpr) -> Res<Term> {
    let items = list(e, "a term `(var args...)`")?;
    let Some(head) = items.first() else {
        return Err(ParseError::syntax(e.pos(), "empty term"));
    };
    let var = atom(head, "a variable name")?.to_string();
    let args = items[1..].iter().map(|a| atom(a, "an argument").map(str::to_string)).collect::<Res<_>>()?;
    Ok(Term { var, args })
}

/// `(and x...)` or a single `x`.
fn conjuncts(e: &SExpr) -> Res<Vec<&SExpr>> {
    let items = list(e, "a formula")?;
    if e.head() == Some("and") {
        Ok(items[1..].iter().collect())
    } else if items.is_empty() {
        Ok(Vec::new())
    } else {
        Ok(vec![e])
    }
}

fn condition(e: &SExpr) -> Res<Condition> {
    let items = list(e, "a condition")?;
    let op = items.first().map(|h| atom(h, "an operator")).transpose()?;
    if items.len() != 3 {
        return Err(ParseError::syntax(e.pos(), "a condition has the form (= (var args) value)"));
    }
    match op {
        Some("!=") if items[1].atom().is_some() => {
            Ok(Condition::Distinct(atom(&items[1], "a parameter")?.into(), atom(&items[2], "a parameter")?.into()))
        }
        Some("=") => Ok(Condition::Eq(term(&items[1])?, atom(&items[2], "a value")?.into())),
        Some("!=") => Ok(Condition::Ne(term(&items[1])?, atom(&items[2], "a value")?.into())),
        _ => Err(unknown(&items[0], "condition operator")),
    }
}

fn effect(e: &SExpr) -> Res<EffectAst> {
    let items = list(e, "an effect")?;
    if items.len() != 3 {
        return Err(ParseError::syntax(e.pos(), "an effect has the form (assign (var args) value)"));
    }
    let assign = match atom(&items[0], "assign or unassign")? {
        "assign" => true,
        "unassign" => false,
        _ => return Err(unknown(&items[0], "effect operator")),
    };
    Ok(EffectAst { assign, term: term(&items[1])?, value: atom(&items[2], "a value")?.into() })
}

/// `(define (<kind> <name>) sections...)`
fn define<'a>(e: &'a SExpr, kind: &str) -> Res<(String, &'a [SExpr])> {
    let items = list(e, "(define ...)")?;
    if e.head() != Some("define") || items.len() < 2 {
        return Err(ParseError::syntax(e.pos(), "expected (define ...)"));
    }
    let hdr = list(&items[1], &format!("({kind} <name>)"))?;
    if items[1].head() != Some(kind) || hdr.len() != 2 {
        return Err(ParseError::syntax(items[1].pos(), &format!("expected ({kind} <name>)")));
    }
    Ok((atom(&hdr[1], "a name")?.to_string(), &items[2..]))
}

struct Types {
    parent: BTreeMap<String, String>,
}

impl Types {
    fn new(decls: &[Typed]) -> Self {
        let mut parent: BTreeMap<String, String> = decls.iter().map(|t| (t.name.clone(), t.ty.clone())).collect();
        parent.remove("object");
        Types { parent }
    }

    /// Declared directly, or implicitly by being someone's parent.
    fn exists(&self, t: &str) -> bool {
        t == "object" || self.parent.contains_key(t) || self.parent.values().any(|p| p == t)
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
}

fn action(items: &[SExpr], pos: Pos) -> Res<ActionSchema> {
    let name = atom(items.get(1).ok_or_else(|| ParseError::syntax(pos, "action without a name"))?, "an action name")?;
    let mut a = ActionSchema { name: name.into(), params: Vec::new(), pre: Vec::new(), eff: Vec::new() };
    let mut rest = items[2..].iter();
    while let Some(k) = rest.next() {
        let key = atom(k, "an action keyword")?;
        let Some(v) = rest.next() else {
            return Err(ParseError::syntax(k.pos(), &format!("missing value for {key}")));
        };
        match key {
            ":parameters" => a.params = typed_list(list(v, "a parameter list")?)?,
            ":precondition" => a.pre = conjuncts(v)?.into_iter().map(condition).collect::<Res<_>>()?,
            ":effect" => a.eff = conjuncts(v)?.into_iter().map(effect).collect::<Res<_>>()?,
            _ => return Err(unknown(k, "action keyword")),
        }
    }
    Ok(a)
}

pub fn parse_domain(src: &str) -> Res<DomainAst> {
    let root = parse_one(src)?;
    let (name, sections) = define(&root, "domain")?;
    let mut d = DomainAst { name, requirements: Vec::new(), types: Vec::new(), variables: Vec::new(), actions: Vec::new() };
    for s in sections {
        let items = list(s, "a section")?;
        match s.head() {
            Some(":requirements") => {
                d.requirements = items[1..].iter().map(|r| atom(r, "a requirement").map(str::to_string)).collect::<Res<_>>()?
            }
            Some(":types") => d.types = typed_list(&items[1..])?,
            Some(":variables") => {
                for v in &items[1..] {
                    let vi = list(v, "a variable schema")?;
                    let n = vi.len();
                    if n < 3 || vi[n - 2].atom() != Some("-") {
                        return Err(ParseError::syntax(v.pos(), "variable schema needs `- <valuetype>`"));
                    }
                    d.variables.push(VarSchema {
                        name: atom(&vi[0], "a variable name")?.into(),
                        params: typed_list(&vi[1..n - 2])?,
                        value_type: atom(&vi[n - 1], "a value type")?.into(),
                    });
                }
            }
            Some(":action") => d.actions.push(action(items, s.pos())?),
            _ => return Err(unknown(s, "domain section")),
        }
    }
    check_domain(&d, &root)?;
    Ok(d)
}

fn check_domain(d: &DomainAst, root: &SExpr) -> Res<()> {
    let at = root.pos();
    let types = Types::new(&d.types);
    for t in &d.types {
        if !types.exists(&t.ty) {
            return Err(ParseError::semantic(at, &t.ty, "undeclared type"));
        }
    }
    let mut schemas = BTreeMap::new();
    for v in &d.variables {
        for p in &v.params {
            if !types.exists(&p.ty) {
                return Err(ParseError::semantic(at, &p.ty, "undeclared type"));
            }
        }
        if !types.exists(&v.value_type) {
            return Err(ParseError::semantic(at, &v.value_type, "undeclared value type"));
        }
        if schemas.insert(v.name.as_str(), v).is_some() {
            return Err(ParseError::semantic(at, &v.name, "variable declared twice"));
        }
    }
    for a in &d.actions {
        let mut params: BTreeMap<&str, &str> = BTreeMap::new();
        for p in &a.params {
            if !p.name.starts_with('?') {
                return Err(ParseError::semantic(at, &p.name, "parameters start with '?'"));
            }
            if !types.exists(&p.ty) {
                return Err(ParseError::semantic(at, &p.ty, "undeclared type"));
            }
            params.insert(&p.name, &p.ty);
        }
        let arg = |x: &str, want: &str| -> Res<()> {
            match params.get(x) {
                None => Err(ParseError::semantic(at, x, &format!("undeclared parameter in action {}", a.name))),
                Some(ty) if !types.is_sub(ty, want) => {
                    Err(ParseError::semantic(at, x, &format!("parameter of type {ty} where {want} is expected")))
                }
                Some(_) => Ok(()),
            }
        };
        let check_term = |t: &Term, value: &str| -> Res<()> {
            let Some(s) = schemas.get(t.var.as_str()) else {
                return Err(ParseError::semantic(at, &t.var, "undeclared variable"));
            };
            if s.params.len() != t.args.len() {
                return Err(ParseError::semantic(at, &t.var, "wrong number of arguments"));
            }
            for (x, p) in t.args.iter().zip(&s.params) {
                arg(x, &p.ty)?;
            }
            arg(value, &s.value_type)
        };
        for c in &a.pre {
            match c {
                Condition::Eq(t, v) | Condition::Ne(t, v) => check_term(t, v)?,
                Condition::Distinct(x, y) => {
                    arg(x, "object")?;
                    arg(y, "object")?;
                }
            }
        }
        for e in &a.eff {
            check_term(&e.term, &e.value)?;
        }
    }
    Ok(())
}

/// Ground-level checks against the domain: declared objects, arities, types.
struct Scope<'a> {
    types: Types,
    schemas: BTreeMap<&'a str, &'a VarSchema>,
    objects: BTreeMap<String, String>,
}

impl Scope<'_> {
    fn object(&self, o: &str, want: &str, at: Pos) -> Res<()> {
        match self.objects.get(o) {
            None => Err(ParseError::semantic(at, o, "undeclared object")),
            Some(ty) if !self.types.is_sub(ty, want) => {
                Err(ParseError::semantic(at, o, &format!("object of type {ty} where {want} is expected")))
            }
            Some(_) => Ok(()),
        }
    }

    fn term(&self, t: &Term, value: Option<&str>, at: Pos) -> Res<()> {
        let Some(s) = self.schemas.get(t.var.as_str()) else {
            return Err(ParseError::semantic(at, &t.var, "undeclared variable"));
        };
        if s.params.len() != t.args.len() {
            return Err(ParseError::semantic(at, &t.var, "wrong number of arguments"));
        }
        for (x, p) in t.args.iter().zip(&s.params) {
            if !x.starts_with('?') {
                self.object(x, &p.ty, at)?;
            }
        }
        if let Some(v) = value {
            self.object(v, &s.value_type, at)?;
        }
        Ok(())
    }
}

fn scope<'a>(domain: &'a DomainAst, objects: &[Typed], at: Pos) -> Res<Scope<'a>> {
    let types = Types::new(&domain.types);
    let mut objs = BTreeMap::new();
    for o in objects {
        if !types.exists(&o.ty) {
            return Err(ParseError::semantic(at, &o.ty, "undeclared type"));
        }
        if objs.insert(o.name.clone(), o.ty.clone()).is_some_and(|t| t != o.ty) {
            return Err(ParseError::semantic(at, &o.name, "object declared with two types"));
        }
    }
    let schemas = domain.variables.iter().map(|v| (v.name.as_str(), v)).collect();
    Ok(Scope { types, schemas, objects: objs })
}

pub fn parse_problem(src: &str, domain: &DomainAst) -> Res<ProblemAst> {
    let root = parse_one(src)?;
    let (name, sections) = define(&root, "problem")?;
    let mut p = ProblemAst { name, domain: None, agent: None, objects: Vec::new(), init: Vec::new(), goals: Vec::new() };
    let mut init_at = Vec::new();
    let mut goal_at = Vec::new();
    for s in sections {
        let items = list(s, "a section")?;
        let single = |what: &str| -> Res<String> {
            match items {
                [_, x] => Ok(atom(x, what)?.to_string()),
                _ => Err(ParseError::syntax(s.pos(), &format!("expected a single {what}"))),
            }
        };
        match s.head() {
            Some(":domain") => p.domain = Some(single("domain name")?),
            Some(":agent") => p.agent = Some(single("agent name")?),
            Some(":objects") => p.objects = typed_list(&items[1..])?,
            Some(":init") => {
                for e in &items[1..] {
                    match condition(e)? {
                        Condition::Eq(t, v) => {
                            p.init.push((t, v));
                            init_at.push(e.pos());
                        }
                        _ => return Err(ParseError::syntax(e.pos(), "initial facts have the form (= (var args) value)")),
                    }
                }
            }
            Some(":goal") => {
                let [_, g] = items else {
                    return Err(ParseError::syntax(s.pos(), "expected one goal formula"));
                };
                for c in conjuncts(g)? {
                    let cond = condition(c)?;
                    if matches!(cond, Condition::Distinct(..)) {
                        return Err(ParseError::syntax(c.pos(), "goals compare a variable with a value"));
                    }
                    p.goals.push(cond);
                    goal_at.push(c.pos());
                }
            }
            _ => return Err(unknown(s, "problem section")),
        }
    }
    if let Some(d) = &p.domain {
        if *d != domain.name {
            return Err(ParseError::semantic(root.pos(), d, "problem refers to another domain"));
        }
    }
    let sc = scope(domain, &p.objects, root.pos())?;
    let mut seen = BTreeSet::new();
    for ((t, v), at) in p.init.iter().zip(&init_at) {
        if t.args.iter().any(|a| a.starts_with('?')) {
            return Err(ParseError::semantic(*at, &t.var, "initial facts must be ground"));
        }
        sc.term(t, Some(v), *at)?;
        if !seen.insert(t) {
            return Err(ParseError::semantic(*at, &t.var, "variable assigned twice in the initial state"));
        }
    }
    for (g, at) in p.goals.iter().zip(&goal_at) {
        if let Condition::Eq(t, v) | Condition::Ne(t, v) = g {
            if t.args.iter().any(|a| a.starts_with('?')) {
                return Err(ParseError::semantic(*at, &t.var, "goals must be ground"));
            }
            sc.term(t, Some(v), *at)?;
        }
    }
    Ok(p)
}

pub fn parse_shared(src: &str, domain: &DomainAst) -> Res<SharedDataDecl> {
    let root = parse_one(src)?;
    let items = list(&root, "(:shared-data ...)")?;
    if root.head() != Some(":shared-data") {
        return Err(ParseError::syntax(root.pos(), "expected (:shared-data ...)"));
    }
    let schemas: BTreeMap<&str, &VarSchema> = domain.variables.iter().map(|v| (v.name.as_str(), v)).collect();
    let mut decl = SharedDataDecl::default();
    for e in &items[1..] {
        let parts = list(e, "a shared-data entry")?;
        let Some(first) = parts.first() else {
            return Err(ParseError::syntax(e.pos(), "empty shared-data entry"));
        };
        let t = term(first)?;
        match schemas.get(t.var.as_str()) {
            None => return Err(ParseError::semantic(first.pos(), &t.var, "undeclared variable")),
            Some(s) if s.params.len() != t.args.len() => {
                return Err(ParseError::semantic(first.pos(), &t.var, "wrong number of arguments"))
            }
            _ => {}
        }
        let mut grants = Vec::new();
        for g in &parts[1..] {
            if g.atom() == Some(":with") {
                continue;
            }
            let gi = list(g, "(<agent> :values (<obj>*))")?;
            if gi.len() != 3 || gi[1].atom() != Some(":values") {
                return Err(ParseError::syntax(g.pos(), "expected (<agent> :values (<obj>*))"));
            }
            let values = list(&gi[2], "a value list")?
                .iter()
                .map(|v| atom(v, "an object").map(str::to_string))
                .collect::<Res<_>>()?;
            grants.push((atom(&gi[0], "an agent name")?.to_string(), values));
        }
        if parts.get(1).and_then(|x| x.atom()) != Some(":with") {
            return Err(ParseError::syntax(e.pos(), "expected :with after the variable"));
        }
        decl.entries.push(SharedEntry { term: t, grants });
    }
    Ok(decl)
}
