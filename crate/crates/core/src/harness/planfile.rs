//! The textual plan format.
//!
//! ```text
//! ; plan log-1
//! 1: plane1 fly(p1,hub,apt), truck1 load(t1,pkg,depot)
//! 2: truck1 drive(t1,depot,apt)
//! ; acts=3 ts=2 partics=2
//! ```
//!
//! Each line is one chain level. Reading a file back orders every level
//! before the next and links each precondition to the latest earlier
//! producer, which reproduces the levels, metrics and validity of the plan
//! that was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::pop::{CausalLink, OpenGoal, PartialPlan, Step, StepId, GOAL_STEP, INIT_STEP};
use crate::task::{ActionId, AgentId, MapTask, Truth};
use crate::validator::{layers, metrics, Metrics};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanFile {
    pub problem: String,
    /// `(agent, action label)` per level, in file order.
    pub levels: Vec<Vec<(String, String)>>,
    /// Source line of each level.
    pub lines: Vec<usize>,
    /// Metrics claimed by the footer, if there is one.
    pub claimed: Option<Metrics>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown agent `{agent}`")]
    UnknownAgent { line: usize, agent: String },
    #[error("line {line}: `{agent}` has no action `{action}`")]
    UnknownAction { line: usize, agent: String, action: String },
}

fn entry(task: &MapTask, plan: &PartialPlan, s: StepId) -> (String, String) {
    match plan.step(s) {
        Step::Action { action, agent } => (task.symbols().agent_name(agent).to_string(), task.action_label(action)),
        _ => unreachable!("layers hold action steps only"),
    }
}

/// Renders a plan; entries within a level are sorted by agent, then action.
pub fn write_plan(task: &MapTask, plan: &PartialPlan, problem: &str) -> String {
    let mut out = format!("; plan {problem}\n");
    for (t, layer) in layers(plan).iter().enumerate() {
        let mut items: Vec<(String, String)> = layer.iter().map(|&s| entry(task, plan, s)).collect();
        items.sort();
        let items: Vec<String> = items.into_iter().map(|(a, x)| format!("{a} {x}")).collect();
        let _ = writeln!(out, "{}: {}", t + 1, items.join(", "));
    }
    let m = metrics(plan, task);
    let _ = writeln!(out, "; acts={} ts={} partics={}", m.acts, m.time_steps, m.participants);
    out
}

fn split_items(s: &str) -> Vec<&str> {
    // commas separate entries but also arguments inside parentheses
    let (mut out, mut depth, mut start) = (Vec::new(), 0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.retain(|x| !x.is_empty());
    out
}

fn footer(line: &str) -> Option<Metrics> {
    let mut m = Metrics::default();
    let mut seen = 0;
    for kv in line.split_whitespace() {
        let (k, v) = kv.split_once('=')?;
        let v: usize = v.parse().ok()?;
        match k {
            "acts" => m.acts = v,
            "ts" => m.time_steps = v,
            "partics" => m.participants = v,
            _ => return None,
        }
        seen += 1;
    }
    (seen == 3).then_some(m)
}

pub fn parse_plan(text: &str) -> Result<PlanFile, PlanFileError> {
    let mut file = PlanFile { problem: String::new(), levels: Vec::new(), lines: Vec::new(), claimed: None };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let ln = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix(';') {
            let c = c.trim();
            if let Some(p) = c.strip_prefix("plan ") {
                file.problem = p.trim().to_string();
            } else if let Some(m) = footer(c) {
                file.claimed = Some(m);
            }
            continue;
        }
        let Some((t, rest)) = line.split_once(':') else {
            return Err(PlanFileError::Syntax { line: ln, message: "expected `<t>: agent action(...)`".into() });
        };
        let t: usize = t.trim().parse().map_err(|_| PlanFileError::Syntax { line: ln, message: format!("bad time step `{t}`") })?;
        if t != file.levels.len() + 1 {
            return Err(PlanFileError::Syntax { line: ln, message: format!("time step {t} out of sequence") });
        }
        let mut level = Vec::new();
        for item in split_items(rest) {
            let Some((agent, action)) = item.split_once(char::is_whitespace) else {
                return Err(PlanFileError::Syntax { line: ln, message: format!("`{item}` lacks an agent") });
            };
            let action: String = action.chars().filter(|c| !c.is_whitespace()).collect();
            if !action.ends_with(')') || !action.contains('(') {
                return Err(PlanFileError::Syntax { line: ln, message: format!("`{action}` is not name(args)") });
            }
            level.push((agent.to_string(), action));
        }
        if level.is_empty() {
            return Err(PlanFileError::Syntax { line: ln, message: "empty time step".into() });
        }
        file.levels.push(level);
        file.lines.push(ln);
    }
    Ok(file)
}

/// Rebuilds a partial-order plan from the levels of a plan file.
pub fn rebuild_plan(task: &MapTask, file: &PlanFile) -> Result<PartialPlan, PlanFileError> {
    let by_label: BTreeMap<String, ActionId> =
        (0..task.actions().len()).map(|i| (task.action_label(ActionId::from(i)), ActionId::from(i))).collect();
    let mut plan = PartialPlan::initial(task);
    plan.open_goals.clear();
    let mut level_of: Vec<usize> = vec![0, usize::MAX];
    let mut prev: Vec<StepId> = vec![INIT_STEP];
    for (t, level) in file.levels.iter().enumerate() {
        let mut this = Vec::new();
        for (agent, action) in level {
            let line = file.lines.get(t).copied().unwrap_or(0);
            let a: AgentId = task
                .symbols()
                .find_agent(agent)
                .ok_or_else(|| PlanFileError::UnknownAgent { line, agent: agent.clone() })?;
            let id = by_label
                .get(action)
                .copied()
                .filter(|id| task.action(*id).owners.contains(&a))
                .ok_or_else(|| PlanFileError::UnknownAction { line, agent: agent.clone(), action: action.clone() })?;
            let s = plan.add_step(Step::Action { action: id, agent: a });
            level_of.push(t + 1);
            for &p in &prev {
                plan.orderings.insert((p, s));
            }
            this.push(s);
        }
        prev = this;
    }
    for &p in &prev {
        plan.orderings.insert((p, GOAL_STEP));
    }
    if file.levels.is_empty() {
        plan.orderings.insert((INIT_STEP, GOAL_STEP));
    }
    let ids: Vec<StepId> = plan.step_ids().collect();
    for &c in &ids {
        for &phi in plan.preconditions(task, c) {
            let producer = ids
                .iter()
                .copied()
                .filter(|&p| p != INIT_STEP && level_of[p.index()] < level_of[c.index()])
                .filter(|&p| plan.effects(task, p).iter().any(|e| e.entails(&phi)))
                .max_by_key(|&p| (level_of[p.index()], std::cmp::Reverse(p)))
                .or_else(|| (task.init().evaluate(&phi) == Truth::True).then_some(INIT_STEP));
            match producer {
                Some(p) => {
                    plan.links.insert(CausalLink { producer: p, consumer: c, formula: phi });
                }
                None => {
                    plan.open_goals.insert(OpenGoal { step: c, formula: phi });
                }
            }
        }
    }
    Ok(plan)
}
