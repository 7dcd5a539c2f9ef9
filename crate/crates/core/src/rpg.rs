//! Distributed relaxed planning graph.
//!
//! Each agent builds a relaxed planning graph over its own actions and
//! initial state, then the agents repeatedly exchange the fluents they are
//! allowed to share, keep the best cost seen for every fluent and re-expand
//! until a round passes in which nobody receives anything.
//!
//! The cost of a fluent is the index of the first level that contains it
//! (unit action costs, delete effects ignored).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bus::{Bus, BusError, Mode, Outgoing, Payload};
use crate::task::{ActionId, AgentId, Effect, Formula, MapTask, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluentEntry {
    pub cost: u32,
    pub achievers: BTreeSet<AgentId>,
}

/// A fluent as it travels between agents during the exchange.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SharedFluent {
    pub formula: Formula,
    pub cost: u32,
    pub achievers: BTreeSet<AgentId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelaxedPlanningGraph {
    agent: AgentId,
    fluents: BTreeMap<Formula, FluentEntry>,
    actions: BTreeMap<ActionId, u32>,
}

impl RelaxedPlanningGraph {
    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn cost(&self, f: &Formula) -> Option<u32> {
        self.fluents.get(f).map(|e| e.cost)
    }

    pub fn entry(&self, f: &Formula) -> Option<&FluentEntry> {
        self.fluents.get(f)
    }

    pub fn fluents(&self) -> impl Iterator<Item = (&Formula, &FluentEntry)> {
        self.fluents.iter()
    }

    pub fn len(&self) -> usize {
        self.fluents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluents.is_empty()
    }

    /// Level at which an action first becomes applicable.
    pub fn action_level(&self, a: ActionId) -> Option<u32> {
        self.actions.get(&a).copied()
    }

    /// Fluent → cost map, handy for comparisons.
    pub fn cost_map(&self) -> BTreeMap<Formula, u32> {
        self.fluents.iter().map(|(f, e)| (*f, e.cost)).collect()
    }

    /// Runs the relaxed expansion to a fixpoint from the current labels.
    /// Returns every fluent whose cost dropped, that was inserted, or whose
    /// achiever set grew.
    pub fn expand(&mut self, task: &MapTask) -> BTreeSet<Formula> {
        let mut changed = BTreeSet::new();
        let mut effects_of: Vec<(ActionId, Vec<Formula>)> = Vec::new();
        for (id, action) in task.agent_actions(self.agent) {
            effects_of.push((id, relaxed_effects(task, self.agent, &action.eff)));
        }
        loop {
            let mut lowered = false;
            for (id, effects) in &effects_of {
                let action = task.action(*id);
                let mut level = 0;
                let mut applicable = true;
                for p in &action.pre {
                    match self.fluents.get(p) {
                        Some(e) => level = level.max(e.cost),
                        None => {
                            applicable = false;
                            break;
                        }
                    }
                }
                if !applicable {
                    continue;
                }
                let slot = self.actions.entry(*id).or_insert(level);
                *slot = (*slot).min(level);
                for f in effects {
                    let cost = level + 1;
                    match self.fluents.get_mut(f) {
                        Some(e) => {
                            if e.cost > cost {
                                e.cost = cost;
                                lowered = true;
                                changed.insert(*f);
                            }
                            if e.achievers.insert(self.agent) {
                                changed.insert(*f);
                            }
                        }
                        None => {
                            self.fluents.insert(*f, FluentEntry { cost, achievers: [self.agent].into() });
                            lowered = true;
                            changed.insert(*f);
                        }
                    }
                }
            }
            if !lowered {
                break;
            }
        }
        changed
    }

    /// Text dump: one line per fluent `⟨var=value⟩ cost achievers…`, sorted.
    pub fn dump(&self, task: &MapTask) -> String {
        let symbols = task.symbols();
        let mut lines: Vec<String> = self
            .fluents
            .iter()
            .map(|(f, e)| {
                let mut line = format!("⟨{}⟩ {}", symbols.formula_label(f), e.cost);
                for a in &e.achievers {
                    let _ = write!(line, " {}", symbols.agent_name(*a));
                }
                line
            })
            .collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

/// Fluents an effect list makes true, as seen by `agent`: an assignment also
/// yields the negation of every other value in the agent's view of the domain.
fn relaxed_effects(task: &MapTask, agent: AgentId, eff: &[Effect]) -> Vec<Formula> {
    let mut out = BTreeSet::new();
    for e in eff {
        if e.assign {
            out.insert(Formula::pos(e.var, e.value));
            if let Some(dom) = task.agent(agent).visibility.get(&e.var) {
                out.extend(dom.iter().filter(|&&d| d != e.value).map(|&d| Formula::neg(e.var, d)));
            }
        } else {
            out.insert(Formula::neg(e.var, e.value));
        }
    }
    out.into_iter().collect()
}

/// Level 0 holds the agent's initial state; expansion runs to a fixpoint.
pub fn build_initial_rpg(agent: AgentId, task: &MapTask) -> RelaxedPlanningGraph {
    let fluents = task
        .agent(agent)
        .init
        .iter()
        .filter_map(|f| f.as_formula())
        .map(|f| (f, FluentEntry { cost: 0, achievers: BTreeSet::new() }))
        .collect();
    let mut rpg = RelaxedPlanningGraph { agent, fluents, actions: BTreeMap::new() };
    rpg.expand(task);
    rpg
}

/// The fluents of `new` that `from` may send to `to`: the variable is known
/// to both and the value is in both views of its domain.
pub fn shareable<'a>(
    task: &MapTask,
    from: &RelaxedPlanningGraph,
    to: AgentId,
    new: impl IntoIterator<Item = &'a Formula>,
) -> Vec<SharedFluent> {
    let i = from.agent;
    new.into_iter()
        .filter(|f| {
            let d = Value::Obj(f.value);
            task.sees(i, f.var, d) && task.sees(to, f.var, d)
        })
        .filter_map(|f| {
            from.entry(f).map(|e| SharedFluent { formula: *f, cost: e.cost, achievers: e.achievers.clone() })
        })
        .collect()
}

/// Inserts unknown fluents, lowers costs that improve strictly, and unions
/// achiever labels. Returns the fluents that changed.
pub fn merge_received(rpg: &mut RelaxedPlanningGraph, received: &[SharedFluent]) -> BTreeSet<Formula> {
    let mut changed = BTreeSet::new();
    for r in received {
        match rpg.fluents.get_mut(&r.formula) {
            None => {
                rpg.fluents.insert(r.formula, FluentEntry { cost: r.cost, achievers: r.achievers.clone() });
                changed.insert(r.formula);
            }
            Some(e) => {
                if e.cost > r.cost {
                    e.cost = r.cost;
                    changed.insert(r.formula);
                }
                let before = e.achievers.len();
                e.achievers.extend(r.achievers.iter().copied());
                if e.achievers.len() != before {
                    changed.insert(r.formula);
                }
            }
        }
    }
    changed
}

/// Outcome of the distributed construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisRpg {
    pub graphs: Vec<RelaxedPlanningGraph>,
    pub rounds: usize,
}

impl DisRpg {
    pub fn graph(&self, a: AgentId) -> &RelaxedPlanningGraph {
        &self.graphs[a.index()]
    }

    /// True when some agent's graph contains the formula.
    pub fn reachable(&self, f: &Formula) -> bool {
        self.graphs.iter().any(|g| g.cost(f).is_some())
    }
}

/// Builds every agent's graph and runs the exchange rounds over `bus`.
pub fn build_dis_rpg(task: &MapTask, bus: &mut Bus<'_>) -> Result<DisRpg, BusError> {
    let n = task.num_agents();
    let parallel = bus.mode() == Mode::Parallel;
    let mut graphs: Vec<RelaxedPlanningGraph> = if parallel {
        (0..n).into_par_iter().map(|i| build_initial_rpg(AgentId::from(i), task)).collect()
    } else {
        (0..n).map(|i| build_initial_rpg(AgentId::from(i), task)).collect()
    };
    let mut fresh: Vec<BTreeSet<Formula>> = graphs.iter().map(|g| g.fluents.keys().copied().collect()).collect();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let outboxes: Vec<Vec<Outgoing>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| {
                        let batch = shareable(task, &graphs[i], AgentId::from(j), &fresh[i]);
                        (!batch.is_empty()).then(|| Outgoing::new(AgentId::from(j), Payload::Fluents(batch)))
                    })
                    .collect()
            })
            .collect();
        let (inboxes, _) = bus.broadcast_round(outboxes)?;
        let received: Vec<Vec<SharedFluent>> = inboxes
            .into_iter()
            .map(|inbox| {
                inbox
                    .into_iter()
                    .flat_map(|m| match m.payload {
                        Payload::Fluents(fs) => fs,
                        _ => Vec::new(),
                    })
                    .collect()
            })
            .collect();
        if received.iter().all(|r| r.is_empty()) {
            break;
        }
        let step = |(g, rf): (&mut RelaxedPlanningGraph, &Vec<SharedFluent>)| {
            let mut changed = merge_received(g, rf);
            changed.extend(g.expand(task));
            changed
        };
        fresh = if parallel {
            graphs.par_iter_mut().zip(received.par_iter()).map(step).collect()
        } else {
            graphs.iter_mut().zip(received.iter()).map(step).collect()
        };
    }
    Ok(DisRpg { graphs, rounds })
}
