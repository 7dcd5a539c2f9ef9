use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::fluent::{ActionId, AgentId, Effect, Fluent, Formula, ObjId, Value, VarId};
use super::state::State;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("precondition {formula} of {action} does not hold")]
    PreconditionUnsatisfied { action: String, formula: String },
    #[error("agent {agent} cannot see {what}")]
    NotVisible { agent: String, what: String },
    #[error("inconsistent initial state: {0}")]
    InconsistentInit(String),
    #[error("invalid action {action}: {reason}")]
    InvalidAction { action: String, reason: String },
    #[error("inconsistent goals: {0}")]
    InconsistentGoals(String),
    #[error("task has no agents")]
    NoAgents,
}

/// Name tables shared by every part of a task.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Symbols {
    objects: Vec<String>,
    variables: Vec<String>,
    domains: Vec<BTreeSet<ObjId>>,
    agents: Vec<String>,
}

impl Symbols {
    pub fn obj_name(&self, o: ObjId) -> &str {
        &self.objects[o.index()]
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.variables[v.index()]
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.index()]
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// `D_v`: the union of every agent's view of the variable's domain.
    pub fn domain(&self, v: VarId) -> &BTreeSet<ObjId> {
        &self.domains[v.index()]
    }

    pub fn find_obj(&self, name: &str) -> Option<ObjId> {
        self.objects.iter().position(|o| o == name).map(ObjId::from)
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v == name).map(VarId::from)
    }

    pub fn find_agent(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|a| a == name).map(AgentId::from)
    }

    pub fn value_label(&self, v: Value) -> &str {
        match v {
            Value::Obj(o) => self.obj_name(o),
            Value::Undefined => "⊥",
        }
    }

    pub fn fluent_label(&self, f: &Fluent) -> String {
        let neg = if f.positive { "" } else { "¬" };
        format!("{}={}{}", self.var_name(f.var), neg, self.value_label(f.value))
    }

    pub fn formula_label(&self, f: &Formula) -> String {
        self.fluent_label(&f.fluent())
    }
}

/// A grounded action `<pre, eff>` together with the agents able to perform it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<ObjId>,
    pub pre: Vec<Formula>,
    pub eff: Vec<Effect>,
    pub owners: BTreeSet<AgentId>,
}

impl GroundAction {
    pub fn label(&self, symbols: &Symbols) -> String {
        let args: Vec<&str> = self.args.iter().map(|&a| symbols.obj_name(a)).collect();
        format!("{}({})", self.name, args.join(","))
    }

    fn sort_key(&self, symbols: &Symbols) -> (String, Vec<String>) {
        (self.name.clone(), self.args.iter().map(|&a| symbols.obj_name(a).to_string()).collect())
    }
}

/// What one agent knows: `V_i` with `D_{v_i}`, its actions `A_i`, its initial
/// state `I_i` and its goals `G_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentView {
    pub name: String,
    pub visibility: BTreeMap<VarId, BTreeSet<ObjId>>,
    pub actions: Vec<ActionId>,
    pub init: State,
    pub goals: Vec<Formula>,
}

impl AgentView {
    pub fn sees_var(&self, v: VarId) -> bool {
        self.visibility.contains_key(&v)
    }

    pub fn sees(&self, v: VarId, d: Value) -> bool {
        match d {
            Value::Obj(o) => self.visibility.get(&v).is_some_and(|dom| dom.contains(&o)),
            Value::Undefined => false,
        }
    }

    pub fn sees_formula(&self, f: &Formula) -> bool {
        self.sees(f.var, Value::Obj(f.value))
    }
}

/// The multi-agent planning task `<AG, V, A, I, G>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapTask {
    name: String,
    symbols: Symbols,
    agents: Vec<AgentView>,
    actions: Vec<GroundAction>,
    init: State,
    init_effects: Vec<Effect>,
    goals: Vec<Formula>,
}

impl MapTask {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn agents(&self) -> &[AgentView] {
        &self.agents
    }

    pub fn agent(&self, a: AgentId) -> &AgentView {
        &self.agents[a.index()]
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.agents.len()).map(AgentId::from)
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id.index()]
    }

    pub fn agent_actions(&self, a: AgentId) -> impl Iterator<Item = (ActionId, &GroundAction)> + '_ {
        self.agents[a.index()].actions.iter().map(move |&id| (id, &self.actions[id.index()]))
    }

    /// The merged full-information initial state `∪ I_i`.
    pub fn init(&self) -> &State {
        &self.init
    }

    /// The merged initial state as assignments, i.e. the effects of `a0`.
    pub fn init_effects(&self) -> &[Effect] {
        &self.init_effects
    }

    /// `G = ∪ G_i`, sorted and deduplicated.
    pub fn goals(&self) -> &[Formula] {
        &self.goals
    }

    pub fn sees_var(&self, a: AgentId, v: VarId) -> bool {
        self.agents[a.index()].sees_var(v)
    }

    pub fn sees(&self, a: AgentId, v: VarId, d: Value) -> bool {
        self.agents[a.index()].sees(v, d)
    }

    /// True when `v ∈ V_a` and no other agent has `v`.
    pub fn is_private_to(&self, a: AgentId, v: VarId) -> bool {
        self.sees_var(a, v) && self.agent_ids().all(|j| j == a || !self.sees_var(j, v))
    }

    /// True when some agent sees `v` but not the value `d`, so `d` shows up as
    /// ⊥ in that agent's view.
    pub fn hidden_from_some(&self, v: VarId, d: ObjId) -> bool {
        self.agents.iter().any(|ag| ag.sees_var(v) && !ag.sees(v, Value::Obj(d)))
    }

    pub fn action_label(&self, id: ActionId) -> String {
        self.actions[id.index()].label(&self.symbols)
    }

    /// Copy of the task where only `keep`'s actions remain; all other agents
    /// stay present as observers.
    pub fn restrict_actions_to(&self, keep: AgentId) -> MapTask {
        let mut task = self.clone();
        for (i, ag) in task.agents.iter_mut().enumerate() {
            if AgentId::from(i) != keep {
                ag.actions.clear();
            }
        }
        for action in &mut task.actions {
            action.owners.retain(|&o| o == keep);
        }
        task
    }

    /// Projection of a full-information state onto agent `a`: hidden positive
    /// values become ⊥, hidden negations and invisible variables disappear.
    pub fn project_state(&self, state: &State, a: AgentId) -> State {
        state
            .iter()
            .filter_map(|f| {
                let p = self.project_fluent(f, a)?;
                (f.positive || !p.value.is_undefined()).then_some(p)
            })
            .collect()
    }
}

/// Name, arguments, preconditions and effects as handed to the builder.
type ActionDef = (String, Vec<ObjId>, Vec<Formula>, Vec<Effect>);

#[derive(Clone, Debug)]
struct AgentDef {
    name: String,
    visibility: BTreeMap<VarId, BTreeSet<ObjId>>,
    init: Vec<(VarId, ObjId)>,
    goals: Vec<Formula>,
    actions: Vec<ActionDef>,
}

/// Incremental construction of a [`MapTask`] at the ground level. All the
/// task invariants are checked in [`TaskBuilder::build`].
#[derive(Clone, Debug)]
pub struct TaskBuilder {
    name: String,
    objects: Vec<String>,
    obj_index: HashMap<String, ObjId>,
    variables: Vec<String>,
    var_index: HashMap<String, VarId>,
    agents: Vec<AgentDef>,
}

impl TaskBuilder {
    pub fn new(name: &str) -> Self {
        TaskBuilder {
            name: name.to_string(),
            objects: Vec::new(),
            obj_index: HashMap::new(),
            variables: Vec::new(),
            var_index: HashMap::new(),
            agents: Vec::new(),
        }
    }

    pub fn object(&mut self, name: &str) -> ObjId {
        if let Some(&id) = self.obj_index.get(name) {
            return id;
        }
        let id = ObjId::from(self.objects.len());
        self.objects.push(name.to_string());
        self.obj_index.insert(name.to_string(), id);
        id
    }

    pub fn variable(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.var_index.get(name) {
            return id;
        }
        let id = VarId::from(self.variables.len());
        self.variables.push(name.to_string());
        self.var_index.insert(name.to_string(), id);
        id
    }

    pub fn agent(&mut self, name: &str) -> AgentId {
        if let Some(i) = self.agents.iter().position(|a| a.name == name) {
            return AgentId::from(i);
        }
        self.agents.push(AgentDef {
            name: name.to_string(),
            visibility: BTreeMap::new(),
            init: Vec::new(),
            goals: Vec::new(),
            actions: Vec::new(),
        });
        AgentId::from(self.agents.len() - 1)
    }

    /// Adds `v` to `V_a` and `values` to `D_{v_a}`.
    pub fn grant(&mut self, a: AgentId, v: VarId, values: impl IntoIterator<Item = ObjId>) {
        self.agents[a.index()].visibility.entry(v).or_default().extend(values);
    }

    pub fn init(&mut self, a: AgentId, v: VarId, d: ObjId) {
        self.agents[a.index()].init.push((v, d));
    }

    pub fn goal(&mut self, a: AgentId, g: Formula) {
        self.agents[a.index()].goals.push(g);
    }

    pub fn action(&mut self, a: AgentId, name: &str, args: Vec<ObjId>, pre: Vec<Formula>, eff: Vec<Effect>) {
        self.agents[a.index()].actions.push((name.to_string(), args, pre, eff));
    }

    pub fn build(self) -> Result<MapTask, TaskError> {
        if self.agents.is_empty() {
            return Err(TaskError::NoAgents);
        }
        let mut domains = vec![BTreeSet::new(); self.variables.len()];
        for ag in &self.agents {
            for (v, dom) in &ag.visibility {
                domains[v.index()].extend(dom.iter().copied());
            }
        }
        let symbols = Symbols {
            objects: self.objects,
            variables: self.variables,
            domains,
            agents: self.agents.iter().map(|a| a.name.clone()).collect(),
        };

        let not_visible = |ag: &AgentDef, what: String| TaskError::NotVisible { agent: ag.name.clone(), what };
        let sees = |ag: &AgentDef, v: VarId, d: ObjId| ag.visibility.get(&v).is_some_and(|dom| dom.contains(&d));

        // merged initial assignments
        let mut assigned: BTreeMap<VarId, (ObjId, String)> = BTreeMap::new();
        for ag in &self.agents {
            for &(v, d) in &ag.init {
                if !sees(ag, v, d) {
                    return Err(not_visible(ag, format!("initial value {}", symbols.formula_label(&Formula::pos(v, d)))));
                }
                if let Some((prev, who)) = assigned.get(&v) {
                    if *prev != d {
                        return Err(TaskError::InconsistentInit(format!(
                            "{} assigns {} = {} but {} assigns {}",
                            who,
                            symbols.var_name(v),
                            symbols.obj_name(*prev),
                            ag.name,
                            symbols.obj_name(d)
                        )));
                    }
                } else {
                    assigned.insert(v, (d, ag.name.clone()));
                }
            }
        }
        let mut init = BTreeSet::new();
        for (&v, &(d, _)) in &assigned {
            for &o in symbols.domain(v) {
                init.insert(Fluent::new(v, o, o == d));
            }
        }
        let init = State::from_fluents_unchecked(init);
        let init_effects = assigned.iter().map(|(&v, &(d, _))| Effect::assign(v, d)).collect();

        // ground actions, deduplicated across agents
        let mut table: BTreeMap<(String, Vec<ObjId>), GroundAction> = BTreeMap::new();
        for (i, ag) in self.agents.iter().enumerate() {
            for (name, args, pre, eff) in &ag.actions {
                let mut pre = pre.clone();
                pre.sort();
                pre.dedup();
                let mut eff = eff.clone();
                eff.sort();
                eff.dedup();
                let action = GroundAction { name: name.clone(), args: args.clone(), pre, eff, owners: BTreeSet::new() };
                let label = action.label(&symbols);
                for p in &action.pre {
                    if !sees(ag, p.var, p.value) {
                        return Err(not_visible(ag, format!("precondition {} of {}", symbols.formula_label(p), label)));
                    }
                }
                for e in &action.eff {
                    if !sees(ag, e.var, e.value) {
                        return Err(not_visible(ag, format!("effect on {} of {}", symbols.var_name(e.var), label)));
                    }
                }
                check_effects(&action, &symbols)?;
                let entry = table.entry((name.clone(), args.clone())).or_insert_with(|| action.clone());
                if entry.pre != action.pre || entry.eff != action.eff {
                    return Err(TaskError::InvalidAction {
                        action: label,
                        reason: "defined differently by two agents".into(),
                    });
                }
                entry.owners.insert(AgentId::from(i));
            }
        }
        let mut actions: Vec<GroundAction> = table.into_values().collect();
        actions.sort_by_cached_key(|a| a.sort_key(&symbols));

        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, ag) in self.agents.iter().enumerate() {
            let id = AgentId::from(i);
            let mut goals = ag.goals.clone();
            for g in &goals {
                if !sees(ag, g.var, g.value) {
                    return Err(not_visible(ag, format!("goal {}", symbols.formula_label(g))));
                }
            }
            goals.sort();
            goals.dedup();
            agents.push(AgentView {
                name: ag.name.clone(),
                visibility: ag.visibility.clone(),
                actions: actions
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.owners.contains(&id))
                    .map(|(k, _)| ActionId::from(k))
                    .collect(),
                init: State::new(),
                goals,
            });
        }
        let mut goals: Vec<Formula> = agents.iter().flat_map(|a| a.goals.iter().copied()).collect();
        goals.sort();
        goals.dedup();
        for g in &goals {
            if g.positive && goals.iter().any(|h| h.var == g.var && h.positive && h.value != g.value) {
                return Err(TaskError::InconsistentGoals(format!(
                    "goals require two values of {}",
                    symbols.var_name(g.var)
                )));
            }
        }

        let mut task = MapTask { name: self.name, symbols, agents, actions, init, init_effects, goals };
        for i in 0..task.agents.len() {
            let view = task.project_state(&task.init, AgentId::from(i));
            task.agents[i].init = view;
        }
        Ok(task)
    }
}

fn check_effects(action: &GroundAction, symbols: &Symbols) -> Result<(), TaskError> {
    for (k, e) in action.eff.iter().enumerate() {
        for f in &action.eff[k + 1..] {
            if e.var != f.var {
                continue;
            }
            let clash = (e.assign && f.assign && e.value != f.value) || (e.assign != f.assign && e.value == f.value);
            if clash {
                return Err(TaskError::InvalidAction {
                    action: action.label(symbols),
                    reason: format!("conflicting effects on {}", symbols.var_name(e.var)),
                });
            }
        }
    }
    Ok(())
}
