use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::task::{ActionId, AgentId, Effect, Formula, MapTask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepId(pub u32);

impl StepId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for StepId {
    fn from(i: usize) -> Self {
        StepId(i as u32)
    }
}

/// The synthetic initial step `a0`.
pub const INIT_STEP: StepId = StepId(0);
/// The synthetic goal step `a∞`.
pub const GOAL_STEP: StepId = StepId(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Init,
    Goal,
    /// A ground action executed by `agent`, one of the action's owners.
    Action { action: ActionId, agent: AgentId },
}

impl Step {
    pub fn is_synthetic(&self) -> bool {
        !matches!(self, Step::Action { .. })
    }

    pub fn agent(&self) -> Option<AgentId> {
        match self {
            Step::Action { agent, .. } => Some(*agent),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CausalLink {
    pub producer: StepId,
    pub consumer: StepId,
    pub formula: Formula,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpenGoal {
    pub step: StepId,
    pub formula: Formula,
}

/// A partial-order plan `<Δ, OR, CL>` with its open goals. Step 0 is `a0`,
/// step 1 is `a∞`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialPlan {
    pub steps: Vec<Step>,
    pub orderings: BTreeSet<(StepId, StepId)>,
    pub links: BTreeSet<CausalLink>,
    pub open_goals: BTreeSet<OpenGoal>,
}

impl PartialPlan {
    /// The empty plan `Π0`: `a0 ≺ a∞` with every top-level goal open.
    pub fn initial(task: &MapTask) -> Self {
        PartialPlan {
            steps: vec![Step::Init, Step::Goal],
            orderings: [(INIT_STEP, GOAL_STEP)].into_iter().collect(),
            links: BTreeSet::new(),
            open_goals: task.goals().iter().map(|&formula| OpenGoal { step: GOAL_STEP, formula }).collect(),
        }
    }

    pub fn step(&self, s: StepId) -> Step {
        self.steps[s.index()]
    }

    pub fn step_ids(&self) -> impl Iterator<Item = StepId> {
        (0..self.steps.len()).map(StepId::from)
    }

    pub fn action_steps(&self) -> impl Iterator<Item = (StepId, ActionId, AgentId)> + '_ {
        self.steps.iter().enumerate().filter_map(|(i, s)| match *s {
            Step::Action { action, agent } => Some((StepId::from(i), action, agent)),
            _ => None,
        })
    }

    /// `|Δ|` without the synthetic steps.
    pub fn num_actions(&self) -> usize {
        self.steps.len() - 2
    }

    pub fn preconditions<'t>(&self, task: &'t MapTask, s: StepId) -> &'t [Formula] {
        match self.step(s) {
            Step::Init => &[],
            Step::Goal => task.goals(),
            Step::Action { action, .. } => &task.action(action).pre,
        }
    }

    pub fn effects(&self, task: &MapTask, s: StepId) -> Vec<Effect> {
        match self.step(s) {
            Step::Init => task.init_effects().to_vec(),
            Step::Goal => Vec::new(),
            Step::Action { action, .. } => task.action(action).eff.clone(),
        }
    }

    pub fn add_step(&mut self, step: Step) -> StepId {
        self.steps.push(step);
        StepId::from(self.steps.len() - 1)
    }

    pub fn closure(&self) -> Reach {
        Reach::new(self.steps.len(), self.orderings.iter().copied())
    }

    /// Canonical text form used for deduplication and deterministic
    /// tie-breaking. It starts with the zero-padded action count, so plain
    /// string order prefers smaller plans.
    pub fn signature(&self, task: &MapTask) -> String {
        let symbols = task.symbols();
        let mut order: Vec<(String, StepId)> = self
            .action_steps()
            .map(|(s, a, ag)| (format!("{}:{}", symbols.agent_name(ag), task.action_label(a)), s))
            .collect();
        order.sort();
        let mut rank = vec![String::new(); self.steps.len()];
        rank[INIT_STEP.index()] = "I".into();
        rank[GOAL_STEP.index()] = "G".into();
        for (k, (_, s)) in order.iter().enumerate() {
            rank[s.index()] = k.to_string();
        }
        let mut out = format!("{:04}|", order.len());
        out.push_str(&order.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(";"));
        out.push('|');
        let mut links: Vec<String> = self
            .links
            .iter()
            .map(|l| {
                format!("{}>{}:{}", rank[l.producer.index()], rank[l.consumer.index()], symbols.formula_label(&l.formula))
            })
            .collect();
        links.sort();
        out.push_str(&links.join(";"));
        out.push('|');
        let reach = self.closure();
        let mut orders = Vec::new();
        for (_, a) in &order {
            for (_, b) in &order {
                if reach.before(*a, *b) {
                    orders.push(format!("{}<{}", rank[a.index()], rank[b.index()]));
                }
            }
        }
        orders.sort();
        out.push_str(&orders.join(";"));
        out
    }

    /// Human-readable multi-line dump.
    pub fn describe(&self, task: &MapTask) -> String {
        let symbols = task.symbols();
        let mut out = String::new();
        for s in self.step_ids() {
            let label = match self.step(s) {
                Step::Init => "a0".to_string(),
                Step::Goal => "a∞".to_string(),
                Step::Action { action, agent } => {
                    format!("{} {}", symbols.agent_name(agent), task.action_label(action))
                }
            };
            let _ = writeln!(out, "step {}: {}", s.0, label);
        }
        for &(a, b) in &self.orderings {
            let _ = writeln!(out, "order {} < {}", a.0, b.0);
        }
        for l in &self.links {
            let _ = writeln!(out, "link {} -> {} {}", l.producer.0, l.consumer.0, symbols.formula_label(&l.formula));
        }
        for g in &self.open_goals {
            let _ = writeln!(out, "open {} {}", g.step.0, symbols.formula_label(&g.formula));
        }
        out
    }
}

/// Transitive closure of an ordering relation, one bit row per step.
#[derive(Clone, Debug)]
pub struct Reach {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Reach {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (StepId, StepId)>) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut succ = vec![Vec::new(); n];
        for (a, b) in edges {
            succ[a.index()].push(b.index());
        }
        let mut bits = vec![0u64; n * words];
        let mut stack = Vec::new();
        for src in 0..n {
            let row = src * words;
            stack.clear();
            stack.extend(succ[src].iter().copied());
            while let Some(x) = stack.pop() {
                let (w, b) = (x / 64, x % 64);
                if bits[row + w] & (1 << b) == 0 {
                    bits[row + w] |= 1 << b;
                    stack.extend(succ[x].iter().copied());
                }
            }
        }
        Reach { n, words, bits }
    }

    /// `a ≺+ b` in the transitive closure.
    pub fn before(&self, a: StepId, b: StepId) -> bool {
        let (a, b) = (a.index(), b.index());
        a < self.n && b < self.n && self.bits[a * self.words + b / 64] & (1 << (b % 64)) != 0
    }

    pub fn is_acyclic(&self) -> bool {
        (0..self.n).all(|i| !self.before(StepId::from(i), StepId::from(i)))
    }

    /// Neither `a ≺+ b` nor `b ≺+ a`.
    pub fn unordered(&self, a: StepId, b: StepId) -> bool {
        a != b && !self.before(a, b) && !self.before(b, a)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}
