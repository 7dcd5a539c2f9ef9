//! The cooperative refinement loop.
//!
//! All agents share one pool of candidate plans. Each iteration the baton
//! holder picks an open goal of the current base plan, every agent that knows
//! the goal's variable proposes refinements, the agents vote on the whole pool
//! and the winner becomes the next base plan. The loop stops when every agent
//! sees a plan without open goals.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bus::{fnv1a, Bus, BusError, Mode, Outgoing, Payload, Trace};
use crate::pop::{heuristic_f, refine, refinement_plans, OpenGoal, PartialPlan, RefineConfig};
use crate::rpg::{build_dis_rpg, DisRpg};
use crate::task::{AgentId, MapTask, Viewer};

/// Round-robin baton over the agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatonSchedule {
    agents: usize,
    holder: usize,
    iteration: usize,
}

impl BatonSchedule {
    pub fn new(agents: usize) -> Self {
        assert!(agents > 0, "baton needs at least one agent");
        BatonSchedule { agents, holder: 0, iteration: 0 }
    }

    pub fn holder(&self) -> AgentId {
        AgentId::from(self.holder)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn advance(&mut self) {
        self.holder = (self.holder + 1) % self.agents;
        self.iteration += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub plan: Arc<PartialPlan>,
    /// `F` of the plan as seen by each agent, by agent index.
    pub evals: Vec<f64>,
    /// Number of refinements between the empty plan and this one.
    pub depth: usize,
}

/// Candidate plans across every base expanded so far, keyed by signature.
#[derive(Clone, Debug, Default)]
pub struct RefinementPool {
    entries: BTreeMap<String, PoolEntry>,
    expanded: HashSet<String>,
}

impl RefinementPool {
    pub fn new() -> Self {
        RefinementPool::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, signature: &str) -> bool {
        self.entries.contains_key(signature)
    }

    pub fn is_expanded(&self, signature: &str) -> bool {
        self.expanded.contains(signature)
    }

    pub fn mark_expanded(&mut self, signature: String) {
        self.expanded.insert(signature);
    }

    /// Adds a candidate unless it is already pooled or was a base before.
    pub fn insert(&mut self, signature: String, entry: PoolEntry) -> bool {
        if self.expanded.contains(&signature) || self.entries.contains_key(&signature) {
            return false;
        }
        self.entries.insert(signature, entry);
        true
    }

    /// Removes the adopted plan and remembers it as expanded.
    pub fn adopt(&mut self, signature: &str) -> Option<PoolEntry> {
        let e = self.entries.remove(signature)?;
        self.expanded.insert(signature.to_string());
        Some(e)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &PoolEntry)> {
        self.entries.iter()
    }
}

/// Goal cost as seen by `agent`: graph cost, the penalty for ⊥, `+∞` when
/// missing from the graph.
fn goal_cost(task: &MapTask, dis: &DisRpg, agent: AgentId, g: &OpenGoal, penalty: f64) -> f64 {
    match task.project_fluent(&g.formula.fluent(), agent).and_then(|f| f.as_formula()) {
        None => penalty,
        Some(f) => dis.graph(agent).cost(&f).map_or(f64::INFINITY, |c| c as f64),
    }
}

/// The hardest open goal in the first view, starting at `baton`, that shows
/// any. Returns the selecting agent with the goal.
pub fn select_open_goal(
    task: &MapTask,
    plan: &PartialPlan,
    baton: AgentId,
    dis: &DisRpg,
    penalty: f64,
) -> Option<(AgentId, OpenGoal)> {
    let n = task.num_agents();
    let symbols = task.symbols();
    (0..n).map(|k| AgentId::from((baton.index() + k) % n)).find_map(|agent| {
        plan.open_goals
            .iter()
            .filter(|g| task.sees_var(agent, g.formula.var))
            .map(|g| {
                let label = task.project_fluent(&g.formula.fluent(), agent).map(|f| symbols.fluent_label(&f));
                (goal_cost(task, dis, agent, g, penalty), label, *g)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)).then_with(|| b.2.cmp(&a.2)))
            .map(|(_, _, g)| (agent, g))
    })
}

/// Every agent that knows the goal's variable refines the base and sends its
/// plans to the others. Returns the union, deduplicated by signature.
pub fn gather_refinements(
    task: &MapTask,
    base: &PartialPlan,
    goal: OpenGoal,
    dis: &DisRpg,
    cfg: &RefineConfig,
    bus: &mut Bus<'_>,
) -> Result<Vec<Arc<PartialPlan>>, BusError> {
    let n = task.num_agents();
    let work = |i: usize| -> Vec<Arc<PartialPlan>> {
        let a = AgentId::from(i);
        if !task.sees_var(a, goal.formula.var) {
            return Vec::new();
        }
        let steps = refine(task, base, goal, a, dis.graph(a), cfg);
        refinement_plans(task, base, &steps).into_iter().map(Arc::new).collect()
    };
    let per_agent: Vec<Vec<Arc<PartialPlan>>> = match bus.mode() {
        Mode::Parallel => (0..n).into_par_iter().map(work).collect(),
        Mode::Sequential => (0..n).map(work).collect(),
    };
    let outboxes = per_agent
        .iter()
        .enumerate()
        .map(|(i, plans)| {
            if plans.is_empty() {
                return Vec::new();
            }
            (0..n)
                .filter(|&j| j != i)
                .map(|j| Outgoing::new(AgentId::from(j), Payload::Refinements(plans.clone())))
                .collect()
        })
        .collect();
    bus.broadcast_round(outboxes)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in per_agent.into_iter().flatten() {
        if seen.insert(p.signature(task)) {
            out.push(p);
        }
    }
    Ok(out)
}

/// `F` of the plan in every agent's view.
pub fn evaluate(task: &MapTask, plan: &PartialPlan, dis: &DisRpg, penalty: f64, mode: Mode) -> Vec<f64> {
    let one = |i: usize| {
        let a = AgentId::from(i);
        heuristic_f(&task.project_plan(plan, Viewer::Agent(a)), dis.graph(a), penalty)
    };
    match mode {
        Mode::Parallel => (0..task.num_agents()).into_par_iter().map(one).collect(),
        Mode::Sequential => (0..task.num_agents()).map(one).collect(),
    }
}

/// Outcome of one vote over the pool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteResult {
    pub winner: String,
    /// Signature each agent voted for, by agent index.
    pub ballots: Vec<String>,
    pub votes: usize,
}

/// How an agent orders pool entries when voting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ranking {
    /// Lowest `F`; among equal values the deepest refinement, then fewer
    /// steps. Finishes independent goals one after another.
    #[default]
    Greedy,
    /// Lowest `F + |Δ|`, then fewer steps. Used on plateaus, where a branch
    /// can keep `F` flat while its plans grow without end.
    Cost,
}

fn rank(ranking: Ranking, i: usize, a: (&String, &PoolEntry), b: (&String, &PoolEntry)) -> std::cmp::Ordering {
    let (ea, eb) = (a.1, b.1);
    let (na, nb) = (ea.plan.num_actions(), eb.plan.num_actions());
    let first = match ranking {
        Ranking::Greedy => ea.evals[i].total_cmp(&eb.evals[i]).then_with(|| eb.depth.cmp(&ea.depth)),
        Ranking::Cost => (ea.evals[i] + na as f64).total_cmp(&(eb.evals[i] + nb as f64)),
    };
    first.then_with(|| na.cmp(&nb)).then_with(|| a.0.cmp(b.0))
}

/// Each agent votes for its best entry under `ranking`, signature breaking
/// the last ties. Plurality wins and draws go to the baton agent's
/// preference.
pub fn vote(pool: &RefinementPool, agents: usize, baton: AgentId, ranking: Ranking) -> Option<VoteResult> {
    let pick = |i: usize, among: &mut dyn Iterator<Item = (&String, &PoolEntry)>| {
        among.min_by(|&a, &b| rank(ranking, i, a, b)).map(|(s, _)| s.clone())
    };
    let ballots: Vec<String> = (0..agents).map(|i| pick(i, &mut pool.entries())).collect::<Option<_>>()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for b in &ballots {
        *counts.entry(b).or_default() += 1;
    }
    let top = *counts.values().max()?;
    let tied: Vec<&str> = counts.iter().filter(|(_, &c)| c == top).map(|(s, _)| *s).collect();
    let winner = if tied.len() == 1 {
        tied[0].to_string()
    } else {
        pick(baton.index(), &mut pool.entries().filter(|(s, _)| tied.contains(&s.as_str())))?
    };
    Some(VoteResult { winner, ballots, votes: top })
}

/// True when no agent sees an open goal.
pub fn check_solution(task: &MapTask, plan: &PartialPlan) -> bool {
    task.agent_ids().all(|a| task.project_plan(plan, Viewer::Agent(a)).open_goals.is_empty())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub refine: RefineConfig,
    pub max_iterations: usize,
    pub mode: Mode,
    pub timeout: Option<Duration>,
    /// Iterations without a better adopted plan before votes switch from
    /// [`Ranking::Greedy`] to [`Ranking::Cost`].
    pub patience: usize,
}

pub const DEFAULT_PATIENCE: usize = 8;

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { refine: RefineConfig::default(), max_iterations: 2000, mode: Mode::Sequential, timeout: None, patience: DEFAULT_PATIENCE }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Unsolvable {
    /// A goal is missing from every agent's graph.
    UnreachableGoal(String),
    /// No candidate plans are left.
    PoolExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Iterations,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    Solution(Arc<PartialPlan>),
    Unsolvable(Unsolvable),
    BudgetExhausted(Budget),
}

impl fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveOutcome::Solution(_) => write!(f, "solved"),
            SolveOutcome::Unsolvable(Unsolvable::UnreachableGoal(g)) => write!(f, "unsolvable: goal {g} is unreachable"),
            SolveOutcome::Unsolvable(Unsolvable::PoolExhausted) => write!(f, "unsolvable: no refinements left"),
            SolveOutcome::BudgetExhausted(Budget::Iterations) => write!(f, "budget exhausted: iteration cap reached"),
            SolveOutcome::BudgetExhausted(Budget::Timeout) => write!(f, "budget exhausted: timeout"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub trace: Trace,
    pub iterations: usize,
    pub rpg_rounds: usize,
}

impl SolveReport {
    pub fn plan(&self) -> Option<&PartialPlan> {
        match &self.outcome {
            SolveOutcome::Solution(p) => Some(p),
            _ => None,
        }
    }
}

fn to_others(n: usize, from: AgentId, payload: impl Fn(AgentId) -> Payload) -> Vec<Vec<Outgoing>> {
    (0..n)
        .map(|i| {
            if i != from.index() {
                return Vec::new();
            }
            (0..n).filter(|&j| j != i).map(|j| Outgoing::new(AgentId::from(j), payload(AgentId::from(j)))).collect()
        })
        .collect()
}

/// Runs the whole process: distributed graph construction, then refinement
/// iterations from the empty plan.
pub fn solve(task: &MapTask, cfg: &SolveConfig) -> Result<SolveReport, BusError> {
    let start = Instant::now();
    let n = task.num_agents();
    let mut bus = Bus::with_mode(task, cfg.mode);
    let dis = build_dis_rpg(task, &mut bus)?;
    let penalty = cfg.refine.unknown_penalty;
    let refine_cfg = RefineConfig { deadline: cfg.timeout.map(|t| start + t), ..cfg.refine };
    let done = |outcome, bus: Bus<'_>, iterations| {
        Ok(SolveReport { outcome, trace: bus.into_trace(), iterations, rpg_rounds: dis.rounds })
    };
    if let Some(g) = task.goals().iter().find(|g| !dis.reachable(g)) {
        let label = task.symbols().formula_label(g);
        return done(SolveOutcome::Unsolvable(Unsolvable::UnreachableGoal(label)), bus, 0);
    }
    let mut current = Arc::new(PartialPlan::initial(task));
    let mut depth = 0;
    // summed F of the best plan adopted so far, and iterations since
    let (mut best, mut stalled) = (f64::INFINITY, 0);
    if check_solution(task, &current) {
        return done(SolveOutcome::Solution(current), bus, 0);
    }
    let mut pool = RefinementPool::new();
    pool.mark_expanded(current.signature(task));
    let mut baton = BatonSchedule::new(n);
    let symbols = task.symbols();
    for iteration in 0..cfg.max_iterations {
        if cfg.timeout.is_some_and(|t| start.elapsed() > t) {
            return done(SolveOutcome::BudgetExhausted(Budget::Timeout), bus, iteration);
        }
        let holder = baton.holder();
        bus.broadcast_round(to_others(n, holder, |_| Payload::Baton { iteration }))?;

        if let Some((selector, goal)) = select_open_goal(task, &current, holder, &dis, penalty) {
            let label = |to: AgentId| {
                let seen = task.project_fluent(&goal.formula.fluent(), to).map(|f| symbols.fluent_label(&f));
                Payload::Goal { label: format!("{} {}", goal.step.0, seen.as_deref().unwrap_or("?")) }
            };
            bus.broadcast_round(to_others(n, selector, label))?;
            let plans = gather_refinements(task, &current, goal, &dis, &refine_cfg, &mut bus)?;
            for plan in plans {
                let sig = plan.signature(task);
                if pool.is_expanded(&sig) || pool.contains(&sig) {
                    continue;
                }
                let evals = evaluate(task, &plan, &dis, penalty, cfg.mode);
                pool.insert(sig, PoolEntry { plan, evals, depth: depth + 1 });
            }
        }

        let ranking = if stalled >= cfg.patience { Ranking::Cost } else { Ranking::Greedy };
        let Some(result) = vote(&pool, n, holder, ranking) else {
            return done(SolveOutcome::Unsolvable(Unsolvable::PoolExhausted), bus, iteration + 1);
        };
        let ballots: Vec<Vec<Outgoing>> = (0..n)
            .map(|i| {
                let plan = fnv1a(result.ballots[i].as_bytes());
                (0..n).filter(|&j| j != i).map(|j| Outgoing::new(AgentId::from(j), Payload::Vote { plan })).collect()
            })
            .collect();
        bus.broadcast_round(ballots)?;
        let entry = pool.adopt(&result.winner).expect("winner is pooled");
        let digest = fnv1a(result.winner.as_bytes());
        let size = pool.len();
        bus.broadcast_round(to_others(n, holder, |_| Payload::Adopt { plan: digest, pool: size, votes: result.votes }))?;
        let total: f64 = entry.evals.iter().sum();
        if total < best {
            (best, stalled) = (total, 0);
        } else {
            stalled += 1;
        }
        current = entry.plan;
        depth = entry.depth;
        baton.advance();
        if check_solution(task, &current) {
            return done(SolveOutcome::Solution(current), bus, iteration + 1);
        }
    }
    done(SolveOutcome::BudgetExhausted(Budget::Iterations), bus, cfg.max_iterations)
}
