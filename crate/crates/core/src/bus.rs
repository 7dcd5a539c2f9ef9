//! In-memory message bus for simulated agents.
//!
//! Agents exchange messages in synchronous rounds: every outbox of round `r`
//! is delivered before round `r + 1` starts. Delivery order is by sender index,
//! and every delivered message is appended to a [`Trace`].

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::pop::PartialPlan;
use crate::rpg::SharedFluent;
use crate::task::{AgentId, MapTask, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// Shareable dis-RPG fluents with their cost and achiever labels.
    Fluents(Vec<SharedFluent>),
    /// Refinement plans proposed over the current base plan.
    Refinements(Vec<Arc<PartialPlan>>),
    /// The sender's vote, as a plan digest.
    Vote { plan: u64 },
    /// Baton hand-over at the start of an iteration.
    Baton { iteration: usize },
    /// The open goal selected by the baton agent.
    Goal { label: String },
    /// Adoption of a new base plan, with the pool size and vote count.
    Adopt { plan: u64, pool: usize, votes: usize },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Fluents(_) => "fluents",
            Payload::Refinements(_) => "refinements",
            Payload::Vote { .. } => "vote",
            Payload::Baton { .. } => "baton",
            Payload::Goal { .. } => "goal",
            Payload::Adopt { .. } => "adopt",
        }
    }

    fn summary(&self, task: &MapTask, digest: &dyn Fn(&PartialPlan) -> u64) -> String {
        let symbols = task.symbols();
        match self {
            Payload::Fluents(fs) => {
                let items: Vec<String> = fs
                    .iter()
                    .map(|f| format!("{}@{}", symbols.formula_label(&f.formula), f.cost))
                    .collect();
                items.join(",")
            }
            Payload::Refinements(plans) => {
                let ids: Vec<String> = plans.iter().map(|p| format!("{:016x}", digest(p))).collect();
                format!("{} [{}]", plans.len(), ids.join(","))
            }
            Payload::Vote { plan } => format!("{plan:016x}"),
            Payload::Baton { iteration } => iteration.to_string(),
            Payload::Goal { label } => label.clone(),
            Payload::Adopt { plan, pool, votes } => format!("{plan:016x} pool={pool} votes={votes}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub sender: AgentId,
    pub recipient: AgentId,
    pub round: u32,
    pub payload: Payload,
}

/// A message waiting in an outbox.
#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub recipient: AgentId,
    pub payload: Payload,
}

impl Outgoing {
    pub fn new(recipient: AgentId, payload: Payload) -> Self {
        Outgoing { recipient, payload }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("message from {sender} addressed to unknown agent {recipient}")]
    UnknownRecipient { sender: u32, recipient: u32 },
    #[error("{outboxes} outboxes for {agents} agents")]
    OutboxCount { outboxes: usize, agents: usize },
    #[error("privacy violation: {fluent} sent to {recipient}")]
    PrivacyViolation { fluent: String, recipient: String },
}

/// Ordered log of delivered messages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    messages: Vec<Message>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, m: Message) {
        self.messages.push(m);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn extend(&mut self, other: Trace) {
        self.messages.extend(other.messages);
    }

    /// One line per message: `round sender recipient payload-kind payload-summary`.
    pub fn export(&self, task: &MapTask) -> String {
        let digest = |p: &PartialPlan| fnv1a(p.signature(task).as_bytes());
        let symbols = task.symbols();
        let mut out = String::new();
        for m in &self.messages {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                m.round,
                symbols.agent_name(m.sender),
                symbols.agent_name(m.recipient),
                m.payload.kind(),
                m.payload.summary(task, &digest)
            );
        }
        out
    }
}

/// One recipient-visibility breach found by [`audit_privacy`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub message: usize,
    pub fluent: String,
    pub recipient: String,
}

/// Lists every fluent-batch entry the recipient was not entitled to see.
pub fn audit_privacy(trace: &Trace, task: &MapTask) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, m) in trace.messages.iter().enumerate() {
        if let Payload::Fluents(fs) = &m.payload {
            for f in fs {
                if !visible(task, m.recipient, f) {
                    out.push(Violation {
                        message: i,
                        fluent: task.symbols().formula_label(&f.formula),
                        recipient: task.symbols().agent_name(m.recipient).to_string(),
                    });
                }
            }
        }
    }
    out
}

fn visible(task: &MapTask, to: AgentId, f: &SharedFluent) -> bool {
    task.sees(to, f.formula.var, Value::Obj(f.formula.value))
}

/// Execution mode for per-agent local work between barriers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Sequential,
    Parallel,
}

/// Round-synchronous bus over the agents of one task.
#[derive(Debug)]
pub struct Bus<'t> {
    task: &'t MapTask,
    round: u32,
    mode: Mode,
    trace: Trace,
}

impl<'t> Bus<'t> {
    pub fn new(task: &'t MapTask) -> Self {
        Bus { task, round: 0, mode: Mode::Sequential, trace: Trace::new() }
    }

    pub fn with_mode(task: &'t MapTask, mode: Mode) -> Self {
        Bus { task, round: 0, mode, trace: Trace::new() }
    }

    pub fn task(&self) -> &'t MapTask {
        self.task
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Delivers one round. `outboxes[i]` holds agent `i`'s messages; the
    /// result holds each agent's inbox in sender order. Returns the messages
    /// appended to the trace as the second element.
    pub fn broadcast_round(&mut self, outboxes: Vec<Vec<Outgoing>>) -> Result<(Vec<Vec<Message>>, Trace), BusError> {
        let n = self.task.num_agents();
        if outboxes.len() != n {
            return Err(BusError::OutboxCount { outboxes: outboxes.len(), agents: n });
        }
        let mut batch = Vec::new();
        for (s, outbox) in outboxes.into_iter().enumerate() {
            let sender = AgentId::from(s);
            for o in outbox {
                if o.recipient.index() >= n {
                    return Err(BusError::UnknownRecipient { sender: sender.0, recipient: o.recipient.0 });
                }
                if let Payload::Fluents(fs) = &o.payload {
                    if let Some(bad) = fs.iter().find(|f| !visible(self.task, o.recipient, f)) {
                        return Err(BusError::PrivacyViolation {
                            fluent: self.task.symbols().formula_label(&bad.formula),
                            recipient: self.task.symbols().agent_name(o.recipient).to_string(),
                        });
                    }
                }
                batch.push(Message { sender, recipient: o.recipient, round: self.round, payload: o.payload });
            }
        }
        // stable: keeps per-pair send order
        batch.sort_by_key(|m| (m.sender, m.recipient));
        let mut inboxes = vec![Vec::new(); n];
        let mut delta = Trace::new();
        for m in batch {
            inboxes[m.recipient.index()].push(m.clone());
            delta.push(m);
        }
        self.trace.messages.extend(delta.messages.iter().cloned());
        self.round += 1;
        Ok((inboxes, delta))
    }
}

/// 64-bit FNV-1a, used for short stable plan digests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{Formula, TaskBuilder};
    use std::collections::BTreeSet;

    fn task() -> MapTask {
        let mut b = TaskBuilder::new("t");
        let x = b.agent("x");
        let y = b.agent("y");
        let shared = b.variable("shared");
        let secret = b.variable("secret");
        let d = b.object("d");
        b.grant(x, shared, [d]);
        b.grant(y, shared, [d]);
        b.grant(x, secret, [d]);
        b.build().unwrap()
    }

    fn fluent(task: &MapTask, var: &str) -> SharedFluent {
        let v = task.symbols().find_var(var).unwrap();
        let d = task.symbols().find_obj("d").unwrap();
        SharedFluent { formula: Formula::pos(v, d), cost: 1, achievers: BTreeSet::new() }
    }

    #[test]
    fn each_message_is_delivered_once() {
        let t = task();
        let mut bus = Bus::new(&t);
        let out = vec![
            vec![Outgoing::new(AgentId(1), Payload::Baton { iteration: 0 })],
            vec![Outgoing::new(AgentId(0), Payload::Baton { iteration: 0 })],
        ];
        let (inboxes, delta) = bus.broadcast_round(out).unwrap();
        assert_eq!(inboxes[0].len(), 1);
        assert_eq!(inboxes[1].len(), 1);
        assert_eq!(delta.len(), 2);
        assert_eq!(bus.round(), 1);
    }

    #[test]
    fn empty_round_is_a_no_op_on_the_trace() {
        let mut b = TaskBuilder::new("solo");
        b.agent("x");
        let t = b.build().unwrap();
        let mut bus = Bus::new(&t);
        let (inboxes, delta) = bus.broadcast_round(vec![vec![]]).unwrap();
        assert!(inboxes[0].is_empty());
        assert!(delta.is_empty());
        assert!(bus.trace().is_empty());
    }

    #[test]
    fn private_fluent_is_trapped() {
        let t = task();
        let mut bus = Bus::new(&t);
        let out = vec![vec![Outgoing::new(AgentId(1), Payload::Fluents(vec![fluent(&t, "secret")]))], vec![]];
        assert!(matches!(bus.broadcast_round(out), Err(BusError::PrivacyViolation { .. })));
    }

    #[test]
    fn audit_finds_planted_leak() {
        let t = task();
        let mut trace = Trace::new();
        trace.push(Message {
            sender: AgentId(0),
            recipient: AgentId(1),
            round: 0,
            payload: Payload::Fluents(vec![fluent(&t, "shared"), fluent(&t, "secret")]),
        });
        let v = audit_privacy(&trace, &t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, 0);
        assert_eq!(v[0].fluent, "secret=d");
        assert_eq!(v[0].recipient, "y");
    }

    #[test]
    fn trace_is_sorted_by_sender_then_recipient() {
        let mut b = TaskBuilder::new("t3");
        for n in ["a", "b", "c"] {
            b.agent(n);
        }
        let t = b.build().unwrap();
        let mut bus = Bus::new(&t);
        let out = vec![
            vec![Outgoing::new(AgentId(2), Payload::Baton { iteration: 0 }), Outgoing::new(AgentId(1), Payload::Baton { iteration: 0 })],
            vec![Outgoing::new(AgentId(0), Payload::Baton { iteration: 0 })],
            vec![],
        ];
        bus.broadcast_round(out).unwrap();
        let text = bus.trace().export(&t);
        assert_eq!(text, "0 a b baton 0\n0 a c baton 0\n0 b a baton 0\n");
    }
}
