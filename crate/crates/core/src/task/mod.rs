//! The planning task model: fluents over multi-valued state variables,
//! open-world states, ground actions and per-agent visibility.

mod fluent;
mod model;
mod projection;
mod state;

pub use fluent::{ActionId, AgentId, Effect, Fluent, Formula, ObjId, Truth, Value, VarId};
pub use model::{AgentView, GroundAction, MapTask, Symbols, TaskBuilder, TaskError};
pub use projection::{PlanView, ViewEffect, ViewLink, Viewer};
pub use state::{evaluate, State};
