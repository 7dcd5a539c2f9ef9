pub mod bus;
pub mod coordinator;
pub mod frontend;
pub mod harness;
pub mod pop;
pub mod rpg;
pub mod task;
pub mod validator;
