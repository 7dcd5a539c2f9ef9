//! Inputs shared by the criterion benches.

use std::path::PathBuf;

use mappop_core::frontend::load_dir;
use mappop_core::task::MapTask;

pub const CORPUS: [&str; 6] = ["satellite-2", "satellite-3", "rovers-2", "rovers-3", "logistics-1", "logistics-2"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Loads one of the shipped tasks by name.
pub fn corpus_task(name: &str) -> MapTask {
    load_dir(&corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}
