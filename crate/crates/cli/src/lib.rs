//! Scenario runner for tonelab: scenario documents, task dispatch and
//! table/CSV/JSON output.

pub mod builtin;
pub mod emit;
pub mod spec;
pub mod tasks;

pub use emit::{emit, parse_json, render, Format};
pub use spec::{ScenarioSpec, TaskSpec, ValidationError};
pub use tasks::{run_scenario, RunRecord};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OUTPUT: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const TASK_FAILED: i32 = 3;
}
