//! Registry of the bundled miniature environments.

pub mod household;
pub mod toolworld;

use crate::env_core::{EnvError, EnvResult, Environment, Task};

pub use household::{HouseholdEnv, NOTHING_HAPPENS};
pub use toolworld::{ToolWorldEnv, INVALID_ACTION};

pub const HOUSEHOLD_ENV_ID: &str = "mini-household";
pub const TOOLWORLD_ENV_ID: &str = "mini-toolworld";

/// Maps an environment name (or accepted alias) to its canonical id.
pub fn canonical_env_id(name: &str) -> EnvResult<&'static str> {
    match name {
        "mini-household" | "minihousehold" => Ok(HOUSEHOLD_ENV_ID),
        "mini-toolworld" | "minitoolworld" => Ok(TOOLWORLD_ENV_ID),
        other => Err(EnvError::UnknownEnv(other.to_string())),
    }
}

/// Creates a fresh instance of a builtin environment.
pub fn make_env(env_id: &str) -> EnvResult<Box<dyn Environment>> {
    match canonical_env_id(env_id)? {
        HOUSEHOLD_ENV_ID => Ok(Box::new(HouseholdEnv::new())),
        _ => Ok(Box::new(ToolWorldEnv::new())),
    }
}

/// Task types registered for an environment, in type-index order.
pub fn task_types(env_id: &str) -> EnvResult<Vec<String>> {
    match canonical_env_id(env_id)? {
        HOUSEHOLD_ENV_ID => Ok(household::TASK_TYPES.iter().map(|t| t.to_string()).collect()),
        _ => Ok(toolworld::TASK_TYPES.iter().map(|t| t.to_string()).collect()),
    }
}

/// Deterministically instantiates a task from `(task_type, seed)`.
pub fn generate_task(env_id: &str, task_type: &str, seed: u64) -> EnvResult<Task> {
    match canonical_env_id(env_id)? {
        HOUSEHOLD_ENV_ID => household::household_task(task_type, seed),
        _ => toolworld::toolworld_task(task_type, seed),
    }
}

/// Resolves a `"type-instance"` task id into a full task.
pub fn task_from_id(env_id: &str, task_id: &str) -> EnvResult<Task> {
    let (type_index, instance) = Task::parse_id(task_id)?;
    let types = task_types(env_id)?;
    let task_type = types
        .get(type_index as usize)
        .ok_or_else(|| EnvError::UnknownTask(task_id.to_string()))?;
    generate_task(env_id, task_type, instance as u64)
}

/// Manifest of available tasks: one `task_id<TAB>description` line per task,
/// `per_type` instances of each registered type.
pub fn task_manifest(env_id: &str, per_type: u32) -> EnvResult<String> {
    let types = task_types(env_id)?;
    let mut out = String::new();
    for (type_index, task_type) in types.iter().enumerate() {
        for seed in 0..per_type {
            let task = generate_task(env_id, task_type, seed as u64)?;
            debug_assert_eq!(task.task_id, format!("{type_index}-{seed}"));
            out.push_str(&format!("{}\t{}\n", task.task_id, task.description));
        }
    }
    Ok(out)
}
