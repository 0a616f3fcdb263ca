//! The augmented environment: a live episode viewed through an interface.

use std::cell::RefCell;
use std::rc::Rc;

use thiserror::Error;

use crate::env_core::{EnvError, EnvResult, Task};
use crate::env_core::Environment;

use super::{
    InterfaceFault, InterfaceHandle, WrappedStepOutcome, STATIC_INFO_SEPARATOR,
};

/// Holder that lets a single environment instance be shared between the
/// wrapper and the script proxy within one episode.
pub struct EnvCell {
    pub env: Box<dyn Environment>,
    wrapped: bool,
}

pub type SharedEnv = Rc<RefCell<EnvCell>>;

pub fn share_env(env: Box<dyn Environment>) -> SharedEnv {
    Rc::new(RefCell::new(EnvCell {
        env,
        wrapped: false,
    }))
}

#[derive(Debug, Error)]
pub enum WrapError {
    #[error("environment instance is already wrapped")]
    AlreadyWrapped,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// An environment instance wrapped by one interface for one episode.
///
/// Construction resets the episode, runs `InferRules`, and composes the
/// agent-facing static info as the environment's own description plus the
/// inferred rule text. Steps route through `WrapStep`; faults accumulate.
pub struct WrappedEnv {
    handle: Rc<InterfaceHandle>,
    cell: SharedEnv,
    task: Task,
    init_obs: String,
    static_info: String,
    rules_text: String,
    faults: Vec<InterfaceFault>,
    log_lines: Vec<String>,
    total_probe_steps: u64,
}

/// Wraps `cell` with `handle` for an episode of `task`. A given instance
/// accepts at most one wrapper at a time; interface composition happens by
/// regenerating sources, never by stacking wrappers.
pub fn wrap_environment(
    handle: Rc<InterfaceHandle>,
    cell: SharedEnv,
    task: &Task,
) -> Result<WrappedEnv, WrapError> {
    {
        let mut borrow = cell.borrow_mut();
        if borrow.wrapped {
            return Err(WrapError::AlreadyWrapped);
        }
        borrow.wrapped = true;
    }
    let init_obs = match cell.borrow_mut().env.reset(task) {
        Ok(obs) => obs,
        Err(err) => {
            cell.borrow_mut().wrapped = false;
            return Err(WrapError::Env(err));
        }
    };
    let inferred = handle.infer_rules(&init_obs, task);
    let base_info = cell.borrow().env.descriptor().static_info.clone();
    let static_info = format!("{base_info}{STATIC_INFO_SEPARATOR}{}", inferred.text);
    let mut faults = Vec::new();
    if let Some(fault) = inferred.fault {
        faults.push(fault);
    }
    Ok(WrappedEnv {
        handle,
        cell,
        task: task.clone(),
        init_obs,
        static_info,
        rules_text: inferred.text,
        faults,
        log_lines: Vec::new(),
        total_probe_steps: 0,
    })
}

impl WrappedEnv {
    /// Routes one agent action through the interface.
    pub fn step(&mut self, agent_action: &str) -> EnvResult<WrappedStepOutcome> {
        if self.cell.borrow().env.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        let outcome = self
            .handle
            .wrap_step(&self.cell, &self.init_obs, &self.task, agent_action)?;
        if let Some(fault) = &outcome.fault {
            self.faults.push(fault.clone());
        }
        self.log_lines.extend(outcome.log_lines.iter().cloned());
        self.total_probe_steps += u64::from(outcome.probe_step_count);
        Ok(outcome)
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    /// Raw initial observation of the episode.
    pub fn init_obs(&self) -> &str {
        &self.init_obs
    }

    /// Composed agent-facing static description (environment info plus the
    /// inferred rule text).
    pub fn static_info(&self) -> &str {
        &self.static_info
    }

    /// Just the inferred rule text.
    pub fn rules_text(&self) -> &str {
        &self.rules_text
    }

    pub fn is_done(&self) -> bool {
        self.cell.borrow().env.is_done()
    }

    pub fn state_digest(&self) -> EnvResult<String> {
        self.cell.borrow().env.state_digest()
    }

    pub fn classify_action(&self, pre_state_digest: &str, action: &str) -> EnvResult<bool> {
        self.cell.borrow().env.classify_action(pre_state_digest, action)
    }

    pub fn env_steps_taken(&self) -> u64 {
        self.cell.borrow().env.steps_taken()
    }

    pub fn oracle_script(&self) -> EnvResult<Vec<String>> {
        self.cell.borrow().env.oracle_script()
    }

    pub fn faults(&self) -> &[InterfaceFault] {
        &self.faults
    }

    pub fn log_lines(&self) -> &[String] {
        &self.log_lines
    }

    pub fn total_probe_steps(&self) -> u64 {
        self.total_probe_steps
    }

    pub fn interface_version(&self) -> u32 {
        self.handle.source().version
    }
}

impl Drop for WrappedEnv {
    fn drop(&mut self) {
        self.cell.borrow_mut().wrapped = false;
    }
}
