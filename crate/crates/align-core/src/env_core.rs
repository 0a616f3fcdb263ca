//! Core environment contract: descriptors, tasks, step results, trajectories,
//! and the trait every concrete environment implements.
//!
//! An environment is a deterministic text world. Resetting it to a [`Task`]
//! yields the initial observation; stepping it with an action string advances
//! the state irreversibly and returns a [`RawStepResult`]. Validity of agent
//! actions is an environment-owned predicate evaluated against a pre-state
//! digest, so the metric layer never has to guess what counts as a no-op.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors surfaced by environment implementations.
#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown task: {0}")]
    UnknownTask(String),
    #[error("unknown task type: {0}")]
    UnknownTaskType(String),
    #[error("malformed task id (expected \"int-int\"): {0}")]
    MalformedTaskId(String),
    #[error("unknown environment: {0}")]
    UnknownEnv(String),
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("no active episode; call reset first")]
    NoEpisode,
    #[error("state digest was not produced by this environment: {0}")]
    DigestMismatch(String),
}

pub type EnvResult<T> = Result<T, EnvError>;

/// Static description of an environment: its identifier, the foundational
/// information text shown to agents at startup, and its task-type registry.
#[derive(Debug, Clone)]
pub struct EnvDescriptor {
    pub env_id: String,
    /// Foundational information exposed to the agent at initialization.
    pub static_info: String,
    /// Documentation of the action space, embedded in agent prompts.
    pub action_space_doc: String,
    /// Task types in index order; index i corresponds to task ids "i-*".
    pub task_types: Vec<String>,
    /// Note naming the receptacles or resources that can be opened/closed.
    pub closable_note: String,
}

/// One solvable task instance. `task_id` is `"<type_index>-<instance_index>"`
/// and the same `(task_type, seed)` pair always produces the same task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub task_id: String,
    pub task_type: String,
    pub description: String,
    pub seed: u64,
    /// Opaque tag naming the success predicate the environment evaluates.
    pub success_condition: String,
}

impl Task {
    /// Splits a task id into `(type_index, instance_index)`.
    pub fn parse_id(task_id: &str) -> EnvResult<(u32, u32)> {
        let mut parts = task_id.splitn(2, '-');
        let type_part = parts.next().unwrap_or("");
        let inst_part = parts.next().unwrap_or("");
        let type_index = type_part
            .parse::<u32>()
            .map_err(|_| EnvError::MalformedTaskId(task_id.to_string()))?;
        let instance_index = inst_part
            .parse::<u32>()
            .map_err(|_| EnvError::MalformedTaskId(task_id.to_string()))?;
        Ok((type_index, instance_index))
    }
}

/// Result of one environment step: the raw observation plus episode flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStepResult {
    pub observation: String,
    pub done: bool,
    pub success: bool,
    /// Normalized to [0,1]; equals 1.0 iff success for the builtin worlds.
    pub score: f64,
}

impl RawStepResult {
    pub fn ongoing(observation: impl Into<String>) -> Self {
        RawStepResult {
            observation: observation.into(),
            done: false,
            success: false,
            score: 0.0,
        }
    }

    pub fn succeeded(observation: impl Into<String>) -> Self {
        RawStepResult {
            observation: observation.into(),
            done: true,
            success: true,
            score: 1.0,
        }
    }
}

/// One agent turn inside a trajectory.
///
/// `raw_observation` is what the unwrapped environment produced for the agent
/// action (or the fallback step); `final_observation` is what the interface
/// returned to the agent. The two are byte-identical under the identity
/// interface. `valid` comes from [`Environment::classify_action`] at the
/// pre-state of the agent action and is never affected by interface probes.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub agent_action: String,
    pub raw_observation: String,
    pub final_observation: String,
    pub valid: bool,
    pub probe_step_count: u32,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryOutcome {
    Success,
    Failure,
    StepBudgetExhausted,
}

impl fmt::Display for TrajectoryOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrajectoryOutcome::Success => "success",
            TrajectoryOutcome::Failure => "failure",
            TrajectoryOutcome::StepBudgetExhausted => "step_budget_exhausted",
        };
        f.write_str(s)
    }
}

/// A full episode: the task, per-step records, and how it ended.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub task: Task,
    pub steps: Vec<StepRecord>,
    pub outcome: TrajectoryOutcome,
    pub step_budget: usize,
}

impl Trajectory {
    pub fn succeeded(&self) -> bool {
        self.outcome == TrajectoryOutcome::Success
    }

    /// Validity flags of the agent actions, in order.
    pub fn validity_flags(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.valid).collect()
    }

    /// Human-readable interaction log, as embedded in analysis prompts.
    pub fn render_log(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Task {}: {}\n",
            self.task.task_id, self.task.description
        ));
        for step in &self.steps {
            out.push_str(&format!("Step {}:\n", step.index));
            out.push_str(&format!("Action: {}\n", step.agent_action));
            out.push_str(&format!("Observation: {}\n", step.final_observation));
        }
        out.push_str(&format!("Outcome: {}\n", self.outcome));
        out
    }
}

/// Contract implemented by every concrete environment.
///
/// Instances are single-owner: one live episode at a time, no hidden resets.
/// Determinism: for a fixed task and action sequence, two fresh instances
/// produce byte-identical observation sequences and identical flags.
pub trait Environment {
    fn descriptor(&self) -> &EnvDescriptor;

    /// Starts an episode for `task` and returns the initial observation o0.
    fn reset(&mut self, task: &Task) -> EnvResult<String>;

    /// Advances the state by one action. Irreversible.
    fn step(&mut self, action_text: &str) -> EnvResult<RawStepResult>;

    /// Digest of the current state; stable across instances and runs.
    fn state_digest(&self) -> EnvResult<String>;

    /// True iff `action_text`, applied at the state identified by
    /// `pre_state_digest`, changes state or yields an informative (non-error)
    /// observation per this environment's rule table. Pure: never mutates
    /// the live episode.
    fn classify_action(&self, pre_state_digest: &str, action_text: &str) -> EnvResult<bool>;

    /// Total number of step invocations since reset (agent actions plus
    /// interface probes); supports irreversibility accounting.
    fn steps_taken(&self) -> u64;

    fn is_done(&self) -> bool;

    /// A deterministic action sequence that solves the active task.
    fn oracle_script(&self) -> EnvResult<Vec<String>>;
}

/// Short stable digest of a canonical state serialization.
pub fn digest_of(canonical: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let out = hasher.finalize();
    // 16 hex chars is plenty for desk-scale state spaces.
    out.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            _ => out.push(ch),
        }
    }
    out
}

fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// Serializes a trajectory to the v1 log format: a header line
/// `#traj v1 <task_id>` followed by one tab-separated record per step
/// `(index, agent_action, valid, final_observation, done)`.
pub fn render_trajectory_file(traj: &Trajectory) -> String {
    let mut out = format!("#traj v1 {}\n", traj.task.task_id);
    for step in &traj.steps {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            step.index,
            escape_field(&step.agent_action),
            step.valid,
            escape_field(&step.final_observation),
            step.done,
        ));
    }
    out
}

/// Error raised when a trajectory log file cannot be parsed.
#[derive(Debug, Error)]
#[error("malformed trajectory file: {0}")]
pub struct TrajParseError(pub String);

/// Parsed view of a v1 trajectory log: the task id plus per-step fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajFileStep {
    pub index: usize,
    pub agent_action: String,
    pub valid: bool,
    pub final_observation: String,
    pub done: bool,
}

pub fn parse_trajectory_file(text: &str) -> Result<(String, Vec<TrajFileStep>), TrajParseError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| TrajParseError("empty file".into()))?;
    let task_id = header
        .strip_prefix("#traj v1 ")
        .ok_or_else(|| TrajParseError(format!("bad header: {header}")))?
        .to_string();
    let mut steps = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(TrajParseError(format!(
                "line {}: expected 5 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let index = fields[0]
            .parse::<usize>()
            .map_err(|e| TrajParseError(format!("line {}: bad index: {e}", lineno + 2)))?;
        let valid = fields[2]
            .parse::<bool>()
            .map_err(|e| TrajParseError(format!("line {}: bad valid flag: {e}", lineno + 2)))?;
        let done = fields[4]
            .parse::<bool>()
            .map_err(|e| TrajParseError(format!("line {}: bad done flag: {e}", lineno + 2)))?;
        steps.push(TrajFileStep {
            index,
            agent_action: unescape_field(fields[1]),
            valid,
            final_observation: unescape_field(fields[3]),
            done,
        });
    }
    Ok((task_id, steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_task() -> Task {
        Task {
            task_id: "0-0".into(),
            task_type: "pick_and_place".into(),
            description: "put mug 1 in drawer 1".into(),
            seed: 0,
            success_condition: "object_at:mug 1:drawer 1".into(),
        }
    }

    #[test]
    fn task_id_parses_two_nonnegative_ints() {
        assert_eq!(Task::parse_id("0-0").unwrap(), (0, 0));
        assert_eq!(Task::parse_id("2-17").unwrap(), (2, 17));
        assert!(Task::parse_id("x-1").is_err());
        assert!(Task::parse_id("3").is_err());
        assert!(Task::parse_id("1-2-3").is_err());
        assert!(Task::parse_id("-1-2").is_err());
    }

    #[test]
    fn digest_is_stable_and_short() {
        let a = digest_of("state-a");
        let b = digest_of("state-a");
        let c = digest_of("state-b");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn trajectory_file_round_trips_awkward_fields() {
        let traj = Trajectory {
            task: sample_task(),
            steps: vec![
                StepRecord {
                    index: 0,
                    agent_action: "go to\tshelf 1".into(),
                    raw_observation: "raw".into(),
                    final_observation: "line one\nline two\\with backslash".into(),
                    valid: true,
                    probe_step_count: 0,
                    done: false,
                },
                StepRecord {
                    index: 1,
                    agent_action: "look".into(),
                    raw_observation: "raw".into(),
                    final_observation: "plain".into(),
                    valid: false,
                    probe_step_count: 2,
                    done: true,
                },
            ],
            outcome: TrajectoryOutcome::Success,
            step_budget: 40,
        };
        let text = render_trajectory_file(&traj);
        assert!(text.starts_with("#traj v1 0-0\n"));
        let (task_id, steps) = parse_trajectory_file(&text).unwrap();
        assert_eq!(task_id, "0-0");
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].agent_action, "go to\tshelf 1");
        assert_eq!(steps[0].final_observation, "line one\nline two\\with backslash");
        assert!(steps[0].valid);
        assert!(!steps[0].done);
        assert_eq!(steps[1].index, 1);
        assert!(steps[1].done);
    }

    #[test]
    fn render_log_lists_every_step_and_outcome() {
        let traj = Trajectory {
            task: sample_task(),
            steps: vec![StepRecord {
                index: 0,
                agent_action: "examine shelf 1".into(),
                raw_observation: "Nothing happens.".into(),
                final_observation: "Nothing happens.".into(),
                valid: false,
                probe_step_count: 0,
                done: false,
            }],
            outcome: TrajectoryOutcome::StepBudgetExhausted,
            step_budget: 40,
        };
        let log = traj.render_log();
        assert!(log.contains("Task 0-0: put mug 1 in drawer 1"));
        assert!(log.contains("Action: examine shelf 1"));
        assert!(log.contains("Observation: Nothing happens."));
        assert!(log.contains("Outcome: step_budget_exhausted"));
    }
}
