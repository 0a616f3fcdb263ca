//! Miniature tool-invocation world with an implicit call format.
//!
//! Tools are advertised with `name(a, b)` signatures, but the environment
//! only accepts `Action: name, arg1, arg2 End Action`. Parenthesized calls
//! and every other malformation observe the opaque sentinel
//! `"Error: invalid action"`.

use std::collections::{BTreeMap, HashMap};

use crate::env_core::{
    digest_of, EnvDescriptor, EnvError, EnvResult, Environment, RawStepResult, Task,
};

/// Byte-exact error sentinel for every invalid tool-world action.
pub const INVALID_ACTION: &str = "Error: invalid action";

pub const TASK_TYPES: [&str; 1] = ["compute"];

const TOOL_LISTING: &str = "You have access to the following tools:
- add(a, b): add two integers
- sub(a, b): subtract the second integer from the first
- mul(a, b): multiply two integers
- concat(a, b): join two text fragments
- store(key, value): remember a value under a key
- recall(key): retrieve a remembered value
Use a tool, observe its result, and submit your final answer when ready.";

/// Tool table: name -> arity.
fn available_tools() -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("add", 2),
        ("sub", 2),
        ("mul", 2),
        ("concat", 2),
        ("store", 2),
        ("recall", 1),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolWorldState {
    pub bindings: BTreeMap<String, String>,
    pub answered: bool,
}

impl ToolWorldState {
    fn initial() -> Self {
        ToolWorldState {
            bindings: BTreeMap::new(),
            answered: false,
        }
    }

    pub fn canonical(&self) -> String {
        let mut out = String::from("toolworld|answered=");
        out.push_str(if self.answered { "1" } else { "0" });
        out.push_str("|bind=");
        for (k, v) in &self.bindings {
            out.push_str(&format!("{k}={v};"));
        }
        out
    }
}

/// Operands a seed determines for a compute task: ((a + b) * c) - d.
#[derive(Debug, Clone, Copy)]
pub struct ComputeSpec {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl ComputeSpec {
    pub fn from_seed(seed: u64) -> Self {
        ComputeSpec {
            a: 2 + (seed % 7) as i64,
            b: 3 + (seed % 11) as i64,
            c: 2 + (seed % 5) as i64,
            d: 1 + (seed % 13) as i64,
        }
    }

    pub fn answer(&self) -> i64 {
        (self.a + self.b) * self.c - self.d
    }
}

pub fn toolworld_task(task_type: &str, seed: u64) -> EnvResult<Task> {
    if task_type != TASK_TYPES[0] {
        return Err(EnvError::UnknownTaskType(task_type.to_string()));
    }
    let spec = ComputeSpec::from_seed(seed);
    Ok(Task {
        task_id: format!("0-{seed}"),
        task_type: task_type.to_string(),
        description: format!(
            "compute (({} + {}) * {}) - {} with the available tools and submit the result",
            spec.a, spec.b, spec.c, spec.d
        ),
        seed,
        success_condition: format!("answer:{}", spec.answer()),
    })
}

fn target_answer(task: &Task) -> String {
    task.success_condition
        .strip_prefix("answer:")
        .unwrap_or("")
        .to_string()
}

/// Applies one action string. Returns the successor state, the observation,
/// and whether the final answer was just submitted correctly.
pub fn toolworld_transition(
    state: &ToolWorldState,
    action_text: &str,
    target: &str,
) -> (ToolWorldState, String, Option<bool>) {
    let trimmed = action_text.trim();
    let mut next = state.clone();
    if let Some(answer) = trimmed.strip_prefix("Answer:") {
        let answer = answer.trim();
        next.answered = true;
        let correct = answer == target;
        let obs = if correct {
            "Your answer is correct. Task completed.".to_string()
        } else {
            "Your answer is incorrect. Task failed.".to_string()
        };
        return (next, obs, Some(correct));
    }
    let invalid = |state: &ToolWorldState| (state.clone(), INVALID_ACTION.to_string(), None);
    let Some(body) = trimmed
        .strip_prefix("Action:")
        .and_then(|rest| rest.strip_suffix("End Action"))
    else {
        return invalid(state);
    };
    let body = body.trim();
    // The accepted grammar is comma-separated; any parenthesized call form
    // is a malformation.
    if body.contains('(') || body.contains(')') || body.is_empty() {
        return invalid(state);
    }
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    let name = parts[0];
    let args = &parts[1..];
    let tools = available_tools();
    let Some(&arity) = tools.get(name) else {
        return invalid(state);
    };
    if args.len() != arity || args.iter().any(|a| a.is_empty()) {
        return invalid(state);
    }
    let int = |s: &str| s.parse::<i64>().ok();
    let obs = match name {
        "add" | "sub" | "mul" => {
            let (Some(x), Some(y)) = (int(args[0]), int(args[1])) else {
                return invalid(state);
            };
            match name {
                "add" => (x + y).to_string(),
                "sub" => (x - y).to_string(),
                _ => (x * y).to_string(),
            }
        }
        "concat" => format!("{}{}", args[0], args[1]),
        "store" => {
            next.bindings.insert(args[0].to_string(), args[1].to_string());
            format!("Stored '{}' under '{}'.", args[1], args[0])
        }
        "recall" => match state.bindings.get(args[0]) {
            Some(v) => v.clone(),
            None => format!("Nothing is stored under '{}'.", args[0]),
        },
        _ => return invalid(state),
    };
    (next, obs, None)
}

fn descriptor() -> EnvDescriptor {
    EnvDescriptor {
        env_id: "mini-toolworld".to_string(),
        static_info: TOOL_LISTING.to_string(),
        action_space_doc: format!(
            "{TOOL_LISTING}\nProvide exactly one tool invocation or your final answer per turn."
        ),
        task_types: TASK_TYPES.iter().map(|t| t.to_string()).collect(),
        closable_note: "no receptacles; tools are always available".to_string(),
    }
}

/// Live tool-world environment instance.
pub struct ToolWorldEnv {
    descriptor: EnvDescriptor,
    task: Option<Task>,
    state: ToolWorldState,
    done: bool,
    steps_taken: u64,
    seen_states: HashMap<String, ToolWorldState>,
}

impl ToolWorldEnv {
    pub fn new() -> Self {
        ToolWorldEnv {
            descriptor: descriptor(),
            task: None,
            state: ToolWorldState::initial(),
            done: true,
            steps_taken: 0,
            seen_states: HashMap::new(),
        }
    }

    fn remember(&mut self, state: &ToolWorldState) {
        let digest = digest_of(&state.canonical());
        self.seen_states.entry(digest).or_insert_with(|| state.clone());
    }
}

impl Default for ToolWorldEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for ToolWorldEnv {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn reset(&mut self, task: &Task) -> EnvResult<String> {
        let (type_index, _) = Task::parse_id(&task.task_id)
            .map_err(|_| EnvError::UnknownTask(task.task_id.clone()))?;
        if type_index as usize >= TASK_TYPES.len() {
            return Err(EnvError::UnknownTask(task.task_id.clone()));
        }
        self.state = ToolWorldState::initial();
        self.task = Some(task.clone());
        self.done = false;
        self.steps_taken = 0;
        self.seen_states.clear();
        let state = self.state.clone();
        self.remember(&state);
        Ok(format!(
            "{TOOL_LISTING}\n\nYour task is to: {}.",
            task.description
        ))
    }

    fn step(&mut self, action_text: &str) -> EnvResult<RawStepResult> {
        let task = self.task.clone().ok_or(EnvError::NoEpisode)?;
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        self.steps_taken += 1;
        let target = target_answer(&task);
        let (next, observation, answered) =
            toolworld_transition(&self.state, action_text, &target);
        self.state = next;
        let state = self.state.clone();
        self.remember(&state);
        match answered {
            Some(correct) => {
                self.done = true;
                Ok(RawStepResult {
                    observation,
                    done: true,
                    success: correct,
                    score: if correct { 1.0 } else { 0.0 },
                })
            }
            None => Ok(RawStepResult::ongoing(observation)),
        }
    }

    fn state_digest(&self) -> EnvResult<String> {
        if self.task.is_none() {
            return Err(EnvError::NoEpisode);
        }
        Ok(digest_of(&self.state.canonical()))
    }

    fn classify_action(&self, pre_state_digest: &str, action_text: &str) -> EnvResult<bool> {
        let state = self
            .seen_states
            .get(pre_state_digest)
            .ok_or_else(|| EnvError::DigestMismatch(pre_state_digest.to_string()))?;
        let target = self
            .task
            .as_ref()
            .map(target_answer)
            .unwrap_or_default();
        let (next, obs, _) = toolworld_transition(state, action_text, &target);
        Ok(next != *state || obs != INVALID_ACTION)
    }

    fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn oracle_script(&self) -> EnvResult<Vec<String>> {
        let task = self.task.as_ref().ok_or(EnvError::NoEpisode)?;
        let spec = ComputeSpec::from_seed(task.seed);
        let s1 = spec.a + spec.b;
        let s2 = s1 * spec.c;
        Ok(vec![
            format!("Action: add, {}, {} End Action", spec.a, spec.b),
            format!("Action: mul, {s1}, {} End Action", spec.c),
            format!("Action: sub, {s2}, {} End Action", spec.d),
            format!("Answer: {}", spec.answer()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh(seed: u64) -> (ToolWorldEnv, Task) {
        let task = toolworld_task("compute", seed).unwrap();
        let mut env = ToolWorldEnv::new();
        env.reset(&task).unwrap();
        (env, task)
    }

    #[test]
    fn parenthesized_call_is_the_invalid_sentinel() {
        let (mut env, _task) = fresh(0);
        let r = env.step("Action: add(3, 4) End Action").unwrap();
        assert_eq!(r.observation, INVALID_ACTION);
        assert!(!r.done);
    }

    #[test]
    fn comma_form_call_returns_tool_result() {
        let (mut env, _task) = fresh(0);
        let r = env.step("Action: add, 3, 4 End Action").unwrap();
        assert_eq!(r.observation, "7");
        let r = env.step("Action: concat, foo, bar End Action").unwrap();
        assert_eq!(r.observation, "foobar");
        let r = env.step("Action: store, k, 42 End Action").unwrap();
        assert_eq!(r.observation, "Stored '42' under 'k'.");
        let r = env.step("Action: recall, k End Action").unwrap();
        assert_eq!(r.observation, "42");
        let r = env.step("Action: recall, missing End Action").unwrap();
        assert_eq!(r.observation, "Nothing is stored under 'missing'.");
    }

    #[test]
    fn malformations_share_one_sentinel() {
        let (mut env, _task) = fresh(0);
        for bad in [
            "Action: add, 3 End Action",
            "Action: launch, 1, 2 End Action",
            "Action: add, x, y End Action",
            "Action: add, 3, 4",
            "add, 3, 4",
            "Action:  End Action",
        ] {
            let r = env.step(bad).unwrap();
            assert_eq!(r.observation, INVALID_ACTION, "for {bad:?}");
        }
    }

    #[test]
    fn correct_answer_finishes_with_success() {
        let (mut env, task) = fresh(0);
        // Seed 0: ((2 + 3) * 2) - 1 = 9.
        assert_eq!(task.success_condition, "answer:9");
        let r = env.step("Answer: 9").unwrap();
        assert!(r.done);
        assert!(r.success);
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn wrong_answer_finishes_without_success() {
        let (mut env, _task) = fresh(0);
        let r = env.step("Answer: 10").unwrap();
        assert!(r.done);
        assert!(!r.success);
        assert_eq!(r.score, 0.0);
        assert!(matches!(
            env.step("Answer: 9"),
            Err(EnvError::EpisodeFinished)
        ));
    }

    #[test]
    fn oracle_script_solves_every_seed() {
        for seed in 0..20 {
            let (mut env, task) = fresh(seed);
            let script = env.oracle_script().unwrap();
            assert!(script.len() <= 12);
            let mut succeeded = false;
            for action in &script {
                let r = env.step(action).unwrap();
                assert_ne!(r.observation, INVALID_ACTION, "{action} in {}", task.task_id);
                if r.done {
                    succeeded = r.success;
                }
            }
            assert!(succeeded, "oracle failed for seed {seed}");
        }
    }

    #[test]
    fn classify_action_flags_format_errors() {
        let (env, _task) = fresh(0);
        let digest = env.state_digest().unwrap();
        assert!(!env.classify_action(&digest, "Action: add(3, 4) End Action").unwrap());
        assert!(env.classify_action(&digest, "Action: add, 3, 4 End Action").unwrap());
        assert!(env.classify_action(&digest, "Answer: 9").unwrap());
    }
}
