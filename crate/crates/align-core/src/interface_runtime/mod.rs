//! Loading, validation, and sandboxed execution of interface programs.
//!
//! An interface is a script exposing exactly two entry points:
//!
//! ```text
//! fn InferRules(init_obs, task)                          -> rule text
//! fn WrapStep(env, init_obs, task, agent_action, logger) -> [obs, success, done]
//! ```
//!
//! Scripts run inside a restricted engine: the only capability handed in is
//! an environment proxy whose single method issues steps, every call has a
//! wall-clock deadline and a probe-step budget, and a static denylist refuses
//! sources that mention file, network, process, or environment-variable
//! machinery. Any fault degrades to one raw step of the agent action.

pub mod fixtures;
mod wrap;

pub use wrap::{wrap_environment, EnvCell, SharedEnv, WrapError, WrappedEnv};

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use regex::Regex;
use rhai::{Dynamic, Engine, Map, Scope, AST};
use thiserror::Error;

use crate::env_core::{EnvError, RawStepResult, Task};

/// Fallback rule text used whenever `InferRules` faults.
pub const NO_RULE_FALLBACK: &str = "There is no rule for this environment.";

/// Separator between the environment's own static info and the inferred
/// rule text in the composed agent-facing description.
pub const STATIC_INFO_SEPARATOR: &str = "\n\n---\n\n";

pub const MAX_SOURCE_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Identity,
    GoldFixture,
    Generated,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Identity => "identity",
            Provenance::GoldFixture => "gold_fixture",
            Provenance::Generated => "generated",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "identity" => Some(Provenance::Identity),
            "gold_fixture" => Some(Provenance::GoldFixture),
            "generated" => Some(Provenance::Generated),
            _ => None,
        }
    }
}

/// A versioned interface program. Version 0 is always the identity.
#[derive(Debug, Clone)]
pub struct InterfaceSource {
    pub source_text: String,
    pub version: u32,
    pub provenance: Provenance,
    pub parent_version: Option<u32>,
}

impl InterfaceSource {
    /// The version-0 identity interface.
    pub fn identity() -> Self {
        InterfaceSource {
            source_text: fixtures::IDENTITY_SOURCE.to_string(),
            version: 0,
            provenance: Provenance::Identity,
            parent_version: None,
        }
    }

    pub fn gold_fixture(source_text: impl Into<String>) -> Self {
        InterfaceSource {
            source_text: source_text.into(),
            version: 1,
            provenance: Provenance::GoldFixture,
            parent_version: Some(0),
        }
    }

    pub fn generated(source_text: impl Into<String>, version: u32, parent_version: u32) -> Self {
        InterfaceSource {
            source_text: source_text.into(),
            version,
            provenance: Provenance::Generated,
            parent_version: Some(parent_version),
        }
    }

    /// Serializes to the on-disk interface file format: a header comment
    /// line followed by the raw source text.
    pub fn render_file(&self) -> String {
        let parent = match self.parent_version {
            Some(p) => p.to_string(),
            None => "none".to_string(),
        };
        format!(
            "#align-interface v1 version={} parent={} provenance={}\n{}",
            self.version,
            parent,
            self.provenance.tag(),
            self.source_text
        )
    }

    pub fn parse_file(text: &str) -> Result<Self, InterfaceFileError> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| InterfaceFileError("missing header line".into()))?;
        let rest = header
            .strip_prefix("#align-interface v1 ")
            .ok_or_else(|| InterfaceFileError(format!("bad header: {header}")))?;
        let mut version = None;
        let mut parent = None;
        let mut provenance = None;
        for field in rest.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| InterfaceFileError(format!("bad header field: {field}")))?;
            match key {
                "version" => {
                    version = Some(value.parse::<u32>().map_err(|e| {
                        InterfaceFileError(format!("bad version: {e}"))
                    })?)
                }
                "parent" => {
                    parent = Some(if value == "none" {
                        None
                    } else {
                        Some(value.parse::<u32>().map_err(|e| {
                            InterfaceFileError(format!("bad parent: {e}"))
                        })?)
                    })
                }
                "provenance" => {
                    provenance = Some(Provenance::from_tag(value).ok_or_else(|| {
                        InterfaceFileError(format!("bad provenance tag: {value}"))
                    })?)
                }
                other => return Err(InterfaceFileError(format!("unknown header key: {other}"))),
            }
        }
        Ok(InterfaceSource {
            source_text: body.to_string(),
            version: version.ok_or_else(|| InterfaceFileError("missing version".into()))?,
            provenance: provenance
                .ok_or_else(|| InterfaceFileError("missing provenance".into()))?,
            parent_version: parent
                .ok_or_else(|| InterfaceFileError("missing parent".into()))?,
        })
    }
}

#[derive(Debug, Error)]
#[error("malformed interface file: {0}")]
pub struct InterfaceFileError(pub String);

/// One reason a source failed static validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationReason {
    MissingEntryPoint(String),
    ForbiddenCapability(String),
    Oversize(usize),
    Syntax(String),
}

impl ValidationReason {
    /// Machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            ValidationReason::MissingEntryPoint(_) => "missing_entry_point",
            ValidationReason::ForbiddenCapability(_) => "forbidden_capability",
            ValidationReason::Oversize(_) => "oversize",
            ValidationReason::Syntax(_) => "syntax",
        }
    }
}

impl std::fmt::Display for ValidationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationReason::MissingEntryPoint(name) => {
                write!(f, "missing_entry_point: {name}")
            }
            ValidationReason::ForbiddenCapability(token) => {
                write!(f, "forbidden_capability: {token}")
            }
            ValidationReason::Oversize(len) => {
                write!(f, "oversize: {len} bytes (limit {MAX_SOURCE_BYTES})")
            }
            ValidationReason::Syntax(msg) => write!(f, "syntax: {msg}"),
        }
    }
}

#[derive(Debug, Error)]
pub struct ValidationError {
    pub reasons: Vec<ValidationReason>,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let joined: Vec<String> = self.reasons.iter().map(|r| r.to_string()).collect();
        write!(f, "interface validation failed: {}", joined.join("; "))
    }
}

/// Per-call sandbox budgets.
#[derive(Debug, Clone, Copy)]
pub struct SandboxLimits {
    pub time_per_call: Duration,
    pub probe_steps_per_call: u32,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        SandboxLimits {
            time_per_call: Duration::from_secs(2),
            probe_steps_per_call: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    Error,
    Timeout,
    ProbeBudget,
    BadReturnShape,
}

impl FaultKind {
    pub fn label(self) -> &'static str {
        match self {
            FaultKind::Error => "error",
            FaultKind::Timeout => "timeout",
            FaultKind::ProbeBudget => "probe_budget",
            FaultKind::BadReturnShape => "bad_return_shape",
        }
    }
}

/// A contained interface failure; the step it occurred in fell back to the
/// raw environment behavior.
#[derive(Debug, Clone)]
pub struct InterfaceFault {
    pub kind: FaultKind,
    pub entry_point: &'static str,
    pub detail: String,
}

/// Result of invoking `InferRules`.
#[derive(Debug, Clone)]
pub struct InferredRules {
    pub text: String,
    pub fault: Option<InterfaceFault>,
}

/// Result of routing one agent action through `WrapStep`.
#[derive(Debug, Clone)]
pub struct WrappedStepOutcome {
    /// Step result whose observation is the (possibly enriched) text shown
    /// to the agent. On fault this is exactly the raw fallback step result.
    pub result: RawStepResult,
    /// Environment steps the interface issued beyond the agent action.
    pub probe_step_count: u32,
    pub fault: Option<InterfaceFault>,
    /// Whether the agent action itself was executed against the environment.
    pub agent_action_stepped: bool,
    /// State digest captured before the interface ran; classify against this.
    pub pre_state_digest: String,
    /// Lines the script wrote through its logger.
    pub log_lines: Vec<String>,
}

static DENYLIST: LazyLock<Vec<(Regex, &'static str)>> = LazyLock::new(|| {
    let patterns: [(&str, &str); 14] = [
        (r"\bimport\b", "import"),
        (r"\beval\s*\(", "eval("),
        (r"\bopen\s*\(", "open("),
        (r"\b(?:fopen|popen)\b", "fopen/popen"),
        (
            r"\b(?:read_file|write_file|open_file|remove_file|create_file|append_file)\b",
            "file access",
        ),
        (r"std::(?:fs|net|process|env)", "std capability"),
        (r"\bsystem\s*\(", "system("),
        (r"\bexec\s*\(", "exec("),
        (r"\bspawn\s*\(", "spawn("),
        (r"\b(?:socket|connect|bind|listen)\s*\(", "socket"),
        (r"\b(?:getenv|setenv|env_var|environ)\b", "environment variables"),
        (r"https?://", "url"),
        (r"\b(?:curl|wget)\b", "network tool"),
        (r"\bsubprocess\b", "subprocess"),
    ];
    patterns
        .into_iter()
        .map(|(pat, label)| (Regex::new(pat).expect("valid denylist regex"), label))
        .collect()
});

fn bare_engine() -> Engine {
    let mut engine = Engine::new();
    engine.set_max_expr_depths(64, 64);
    engine
}

/// A validated, loaded interface. Immutable after load; cheap to share.
#[derive(Debug)]
pub struct InterfaceHandle {
    source: InterfaceSource,
    ast: AST,
    limits: SandboxLimits,
}

/// Statically validates and compiles an interface source with default
/// sandbox limits.
pub fn load_interface(source: &InterfaceSource) -> Result<InterfaceHandle, ValidationError> {
    load_interface_with_limits(source, SandboxLimits::default())
}

pub fn load_interface_with_limits(
    source: &InterfaceSource,
    limits: SandboxLimits,
) -> Result<InterfaceHandle, ValidationError> {
    let text = &source.source_text;
    let mut reasons = Vec::new();
    if text.len() > MAX_SOURCE_BYTES {
        reasons.push(ValidationReason::Oversize(text.len()));
    }
    for (regex, label) in DENYLIST.iter() {
        if regex.is_match(text) {
            reasons.push(ValidationReason::ForbiddenCapability((*label).to_string()));
        }
    }
    let engine = bare_engine();
    let ast = match engine.compile(text) {
        Ok(ast) => Some(ast),
        Err(err) => {
            reasons.push(ValidationReason::Syntax(err.to_string()));
            None
        }
    };
    if let Some(ast) = &ast {
        let mut has_infer = false;
        let mut has_wrap = false;
        for f in ast.iter_functions() {
            match (f.name, f.params.len()) {
                ("InferRules", 2) => has_infer = true,
                ("WrapStep", 5) => has_wrap = true,
                _ => {}
            }
        }
        if !has_infer {
            reasons.push(ValidationReason::MissingEntryPoint("InferRules".into()));
        }
        if !has_wrap {
            reasons.push(ValidationReason::MissingEntryPoint("WrapStep".into()));
        }
    }
    if !reasons.is_empty() {
        return Err(ValidationError { reasons });
    }
    Ok(InterfaceHandle {
        source: source.clone(),
        ast: ast.expect("ast present when no reasons"),
        limits,
    })
}

/// Environment access handed to scripts: `step` is the only capability.
#[derive(Clone)]
struct EnvProxy {
    env: SharedEnv,
    state: Rc<RefCell<ProxyCallState>>,
}

struct ProxyCallState {
    agent_action: String,
    agent_action_stepped: bool,
    probe_count: u32,
    probe_budget: u32,
    budget_blown: bool,
    env_error: Option<EnvError>,
    last_step: Option<RawStepResult>,
}

fn step_result_to_map(result: &RawStepResult) -> Map {
    let mut map = Map::new();
    map.insert("observation".into(), result.observation.clone().into());
    map.insert("done".into(), result.done.into());
    map.insert("success".into(), result.success.into());
    map.insert("score".into(), result.score.into());
    map
}

fn proxy_step(proxy: &mut EnvProxy, action: &str) -> Result<Map, Box<rhai::EvalAltResult>> {
    let mut state = proxy.state.borrow_mut();
    if state.budget_blown {
        return Err("probe step budget exhausted".into());
    }
    let is_agent_action = !state.agent_action_stepped && action == state.agent_action;
    if !is_agent_action {
        if state.probe_count >= state.probe_budget {
            state.budget_blown = true;
            return Err("probe step budget exhausted".into());
        }
        state.probe_count += 1;
    }
    let step = proxy.env.borrow_mut().env.step(action);
    match step {
        Ok(result) => {
            if is_agent_action {
                state.agent_action_stepped = true;
            }
            state.last_step = Some(result.clone());
            Ok(step_result_to_map(&result))
        }
        Err(err) => {
            let msg = err.to_string();
            state.env_error = Some(err);
            Err(msg.into())
        }
    }
}

/// Logger handed to scripts; lines surface in transcripts.
#[derive(Clone, Default)]
struct ScriptLogger {
    lines: Rc<RefCell<Vec<String>>>,
}

const TIME_LIMIT_TOKEN: &str = "interface time limit exceeded";

fn sandbox_engine(deadline: Instant) -> Engine {
    let mut engine = bare_engine();
    engine.set_max_operations(50_000_000);
    engine.on_progress(move |_| {
        if Instant::now() > deadline {
            Some(TIME_LIMIT_TOKEN.into())
        } else {
            None
        }
    });
    engine
        .register_type_with_name::<EnvProxy>("Env")
        .register_fn("step", proxy_step);
    engine
        .register_type_with_name::<ScriptLogger>("Logger")
        .register_fn("log", |logger: &mut ScriptLogger, msg: &str| {
            logger.lines.borrow_mut().push(msg.to_string());
        })
        .register_fn("info", |logger: &mut ScriptLogger, msg: &str| {
            logger.lines.borrow_mut().push(msg.to_string());
        });
    engine
}

fn classify_eval_error(err: &rhai::EvalAltResult) -> (FaultKind, String) {
    use rhai::EvalAltResult::*;
    match err {
        ErrorTerminated(token, _) => {
            let text = token.to_string();
            if text.contains("time limit") {
                (FaultKind::Timeout, text)
            } else {
                (FaultKind::Error, text)
            }
        }
        ErrorTooManyOperations(_) => (FaultKind::Timeout, "operation limit exceeded".into()),
        other => (FaultKind::Error, other.to_string()),
    }
}

impl InterfaceHandle {
    pub fn source(&self) -> &InterfaceSource {
        &self.source
    }

    pub fn limits(&self) -> SandboxLimits {
        self.limits
    }

    /// Invokes `InferRules(init_obs, task)`. Faults never escape: on any
    /// error or deadline breach the fallback rule text is returned and the
    /// fault is reported alongside.
    pub fn infer_rules(&self, init_obs: &str, task: &Task) -> InferredRules {
        let deadline = Instant::now() + self.limits.time_per_call;
        let engine = sandbox_engine(deadline);
        let mut scope = Scope::new();
        let outcome: Result<Dynamic, _> = engine.call_fn(
            &mut scope,
            &self.ast,
            "InferRules",
            (init_obs.to_string(), task.description.clone()),
        );
        match outcome {
            Ok(value) => {
                if value.is_string() {
                    InferredRules {
                        text: value.into_string().expect("checked string"),
                        fault: None,
                    }
                } else {
                    InferredRules {
                        text: NO_RULE_FALLBACK.to_string(),
                        fault: Some(InterfaceFault {
                            kind: FaultKind::BadReturnShape,
                            entry_point: "InferRules",
                            detail: format!("expected string, got {}", value.type_name()),
                        }),
                    }
                }
            }
            Err(err) => {
                let (kind, detail) = classify_eval_error(&err);
                InferredRules {
                    text: NO_RULE_FALLBACK.to_string(),
                    fault: Some(InterfaceFault {
                        kind,
                        entry_point: "InferRules",
                        detail,
                    }),
                }
            }
        }
    }

    /// Routes one agent action through `WrapStep` against `env`.
    ///
    /// On any fault the outcome carries exactly one raw step of
    /// `agent_action` as its result. If the episode finished inside the
    /// script and no fallback step is possible, the last in-script step
    /// result stands in for it.
    pub fn wrap_step(
        &self,
        env: &SharedEnv,
        init_obs: &str,
        task: &Task,
        agent_action: &str,
    ) -> Result<WrappedStepOutcome, EnvError> {
        let pre_state_digest = env.borrow().env.state_digest()?;
        let call_state = Rc::new(RefCell::new(ProxyCallState {
            agent_action: agent_action.to_string(),
            agent_action_stepped: false,
            probe_count: 0,
            probe_budget: self.limits.probe_steps_per_call,
            budget_blown: false,
            env_error: None,
            last_step: None,
        }));
        let proxy = EnvProxy {
            env: env.clone(),
            state: call_state.clone(),
        };
        let logger = ScriptLogger::default();
        let deadline = Instant::now() + self.limits.time_per_call;
        let engine = sandbox_engine(deadline);
        let mut scope = Scope::new();
        let outcome: Result<Dynamic, _> = engine.call_fn(
            &mut scope,
            &self.ast,
            "WrapStep",
            (
                proxy,
                init_obs.to_string(),
                task.description.clone(),
                agent_action.to_string(),
                logger.clone(),
            ),
        );
        let log_lines = logger.lines.borrow().clone();
        let fault = match outcome {
            Ok(value) => {
                let coerced = {
                    let state = call_state.borrow();
                    coerce_return_value(value, state.last_step.as_ref())
                };
                match coerced {
                    Ok(mut result) => {
                        let state = call_state.borrow();
                        // The environment is the authority on termination: a
                        // script cannot un-finish an episode it finished.
                        if env.borrow().env.is_done() && !result.done {
                            result.done = true;
                            if let Some(last) = &state.last_step {
                                result.success = last.success;
                                result.score = last.score;
                            }
                        }
                        return Ok(WrappedStepOutcome {
                            result,
                            probe_step_count: state.probe_count,
                            fault: None,
                            agent_action_stepped: state.agent_action_stepped,
                            pre_state_digest,
                            log_lines,
                        });
                    }
                    Err(detail) => InterfaceFault {
                        kind: FaultKind::BadReturnShape,
                        entry_point: "WrapStep",
                        detail,
                    },
                }
            }
            Err(err) => {
                let state = call_state.borrow();
                if state.budget_blown {
                    InterfaceFault {
                        kind: FaultKind::ProbeBudget,
                        entry_point: "WrapStep",
                        detail: format!(
                            "probe budget of {} exceeded",
                            self.limits.probe_steps_per_call
                        ),
                    }
                } else if let Some(env_err) = &state.env_error {
                    InterfaceFault {
                        kind: FaultKind::Error,
                        entry_point: "WrapStep",
                        detail: format!("environment error inside WrapStep: {env_err}"),
                    }
                } else {
                    let (kind, detail) = classify_eval_error(&err);
                    InterfaceFault {
                        kind,
                        entry_point: "WrapStep",
                        detail,
                    }
                }
            }
        };
        // Fault path: fall back to a single raw step of the agent action.
        let fallback = env.borrow_mut().env.step(agent_action);
        let (result, agent_action_stepped) = match fallback {
            Ok(result) => (result, true),
            Err(EnvError::EpisodeFinished) => {
                let state = call_state.borrow();
                match &state.last_step {
                    Some(last) if last.done => (last.clone(), state.agent_action_stepped),
                    _ => return Err(EnvError::EpisodeFinished),
                }
            }
            Err(other) => return Err(other),
        };
        let state = call_state.borrow();
        Ok(WrappedStepOutcome {
            result,
            probe_step_count: state.probe_count,
            fault: Some(fault),
            agent_action_stepped,
            pre_state_digest,
            log_lines,
        })
    }
}

/// Tolerant coercion of script return values into a step result.
///
/// Accepted shapes, mirroring the heterogeneous wrapper signatures in the
/// wild: `[obs, success, done]`, `[obs, done]`, a bare observation string,
/// or a map with an `observation`/`obs` key. Fields a shape omits are taken
/// from the last proxy step.
fn coerce_return_value(
    value: Dynamic,
    last_step: Option<&RawStepResult>,
) -> Result<RawStepResult, String> {
    let fallback_success = last_step.map(|s| s.success).unwrap_or(false);
    let fallback_done = last_step.map(|s| s.done).unwrap_or(false);
    let fallback_score = last_step.map(|s| s.score).unwrap_or(0.0);
    let finish = |observation: String, success: bool, done: bool, score: f64| RawStepResult {
        observation,
        done,
        success,
        score: score.clamp(0.0, 1.0),
    };
    if value.is_string() {
        let obs = value.into_string().expect("checked string");
        return Ok(finish(obs, fallback_success, fallback_done, fallback_score));
    }
    if value.is_array() {
        let array = value.into_array().expect("checked array");
        let take_string = |v: &Dynamic| -> Result<String, String> {
            v.clone()
                .into_string()
                .map_err(|t| format!("expected string observation, got {t}"))
        };
        let take_bool = |v: &Dynamic, what: &str| -> Result<bool, String> {
            v.as_bool().map_err(|t| format!("expected bool {what}, got {t}"))
        };
        return match array.len() {
            2 => {
                let obs = take_string(&array[0])?;
                let done = take_bool(&array[1], "done")?;
                Ok(finish(obs, fallback_success, done, fallback_score))
            }
            3 => {
                let obs = take_string(&array[0])?;
                let success = take_bool(&array[1], "success")?;
                let done = take_bool(&array[2], "done")?;
                let score = if success { 1.0 } else { fallback_score };
                Ok(finish(obs, success, done, score))
            }
            n => Err(format!("expected 2- or 3-element return array, got {n}")),
        };
    }
    if value.is_map() {
        let map = value.cast::<Map>();
        let obs = map
            .get("observation")
            .or_else(|| map.get("obs"))
            .and_then(|v| v.clone().into_string().ok())
            .ok_or_else(|| "map return lacks a string observation/obs field".to_string())?;
        let done = map
            .get("done")
            .and_then(|v| v.as_bool().ok())
            .unwrap_or(fallback_done);
        let success = map
            .get("success")
            .and_then(|v| v.as_bool().ok())
            .unwrap_or(fallback_success);
        let score = map
            .get("score")
            .and_then(|v| v.as_float().ok())
            .unwrap_or(if success { 1.0 } else { fallback_score });
        return Ok(finish(obs, success, done, score));
    }
    Err(format!("unsupported return type {}", value.type_name()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin_envs::{make_env, task_from_id, HOUSEHOLD_ENV_ID};
    use crate::interface_runtime::wrap::share_env;

    fn household_setup(task_id: &str) -> (SharedEnv, Task, String) {
        let task = task_from_id(HOUSEHOLD_ENV_ID, task_id).unwrap();
        let mut env = make_env(HOUSEHOLD_ENV_ID).unwrap();
        let o0 = env.reset(&task).unwrap();
        (share_env(env), task, o0)
    }

    #[test]
    fn identity_source_loads_and_passes_steps_through() {
        let source = InterfaceSource::identity();
        assert_eq!(source.version, 0);
        let handle = load_interface(&source).unwrap();
        let (env, task, o0) = household_setup("0-0");
        let rules = handle.infer_rules(&o0, &task);
        assert_eq!(rules.text, NO_RULE_FALLBACK);
        assert!(rules.fault.is_none());

        let mut raw = make_env(HOUSEHOLD_ENV_ID).unwrap();
        raw.reset(&task).unwrap();
        for action in ["examine shelf 1", "go to shelf 1", "take mug 1 from shelf 1"] {
            let expected = raw.step(action).unwrap();
            let outcome = handle.wrap_step(&env, &o0, &task, action).unwrap();
            assert_eq!(outcome.result, expected, "for {action}");
            assert_eq!(outcome.probe_step_count, 0);
            assert!(outcome.fault.is_none());
            assert!(outcome.agent_action_stepped);
        }
    }

    #[test]
    fn validation_rejects_missing_entry_point() {
        let source = InterfaceSource::gold_fixture(
            "fn InferRules(a, b) { \"rules\" }\n",
        );
        let err = load_interface(&source).unwrap_err();
        assert!(err
            .reasons
            .iter()
            .any(|r| matches!(r, ValidationReason::MissingEntryPoint(n) if n == "WrapStep")));
        assert_eq!(err.reasons[0].code(), "missing_entry_point");
    }

    #[test]
    fn validation_rejects_wrong_arity_as_missing() {
        let source = InterfaceSource::gold_fixture(
            "fn InferRules(a) { \"rules\" }\nfn WrapStep(a, b, c, d, e) { [\"\", false, false] }",
        );
        let err = load_interface(&source).unwrap_err();
        assert!(err
            .reasons
            .iter()
            .any(|r| matches!(r, ValidationReason::MissingEntryPoint(n) if n == "InferRules")));
    }

    #[test]
    fn validation_rejects_forbidden_capabilities() {
        let source = InterfaceSource::gold_fixture(fixtures::ADVERSARIAL_FILE_OPEN);
        let err = load_interface(&source).unwrap_err();
        assert!(err
            .reasons
            .iter()
            .any(|r| matches!(r, ValidationReason::ForbiddenCapability(_))));
    }

    #[test]
    fn validation_rejects_oversize_and_syntax_errors() {
        let mut big = String::from("fn InferRules(a, b) { \"x\" }\nfn WrapStep(a,b,c,d,e) { [\"\", false, false] }\n");
        big.push_str(&"// padding\n".repeat(8000));
        let err = load_interface(&InterfaceSource::gold_fixture(big)).unwrap_err();
        assert!(err.reasons.iter().any(|r| r.code() == "oversize"));

        let err = load_interface(&InterfaceSource::gold_fixture("fn WrapStep(a { }")).unwrap_err();
        assert!(err.reasons.iter().any(|r| r.code() == "syntax"));
    }

    #[test]
    fn interface_file_round_trips() {
        let source = InterfaceSource::generated("fn x() {}", 3, 2);
        let text = source.render_file();
        assert!(text.starts_with(
            "#align-interface v1 version=3 parent=2 provenance=generated\n"
        ));
        let parsed = InterfaceSource::parse_file(&text).unwrap();
        assert_eq!(parsed.version, 3);
        assert_eq!(parsed.parent_version, Some(2));
        assert_eq!(parsed.provenance, Provenance::Generated);
        assert_eq!(parsed.source_text, "fn x() {}");

        let identity = InterfaceSource::identity().render_file();
        let parsed = InterfaceSource::parse_file(&identity).unwrap();
        assert_eq!(parsed.version, 0);
        assert_eq!(parsed.parent_version, None);
    }

    #[test]
    fn raising_interface_faults_and_falls_back_to_raw() {
        let handle =
            load_interface(&InterfaceSource::gold_fixture(fixtures::ADVERSARIAL_RAISE)).unwrap();
        let (env, task, o0) = household_setup("0-0");
        let outcome = handle.wrap_step(&env, &o0, &task, "examine shelf 1").unwrap();
        let fault = outcome.fault.expect("fault recorded");
        assert_eq!(fault.kind, FaultKind::Error);
        assert_eq!(outcome.result.observation, "Nothing happens.");
        assert!(outcome.agent_action_stepped);
    }

    #[test]
    fn infinite_loop_hits_the_deadline() {
        let source = InterfaceSource::gold_fixture(fixtures::ADVERSARIAL_LOOP);
        let handle = load_interface_with_limits(
            &source,
            SandboxLimits {
                time_per_call: Duration::from_millis(60),
                probe_steps_per_call: 8,
            },
        )
        .unwrap();
        let (env, task, o0) = household_setup("0-0");
        let outcome = handle.wrap_step(&env, &o0, &task, "look").unwrap();
        assert_eq!(outcome.fault.as_ref().unwrap().kind, FaultKind::Timeout);
        assert!(outcome.result.observation.starts_with("You are in the middle of a room."));
    }

    #[test]
    fn probe_flood_exhausts_the_budget() {
        let handle = load_interface(&InterfaceSource::gold_fixture(
            fixtures::ADVERSARIAL_PROBE_FLOOD,
        ))
        .unwrap();
        let (env, task, o0) = household_setup("0-0");
        let outcome = handle.wrap_step(&env, &o0, &task, "examine shelf 1").unwrap();
        assert_eq!(outcome.fault.as_ref().unwrap().kind, FaultKind::ProbeBudget);
        assert_eq!(outcome.probe_step_count, 8);
        assert_eq!(outcome.result.observation, "Nothing happens.");
    }

    #[test]
    fn wrong_return_shape_faults() {
        let handle = load_interface(&InterfaceSource::gold_fixture(
            fixtures::ADVERSARIAL_WRONG_SHAPE,
        ))
        .unwrap();
        let (env, task, o0) = household_setup("0-0");
        let outcome = handle.wrap_step(&env, &o0, &task, "look").unwrap();
        assert_eq!(
            outcome.fault.as_ref().unwrap().kind,
            FaultKind::BadReturnShape
        );
    }

    #[test]
    fn infer_rules_timeout_returns_fallback_text() {
        let source = InterfaceSource::gold_fixture(fixtures::ADVERSARIAL_INFER_LOOP);
        let handle = load_interface_with_limits(
            &source,
            SandboxLimits {
                time_per_call: Duration::from_millis(60),
                probe_steps_per_call: 8,
            },
        )
        .unwrap();
        let (_env, task, o0) = household_setup("0-0");
        let rules = handle.infer_rules(&o0, &task);
        assert_eq!(rules.text, NO_RULE_FALLBACK);
        assert_eq!(rules.fault.unwrap().kind, FaultKind::Timeout);
    }

    #[test]
    fn two_element_return_takes_success_from_last_proxy_step() {
        let source = InterfaceSource::gold_fixture(
            r#"
fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    let r = env.step(agent_action);
    [r.observation, r.done]
}
"#,
        );
        let handle = load_interface(&source).unwrap();
        let (env, task, o0) = household_setup("0-0");
        for action in [
            "go to shelf 1",
            "take mug 1 from shelf 1",
            "go to drawer 1",
            "open drawer 1",
        ] {
            handle.wrap_step(&env, &o0, &task, action).unwrap();
        }
        let outcome = handle
            .wrap_step(&env, &o0, &task, "move mug 1 to drawer 1")
            .unwrap();
        assert!(outcome.result.done);
        assert!(outcome.result.success, "success recovered from proxy step");
        assert_eq!(outcome.result.score, 1.0);
    }

    #[test]
    fn logger_lines_surface_in_outcome() {
        let source = InterfaceSource::gold_fixture(
            r#"
fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    logger.log("handling " + agent_action);
    let r = env.step(agent_action);
    [r.observation, r.success, r.done]
}
"#,
        );
        let handle = load_interface(&source).unwrap();
        let (env, task, o0) = household_setup("0-0");
        let outcome = handle.wrap_step(&env, &o0, &task, "look").unwrap();
        assert_eq!(outcome.log_lines, vec!["handling look".to_string()]);
    }
}
