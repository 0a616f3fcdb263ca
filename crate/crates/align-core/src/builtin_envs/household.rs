//! Miniature household world with implicit co-location and container rules.
//!
//! The raw environment answers every precondition violation with the opaque
//! sentinel `"Nothing happens."` and never names the violated rule. That
//! opacity is the phenomenon the interface layer exists to repair.

use std::collections::{BTreeMap, HashMap};

use crate::env_core::{
    digest_of, EnvDescriptor, EnvError, EnvResult, Environment, RawStepResult, Task,
};

/// Byte-exact error sentinel for every invalid household action.
pub const NOTHING_HAPPENS: &str = "Nothing happens.";

/// Receptacles in placement order (seed arithmetic indexes this list).
pub const RECEPTACLES: [&str; 5] = [
    "shelf 1",
    "drawer 1",
    "fridge 1",
    "microwave 1",
    "countertop 1",
];

/// Receptacles that can be opened and closed; all start closed.
pub const CLOSABLE: [&str; 3] = ["drawer 1", "fridge 1", "microwave 1"];

/// Portable objects in placement order.
pub const OBJECTS: [&str; 3] = ["mug 1", "apple 1", "plate 1"];

/// Alphabetical receptacle listing used by `look` and the initial observation.
const ROOM_LISTING: &str =
    "a countertop 1, a drawer 1, a fridge 1, a microwave 1, and a shelf 1";

pub const TASK_TYPES: [&str; 3] = ["pick_and_place", "pick_heat_and_place", "pick_cool_and_place"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Temp {
    Ambient,
    Hot,
    Cold,
}

impl Temp {
    fn label(self) -> &'static str {
        match self {
            Temp::Ambient => "ambient",
            Temp::Hot => "hot",
            Temp::Cold => "cold",
        }
    }
}

/// Full world state; value-like and cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HouseholdState {
    /// Receptacle the agent stands at, or "start" before the first go-to.
    pub agent_location: String,
    /// At most one carried object.
    pub inventory: Option<String>,
    /// Object id -> receptacle id, for every object not in inventory.
    pub placements: BTreeMap<String, String>,
    /// Closable receptacle id -> open flag.
    pub open_state: BTreeMap<String, bool>,
    pub object_temps: BTreeMap<String, Temp>,
}

impl HouseholdState {
    /// Canonical serialization; digests are computed over this.
    pub fn canonical(&self) -> String {
        let mut out = String::from("household|loc=");
        out.push_str(&self.agent_location);
        out.push_str("|inv=");
        out.push_str(self.inventory.as_deref().unwrap_or("-"));
        out.push_str("|placed=");
        for (obj, rec) in &self.placements {
            out.push_str(&format!("{obj}@{rec};"));
        }
        out.push_str("|open=");
        for (rec, open) in &self.open_state {
            out.push_str(&format!("{rec}={open};"));
        }
        out.push_str("|temps=");
        for (obj, temp) in &self.object_temps {
            out.push_str(&format!("{obj}={};", temp.label()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HouseholdAction {
    Look,
    Inventory,
    GoTo(String),
    Open(String),
    Close(String),
    TakeFrom { object: String, receptacle: String },
    MoveTo { object: String, receptacle: String },
    Examine(String),
    Use(String),
    HeatWith { object: String, receptacle: String },
    CleanWith { object: String, receptacle: String },
    CoolWith { object: String, receptacle: String },
    SliceWith { object: String, tool: String },
}

/// Parse failure; carries the offending text. Downstream this is an invalid
/// step observed as `"Nothing happens."`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized action: {0}")]
pub struct ParseError(pub String);

/// Splits `text` on the first case-insensitive occurrence of ` <connector> `
/// and returns the exact-case halves.
fn split_connector<'a>(text: &'a str, connector: &str) -> Option<(&'a str, &'a str)> {
    let lower = text.to_lowercase();
    let needle = format!(" {connector} ");
    let pos = lower.find(&needle)?;
    Some((&text[..pos], &text[pos + needle.len()..]))
}

/// Recognizes the 13-verb household grammar. Verbs match case-insensitively;
/// object and receptacle tokens are taken verbatim.
pub fn parse_household_action(text: &str) -> Result<HouseholdAction, ParseError> {
    let trimmed = text.trim();
    let lower = trimmed.to_lowercase();
    if lower == "look" {
        return Ok(HouseholdAction::Look);
    }
    if lower == "inventory" {
        return Ok(HouseholdAction::Inventory);
    }
    let arg = |prefix: &str| -> Option<&str> {
        if lower.starts_with(prefix) {
            Some(trimmed[prefix.len()..].trim())
        } else {
            None
        }
    };
    if let Some(rest) = arg("go to ") {
        return Ok(HouseholdAction::GoTo(rest.to_string()));
    }
    if let Some(rest) = arg("open ") {
        return Ok(HouseholdAction::Open(rest.to_string()));
    }
    if let Some(rest) = arg("close ") {
        return Ok(HouseholdAction::Close(rest.to_string()));
    }
    if let Some(rest) = arg("take ") {
        if let Some((obj, rec)) = split_connector(rest, "from") {
            return Ok(HouseholdAction::TakeFrom {
                object: obj.trim().to_string(),
                receptacle: rec.trim().to_string(),
            });
        }
        return Err(ParseError(text.to_string()));
    }
    if let Some(rest) = arg("move ") {
        if let Some((obj, rec)) = split_connector(rest, "to") {
            return Ok(HouseholdAction::MoveTo {
                object: obj.trim().to_string(),
                receptacle: rec.trim().to_string(),
            });
        }
        return Err(ParseError(text.to_string()));
    }
    if let Some(rest) = arg("examine ") {
        return Ok(HouseholdAction::Examine(rest.to_string()));
    }
    if let Some(rest) = arg("use ") {
        return Ok(HouseholdAction::Use(rest.to_string()));
    }
    for (verb, kind) in [("heat ", 0u8), ("clean ", 1), ("cool ", 2), ("slice ", 3)] {
        if let Some(rest) = arg(verb) {
            if let Some((obj, rec)) = split_connector(rest, "with") {
                let object = obj.trim().to_string();
                let other = rec.trim().to_string();
                return Ok(match kind {
                    0 => HouseholdAction::HeatWith { object, receptacle: other },
                    1 => HouseholdAction::CleanWith { object, receptacle: other },
                    2 => HouseholdAction::CoolWith { object, receptacle: other },
                    _ => HouseholdAction::SliceWith { object, tool: other },
                });
            }
            return Err(ParseError(text.to_string()));
        }
    }
    Err(ParseError(text.to_string()))
}

fn is_receptacle(name: &str) -> bool {
    RECEPTACLES.contains(&name)
}

fn is_closable(name: &str) -> bool {
    CLOSABLE.contains(&name)
}

fn is_object(name: &str) -> bool {
    OBJECTS.contains(&name)
}

fn article_list(items: &[&str]) -> String {
    match items.len() {
        0 => "nothing".to_string(),
        1 => format!("a {}", items[0]),
        2 => format!("a {} and a {}", items[0], items[1]),
        _ => {
            let mut out = String::new();
            for (i, item) in items.iter().enumerate() {
                if i + 1 == items.len() {
                    out.push_str(&format!("and a {item}"));
                } else {
                    out.push_str(&format!("a {item}, "));
                }
            }
            out
        }
    }
}

/// "On" for surfaces, "In" for containers.
fn preposition(receptacle: &str) -> &'static str {
    if is_closable(receptacle) {
        "In"
    } else {
        "On"
    }
}

fn contents_view(state: &HouseholdState, receptacle: &str) -> String {
    let mut objs: Vec<&str> = state
        .placements
        .iter()
        .filter(|(_, rec)| rec.as_str() == receptacle)
        .map(|(obj, _)| obj.as_str())
        .collect();
    objs.sort_unstable();
    format!(
        "{} the {}, you see {}.",
        preposition(receptacle),
        receptacle,
        article_list(&objs)
    )
}

fn look_text(state: &HouseholdState) -> String {
    let where_clause = if state.agent_location == "start" {
        "You are in the middle of a room.".to_string()
    } else {
        format!("You are at the {}.", state.agent_location)
    };
    format!("{where_clause} Looking around you, you see {ROOM_LISTING}.")
}

fn receptacle_is_open(state: &HouseholdState, receptacle: &str) -> bool {
    !is_closable(receptacle) || state.open_state.get(receptacle).copied().unwrap_or(false)
}

/// Applies one parsed action. Returns the successor state and the raw
/// observation; any violated precondition leaves the state unchanged and
/// observes exactly [`NOTHING_HAPPENS`].
pub fn household_transition(
    state: &HouseholdState,
    action: &HouseholdAction,
) -> (HouseholdState, String) {
    let mut next = state.clone();
    let nothing = |state: &HouseholdState| (state.clone(), NOTHING_HAPPENS.to_string());
    match action {
        HouseholdAction::Look => (next, look_text(state)),
        HouseholdAction::Inventory => {
            let text = match &state.inventory {
                Some(obj) => format!("You are carrying: a {obj}."),
                None => "You are not carrying anything.".to_string(),
            };
            (next, text)
        }
        HouseholdAction::GoTo(rec) => {
            if !is_receptacle(rec) {
                return nothing(state);
            }
            if state.agent_location == *rec {
                return (next, format!("You are already at the {rec}."));
            }
            next.agent_location = rec.clone();
            let view = if is_closable(rec) && !receptacle_is_open(&next, rec) {
                format!("The {rec} is closed.")
            } else {
                contents_view(&next, rec)
            };
            (next, format!("You arrive at the {rec}. {view}"))
        }
        HouseholdAction::Open(rec) => {
            if !is_closable(rec)
                || state.agent_location != *rec
                || receptacle_is_open(state, rec)
            {
                return nothing(state);
            }
            next.open_state.insert(rec.clone(), true);
            let view = contents_view(&next, rec);
            (next, format!("You open the {rec}. {view}"))
        }
        HouseholdAction::Close(rec) => {
            if !is_closable(rec)
                || state.agent_location != *rec
                || !receptacle_is_open(state, rec)
            {
                return nothing(state);
            }
            next.open_state.insert(rec.clone(), false);
            (next, format!("You close the {rec}."))
        }
        HouseholdAction::TakeFrom { object, receptacle } => {
            let placed_here = state.placements.get(object).map(String::as_str)
                == Some(receptacle.as_str());
            if !is_receptacle(receptacle)
                || state.agent_location != *receptacle
                || !receptacle_is_open(state, receptacle)
                || !placed_here
                || state.inventory.is_some()
            {
                return nothing(state);
            }
            next.placements.remove(object);
            next.inventory = Some(object.clone());
            (next, format!("You pick up the {object} from the {receptacle}."))
        }
        HouseholdAction::MoveTo { object, receptacle } => {
            if !is_receptacle(receptacle)
                || state.agent_location != *receptacle
                || !receptacle_is_open(state, receptacle)
                || state.inventory.as_deref() != Some(object.as_str())
            {
                return nothing(state);
            }
            next.inventory = None;
            next.placements.insert(object.clone(), receptacle.clone());
            (next, format!("You move the {object} to the {receptacle}."))
        }
        HouseholdAction::Examine(target) => {
            if is_receptacle(target) {
                if state.agent_location != *target {
                    return nothing(state);
                }
                if !receptacle_is_open(state, target) {
                    return (next, format!("The {target} is closed."));
                }
                let view = contents_view(state, target);
                return (next, view);
            }
            if is_object(target) {
                let in_inventory = state.inventory.as_deref() == Some(target.as_str());
                let visible_here = state.placements.get(target).map(String::as_str)
                    == Some(state.agent_location.as_str())
                    && receptacle_is_open(state, &state.agent_location);
                if in_inventory || visible_here {
                    let temp = state
                        .object_temps
                        .get(target)
                        .copied()
                        .unwrap_or(Temp::Ambient);
                    return (next, format!("You examine the {target}. It is {}.", temp.label()));
                }
            }
            nothing(state)
        }
        HouseholdAction::HeatWith { object, receptacle } => {
            if receptacle != "microwave 1"
                || state.agent_location != *receptacle
                || state.inventory.as_deref() != Some(object.as_str())
            {
                return nothing(state);
            }
            next.object_temps.insert(object.clone(), Temp::Hot);
            (next, format!("You heat the {object} with the microwave 1."))
        }
        HouseholdAction::CoolWith { object, receptacle } => {
            if receptacle != "fridge 1"
                || state.agent_location != *receptacle
                || state.inventory.as_deref() != Some(object.as_str())
            {
                return nothing(state);
            }
            next.object_temps.insert(object.clone(), Temp::Cold);
            (next, format!("You cool the {object} with the fridge 1."))
        }
        // The miniature has no sink, knife, or usable device, so these verbs
        // parse but never apply.
        HouseholdAction::Use(_)
        | HouseholdAction::CleanWith { .. }
        | HouseholdAction::SliceWith { .. } => nothing(state),
    }
}

/// Parameters a seed determines for a household task.
#[derive(Debug, Clone)]
pub struct HouseholdTaskSpec {
    pub task_type: String,
    pub type_index: u32,
    pub seed: u64,
    pub target_object: String,
    pub source_receptacle: String,
    pub target_receptacle: String,
}

pub fn household_task_spec(task_type: &str, seed: u64) -> EnvResult<HouseholdTaskSpec> {
    let type_index = TASK_TYPES
        .iter()
        .position(|t| *t == task_type)
        .ok_or_else(|| EnvError::UnknownTaskType(task_type.to_string()))? as u32;
    let s = seed as usize;
    let target_object = OBJECTS[s % OBJECTS.len()].to_string();
    let source_receptacle = RECEPTACLES[s % RECEPTACLES.len()].to_string();
    let target_receptacle = if type_index == 0 {
        RECEPTACLES[(s + 1) % RECEPTACLES.len()].to_string()
    } else {
        // Heat/cool targets avoid the device receptacles.
        const PLAIN: [&str; 3] = ["shelf 1", "drawer 1", "countertop 1"];
        PLAIN[(s + 1) % PLAIN.len()].to_string()
    };
    Ok(HouseholdTaskSpec {
        task_type: task_type.to_string(),
        type_index,
        seed,
        target_object,
        source_receptacle,
        target_receptacle,
    })
}

pub fn household_task(task_type: &str, seed: u64) -> EnvResult<Task> {
    let spec = household_task_spec(task_type, seed)?;
    let description = match spec.type_index {
        0 => format!("put {} in {}", spec.target_object, spec.target_receptacle),
        1 => format!(
            "heat {} and put it in {}",
            spec.target_object, spec.target_receptacle
        ),
        _ => format!(
            "cool {} and put it in {}",
            spec.target_object, spec.target_receptacle
        ),
    };
    let success_condition = match spec.type_index {
        0 => format!("at:{}:{}", spec.target_object, spec.target_receptacle),
        1 => format!("hot_at:{}:{}", spec.target_object, spec.target_receptacle),
        _ => format!("cold_at:{}:{}", spec.target_object, spec.target_receptacle),
    };
    Ok(Task {
        task_id: format!("{}-{}", spec.type_index, spec.seed),
        task_type: spec.task_type.clone(),
        description,
        seed,
        success_condition,
    })
}

fn initial_state(spec: &HouseholdTaskSpec) -> HouseholdState {
    let s = spec.seed as usize;
    let mut placements = BTreeMap::new();
    placements.insert(
        spec.target_object.clone(),
        spec.source_receptacle.clone(),
    );
    let mut slot = 2usize;
    for obj in OBJECTS {
        if obj != spec.target_object {
            placements.insert(
                obj.to_string(),
                RECEPTACLES[(s + slot) % RECEPTACLES.len()].to_string(),
            );
            slot += 1;
        }
    }
    let open_state = CLOSABLE
        .iter()
        .map(|rec| (rec.to_string(), false))
        .collect();
    let object_temps = OBJECTS
        .iter()
        .map(|obj| (obj.to_string(), Temp::Ambient))
        .collect();
    HouseholdState {
        agent_location: "start".to_string(),
        inventory: None,
        placements,
        open_state,
        object_temps,
    }
}

fn success_reached(state: &HouseholdState, condition: &str) -> bool {
    let mut parts = condition.splitn(3, ':');
    let kind = parts.next().unwrap_or("");
    let object = parts.next().unwrap_or("");
    let receptacle = parts.next().unwrap_or("");
    let placed = state.placements.get(object).map(String::as_str) == Some(receptacle);
    match kind {
        "at" => placed,
        "hot_at" => placed && state.object_temps.get(object) == Some(&Temp::Hot),
        "cold_at" => placed && state.object_temps.get(object) == Some(&Temp::Cold),
        _ => false,
    }
}

fn descriptor() -> EnvDescriptor {
    EnvDescriptor {
        env_id: "mini-household".to_string(),
        static_info: format!(
            "You are in a single room with these receptacles: {ROOM_LISTING}. \
             Objects sit in or on receptacles and can be carried one at a time."
        ),
        action_space_doc: "\
- look:                             look around your current location
- inventory:                        check your current inventory
- go to (receptacle):               move to a receptacle
- open (receptacle):                open a receptacle
- close (receptacle):               close a receptacle
- take (object) from (receptacle):  take an object from a receptacle
- move (object) to (receptacle):    place an object in or on a receptacle
- examine (something):              examine a receptacle or an object
- use (object):                     use an object
- heat (object) with (receptacle):  heat an object using a receptacle
- clean (object) with (receptacle): clean an object using a receptacle
- cool (object) with (receptacle):  cool an object using a receptacle
- slice (object) with (object):     slice an object using a sharp object"
            .to_string(),
        task_types: TASK_TYPES.iter().map(|t| t.to_string()).collect(),
        closable_note: "drawer 1, fridge 1, and microwave 1 can be opened and closed".to_string(),
    }
}

/// Live household environment instance.
pub struct HouseholdEnv {
    descriptor: EnvDescriptor,
    task: Option<Task>,
    state: HouseholdState,
    done: bool,
    steps_taken: u64,
    seen_states: HashMap<String, HouseholdState>,
}

impl HouseholdEnv {
    pub fn new() -> Self {
        let spec = household_task_spec(TASK_TYPES[0], 0).expect("builtin task type");
        HouseholdEnv {
            descriptor: descriptor(),
            task: None,
            state: initial_state(&spec),
            done: true,
            steps_taken: 0,
            seen_states: HashMap::new(),
        }
    }

    fn remember(&mut self, state: &HouseholdState) -> String {
        let digest = digest_of(&state.canonical());
        self.seen_states.entry(digest.clone()).or_insert_with(|| state.clone());
        digest
    }
}

impl Default for HouseholdEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for HouseholdEnv {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn reset(&mut self, task: &Task) -> EnvResult<String> {
        let (type_index, _) = Task::parse_id(&task.task_id)
            .map_err(|_| EnvError::UnknownTask(task.task_id.clone()))?;
        if type_index as usize >= TASK_TYPES.len() {
            return Err(EnvError::UnknownTask(task.task_id.clone()));
        }
        let spec = household_task_spec(&task.task_type, task.seed)?;
        self.state = initial_state(&spec);
        self.task = Some(task.clone());
        self.done = false;
        self.steps_taken = 0;
        self.seen_states.clear();
        let state = self.state.clone();
        self.remember(&state);
        Ok(format!(
            "{}\n\nYour task is to: {}.",
            look_text(&self.state),
            task.description
        ))
    }

    fn step(&mut self, action_text: &str) -> EnvResult<RawStepResult> {
        let task = self.task.clone().ok_or(EnvError::NoEpisode)?;
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        self.steps_taken += 1;
        let observation = match parse_household_action(action_text) {
            Ok(action) => {
                let (next, obs) = household_transition(&self.state, &action);
                self.state = next;
                obs
            }
            Err(_) => NOTHING_HAPPENS.to_string(),
        };
        let state = self.state.clone();
        self.remember(&state);
        if success_reached(&self.state, &task.success_condition) {
            self.done = true;
            return Ok(RawStepResult {
                observation,
                done: true,
                success: true,
                score: 1.0,
            });
        }
        Ok(RawStepResult::ongoing(observation))
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
        match parse_household_action(action_text) {
            Ok(action) => {
                let (next, obs) = household_transition(state, &action);
                Ok(next != *state || obs != NOTHING_HAPPENS)
            }
            Err(_) => Ok(false),
        }
    }

    fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn oracle_script(&self) -> EnvResult<Vec<String>> {
        let task = self.task.as_ref().ok_or(EnvError::NoEpisode)?;
        let spec = household_task_spec(&task.task_type, task.seed)?;
        Ok(solution_script(&spec))
    }
}

/// Shortest scripted solution for a task: fetch, optionally heat/cool, place.
pub fn solution_script(spec: &HouseholdTaskSpec) -> Vec<String> {
    let mut script = Vec::new();
    let mut opened: Vec<&str> = Vec::new();
    let obj = &spec.target_object;
    let src = &spec.source_receptacle;
    let tgt = &spec.target_receptacle;
    script.push(format!("go to {src}"));
    if is_closable(src) {
        script.push(format!("open {src}"));
        opened.push(src);
    }
    script.push(format!("take {obj} from {src}"));
    match spec.type_index {
        1 => {
            if src != "microwave 1" {
                script.push("go to microwave 1".to_string());
            }
            script.push(format!("heat {obj} with microwave 1"));
        }
        2 => {
            if src != "fridge 1" {
                script.push("go to fridge 1".to_string());
            }
            script.push(format!("cool {obj} with fridge 1"));
        }
        _ => {}
    }
    script.push(format!("go to {tgt}"));
    if is_closable(tgt) && !opened.contains(&tgt.as_str()) {
        script.push(format!("open {tgt}"));
    }
    script.push(format!("move {obj} to {tgt}"));
    script
}
