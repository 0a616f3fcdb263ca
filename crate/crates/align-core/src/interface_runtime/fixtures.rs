//! Bundled interface sources: the identity interface, hand-written gold
//! repair interfaces for both builtin environments, and an adversarial
//! corpus exercising fault containment.

/// Version-0 interface: no rules, steps pass through untouched.
pub const IDENTITY_SOURCE: &str = r#"// Identity interface: pass every step through unchanged.

fn InferRules(init_obs, task) {
    "There is no rule for this environment."
}

fn WrapStep(env, init_obs, task, agent_action, logger) {
    let r = env.step(agent_action);
    [r.observation, r.success, r.done]
}
"#;

/// Hand-written repair interface for the household world. It names the
/// co-location and container preconditions that the raw world hides behind
/// "Nothing happens.", and steers the agent with explicit go-to/open hints.
pub const GOLD_HOUSEHOLD_SOURCE: &str = r#"// Repair interface for the household world.

fn InferRules(init_obs, task) {
    "1. Navigation and location rules:\n" +
    "- You must go to a receptacle before you can examine it, open it, close it, or interact with objects in/on it.\n" +
    "- You can only interact with objects and receptacles at your current location.\n" +
    "- If you act on a receptacle you have not gone to, you will be told to go there first.\n" +
    "2. Container rules:\n" +
    "- drawer 1, fridge 1, and microwave 1 can be opened and closed; they start closed.\n" +
    "- You must open a closed container before taking objects from it or placing objects into it.\n" +
    "3. Device rules:\n" +
    "- heat an object with microwave 1 while carrying it at the microwave 1.\n" +
    "- cool an object with fridge 1 while carrying it at the fridge 1.\n" +
    "4. Carrying rules:\n" +
    "- You can carry at most one object; take it before you move it somewhere."
}

fn has_item(list, x) {
    for item in list {
        if item == x { return true; }
    }
    false
}

fn known_receptacles(init_obs) {
    let marker = "you see ";
    let idx = init_obs.index_of(marker);
    if idx < 0 { return []; }
    let rest = init_obs.sub_string(idx + marker.len);
    let end = rest.index_of(".");
    if end >= 0 { rest = rest.sub_string(0, end); }
    let items = rest.split(", ");
    let out = [];
    for item in items {
        let x = item;
        x.trim();
        if x.starts_with("and a ") { x = x.sub_string(6); }
        else if x.starts_with("a ") { x = x.sub_string(2); }
        out.push(x);
    }
    out
}

fn current_location(env) {
    let r = env.step("look");
    let obs = r.observation;
    let marker = "You are at the ";
    if obs.starts_with(marker) {
        let rest = obs.sub_string(marker.len);
        let end = rest.index_of(".");
        if end >= 0 { return rest.sub_string(0, end); }
        return rest;
    }
    "start"
}

fn classify(action, receptacles) {
    let a = action;
    a.trim();
    let lower = a.to_lower();
    let out = #{verb: "", object: "", receptacle: ""};
    if lower == "look" || lower == "inventory" {
        out.verb = lower;
        return out;
    }
    if lower.starts_with("go to ") { out.verb = "go to"; out.receptacle = a.sub_string(6); return out; }
    if lower.starts_with("open ") { out.verb = "open"; out.receptacle = a.sub_string(5); return out; }
    if lower.starts_with("close ") { out.verb = "close"; out.receptacle = a.sub_string(6); return out; }
    if lower.starts_with("examine ") {
        let target = a.sub_string(8);
        out.verb = "examine";
        if has_item(receptacles, target) { out.receptacle = target; } else { out.object = target; }
        return out;
    }
    if lower.starts_with("take ") {
        let idx = lower.index_of(" from ");
        if idx >= 0 {
            out.verb = "take";
            out.object = a.sub_string(5, idx - 5);
            out.receptacle = a.sub_string(idx + 6);
        }
        return out;
    }
    if lower.starts_with("move ") {
        let idx = lower.index_of(" to ");
        if idx >= 0 {
            out.verb = "move";
            out.object = a.sub_string(5, idx - 5);
            out.receptacle = a.sub_string(idx + 4);
        }
        return out;
    }
    for verb in ["heat", "cool", "clean"] {
        if lower.starts_with(verb + " ") {
            let idx = lower.index_of(" with ");
            if idx >= 0 {
                out.verb = verb;
                out.object = a.sub_string(verb.len + 1, idx - verb.len - 1);
                out.receptacle = a.sub_string(idx + 6);
            }
            return out;
        }
    }
    out
}

fn guidance(verb, receptacle) {
    if verb == "examine" {
        return "You must go to the " + receptacle + " first before examining it.";
    }
    if verb == "take" {
        return "You need to go to the " + receptacle + " first before taking objects from it.";
    }
    if verb == "move" {
        return "You need to go to the " + receptacle + " first before placing objects on/in it.";
    }
    if verb == "heat" || verb == "cool" || verb == "clean" {
        return "You need to go to the " + receptacle + " first before you can " + verb + " with it.";
    }
    "You need to go to the " + receptacle + " first before you can " + verb + " it."
}

fn WrapStep(env, init_obs, task, agent_action, logger) {
    let receptacles = known_receptacles(init_obs);
    let act = classify(agent_action, receptacles);
    let colocated_verbs = ["examine", "open", "close", "take", "move", "heat", "cool", "clean"];
    if has_item(colocated_verbs, act.verb) && act.receptacle != "" && has_item(receptacles, act.receptacle) {
        let loc = current_location(env);
        if loc != act.receptacle {
            logger.log("intercepted " + act.verb + " away from " + act.receptacle);
            return [guidance(act.verb, act.receptacle), false, false];
        }
    }
    let r = env.step(agent_action);
    if r.observation == "Nothing happens." && (act.verb == "take" || act.verb == "move") {
        let probe = env.step("examine " + act.receptacle);
        if probe.observation.contains("is closed") {
            if act.verb == "move" {
                return ["You need to open the " + act.receptacle + " first before placing objects in it.", false, false];
            }
            return ["You need to open the " + act.receptacle + " first before taking objects from it.", false, false];
        }
    }
    [r.observation, r.success, r.done]
}
"#;

/// Hand-written repair interface for the tool world: intercepts
/// parenthesized invocations and spells out the comma call format.
pub const GOLD_TOOLWORLD_SOURCE: &str = r#"// Repair interface for the tool world.

fn InferRules(init_obs, task) {
    "Tool invocation format rules:\n" +
    "- Invoke a tool as: Action: tool_name, arg1, arg2 End Action\n" +
    "- Do not put arguments inside parentheses.\n" +
    "- Submit your final result as: Answer: <value>"
}

fn WrapStep(env, init_obs, task, agent_action, logger) {
    let a = agent_action;
    a.trim();
    if a.starts_with("Action:") && a.ends_with("End Action") {
        let body = a.sub_string(7, a.len - 17);
        body.trim();
        let open_idx = body.index_of("(");
        if open_idx >= 0 {
            let name = body.sub_string(0, open_idx);
            name.trim();
            let close_idx = body.index_of(")");
            let args = "";
            if close_idx > open_idx {
                args = body.sub_string(open_idx + 1, close_idx - open_idx - 1);
                args.trim();
            }
            let suggestion = "Action: " + name;
            if args != "" { suggestion += ", " + args; }
            suggestion += " End Action";
            logger.log("intercepted parenthesized call: " + name);
            return ["Error: Found tool invocation with arguments inside parentheses like '" + name + "(" + args + ")'. Tool arguments should be provided after the tool name, separated by a comma, e.g., '" + suggestion + "'.", false, false];
        }
    }
    let r = env.step(agent_action);
    [r.observation, r.success, r.done]
}
"#;

pub const ADVERSARIAL_RAISE: &str = r#"fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    throw "interface exploded";
}
"#;

pub const ADVERSARIAL_LOOP: &str = r#"fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    loop { }
}
"#;

pub const ADVERSARIAL_INFER_LOOP: &str = r#"fn InferRules(init_obs, task) {
    loop { }
}
fn WrapStep(env, init_obs, task, agent_action, logger) {
    let r = env.step(agent_action);
    [r.observation, r.success, r.done]
}
"#;

pub const ADVERSARIAL_PROBE_FLOOD: &str = r#"fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    let i = 0;
    while i < 50 {
        env.step("look");
        i += 1;
    }
    let r = env.step(agent_action);
    [r.observation, r.success, r.done]
}
"#;

pub const ADVERSARIAL_WRONG_SHAPE: &str = r#"fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    42
}
"#;

/// Fails static validation: reaches for file access.
pub const ADVERSARIAL_FILE_OPEN: &str = r#"fn InferRules(init_obs, task) { "rules" }
fn WrapStep(env, init_obs, task, agent_action, logger) {
    let f = open("notes.txt");
    let r = env.step(agent_action);
    [r.observation, r.success, r.done]
}
"#;

/// The four containment fixtures that must all load cleanly and fault only
/// at runtime, labeled for reporting.
pub fn adversarial_runtime_corpus() -> Vec<(&'static str, &'static str)> {
    vec![
        ("raise", ADVERSARIAL_RAISE),
        ("loop", ADVERSARIAL_LOOP),
        ("probe_flood", ADVERSARIAL_PROBE_FLOOD),
        ("wrong_shape", ADVERSARIAL_WRONG_SHAPE),
    ]
}
