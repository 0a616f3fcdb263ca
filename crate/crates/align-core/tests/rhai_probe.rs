use rhai::{Dynamic, Engine, Scope};

fn run(engine: &Engine, script: &str, arg: &str) -> String {
    let ast = match engine.compile(script) {
        Ok(a) => a,
        Err(e) => return format!("COMPILE ERROR: {e}"),
    };
    let mut scope = Scope::new();
    let res: Result<Dynamic, _> = engine.call_fn(&mut scope, &ast, "probe", (arg.to_string(),));
    match res {
        Ok(v) => format!("{v:?}"),
        Err(e) => format!("EVAL ERROR: {e}"),
    }
}

#[test]
fn probe_string_api() {
    let engine = Engine::new();
    println!("A: {}", run(&engine, r#"
fn probe(init_obs) {
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
"#, "You are in the middle of a room. Looking around you, you see a countertop 1, a drawer 1, a fridge 1, a microwave 1, and a shelf 1."));

    println!("B lower/contains/replace: {}", run(&engine, r#"
fn probe(s) {
    let t = s.to_lower();
    [t.contains("go to"), t, s.replace("GO", "XX"), s.len]
}
"#, "GO TO drawer 1"));

    println!("C throw: {}", run(&engine, r#"fn probe(s) { throw "boom"; }"#, "x"));

    println!("D map: {}", run(&engine, r#"
fn probe(s) {
    let m = #{observation: "obs text", done: false, success: true, score: 1.0};
    [m.observation, m.done, m.success, m.score, m["observation"]]
}
"#, "x"));
}
