//! The session service, driven in-process through the router.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use abductor::pipeline::compile_task;
use abductor::service::{router, AppState};
use abductor::solver::SolverConfig;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(AppState::new(SolverConfig::default(), None)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8_lossy(&bytes).into_owned();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

fn sample_texts(dir: &str, task: &str) -> (String, String) {
    let read = |f: &str| std::fs::read_to_string(common::sample_path(dir, f)).unwrap();
    (read("rules.lp"), read(task))
}

async fn create(app: &Router, dir: &str, task: &str) -> String {
    let (rules, task) = sample_texts(dir, task);
    let (s, v, text) = call(app, "POST", "/sessions", Some(json!({ "rules": rules, "task": task }))).await;
    assert_eq!(s, StatusCode::CREATED, "{text}");
    v["id"].as_str().unwrap().to_string()
}

fn set(v: &Value) -> BTreeSet<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

fn abduced(bundle: &Value) -> BTreeSet<String> {
    set(&bundle["solution"]["abduced"])
}

fn atoms(a: &[&str]) -> BTreeSet<String> {
    a.iter().map(|s| s.to_string()).collect()
}

#[tokio::test]
async fn encoding_equals_compile_output() {
    let app = app();
    let id = create(&app, "extvar_substitution", "task.json").await;
    let (s, v, _) = call(&app, "GET", &format!("/sessions/{id}/encoding"), None).await;
    assert_eq!(s, StatusCode::OK);
    let expected = compile_task(&common::sample("extvar_substitution", "task.json"), true).unwrap();
    assert_eq!(v["text"], expected.text);
    assert_eq!(v["variant"], "semi-res");
    assert_eq!(v["maxAbLvl"], 5);
}

#[tokio::test]
async fn adding_a_fact_substitutes_placeholders() {
    if !common::need_solver() {
        return;
    }
    let app = app();
    let id = create(&app, "full_substitution", "task.json").await;
    let (s, before, _) = call(&app, "POST", &format!("/sessions/{id}/solve"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(abduced(&before), atoms(&["relB(v1,v2)", "relD(v2)", "relF(v2)"]));
    assert_eq!(before["encodingDigest"].as_str().unwrap().len(), 64);

    let facts = format!("/sessions/{id}/facts");
    let (s, after, _) = call(&app, "POST", &facts, Some(json!({ "atom": "relB(john,james)" }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(abduced(&after), atoms(&["relD(james)", "relF(james)"]));
    assert_eq!(set(&after["diff"]["entered"]).len(), 2);
    assert_eq!(set(&after["diff"]["left"]), atoms(&["relB(v1,v2)", "relD(v2)", "relF(v2)"]));

    let (s, undone, _) = call(&app, "DELETE", &facts, Some(json!({ "atom": "relB(john,james)" }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(abduced(&undone), abduced(&before));

    let (_, other, _) = call(&app, "POST", &facts, Some(json!({ "atom": "relF(mary)" }))).await;
    assert_eq!(abduced(&other), atoms(&["relD(mary)", "relB(v1,mary)"]));

    let (_, summary, _) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let actions: Vec<&str> = summary["history"].as_array().unwrap().iter().map(|h| h["action"].as_str().unwrap()).collect();
    assert_eq!(actions, ["add_fact", "remove_fact", "add_fact"]);
    assert_eq!(set(&summary["dynamicFacts"]), atoms(&["relF(mary)"]));
    assert!(set(&summary["baseFacts"]).is_empty());

    // Re-solving without a change returns the cached bundle.
    let (_, again, _) = call(&app, "POST", &format!("/sessions/{id}/solve"), None).await;
    assert_eq!(again["solution"], other["solution"]);
}

#[tokio::test]
async fn partial_substitution_session() {
    if !common::need_solver() {
        return;
    }
    let app = app();
    let id = create(&app, "partial_substitution", "task.json").await;
    let facts = format!("/sessions/{id}/facts");
    call(&app, "POST", &facts, Some(json!({ "atom": "relC(john)" }))).await;
    let (_, v, _) = call(&app, "POST", &facts, Some(json!({ "atom": "relA(mary)" }))).await;
    assert_eq!(abduced(&v), atoms(&["relD(mary)"]));
}

#[tokio::test]
async fn graph_formats() {
    if !common::need_solver() {
        return;
    }
    let app = app();
    let id = create(&app, "justification", "task.json").await;
    let (s, v, _) = call(&app, "GET", &format!("/sessions/{id}/graph?format=json"), None).await;
    assert_eq!(s, StatusCode::OK);
    let edges = v["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 6);
    assert_eq!(edges.iter().filter(|e| e["sign"] == "neg").count(), 1);
    let (s, _, dot) = call(&app, "GET", &format!("/sessions/{id}/graph?format=dot"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(dot.lines().filter(|l| l.contains("->")).count(), 6);
    let (s, _, _) = call(&app, "GET", &format!("/sessions/{id}/graph?format=svg"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn generalize_trace_replays_through_facts() {
    if !common::need_solver() {
        return;
    }
    let app = app();
    let id = create(&app, "extvar_substitution", "task.json").await;
    let (s, g, text) = call(&app, "POST", &format!("/sessions/{id}/generalize"), Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK, "{text}");
    assert_eq!(g["exhausted"], true);
    assert_eq!(set(&g["generalized"]), atoms(&["relC(john,Y)", "relD(john,Y,Z)", "relE(john,Y,Z)"]));
    // The session itself is untouched.
    let (_, summary, _) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert!(summary["history"].as_array().unwrap().is_empty());

    for step in g["trace"].as_array().unwrap() {
        let bundle = match step["added"].as_str() {
            None => call(&app, "POST", &format!("/sessions/{id}/solve"), None).await.1,
            Some(atom) => call(&app, "POST", &format!("/sessions/{id}/facts"), Some(json!({ "atom": atom }))).await.1,
        };
        let followed = &step["optima"][step["followed"].as_u64().unwrap() as usize];
        assert_eq!(abduced(&bundle), set(followed));
    }
}

#[tokio::test]
async fn unsatisfiable_task_has_empty_solution() {
    if !common::need_solver() {
        return;
    }
    let app = app();
    let body = json!({
        "rules": "p(X):-q(X).",
        "task": { "query": "p(a)", "depth": 1, "block": ["p(_)", "q(_)"] }
    });
    let (_, v, _) = call(&app, "POST", "/sessions", Some(body)).await;
    let id = v["id"].as_str().unwrap();
    let (s, b, _) = call(&app, "POST", &format!("/sessions/{id}/solve"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["solution"]["status"], "unsatisfiable");
    assert!(abduced(&b).is_empty());
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (s, _, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _, _) = call(&app, "POST", "/sessions/nope/facts", Some(json!({ "atom": "a" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, v, _) = call(&app, "POST", "/sessions", Some(json!({ "rules": "p(X) :- q(X", "task": "{}" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("rules.lp:1:"), "{v}");

    let (rules, _) = sample_texts("partial_substitution", "task.json");
    let task = json!({ "query": "relA(john)", "depth": 4, "variant": "exp" });
    let (s, v, _) = call(&app, "POST", "/sessions", Some(json!({ "rules": rules, "task": task }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");

    let id = create(&app, "full_substitution", "task.json").await;
    let facts = format!("/sessions/{id}/facts");
    let (s, _, _) = call(&app, "POST", &facts, Some(json!({ "atom": "relB(X,james)" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _, _) = call(&app, "DELETE", &facts, Some(json!({ "atom": "relB(john,james)" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _, _) = call(&app, "POST", &format!("/sessions/{id}/generalize"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn solver_failure_is_502() {
    let cfg = SolverConfig { executable: Some("/nonexistent/clingo".into()), ..Default::default() };
    let app = router(Arc::new(AppState::new(cfg, None)));
    let id = create(&app, "first_example", "task.json").await;
    let (s, v, _) = call(&app, "POST", &format!("/sessions/{id}/solve"), None).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert!(v["error"].as_str().unwrap().contains("cannot launch"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_are_serialized() {
    if !common::need_solver() {
        return;
    }
    let app = app();
    let id = create(&app, "full_substitution", "task.json").await;
    let facts = format!("/sessions/{id}/facts");
    let atoms = ["relB(john,james)", "relF(mary)", "relD(anne)", "relB(john,james)"];
    let calls = atoms.iter().map(|a| {
        let (app, facts) = (app.clone(), facts.clone());
        let a = a.to_string();
        tokio::spawn(async move { call(&app, "POST", &facts, Some(json!({ "atom": a }))).await.0 })
    });
    let mut ok = 0;
    for c in calls.collect::<Vec<_>>() {
        if c.await.unwrap() == StatusCode::OK {
            ok += 1;
        }
    }
    // The duplicate is rejected whichever copy comes second.
    assert_eq!(ok, 3);
    let (_, summary, _) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(summary["history"].as_array().unwrap().len(), ok);
    assert_eq!(summary["dynamicFacts"].as_array().unwrap().len(), ok);
}

#[tokio::test]
async fn snapshots_survive_a_restart() {
    let dir = std::env::temp_dir().join(format!("abduce-state-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let state = Arc::new(AppState::new(SolverConfig::default(), Some(dir.clone())));
    state.restore().unwrap();
    let app = router(state);
    let id = create(&app, "first_example", "task.json").await;

    let restarted = Arc::new(AppState::new(SolverConfig::default(), Some(dir.clone())));
    assert_eq!(restarted.restore().unwrap(), 1);
    let (s, v, _) = call(&router(restarted), "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["task"]["query"], "p(john,james)");
    let _ = std::fs::remove_dir_all(&dir);
}
