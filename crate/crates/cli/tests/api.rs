mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use curio_cli::resources::{load_task_map, Sources};
use curio_cli::server::{router, AppState, Created, Reply, ServerOptions, TaskInfo};
use curio_core::lab::{aggregate, parse_events, Arm, EventKind, Table};
use curio_core::session::{Phase, SessionSummary};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::json;

fn sources() -> Sources {
    Sources {
        config: Some(common::root().join("config/curio.toml")),
        data: common::root().join("data/curiosities.sample.jsonl"),
        tasks: common::root().join("fixtures/tasks"),
        lexicon_dir: Some(common::root().join("config")),
        phrases: Some(common::root().join("config/phrases.en.txt")),
        provider_url: None,
        provider_dim: 384,
    }
}

fn app(opts: &ServerOptions) -> Arc<AppState> {
    let src = sources();
    AppState::new(src.engine().unwrap(), load_task_map(&src.tasks).unwrap(), opts).unwrap()
}

struct Api {
    base: String,
    http: Client,
}

impl Api {
    fn start(app: Arc<AppState>) -> Self {
        let addr = common::spawn(router(app, None));
        Api { base: format!("http://{addr}"), http: Client::new() }
    }

    fn create(&self, task: &str, arm: Option<&str>) -> Created {
        let r = self
            .http
            .post(format!("{}/sessions", self.base))
            .json(&json!({ "task_id": task, "arm": arm, "seed": 1 }))
            .send()
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        r.json().unwrap()
    }

    fn say(&self, id: &str, text: &str) -> (StatusCode, serde_json::Value) {
        let r = self
            .http
            .post(format!("{}/sessions/{id}/utterance", self.base))
            .json(&json!({ "text": text }))
            .send()
            .unwrap();
        (r.status(), r.json().unwrap())
    }

    fn reply(&self, id: &str, text: &str) -> Reply {
        let (status, body) = self.say(id, text);
        assert_eq!(status, StatusCode::OK, "{body}");
        serde_json::from_value(body).unwrap()
    }
}

#[test]
fn six_step_task_on_arm_a() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let api = Api::start(app(&ServerOptions { events: Some(log.clone()), ..Default::default() }));

    let tasks: Vec<TaskInfo> = api.http.get(format!("{}/tasks", api.base)).send().unwrap().json().unwrap();
    assert!(tasks.iter().any(|t| t.id == "chicken-tacos" && t.n_steps == 6));

    let s = api.create("chicken-tacos", Some("A"));
    assert_eq!((s.arm, s.phase), (Arm::A, Phase::Greeting));
    let id = s.session_id;

    let r = api.reply(&id, "start");
    assert_eq!((r.phase, r.step, r.offer_pending), (Phase::InStep, Some(1), false));
    let r = api.reply(&id, "next");
    assert!(r.offer_pending && r.response.ends_with('?'), "{}", r.response);
    let r = api.reply(&id, "yes");
    assert!(r.response.contains("Anyway, to continue, say 'next'."));
    let mut offers = 1;
    for _ in 0..5 {
        let r = api.reply(&id, "next");
        offers += usize::from(r.offer_pending);
    }
    assert_eq!(offers, 1);

    let summary: SessionSummary = api.http.get(format!("{}/sessions/{id}", api.base)).send().unwrap().json().unwrap();
    assert_eq!(summary.phase, Phase::Finished);
    assert_eq!(summary.told.len(), 1);

    let bad = api.http.post(format!("{}/sessions/{id}/rating", api.base)).json(&json!({"value": 7})).send().unwrap();
    assert_eq!(bad.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let ok: Reply = api
        .http
        .post(format!("{}/sessions/{id}/rating", api.base))
        .json(&json!({"value": 5}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(ok.phase, Phase::Rated);

    // offer -> accept -> tell -> rating, in that order
    let events = parse_events(&std::fs::read_to_string(&log).unwrap()).unwrap();
    let kinds: Vec<&str> = events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Offer => Some("offer"),
            EventKind::Accept => Some("accept"),
            EventKind::Tell { .. } => Some("tell"),
            EventKind::Rating { .. } => Some("rating"),
            _ => None,
        })
        .collect();
    assert_eq!(kinds, ["offer", "accept", "tell", "rating"]);
    let report = aggregate(&events).unwrap();
    assert_eq!(report.row(Table::Acceptance, "A accepted (>=1)").unwrap().count, 1);
}

#[test]
fn errors_map_to_status_codes() {
    let api = Api::start(app(&ServerOptions::default()));
    let id = api.create("braid-hair", Some("B")).session_id;
    let (status, body) = api.say(&id, "next");
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("greeting"));

    let (status, _) = api.say("nope", "next");
    assert_eq!(status, StatusCode::NOT_FOUND);

    let r = api.http.post(format!("{}/sessions", api.base)).json(&json!({"task_id": "missing"})).send().unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    // arm B never offers
    api.reply(&id, "start");
    for _ in 0..5 {
        assert!(!api.reply(&id, "next").offer_pending);
    }
}

#[test]
fn arm_assignment_without_override() {
    let api = Api::start(app(&ServerOptions::default()));
    let arms: Vec<Arm> = (0..60).map(|_| api.create("chicken-tacos", None).arm).collect();
    assert!(arms.contains(&Arm::A) && arms.contains(&Arm::B));
}

#[test]
fn journal_recovers_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let opts = ServerOptions { journal: Some(dir.path().join("journal.jsonl")), ..Default::default() };
    let first = app(&opts);
    let api = Api::start(first.clone());
    let id = api.create("chicken-tacos", Some("A")).session_id;
    api.reply(&id, "start");
    api.reply(&id, "next");
    let before: SessionSummary = api.http.get(format!("{}/sessions/{id}", api.base)).send().unwrap().json().unwrap();

    let restarted = Api::start(app(&opts));
    let after: SessionSummary =
        restarted.http.get(format!("{}/sessions/{id}", restarted.base)).send().unwrap().json().unwrap();
    assert_eq!(before, after);
    assert!(after.offer_pending);
    let r = restarted.reply(&id, "sure");
    assert_eq!(r.phase, Phase::TellingCuriosity);
}

#[test]
fn idle_sessions_expire() {
    let state = app(&ServerOptions::default());
    let api = Api::start(state.clone());
    api.create("chicken-tacos", None);
    assert_eq!(state.session_count(), 1);
    assert_eq!(state.expire_idle(Instant::now()), 0);
    // default timeout is 30 minutes
    assert_eq!(state.expire_idle(Instant::now() + Duration::from_secs(1801)), 1);
    assert_eq!(state.session_count(), 0);
}
