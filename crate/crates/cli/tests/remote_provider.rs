mod common;

use axum::routing::post;
use axum::{Json, Router};
use curio_cli::remote::RemoteProvider;
use curio_core::semantic::{build_index, match_semantic, EmbeddingProvider, SemanticConfig, SemanticError, StubProvider};
use curio_core::store::load_collection;
use curio_core::task::{extract, load_tasks};
use curio_core::Domain;
use serde_json::{json, Value};

/// A mock embedding service backed by the trigram stub.
fn mock(unit: bool) -> Router {
    Router::new()
        .route(
            "/embed",
            post(move |Json(body): Json<Value>| async move {
                let stub = StubProvider::new();
                let vectors: Vec<Vec<f32>> = body["texts"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|t| {
                        let v = stub.embed_one(t.as_str().unwrap());
                        if unit { v } else { v.iter().map(|x| x * 2.0).collect() }
                    })
                    .collect();
                Json(json!({ "vectors": vectors }))
            }),
        )
        .route(
            "/cross",
            post(|Json(body): Json<Value>| async move {
                let stub = StubProvider::new();
                let pairs: Vec<(String, String)> = serde_json::from_value(body["pairs"].clone()).unwrap();
                let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
                Json(json!({ "scores": stub.cross_score(&refs).unwrap() }))
            }),
        )
}

#[test]
fn remote_matches_local_stub() {
    let addr = common::spawn(mock(true));
    let remote = RemoteProvider::new(&format!("http://{addr}/"), StubProvider::DIM).unwrap();
    let stub = StubProvider::new();
    let c = load_collection(common::root().join("data/curiosities.sample.jsonl")).unwrap();
    let task = extract(&load_tasks(common::root().join("fixtures/tasks/sample.jsonl")).unwrap()[0]).unwrap();

    let local_idx = build_index(&c, Domain::Cooking, &stub).unwrap();
    let remote_idx = build_index(&c, Domain::Cooking, &remote).unwrap();
    assert_eq!(local_idx.ids(), remote_idx.ids());
    assert_eq!(remote_idx.provider_id(), format!("remote:http://{addr}"));

    let ids = |v: Vec<curio_core::text::MatchResult>| v.into_iter().map(|r| r.curiosity_id).collect::<Vec<_>>();
    let cfg = SemanticConfig::default();
    assert_eq!(
        ids(match_semantic(&task, &remote_idx, &c, cfg, &remote).unwrap()),
        ids(match_semantic(&task, &local_idx, &c, cfg, &stub).unwrap())
    );
    // an index from one provider is refused by another
    assert!(matches!(
        match_semantic(&task, &local_idx, &c, cfg, &remote),
        Err(SemanticError::ProviderMismatch { .. })
    ));
}

#[test]
fn non_unit_vectors_are_rejected() {
    let addr = common::spawn(mock(false));
    let remote = RemoteProvider::new(&format!("http://{addr}"), StubProvider::DIM).unwrap();
    let c = load_collection(common::root().join("data/curiosities.sample.jsonl")).unwrap();
    assert!(matches!(build_index(&c, Domain::Diy, &remote), Err(SemanticError::NotUnit { .. })));
}

#[test]
fn unreachable_service_is_a_provider_error() {
    let remote = RemoteProvider::new("http://127.0.0.1:9", 8).unwrap();
    let err = remote.embed(&["x"]).unwrap_err();
    assert!(err.to_string().contains("remote:http://127.0.0.1:9"), "{err}");
}
