//! Sequential vs parallel execution of the batch paths.

use std::hint::black_box;
use std::path::PathBuf;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use curio_core::config::EngineConfig;
use curio_core::lab::{simulate, SimConfig};
use curio_core::phrasing::PhraseBank;
use curio_core::semantic::{build_index_with, match_semantic_with, SemanticConfig, StubProvider};
use curio_core::session::Engine;
use curio_core::store::{load_collection, Curiosity, CuriosityCollection};
use curio_core::task::{extract, load_tasks, TaskContent};
use curio_core::text::{Lexicon, TextMatcher};
use curio_core::{Domain, ExecMode};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The sample facts repeated with distinct ids, to get a corpus of `n`.
fn corpus(n: usize) -> CuriosityCollection {
    let base = load_collection(root().join("data/curiosities.sample.jsonl")).unwrap();
    let cooking: Vec<&Curiosity> = base.in_domain(Domain::Cooking).collect();
    let items = (0..n)
        .map(|i| {
            let c = cooking[i % cooking.len()];
            Curiosity::new(format!("{}-{i}", c.id), Domain::Cooking, &c.category, format!("{} ({i})", c.text)).unwrap()
        })
        .collect();
    CuriosityCollection::new(items).unwrap()
}

fn tasks() -> Vec<Arc<TaskContent>> {
    load_tasks(root().join("fixtures/tasks/sample.jsonl"))
        .unwrap()
        .iter()
        .map(|r| Arc::new(extract(r).unwrap()))
        .collect()
}

fn text_ranking(c: &mut Criterion) {
    let corpus = corpus(5000);
    let mut g = c.benchmark_group("text_rank_5000");
    for (name, mode) in MODES {
        let m = TextMatcher::new(Lexicon::bundled(), &corpus, mode);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| m.rank(black_box("Brush butter onto both sides of the tortillas."), Domain::Cooking, 5).unwrap())
        });
    }
    g.finish();
}

fn semantic(c: &mut Criterion) {
    let corpus = corpus(2000);
    let p = StubProvider::new();
    let task = tasks().into_iter().find(|t| t.domain == Domain::Cooking).unwrap();
    let mut g = c.benchmark_group("semantic_2000");
    g.sample_size(20);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::new("build_index", name), |b| {
            b.iter(|| build_index_with(&corpus, Domain::Cooking, &p, mode).unwrap())
        });
        let idx = build_index_with(&corpus, Domain::Cooking, &p, mode).unwrap();
        g.bench_function(BenchmarkId::new("match", name), |b| {
            b.iter(|| match_semantic_with(&task, &idx, &corpus, SemanticConfig::default(), &p, mode).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let engine = Engine::new(
        Arc::new(load_collection(root().join("data/curiosities.sample.jsonl")).unwrap()),
        Lexicon::bundled(),
        PhraseBank::bundled(),
        Arc::new(StubProvider::new()),
        EngineConfig::default(),
    )
    .unwrap();
    let tasks = tasks();
    let cfg = SimConfig::default();
    let mut g = c.benchmark_group("simulate_1000");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate(&engine, &tasks, &cfg, 1000, 42, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, text_ranking, semantic, simulation);
criterion_main!(benches);
