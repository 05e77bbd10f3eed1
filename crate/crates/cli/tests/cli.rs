mod common;

use std::process::{Command, Stdio};
use std::io::Write;

fn curio(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_curio"))
        .current_dir(common::root())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn text_match_for_tortilla_step() {
    let (ok, out) = curio(&["match", "text", "--task", "chicken-tacos", "--step", "2", "--top", "3"]);
    assert!(ok);
    let ids: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert!(ids.contains(&"ck-butter") && ids.contains(&"ck-tortilla"), "{out}");
}

#[test]
fn semantic_match_with_index_cache() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("cooking.idx");
    let idx = idx.to_str().unwrap();
    let (ok, first) = curio(&["match", "semantic", "--task", "buttermilk-biscuits", "--index", idx]);
    assert!(ok && first.lines().count() == 3, "{first}");
    let (ok, second) = curio(&["match", "semantic", "--task", "buttermilk-biscuits", "--index", idx]);
    assert!(ok);
    assert_eq!(first, second);
}

#[test]
fn data_commands() {
    let (ok, out) = curio(&["data", "validate"]);
    assert!(ok, "{out}");
    let (ok, out) = curio(&["data", "stats", "--csv"]);
    assert!(ok && out.starts_with("domain,words,count\n"));
    let (ok, out) = curio(&["data", "national-days", "data/national_days.cooking.toml"]);
    assert!(ok && out.contains("In the US, on the 14th of May, it's the national buttermilk biscuit day."));
}

#[test]
fn simulate_then_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let log = log.to_str().unwrap();
    let (ok, _) = curio(&["lab", "simulate", "--n", "300", "--seed", "9", "--out", log]);
    assert!(ok);
    let (ok, text) = curio(&["lab", "aggregate", log, "--table", "1"]);
    assert!(ok && text.contains("A accepted (>=1)"), "{text}");
    let (ok, csv) = curio(&["lab", "aggregate", log, "--table", "3", "--csv"]);
    assert!(ok && csv.lines().count() == 3, "{csv}");
    let (ok, _) = curio(&["lab", "aggregate", log, "--table", "4"]);
    assert!(!ok);
    let (ok, out) = curio(&["lab", "improvement", "3.95", "3.55"]);
    assert!(ok && out.trim() == "11.3%");
}

#[test]
fn chat_repl() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_curio"))
        .current_dir(common::root())
        .args(["chat", "--task", "chicken-tacos", "--arm", "A"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"start\nnext\nsure\nnext\nnext\nnext\nnext\nnext\n4\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Step 2. Brush butter onto both sides of the tortillas. And look"), "{text}");
    assert!(text.contains("Thanks for your feedback"), "{text}");
}
