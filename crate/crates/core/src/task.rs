//! Raw recipe / DIY articles and their matchable representation.
//!
//! Task fixture files use the same line-delimited JSON style as the dataset,
//! one task per line:
//!
//! ```text
//! {"id":"chicken-tacos","domain":"cooking","title":"Chicken Tacos","steps":["..."],"ingredients":["..."]}
//! ```
//!
//! Any other keys (categories, descriptions, ratings...) are kept in
//! [`RawTask::extras`] and dropped by [`extract`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{word_count, Domain};
use crate::semantic::{INGREDIENTS_MARKER, STEPS_MARKER, TITLE_MARKER};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("task `{0}` has no steps")]
    EmptySteps(String),
    #[error("task `{0}` has an empty title")]
    EmptyTitle(String),
    #[error("step index {index} out of range 1..={n_steps}")]
    StepOutOfRange { index: usize, n_steps: usize },
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTask {
    #[serde(default)]
    pub id: String,
    pub domain: Domain,
    pub title: String,
    pub steps: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingredients: Option<Vec<String>>,
    #[serde(flatten)]
    pub extras: BTreeMap<String, serde_json::Value>,
}

/// Matchable content of one task. Immutable once extracted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskContent {
    pub id: String,
    pub domain: Domain,
    pub title: String,
    pub steps: Vec<String>,
    /// Present for cooking tasks only.
    pub ingredients: Option<Vec<String>>,
    pub n_steps: usize,
    pub step_word_counts: Vec<usize>,
}

impl TaskContent {
    /// Text of step `index` (1-based).
    pub fn step(&self, index: usize) -> Result<&str, TaskError> {
        index
            .checked_sub(1)
            .and_then(|i| self.steps.get(i))
            .map(String::as_str)
            .ok_or(TaskError::StepOutOfRange {
                index,
                n_steps: self.n_steps,
            })
    }

    /// Lifts the content back into a raw task (extras empty).
    pub fn to_raw(&self) -> RawTask {
        RawTask {
            id: self.id.clone(),
            domain: self.domain,
            title: self.title.clone(),
            steps: self.steps.clone(),
            ingredients: self.ingredients.clone(),
            extras: BTreeMap::new(),
        }
    }
}

/// Keeps title, steps and (for recipes) ingredients; discards everything else.
pub fn extract(raw: &RawTask) -> Result<TaskContent, TaskError> {
    if raw.title.trim().is_empty() {
        return Err(TaskError::EmptyTitle(raw.id.clone()));
    }
    if raw.steps.is_empty() {
        return Err(TaskError::EmptySteps(raw.id.clone()));
    }
    let ingredients = match raw.domain {
        Domain::Cooking => Some(raw.ingredients.clone().unwrap_or_default()),
        Domain::Diy => None,
    };
    Ok(TaskContent {
        id: raw.id.clone(),
        domain: raw.domain,
        title: raw.title.clone(),
        n_steps: raw.steps.len(),
        step_word_counts: raw.steps.iter().map(|s| word_count(s)).collect(),
        steps: raw.steps.clone(),
        ingredients,
    })
}

/// Which part of the task a matcher looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchPhase {
    /// Whole task: title, ingredients and all steps behind markers.
    TaskLevel,
    /// Text of a single step (1-based).
    StepLevel(usize),
}

pub fn matching_text(t: &TaskContent, phase: MatchPhase) -> Result<String, TaskError> {
    match phase {
        MatchPhase::StepLevel(index) => t.step(index).map(str::to_string),
        MatchPhase::TaskLevel => {
            let mut parts: Vec<&str> = vec![TITLE_MARKER, &t.title];
            if let Some(ingredients) = &t.ingredients {
                parts.push(INGREDIENTS_MARKER);
                parts.extend(ingredients.iter().map(String::as_str));
            }
            parts.push(STEPS_MARKER);
            parts.extend(t.steps.iter().map(String::as_str));
            Ok(parts.join(" "))
        }
    }
}

/// Reads every task in a line-delimited fixture file.
pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<RawTask>, TaskError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let input = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut tasks = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut raw: RawTask = serde_json::from_str(line).map_err(|e| TaskError::Parse {
            path: shown.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if raw.id.is_empty() {
            raw.id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if idx > 0 {
                raw.id = format!("{}-{}", raw.id, idx + 1);
            }
        }
        tasks.push(raw);
    }
    Ok(tasks)
}

/// Loads and extracts every `*.jsonl` task under `dir`, keyed by id.
pub fn load_task_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, TaskContent>, TaskError> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| TaskError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        for raw in load_tasks(&path)? {
            let content = extract(&raw)?;
            if out.insert(content.id.clone(), content).is_some() {
                return Err(TaskError::DuplicateId(raw.id));
            }
        }
    }
    Ok(out)
}
