//! Loading of everything the engine needs from disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use curio_core::config::EngineConfig;
use curio_core::phrasing::PhraseBank;
use curio_core::semantic::{EmbeddingProvider, StubProvider};
use curio_core::session::Engine;
use curio_core::store::{load_collection, CuriosityCollection};
use curio_core::task::{extract, load_task_dir, load_tasks, TaskContent};
use curio_core::text::Lexicon;

use crate::remote::RemoteProvider;

pub type TaskMap = BTreeMap<String, Arc<TaskContent>>;

/// Paths shared by most subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct Sources {
    /// Engine config (TOML). Built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Curiosity collection (JSONL).
    #[arg(long, global = true, default_value = "data/curiosities.sample.jsonl")]
    pub data: PathBuf,
    /// Task fixtures: a JSONL file or a directory of them.
    #[arg(long, global = true, default_value = "fixtures/tasks")]
    pub tasks: PathBuf,
    /// Directory with stopwords.txt, verbs.txt, nouns.txt and
    /// common_words.<domain>.txt. Bundled lists when absent.
    #[arg(long, global = true)]
    pub lexicon_dir: Option<PathBuf>,
    /// Phrase bank file. Bundled English bank when absent.
    #[arg(long, global = true)]
    pub phrases: Option<PathBuf>,
    /// Base URL of an embedding service exposing /embed and /cross.
    /// The deterministic trigram stub is used when absent.
    #[arg(long, global = true)]
    pub provider_url: Option<String>,
    /// Embedding dimension of the remote provider.
    #[arg(long, global = true, default_value_t = 384)]
    pub provider_dim: usize,
}

impl Sources {
    pub fn config(&self) -> Result<EngineConfig> {
        match &self.config {
            Some(p) => EngineConfig::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(EngineConfig::default()),
        }
    }

    pub fn collection(&self) -> Result<CuriosityCollection> {
        load_collection(&self.data).with_context(|| format!("loading {}", self.data.display()))
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon_dir {
            Some(d) => Lexicon::from_dir(d).with_context(|| format!("loading lexicon from {}", d.display())),
            None => Ok(Lexicon::bundled()),
        }
    }

    pub fn phrases(&self) -> Result<PhraseBank> {
        match &self.phrases {
            Some(p) => PhraseBank::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(PhraseBank::bundled()),
        }
    }

    pub fn provider(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        Ok(match &self.provider_url {
            Some(url) => Arc::new(RemoteProvider::new(url, self.provider_dim)?),
            None => Arc::new(StubProvider::new()),
        })
    }

    pub fn tasks(&self) -> Result<TaskMap> {
        load_task_map(&self.tasks)
    }

    pub fn engine(&self) -> Result<Engine> {
        Ok(Engine::new(
            Arc::new(self.collection()?),
            self.lexicon()?,
            self.phrases()?,
            self.provider()?,
            self.config()?,
        )?)
    }
}

pub fn load_task_map(path: &Path) -> Result<TaskMap> {
    let map: BTreeMap<String, TaskContent> = if path.is_dir() {
        load_task_dir(path)?
    } else {
        let mut out = BTreeMap::new();
        for raw in load_tasks(path)? {
            let t = extract(&raw)?;
            out.insert(t.id.clone(), t);
        }
        out
    };
    if map.is_empty() {
        bail!("no tasks found in {}", path.display());
    }
    Ok(map.into_iter().map(|(k, v)| (k, Arc::new(v))).collect())
}

pub fn task<'a>(tasks: &'a TaskMap, id: &str) -> Result<&'a Arc<TaskContent>> {
    match tasks.get(id) {
        Some(t) => Ok(t),
        None => bail!(
            "unknown task `{id}`; available: {}",
            tasks.keys().cloned().collect::<Vec<_>>().join(", ")
        ),
    }
}
