//! Two-stage semantic matcher: bi-encoder retrieval of the top-n curiosities
//! for a task, then cross-encoder re-ranking down to the top-m.
//!
//! Models sit behind [`EmbeddingProvider`]. [`StubProvider`] is a
//! deterministic hashed character-trigram encoder for tests and offline use;
//! real models are reached through an HTTP client implementing the same
//! trait.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::domain::Domain;
use crate::par::{self, ExecMode};
use crate::store::CuriosityCollection;
use crate::task::{matching_text, MatchPhase, TaskContent};
use crate::text::{rank_order, MatchMethod, MatchResult, StageScores};

pub const TITLE_MARKER: &str = "[TITLE]";
pub const INGREDIENTS_MARKER: &str = "[INGREDIENTS]";
pub const STEPS_MARKER: &str = "[STEPS]";

/// Allowed deviation of an embedding's L2 norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

const EMBED_BATCH: usize = 64;
const INDEX_MAGIC: &[u8; 8] = b"CURIIDX1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("provider `{provider}` failed: {message}")]
pub struct ProviderError {
    pub provider: String,
    pub message: String,
}

impl ProviderError {
    pub fn new(provider: impl Into<String>, message: impl Into<String>) -> Self {
        ProviderError {
            provider: provider.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SemanticError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("provider `{provider}` returned a vector with norm {norm} (expected 1)")]
    NotUnit { provider: String, norm: f64 },
    #[error("provider `{provider}` returned {got} values, expected {expected}")]
    Shape {
        provider: String,
        expected: usize,
        got: usize,
    },
    #[error("no curiosities in domain `{0}`")]
    EmptyDomain(Domain),
    #[error("index built by `{index}` (dim {index_dim}) used with provider `{provider}` (dim {provider_dim})")]
    ProviderMismatch {
        index: String,
        index_dim: usize,
        provider: String,
        provider_dim: usize,
    },
    #[error("index is for domain `{index}` but task is `{task}`")]
    DomainMismatch { index: Domain, task: Domain },
    #[error("curiosity `{0}` is in the index but not in the collection")]
    UnknownCuriosity(String),
    #[error("invalid config: need 1 <= m <= n (n={n}, m={m})")]
    InvalidConfig { n: usize, m: usize },
    #[error("index cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sentence encoder plus pairwise relevance scorer.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier recorded in indexes built with this provider.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// One unit vector of length [`dim`](Self::dim) per text.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError>;
    /// Relevance score per `(query, candidate)` pair; higher is better.
    fn cross_score(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashed character-trigram count vectors, L2-normalised.
///
/// Text is lowercased and padded with one space on each side; each trigram's
/// UTF-8 bytes are hashed with FNV-1a into `dim` buckets. Texts with no
/// trigram map to the uniform vector. `cross_score` is the cosine of the two
/// stub embeddings.
#[derive(Debug, Clone)]
pub struct StubProvider {
    dim: usize,
}

impl StubProvider {
    pub const ID: &'static str = "stub-trigram-256";
    pub const DIM: usize = 256;

    pub fn new() -> Self {
        StubProvider { dim: Self::DIM }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut padded = String::with_capacity(text.len() + 2);
        padded.push(' ');
        padded.extend(text.chars().flat_map(char::to_lowercase));
        padded.push(' ');
        let chars: Vec<char> = padded.chars().collect();
        let mut counts = vec![0f64; self.dim];
        let mut buf = [0u8; 12];
        for w in chars.windows(3) {
            let mut len = 0;
            for c in w {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            counts[(fnv1a(&buf[..len]) % self.dim as u64) as usize] += 1.0;
        }
        let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let v = (1.0 / self.dim as f64).sqrt() as f32;
            return vec![v; self.dim];
        }
        counts.iter().map(|x| (x / norm) as f32).collect()
    }
}

impl Default for StubProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl EmbeddingProvider for StubProvider {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn cross_score(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        Ok(pairs
            .iter()
            .map(|(a, b)| dot(&self.embed_one(a), &self.embed_one(b)))
            .collect())
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

fn check_vectors(
    p: &dyn EmbeddingProvider,
    expected: usize,
    vectors: &[Vec<f32>],
) -> Result<(), SemanticError> {
    if vectors.len() != expected {
        return Err(SemanticError::Shape {
            provider: p.id().to_string(),
            expected,
            got: vectors.len(),
        });
    }
    for v in vectors {
        if v.len() != p.dim() {
            return Err(SemanticError::Shape {
                provider: p.id().to_string(),
                expected: p.dim(),
                got: v.len(),
            });
        }
        let norm = dot(v, v).sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(SemanticError::NotUnit {
                provider: p.id().to_string(),
                norm,
            });
        }
    }
    Ok(())
}

/// The marked-up task string that both encoders see.
pub fn task_text(t: &TaskContent) -> String {
    matching_text(t, MatchPhase::TaskLevel).expect("task level text is infallible")
}

pub fn encode_task(t: &TaskContent, p: &dyn EmbeddingProvider) -> Result<Vec<f32>, SemanticError> {
    let text = task_text(t);
    let mut out = p.embed(&[text.as_str()])?;
    check_vectors(p, 1, &out)?;
    Ok(out.pop().expect("one vector"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SemanticConfig {
    pub n: usize,
    pub m: usize,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        SemanticConfig { n: 10, m: 3 }
    }
}

impl SemanticConfig {
    pub fn validate(self) -> Result<Self, SemanticError> {
        if self.m >= 1 && self.m <= self.n {
            Ok(self)
        } else {
            Err(SemanticError::InvalidConfig {
                n: self.n,
                m: self.m,
            })
        }
    }
}

/// Unit-norm embeddings of one domain's curiosities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CuriosityIndex {
    provider_id: String,
    domain: Domain,
    dim: usize,
    ids: Vec<String>,
    rows: Vec<f32>,
}

impl CuriosityIndex {
    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Cache layout, all integers little-endian:
    ///
    /// ```text
    /// magic "CURIIDX1"
    /// u32 provider-id length, provider-id bytes (UTF-8)
    /// u8  domain (0 = cooking, 1 = diy)
    /// u32 dim, u32 count
    /// count x (u32 id length, id bytes)
    /// count x dim f32, row-major
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.rows.len() * 4);
        out.extend_from_slice(INDEX_MAGIC);
        write_str(&mut out, &self.provider_id);
        out.push(match self.domain {
            Domain::Cooking => 0,
            Domain::Diy => 1,
        });
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        for id in &self.ids {
            write_str(&mut out, id);
        }
        for x in &self.rows {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SemanticError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(SemanticError::Cache("bad magic".into()));
        }
        let provider_id = read_str(&mut r)?;
        let mut d = [0u8; 1];
        r.read_exact(&mut d)?;
        let domain = match d[0] {
            0 => Domain::Cooking,
            1 => Domain::Diy,
            x => return Err(SemanticError::Cache(format!("bad domain tag {x}"))),
        };
        let dim = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let ids = (0..count).map(|_| read_str(&mut r)).collect::<Result<Vec<_>, _>>()?;
        if r.len() != count * dim * 4 {
            return Err(SemanticError::Cache(format!(
                "expected {} bytes of rows, found {}",
                count * dim * 4,
                r.len()
            )));
        }
        let rows = r
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(CuriosityIndex {
            provider_id,
            domain,
            dim,
            ids,
            rows,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SemanticError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SemanticError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn read_u32(r: &mut &[u8]) -> Result<u32, SemanticError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut &[u8]) -> Result<String, SemanticError> {
    let len = read_u32(r)? as usize;
    if r.len() < len {
        return Err(SemanticError::Cache("truncated string".into()));
    }
    let (s, rest) = r.split_at(len);
    *r = rest;
    String::from_utf8(s.to_vec()).map_err(|e| SemanticError::Cache(e.to_string()))
}

pub fn build_index(
    c: &CuriosityCollection,
    domain: Domain,
    p: &dyn EmbeddingProvider,
) -> Result<CuriosityIndex, SemanticError> {
    build_index_with(c, domain, p, ExecMode::default())
}

/// [`build_index`] with an explicit execution mode; batches of texts are
/// embedded concurrently in parallel mode.
pub fn build_index_with(
    c: &CuriosityCollection,
    domain: Domain,
    p: &dyn EmbeddingProvider,
    mode: ExecMode,
) -> Result<CuriosityIndex, SemanticError> {
    let items: Vec<_> = c.in_domain(domain).collect();
    if items.is_empty() {
        return Err(SemanticError::EmptyDomain(domain));
    }
    let batches: Vec<&[&crate::store::Curiosity]> = items.chunks(EMBED_BATCH).collect();
    let embedded = par::map(mode, &batches, |batch| {
        let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
        let vectors = p.embed(&texts)?;
        check_vectors(p, texts.len(), &vectors)?;
        Ok::<_, SemanticError>(vectors)
    });
    let mut rows = Vec::with_capacity(items.len() * p.dim());
    for batch in embedded {
        for v in batch? {
            rows.extend_from_slice(&v);
        }
    }
    Ok(CuriosityIndex {
        provider_id: p.id().to_string(),
        domain,
        dim: p.dim(),
        ids: items.iter().map(|c| c.id.clone()).collect(),
        rows,
    })
}

pub fn match_semantic(
    t: &TaskContent,
    idx: &CuriosityIndex,
    collection: &CuriosityCollection,
    cfg: SemanticConfig,
    p: &dyn EmbeddingProvider,
) -> Result<Vec<MatchResult>, SemanticError> {
    match_semantic_with(t, idx, collection, cfg, p, ExecMode::default())
}

pub fn match_semantic_with(
    t: &TaskContent,
    idx: &CuriosityIndex,
    collection: &CuriosityCollection,
    cfg: SemanticConfig,
    p: &dyn EmbeddingProvider,
    mode: ExecMode,
) -> Result<Vec<MatchResult>, SemanticError> {
    let cfg = cfg.validate()?;
    if idx.provider_id != p.id() || idx.dim != p.dim() {
        return Err(SemanticError::ProviderMismatch {
            index: idx.provider_id.clone(),
            index_dim: idx.dim,
            provider: p.id().to_string(),
            provider_dim: p.dim(),
        });
    }
    if idx.domain != t.domain {
        return Err(SemanticError::DomainMismatch {
            index: idx.domain,
            task: t.domain,
        });
    }
    if idx.is_empty() {
        return Err(SemanticError::EmptyDomain(idx.domain));
    }

    let query = encode_task(t, p)?;
    let mut stage1 = par::map_indexed(mode, idx.len(), |i| {
        (idx.ids[i].as_str(), dot(&query, idx.row(i)))
    });
    stage1.sort_by(|a, b| rank_order(*a, *b));
    stage1.truncate(cfg.n);

    let query_text = task_text(t);
    let texts = stage1
        .iter()
        .map(|(id, _)| {
            collection
                .get(id)
                .map(|c| c.text.as_str())
                .ok_or_else(|| SemanticError::UnknownCuriosity(id.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(&str, &str)> = texts.iter().map(|c| (query_text.as_str(), *c)).collect();
    let cross = p.cross_score(&pairs)?;
    if cross.len() != pairs.len() {
        return Err(SemanticError::Shape {
            provider: p.id().to_string(),
            expected: pairs.len(),
            got: cross.len(),
        });
    }

    let mut stage2: Vec<(&str, f64, f64)> = stage1
        .iter()
        .zip(&cross)
        .map(|((id, bi), x)| (*id, *bi, *x))
        .collect();
    stage2.sort_by(|a, b| rank_order((a.0, a.2), (b.0, b.2)));
    stage2.truncate(cfg.m);
    Ok(stage2
        .into_iter()
        .map(|(id, bi, cross)| MatchResult {
            curiosity_id: id.to_string(),
            score: cross,
            method: MatchMethod::Semantic,
            stage_scores: Some(StageScores { bi, cross }),
        })
        .collect())
}
