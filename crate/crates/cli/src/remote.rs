//! HTTP embedding provider.
//!
//! Protocol (JSON over POST):
//!
//! * `{base}/embed`  `{"texts": [..]}`            -> `{"vectors": [[f32; dim], ..]}`
//! * `{base}/cross`  `{"pairs": [[query, doc], ..]}` -> `{"scores": [f64, ..]}`
//!
//! Vectors must be unit-normalised; the engine checks this.

use std::time::Duration;

use curio_core::semantic::{EmbeddingProvider, ProviderError};
use serde::{Deserialize, Serialize};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

#[derive(Serialize)]
struct CrossRequest<'a> {
    pairs: Vec<[&'a str; 2]>,
}

#[derive(Deserialize)]
struct CrossResponse {
    scores: Vec<f64>,
}

pub struct RemoteProvider {
    id: String,
    base: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider").field("base", &self.base).field("dim", &self.dim).finish()
    }
}

impl RemoteProvider {
    pub fn new(base_url: &str, dim: usize) -> anyhow::Result<Self> {
        let base = base_url.trim_end_matches('/').to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()?;
        Ok(RemoteProvider {
            id: format!("remote:{base}"),
            base,
            dim,
            client,
        })
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> Result<Resp, ProviderError> {
        let err = |m: String| ProviderError::new(self.id.clone(), m);
        let resp = self
            .client
            .post(format!("{}/{path}", self.base))
            .json(body)
            .send()
            .map_err(|e| err(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(err(format!("{path}: HTTP {status}: {text}")));
        }
        resp.json().map_err(|e| err(format!("{path}: bad response: {e}")))
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let r: EmbedResponse = self.post("embed", &EmbedRequest { texts })?;
        Ok(r.vectors)
    }

    fn cross_score(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        let body = CrossRequest {
            pairs: pairs.iter().map(|(a, b)| [*a, *b]).collect(),
        };
        let r: CrossResponse = self.post("cross", &body)?;
        Ok(r.scores)
    }
}
