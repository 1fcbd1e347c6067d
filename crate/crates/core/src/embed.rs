//! Dense vectors for in-document retrieval.
//!
//! [`ReferenceEmbedder`] is a deterministic hashed bag-of-words encoder so the
//! pipeline runs without any model. [`RemoteEmbedder`] talks to an external
//! sentence-encoder service over HTTP:
//!
//! ```text
//! POST <endpoint>  {"texts": [string]}  ->  200 {"vectors": [[number]]}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, AnalyzerConfig};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding request timed out after {0:?}")]
    Timeout(Duration),
    #[error("embedding service unreachable: {0}")]
    Transport(String),
    #[error("bad embedding response: {0}")]
    BadResponse(String),
    #[error("invalid embedder config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    /// Set when the input had no tokens (or the provider returned all zeros).
    zero: bool,
}

impl EmbeddingVector {
    /// L2-normalizes `values`; an all-zero input stays zero and is flagged.
    pub fn normalized(mut values: Vec<f32>) -> Self {
        let norm = values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            values.iter_mut().for_each(|v| *v = 0.0);
            return Self { values, zero: true };
        }
        for v in &mut values {
            *v = (*v as f64 / norm) as f32;
        }
        Self { values, zero: false }
    }

    pub fn zeros(dimension: usize) -> Self {
        Self { values: vec![0.0; dimension], zero: true }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    Ok(cosine(a.values(), b.values()))
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Anything that can turn a batch of texts into vectors of one dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Identifies the embedding space; equal keys mean interchangeable vectors.
    fn cache_key(&self) -> String;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or_else(|| EmbedError::BadResponse("empty batch result".into()))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    seed.to_le_bytes().iter().chain(bytes).fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Hashed bag-of-tokens. Each analyzer token lands on coordinate
/// `h mod d` with sign taken from the bit just above the coordinate
/// (`(h / d) & 1`), where `h` is 64-bit FNV-1a over the seed's little-endian
/// bytes followed by the token's UTF-8 bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEmbedder {
    dimension: usize,
    seed: u64,
    analyzer: AnalyzerConfig,
}

impl ReferenceEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, EmbedError> {
        if dimension < 8 {
            return Err(EmbedError::Config(format!("dimension must be at least 8, got {dimension}")));
        }
        Ok(Self { dimension, seed, analyzer: AnalyzerConfig::english() })
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0f32; self.dimension];
        let d = self.dimension as u64;
        for token in analyze(text, &self.analyzer) {
            let h = fnv1a(self.seed, token.as_bytes());
            let coord = (h % d) as usize;
            let sign = if (h / d) & 1 == 0 { 1.0 } else { -1.0 };
            values[coord] += sign;
        }
        EmbeddingVector::normalized(values)
    }
}

impl Default for ReferenceEmbedder {
    fn default() -> Self {
        Self::new(256, 0).expect("valid default")
    }
}

impl Embedder for ReferenceEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn cache_key(&self) -> String {
        format!("reference:d={}:seed={}", self.dimension, self.seed)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for an external embedding service. Large batches are split into
/// sub-batches of `batch_size` and sent with at most `max_in_flight`
/// concurrent requests; output order always matches input order.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: String,
    dimension: usize,
    timeout: Duration,
    batch_size: usize,
    max_in_flight: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize, timeout: Duration) -> Result<Self, EmbedError> {
        if dimension < 8 {
            return Err(EmbedError::Config(format!("dimension must be at least 8, got {dimension}")));
        }
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Ok(Self { endpoint: endpoint.into(), dimension, timeout, batch_size: 64, max_in_flight: 4, agent })
    }

    pub fn with_parallelism(mut self, batch_size: usize, max_in_flight: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self.max_in_flight = max_in_flight.max(1);
        self
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let response = self.agent.post(&self.endpoint).send_json(EmbedRequest { texts }).map_err(|e| match e {
            ureq::Error::Status(code, _) => EmbedError::BadResponse(format!("HTTP {code}")),
            ureq::Error::Transport(t) => {
                let timed_out = std::error::Error::source(&t)
                    .and_then(|s| s.downcast_ref::<std::io::Error>())
                    .is_some_and(|io| matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
                if timed_out {
                    EmbedError::Timeout(self.timeout)
                } else {
                    EmbedError::Transport(t.to_string())
                }
            }
        })?;
        let body: EmbedResponse = response.into_json().map_err(|e| {
            if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                EmbedError::Timeout(self.timeout)
            } else {
                EmbedError::BadResponse(e.to_string())
            }
        })?;
        if body.vectors.len() != texts.len() {
            return Err(EmbedError::BadResponse(format!("expected {} vectors, got {}", texts.len(), body.vectors.len())));
        }
        body.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(EmbedError::BadResponse(format!("expected dimension {}, got {}", self.dimension, v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::BadResponse("non-finite vector component".into()));
                }
                Ok(EmbeddingVector::normalized(v))
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn cache_key(&self) -> String {
        format!("remote:{}:d={}", self.endpoint, self.dimension)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[&str]> = texts.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in batches.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<EmbeddingVector>, EmbedError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave.iter().map(|batch| scope.spawn(move || self.request(batch))).collect();
                handles.into_iter().map(|h| h.join().expect("embedding worker panicked")).collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Reference,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dimension: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Reference,
            dimension: 256,
            seed: 0,
            endpoint: None,
            timeout_ms: 10_000,
            batch_size: 64,
            max_in_flight: 4,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<std::sync::Arc<dyn Embedder>, EmbedError> {
        Ok(match self.kind {
            EmbedderKind::Reference => std::sync::Arc::new(ReferenceEmbedder::new(self.dimension, self.seed)?),
            EmbedderKind::Remote => {
                let endpoint = self.endpoint.clone().ok_or_else(|| EmbedError::Config("remote embedder needs an endpoint".into()))?;
                std::sync::Arc::new(
                    RemoteEmbedder::new(endpoint, self.dimension, Duration::from_millis(self.timeout_ms))?
                        .with_parallelism(self.batch_size, self.max_in_flight),
                )
            }
        })
    }
}
