//! In-document question answering over one selected long document.
//!
//! ```text
//! chunks ─┬─ BM25 top-m ─────────────┐
//!         └─ dense hop 1 → 2 → 3 ────┴─ RRF ─┬─ rerank ─ extract ─ (chain)
//!                                            └─ budget ─ lost-in-the-middle pack
//! ```
//!
//! Each stage appends one [`TraceEvent`](crate::trace::TraceEvent) (one per
//! dense hop).

mod context;
mod dense;
mod extract;
mod fusion;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{
    assemble_reasoning_chain, excerpt, pack_context, ChainStep, ContextPack, Evidence, PackedChunk, TemplateGenerator, TextGenerator,
};
pub use dense::{multihop_dense_search, HopHit, HopResult};
pub use extract::{rerank, split_sentences, ExtractiveHead, LexicalExtractor, LexicalOverlapScorer, PairScorer, Passage, ScorerError};
pub use fusion::{fuse_rrf, reorder_lost_in_middle, Fused};

use crate::analysis::{analyze, AnalyzerConfig};
use crate::corpus::{chunk_document, Chunk, ChunkPolicy, Document};
use crate::embed::{EmbedError, Embedder, EmbeddingVector};
use crate::index::{Bm25Params, FieldIndex};
use crate::trace::{Stage, StageEvent, Trace, TraceEvent};

#[derive(Debug, Error)]
pub enum DocQaError {
    #[error("embedding failed: {0}")]
    EmbeddingFailure(#[from] EmbedError),
    #[error(transparent)]
    ScorerFailure(#[from] ScorerError),
    #[error("question is empty")]
    EmptyQuestion,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// All chunks of one document with a single-field BM25 index over their
/// texts and one embedding per chunk. Immutable once built.
#[derive(Debug, Clone)]
pub struct ChunkIndex {
    doc_id: String,
    chunks: Vec<Chunk>,
    sparse: FieldIndex,
    embeddings: Vec<EmbeddingVector>,
    params: Bm25Params,
}

impl ChunkIndex {
    pub fn build(doc: &Document, embedder: &dyn Embedder, policy: &ChunkPolicy) -> Result<Self, DocQaError> {
        let chunks = chunk_document(doc, policy);
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        let sparse = FieldIndex::build("text", AnalyzerConfig::english(), texts.iter().copied());
        let embeddings = embedder.embed_batch(&texts)?;
        if embeddings.len() != chunks.len() {
            return Err(EmbedError::BadResponse(format!("expected {} vectors, got {}", chunks.len(), embeddings.len())).into());
        }
        if let Some(bad) = embeddings.iter().find(|e| e.dimension() != embedder.dimension()) {
            return Err(EmbedError::DimensionMismatch { left: embedder.dimension(), right: bad.dimension() }.into());
        }
        Ok(Self { doc_id: doc.id.clone(), chunks, sparse, embeddings, params: Bm25Params::default() })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn sparse(&self) -> &FieldIndex {
        &self.sparse
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: usize,
    pub score: f64,
    pub rank: usize,
}

/// BM25 over chunk texts; chunks with no question term are left out.
pub fn sparse_chunk_search(question: &str, index: &ChunkIndex, m: usize) -> Vec<ScoredChunk> {
    let tokens = analyze(question, &index.sparse.analyzer);
    let mut acc = std::collections::HashMap::new();
    index.sparse.accumulate(&tokens, &index.params, 1.0, &mut acc);
    let mut hits: Vec<(usize, f64)> = acc.into_iter().map(|(d, s)| (d as usize, s)).collect();
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    hits.truncate(m);
    hits.into_iter().enumerate().map(|(i, (chunk_id, score))| ScoredChunk { chunk_id, score, rank: i + 1 }).collect()
}

/// One row of the fusion table shown to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    pub chunk_id: usize,
    pub fused: f64,
    pub sparse_rank: Option<usize>,
    pub dense_rank: Option<usize>,
}

/// Fuses the sparse list with the dense hops flattened in hop order.
pub fn fuse_sparse_dense(sparse: &[ScoredChunk], hops: &[HopResult], k_rrf: f64) -> Vec<FusionRow> {
    let sparse_ids: Vec<usize> = sparse.iter().map(|s| s.chunk_id).collect();
    let dense_ids: Vec<usize> = hops.iter().flat_map(|h| h.selected.iter().map(|s| s.chunk_id)).collect();
    fuse_rrf(&[sparse_ids, dense_ids], k_rrf)
        .into_iter()
        .map(|f| FusionRow { chunk_id: f.id, fused: f.score, sparse_rank: f.ranks[0], dense_rank: f.ranks[1] })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerOutput {
    /// Reranked chunks and extracted passages.
    Extractive,
    /// Extractive output plus the per-hop evidence chain.
    Chain,
    /// RRF order packed into a token budget for a generator.
    Packed,
}

impl AnswerOutput {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerOutput::Extractive => "extractive",
            AnswerOutput::Chain => "chain",
            AnswerOutput::Packed => "packed",
        }
    }

    /// Stages a run with this output executes, in order.
    pub fn stages(self, hops_run: usize) -> Vec<Stage> {
        let mut stages = vec![Stage::Chunking, Stage::Sparse];
        stages.extend(vec![Stage::DenseHop; hops_run]);
        stages.push(Stage::Fusion);
        match self {
            AnswerOutput::Extractive => stages.extend([Stage::Rerank, Stage::Extract]),
            AnswerOutput::Chain => stages.extend([Stage::Rerank, Stage::Extract, Stage::Chain]),
            AnswerOutput::Packed => stages.push(Stage::Pack),
        }
        stages
    }
}

impl fmt::Display for AnswerOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnswerOutput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "extractive" => Ok(AnswerOutput::Extractive),
            "chain" => Ok(AnswerOutput::Chain),
            "packed" => Ok(AnswerOutput::Packed),
            _ => Err(format!("unknown output {s:?} (expected extractive, chain or packed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DocQaConfig {
    pub chunk_policy: ChunkPolicy,
    pub hops: usize,
    pub per_hop: usize,
    pub alpha: f64,
    pub sparse_depth: usize,
    pub k_rrf: f64,
    pub top_p: usize,
    pub context_budget: usize,
    pub excerpt_chars: usize,
}

impl Default for DocQaConfig {
    fn default() -> Self {
        Self {
            chunk_policy: ChunkPolicy::default(),
            hops: 3,
            per_hop: 5,
            alpha: 0.5,
            sparse_depth: 15,
            k_rrf: 60.0,
            top_p: 3,
            context_budget: 1024,
            excerpt_chars: 280,
        }
    }
}

impl DocQaConfig {
    pub fn validate(&self) -> Result<(), DocQaError> {
        let bad = |m: &str| Err(DocQaError::Config(m.to_string()));
        if self.hops == 0 {
            return bad("hops must be at least 1");
        }
        if self.per_hop == 0 || self.sparse_depth == 0 {
            return bad("per_hop and sparse_depth must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.context_budget == 0 {
            return bad("context_budget must be at least 1");
        }
        if self.k_rrf.is_nan() || self.k_rrf < 0.0 {
            return bad("k_rrf must be non-negative");
        }
        ChunkPolicy::new(self.chunk_policy.max_tokens, self.chunk_policy.overlap).map_err(|e| DocQaError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Pipeline output in its export shape
/// `{question, passages, chain, context, trace}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerBundle {
    pub question: String,
    pub output: AnswerOutput,
    pub passages: Vec<Passage>,
    pub chain: Vec<ChainStep>,
    pub context: Vec<usize>,
    #[serde(skip)]
    pub pack: Option<ContextPack>,
    pub trace: Vec<TraceEvent>,
}

impl AnswerBundle {
    pub fn stages(&self) -> Vec<Stage> {
        self.trace.iter().map(|e| e.stage).collect()
    }
}

#[derive(Serialize)]
struct ChunkSummary<'a> {
    chunk_id: usize,
    source_field: crate::corpus::SourceField,
    #[serde(skip_serializing_if = "Option::is_none")]
    section_index: Option<usize>,
    token_count: usize,
    excerpt: &'a str,
}

/// The block-two pipeline with its pluggable providers.
#[derive(Clone)]
pub struct DocQa {
    config: DocQaConfig,
    embedder: Arc<dyn Embedder>,
    scorer: Arc<dyn PairScorer>,
    head: Arc<dyn ExtractiveHead>,
}

impl fmt::Debug for DocQa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DocQa").field("config", &self.config).field("embedder", &self.embedder.cache_key()).finish()
    }
}

impl DocQa {
    pub fn new(config: DocQaConfig, embedder: Arc<dyn Embedder>) -> Result<Self, DocQaError> {
        config.validate()?;
        Ok(Self { config, embedder, scorer: Arc::new(LexicalOverlapScorer), head: Arc::new(LexicalExtractor) })
    }

    pub fn with_scorer(mut self, scorer: Arc<dyn PairScorer>) -> Self {
        self.scorer = scorer;
        self
    }

    pub fn with_extractive_head(mut self, head: Arc<dyn ExtractiveHead>) -> Self {
        self.head = head;
        self
    }

    pub fn config(&self) -> &DocQaConfig {
        &self.config
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn build_index(&self, doc: &Document) -> Result<ChunkIndex, DocQaError> {
        ChunkIndex::build(doc, self.embedder.as_ref(), &self.config.chunk_policy)
    }

    pub fn answer_document(&self, doc: &Document, question: &str, output: AnswerOutput) -> Result<AnswerBundle, DocQaError> {
        let index = self.build_index(doc)?;
        self.answer(&index, question, output)
    }

    pub fn answer(&self, index: &ChunkIndex, question: &str, output: AnswerOutput) -> Result<AnswerBundle, DocQaError> {
        if question.trim().is_empty() {
            return Err(DocQaError::EmptyQuestion);
        }
        let cfg = &self.config;
        let mut trace = Trace::new();
        let summaries: Vec<ChunkSummary> = index
            .chunks()
            .iter()
            .map(|c| ChunkSummary {
                chunk_id: c.chunk_id,
                source_field: c.source_field,
                section_index: c.section_index,
                token_count: c.token_count,
                excerpt: &c.text[..c.text.char_indices().nth(80).map_or(c.text.len(), |(i, _)| i)],
            })
            .collect();
        trace.push(StageEvent::new(Stage::Chunking, serde_json::json!({ "doc_id": index.doc_id(), "chunks": summaries })));

        let sparse = sparse_chunk_search(question, index, cfg.sparse_depth);
        trace.push(StageEvent::new(Stage::Sparse, &sparse));

        let qvec = self.embedder.embed(question)?;
        let hops = multihop_dense_search(&qvec, index, cfg.hops, cfg.per_hop, cfg.alpha);
        for hop in &hops {
            trace.push(StageEvent::new(Stage::DenseHop, hop));
        }

        let fused = fuse_sparse_dense(&sparse, &hops, cfg.k_rrf);
        trace.push(StageEvent::new(Stage::Fusion, &fused));

        let mut passages = Vec::new();
        let mut chain = Vec::new();
        let mut pack = None;
        match output {
            AnswerOutput::Extractive | AnswerOutput::Chain => {
                let candidates: Vec<usize> = fused.iter().map(|f| f.chunk_id).collect();
                let reranked = rerank(question, &candidates, index, self.scorer.as_ref())?;
                trace.push(StageEvent::new(Stage::Rerank, &reranked));
                let order: Vec<usize> = reranked.iter().map(|r| r.chunk_id).collect();
                passages = self.head.extract(question, &order, index, cfg.top_p);
                trace.push(StageEvent::new(Stage::Extract, &passages));
                if output == AnswerOutput::Chain {
                    chain = assemble_reasoning_chain(&hops, &passages, index, cfg.excerpt_chars);
                    trace.push(StageEvent::new(Stage::Chain, &chain));
                }
            }
            AnswerOutput::Packed => {
                let packed = pack_context(&fused, index, cfg.context_budget);
                trace.push(StageEvent::new(Stage::Pack, &packed));
                pack = Some(packed);
            }
        }
        let context = pack.as_ref().map(ContextPack::chunk_ids).unwrap_or_default();
        Ok(AnswerBundle { question: question.to_string(), output, passages, chain, context, pack, trace: trace.into_events() })
    }
}
