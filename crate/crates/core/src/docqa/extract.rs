use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChunkIndex, ScoredChunk};
use crate::analysis::analyze;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("pair scorer failed: {0}")]
pub struct ScorerError(pub String);

/// Scores (question, passage) pairs; the cross-encoder slot.
pub trait PairScorer: Send + Sync {
    fn score(&self, question: &str, passages: &[&str], index: &ChunkIndex) -> Result<Vec<f64>, ScorerError>;
}

/// Share of the question's IDF mass found in the passage:
/// `Σ_{t ∈ Q∩P} idf(t) / Σ_{t ∈ Q} idf(t)` over distinct terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalOverlapScorer;

impl PairScorer for LexicalOverlapScorer {
    fn score(&self, question: &str, passages: &[&str], index: &ChunkIndex) -> Result<Vec<f64>, ScorerError> {
        let field = index.sparse();
        let terms = distinct_terms(question, index);
        let total: f64 = terms.iter().map(|t| field.idf(t)).sum();
        Ok(passages
            .iter()
            .map(|p| {
                if total == 0.0 {
                    return 0.0;
                }
                let present = distinct_terms(p, index);
                terms.iter().filter(|t| present.contains(*t)).map(|t| field.idf(t)).sum::<f64>() / total
            })
            .collect())
    }
}

fn distinct_terms(text: &str, index: &ChunkIndex) -> BTreeSet<String> {
    analyze(text, &index.sparse().analyzer).into_iter().collect()
}

/// Scores `candidates` (in fusion order) and stable-sorts them by
/// descending score, so equal scores keep fusion order.
pub fn rerank(question: &str, candidates: &[usize], index: &ChunkIndex, scorer: &dyn PairScorer) -> Result<Vec<ScoredChunk>, ScorerError> {
    let texts: Vec<&str> = candidates.iter().map(|&c| index.chunks()[c].text.as_str()).collect();
    let scores = scorer.score(question, &texts, index)?;
    if scores.len() != candidates.len() {
        return Err(ScorerError(format!("expected {} scores, got {}", candidates.len(), scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ScorerError("non-finite score".into()));
    }
    let mut order: Vec<(usize, f64)> = candidates.iter().copied().zip(scores).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(order.into_iter().enumerate().map(|(i, (chunk_id, score))| ScoredChunk { chunk_id, score, rank: i + 1 }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub chunk_id: usize,
    /// Byte span inside the chunk text.
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub score: f64,
    pub rank: usize,
}

/// Sentence byte spans of `text`. A sentence ends after `.`, `!` or `?`, or at
/// a newline; surrounding whitespace is trimmed off the span.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut push = |s: usize, e: usize| {
        let piece = &text[s..e];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if !trimmed.is_empty() {
            spans.push((s + lead, s + lead + trimmed.len()));
        }
    };
    for (i, ch) in text.char_indices() {
        match ch {
            '.' | '!' | '?' => {
                push(start, i + 1);
                start = i + 1;
            }
            '\n' => {
                push(start, i);
                start = i + 1;
            }
            _ => {}
        }
    }
    push(start, text.len());
    spans
}

/// Picks answer-bearing spans from reranked chunks; the QA-head slot.
pub trait ExtractiveHead: Send + Sync {
    fn extract(&self, question: &str, chunks: &[usize], index: &ChunkIndex, top_p: usize) -> Vec<Passage>;
}

/// Sentence score = sum of IDF over distinct question terms the sentence
/// contains. Ties go to the smaller chunk id, then the earlier offset.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalExtractor;

impl ExtractiveHead for LexicalExtractor {
    fn extract(&self, question: &str, chunks: &[usize], index: &ChunkIndex, top_p: usize) -> Vec<Passage> {
        let field = index.sparse();
        let terms = distinct_terms(question, index);
        let mut scored = Vec::new();
        for &chunk_id in chunks {
            let text = &index.chunks()[chunk_id].text;
            for (start, end) in split_sentences(text) {
                let present = distinct_terms(&text[start..end], index);
                let score: f64 = terms.iter().filter(|t| present.contains(*t)).map(|t| field.idf(t)).sum();
                if score > 0.0 {
                    scored.push((chunk_id, start, end, score));
                }
            }
        }
        scored.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        scored.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        scored
            .into_iter()
            .take(top_p)
            .enumerate()
            .map(|(i, (chunk_id, start, end, score))| Passage {
                chunk_id,
                start,
                end,
                text: index.chunks()[chunk_id].text[start..end].to_string(),
                score,
                rank: i + 1,
            })
            .collect()
    }
}
