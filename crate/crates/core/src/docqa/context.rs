use serde::{Deserialize, Serialize};

use super::dense::HopResult;
use super::extract::Passage;
use super::fusion::reorder_lost_in_middle;
use super::{ChunkIndex, FusionRow};
use crate::analysis::word_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub chunk_id: usize,
    pub score: f64,
    pub excerpt: String,
    /// Best extracted passage inside this chunk, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub hop: usize,
    pub evidence: Vec<Evidence>,
}

/// First `max_chars` characters of `text`, on a char boundary.
pub fn excerpt(text: &str, max_chars: usize) -> String {
    match text.char_indices().nth(max_chars) {
        Some((cut, _)) => text[..cut].to_string(),
        None => text.to_string(),
    }
}

/// One step per non-empty hop, evidence in hop order.
pub fn assemble_reasoning_chain(hops: &[HopResult], passages: &[Passage], index: &ChunkIndex, max_chars: usize) -> Vec<ChainStep> {
    hops.iter()
        .filter(|h| !h.selected.is_empty())
        .map(|h| ChainStep {
            hop: h.hop,
            evidence: h
                .selected
                .iter()
                .map(|hit| Evidence {
                    chunk_id: hit.chunk_id,
                    score: hit.score,
                    excerpt: excerpt(&index.chunks()[hit.chunk_id].text, max_chars),
                    passage: passages.iter().filter(|p| p.chunk_id == hit.chunk_id).min_by_key(|p| p.rank).map(|p| p.text.clone()),
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedChunk {
    pub chunk_id: usize,
    pub text: String,
    pub token_count: usize,
    pub truncated: bool,
}

/// Generator input: chunks in primacy/recency order within a token budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextPack {
    pub chunks: Vec<PackedChunk>,
    pub total_tokens: usize,
    pub budget: usize,
}

impl ContextPack {
    pub fn chunk_ids(&self) -> Vec<usize> {
        self.chunks.iter().map(|c| c.chunk_id).collect()
    }
}

/// Keeps the longest prefix of the fused order that fits `budget` tokens,
/// then applies the lost-in-the-middle reorder. When not even the best chunk
/// fits, it is cut down to its first `budget` tokens.
pub fn pack_context(fused: &[FusionRow], index: &ChunkIndex, budget: usize) -> ContextPack {
    let budget = budget.max(1);
    let mut kept = Vec::new();
    let mut total = 0;
    for row in fused {
        let chunk = &index.chunks()[row.chunk_id];
        if total + chunk.token_count > budget {
            break;
        }
        total += chunk.token_count;
        kept.push(PackedChunk { chunk_id: chunk.chunk_id, text: chunk.text.clone(), token_count: chunk.token_count, truncated: false });
    }
    if kept.is_empty() {
        if let Some(row) = fused.first() {
            let chunk = &index.chunks()[row.chunk_id];
            let tokens = word_tokens(&chunk.text);
            let cut = tokens.get(budget - 1).map(|t| t.end).unwrap_or(chunk.text.len());
            let text = chunk.text[..cut].to_string();
            let token_count = crate::analysis::token_count(&text);
            total = token_count;
            kept.push(PackedChunk { chunk_id: chunk.chunk_id, text, token_count, truncated: true });
        }
    }
    ContextPack { chunks: reorder_lost_in_middle(&kept), total_tokens: total, budget }
}

/// Turns pipeline output into text; the generation slot.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, question: &str, passages: &[Passage], context: &ContextPack) -> Result<String, String>;
}

/// `Based on [c1, c4]: <top passages>`; no model involved.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

impl TextGenerator for TemplateGenerator {
    fn generate(&self, _question: &str, passages: &[Passage], context: &ContextPack) -> Result<String, String> {
        let mut refs: Vec<usize> = passages.iter().map(|p| p.chunk_id).collect();
        if refs.is_empty() {
            refs = context.chunk_ids();
        }
        refs.dedup();
        let refs = refs.iter().map(|c| format!("c{c}")).collect::<Vec<_>>().join(", ");
        let body = if passages.is_empty() {
            context.chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ")
        } else {
            passages.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ")
        };
        Ok(format!("Based on [{refs}]: {body}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excerpt_respects_char_boundaries() {
        assert_eq!(excerpt("héllo", 2), "hé");
        assert_eq!(excerpt("abc", 280), "abc");
    }
}
