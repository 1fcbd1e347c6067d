use serde::Serialize;

use super::ChunkIndex;
use crate::embed::{cosine, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopHit {
    pub chunk_id: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopResult {
    pub hop: usize,
    #[serde(skip)]
    pub query_vector: Vec<f32>,
    pub selected: Vec<HopHit>,
}

/// Chunks ranked by cosine to `query`, ties by chunk id, skipping `exclude`.
pub(crate) fn dense_ranking(query: &[f32], index: &ChunkIndex, exclude: &[bool]) -> Vec<HopHit> {
    let mut hits: Vec<HopHit> = index
        .embeddings()
        .iter()
        .enumerate()
        .filter(|(i, _)| !exclude[*i])
        .map(|(i, e)| HopHit { chunk_id: i, score: cosine(query, e.values()) })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.chunk_id.cmp(&b.chunk_id)));
    hits
}

/// Iterative dense retrieval. Hop 1 uses the question vector `v1`; hop `i`
/// takes the `per_hop` best unselected chunks under `v_i`, and the next query
/// is `normalize(alpha·v1 + (1−alpha)·centroid(hop i selections))`. Stops
/// once every chunk has been selected, so fewer than `hops` results may come
/// back.
pub fn multihop_dense_search(question: &EmbeddingVector, index: &ChunkIndex, hops: usize, per_hop: usize, alpha: f64) -> Vec<HopResult> {
    let n = index.len();
    let dim = question.dimension();
    let mut taken = vec![false; n];
    let mut remaining = n;
    let mut query: Vec<f32> = question.values().to_vec();
    let mut results = Vec::new();
    for hop in 1..=hops {
        if remaining == 0 || per_hop == 0 {
            break;
        }
        let mut selected = dense_ranking(&query, index, &taken);
        selected.truncate(per_hop);
        for h in &selected {
            taken[h.chunk_id] = true;
        }
        remaining -= selected.len();

        let mut centroid = vec![0.0f64; dim];
        for h in &selected {
            for (c, &v) in centroid.iter_mut().zip(index.embeddings()[h.chunk_id].values()) {
                *c += v as f64;
            }
        }
        let count = selected.len() as f64;
        let blended: Vec<f32> =
            question.values().iter().zip(&centroid).map(|(&q, &c)| (alpha * q as f64 + (1.0 - alpha) * c / count) as f32).collect();
        let next = EmbeddingVector::normalized(blended).values().to_vec();
        results.push(HopResult { hop, query_vector: std::mem::replace(&mut query, next), selected });
    }
    results
}
