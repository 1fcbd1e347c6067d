use std::collections::HashMap;

use serde::Serialize;

/// One fused item with its 1-based rank in each input list (`None` when
/// the list does not contain it).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fused<T> {
    pub id: T,
    pub score: f64,
    pub ranks: Vec<Option<usize>>,
}

/// Reciprocal rank fusion: `score(c) = Σ 1/(k_rrf + rank(c))` over the lists
/// containing `c`. Only the first occurrence of an id in a list counts.
/// Output is sorted by descending score, ties by ascending id.
pub fn fuse_rrf<T: Clone + Ord + std::hash::Hash>(lists: &[Vec<T>], k_rrf: f64) -> Vec<Fused<T>> {
    let mut slots: HashMap<T, usize> = HashMap::new();
    let mut out: Vec<Fused<T>> = Vec::new();
    for (li, list) in lists.iter().enumerate() {
        for (pos, id) in list.iter().enumerate() {
            let idx = *slots.entry(id.clone()).or_insert_with(|| {
                out.push(Fused { id: id.clone(), score: 0.0, ranks: vec![None; lists.len()] });
                out.len() - 1
            });
            let entry = &mut out[idx];
            if entry.ranks[li].is_none() {
                let rank = pos + 1;
                entry.ranks[li] = Some(rank);
                entry.score += 1.0 / (k_rrf + rank as f64);
            }
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    out
}

/// Places the best items at both ends of the context: odd ranks in
/// ascending order, then even ranks in descending order.
/// `[r1, r2, r3, r4, r5]` becomes `[r1, r3, r5, r4, r2]`.
pub fn reorder_lost_in_middle<T: Clone>(ranked: &[T]) -> Vec<T> {
    let front = ranked.iter().step_by(2);
    let back = ranked.iter().skip(1).step_by(2).collect::<Vec<_>>().into_iter().rev();
    front.chain(back).cloned().collect()
}
