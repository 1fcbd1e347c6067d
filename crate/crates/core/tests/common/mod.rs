//! Fixture loaders and independent reference implementations used as test
//! oracles. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use funnel_core::corpus::{load_corpus_file, Corpus};
use funnel_core::engine::SearchEngine;
use funnel_core::expansion::{load_lexicon, load_ontology, Expander};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn load_engine(set: &str) -> SearchEngine {
    let dir = data_dir().join(set);
    let loaded = load_corpus_file(dir.join("corpus.jsonl")).unwrap();
    assert!(loaded.errors.is_empty(), "{:?}", loaded.errors);
    let (ontology, warnings) = load_ontology(dir.join("ontology.jsonl")).unwrap();
    assert!(warnings.is_empty());
    let lexicon = load_lexicon(dir.join("verbs.tsv")).unwrap();
    SearchEngine::new(Arc::new(loaded.corpus), Expander::new(ontology, lexicon))
}

pub fn load_corpus(set: &str) -> Corpus {
    load_corpus_file(data_dir().join(set).join("corpus.jsonl")).unwrap().corpus
}

/// BM25 straight from token lists: N and avgdl over non-empty documents,
/// idf = ln(1 + (N - df + 0.5)/(df + 0.5)).
pub fn brute_bm25(docs: &[Vec<String>], query: &[String], doc: usize, k1: f64, b: f64) -> f64 {
    let nonempty: Vec<&Vec<String>> = docs.iter().filter(|d| !d.is_empty()).collect();
    let n = nonempty.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let avgdl = nonempty.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let len = docs[doc].len() as f64;
    let mut score = 0.0;
    for term in query {
        let tf = docs[doc].iter().filter(|t| *t == term).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = nonempty.iter().filter(|d| d.contains(term)).count() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
    }
    score
}

/// RRF by enumeration: every item of the union, summing 1/(k + first
/// position + 1) over each list that contains it; sorted by score desc,
/// then id asc.
pub fn brute_rrf<T: Ord + Clone>(lists: &[Vec<T>], k: f64) -> Vec<(T, f64)> {
    let mut items: Vec<T> = lists.iter().flatten().cloned().collect();
    items.sort();
    items.dedup();
    let mut scored: Vec<(T, f64)> = items
        .into_iter()
        .map(|item| {
            let mut s = 0.0;
            for list in lists {
                if let Some(pos) = list.iter().position(|x| *x == item) {
                    s += 1.0 / (k + (pos + 1) as f64);
                }
            }
            (item, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

/// nDCG with an explicit gain/discount loop.
pub fn brute_ndcg(ranked: &[String], relevant: &HashSet<String>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (i, doc) in ranked.iter().take(k).enumerate() {
        let gain = if relevant.contains(doc) { 1.0 } else { 0.0 };
        dcg += gain / ((i + 1) as f64 + 1.0).log2();
    }
    let mut idcg = 0.0;
    for i in 0..k.min(relevant.len()) {
        idcg += 1.0 / ((i + 1) as f64 + 1.0).log2();
    }
    dcg / idcg
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

pub fn term_counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_default() += 1;
    }
    m
}
