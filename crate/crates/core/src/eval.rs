//! nDCG@10 evaluation over MLDR-style files and the storage-cost estimator.
//!
//! File formats:
//! - queries: `query_id<TAB>query text`
//! - qrels: `query_id<TAB>doc_id<TAB>grade`
//! - corpus: the corpus line format

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_corpus_file, Corpus, CorpusError};
use crate::engine::SearchEngine;
use crate::expansion::Strategy;

/// nDCG cutoff used throughout the harness.
pub const NDCG_CUTOFF: usize = 10;
/// Results retrieved per query.
pub const RETRIEVAL_DEPTH: usize = 1000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query {0:?} has no relevant document")]
    NoPositives(String),
    #[error("k must be at least 1")]
    ZeroCutoff,
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Binary-relevance nDCG: `DCG = Σ_{i≤k} rel_i / log2(i+1)` normalised by
/// the DCG of all positives ranked first.
pub fn ndcg_at_k(ranked: &[impl AsRef<str>], relevant: &HashSet<String>, k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroCutoff);
    }
    if relevant.is_empty() {
        return Err(EvalError::NoPositives(String::new()));
    }
    let dcg: f64 =
        ranked.iter().take(k).enumerate().filter(|(_, d)| relevant.contains(d.as_ref())).map(|(i, _)| 1.0 / ((i + 2) as f64).log2()).sum();
    let ideal: f64 = (0..relevant.len().min(k)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    Ok(dcg / ideal)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuerySet {
    queries: Vec<(String, String)>,
}

impl QuerySet {
    pub fn new(queries: Vec<(String, String)>) -> Result<Self, String> {
        let mut seen = HashSet::new();
        for (id, _) in &queries {
            if !seen.insert(id.as_str()) {
                return Err(format!("duplicate query id {id:?}"));
            }
        }
        Ok(Self { queries })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.queries.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Relevant documents per query. Grades above zero count as relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u8) {
        self.grades.entry(query_id.to_string()).or_default().insert(doc_id.to_string(), grade.min(1));
    }

    pub fn relevant(&self, query_id: &str) -> HashSet<String> {
        self.grades.get(query_id).map(|m| m.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d.clone()).collect()).unwrap_or_default()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, u8)> {
        self.grades.iter().flat_map(|(q, m)| m.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub ndcg_at_10: f64,
    pub returned: usize,
    pub empty: bool,
    /// Rank of the first relevant document within the retrieved list.
    pub first_relevant_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub ndcg_at_10: f64,
    pub empty_result_rate: f64,
    pub query_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    pub per_query: Vec<QueryRecord>,
    /// Retrieved doc ids per query, in `per_query` order.
    pub rankings: Vec<Vec<String>>,
    pub ndcg_at_10: f64,
    pub empty_result_rate: f64,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            strategy: self.strategy,
            ndcg_at_10: self.ndcg_at_10,
            empty_result_rate: self.empty_result_rate,
            query_count: self.per_query.len(),
        }
    }

    /// Line-delimited report: one record per query, then the summary record.
    pub fn write_report<W: Write>(&self, mut out: W) -> io::Result<()> {
        for record in &self.per_query {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &self.summary())?;
        out.write_all(b"\n")
    }
}

/// Runs every query through expansion and retrieval at `depth`. Per-query
/// failures are recorded (scoring 0) instead of aborting the run. Queries
/// with no results score 0 and count toward `empty_result_rate`.
pub fn evaluate_run(engine: &SearchEngine, queries: &QuerySet, qrels: &Qrels, strategy: Strategy, depth: usize) -> RunResult {
    let rows: Vec<(QueryRecord, Vec<String>)> = queries
        .queries
        .par_iter()
        .map(|(qid, text)| {
            let relevant = qrels.relevant(qid);
            let (ranking, error) = match engine.search(text, strategy, depth) {
                Ok(outcome) => (outcome.hits.into_iter().map(|h| h.doc_id).collect::<Vec<_>>(), None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            let (ndcg, error) = match ndcg_at_k(&ranking, &relevant, NDCG_CUTOFF) {
                Ok(v) => (v, error),
                Err(EvalError::NoPositives(_)) => (0.0, error.or_else(|| Some(EvalError::NoPositives(qid.clone()).to_string()))),
                Err(e) => (0.0, Some(e.to_string())),
            };
            let record = QueryRecord {
                query_id: qid.clone(),
                ndcg_at_10: ndcg,
                returned: ranking.len(),
                empty: ranking.is_empty(),
                first_relevant_rank: ranking.iter().position(|d| relevant.contains(d)).map(|p| p + 1),
                error,
            };
            (record, ranking)
        })
        .collect();
    let n = rows.len();
    let (per_query, rankings): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mean = |f: &dyn Fn(&QueryRecord) -> f64| if n == 0 { 0.0 } else { per_query.iter().map(f).sum::<f64>() / n as f64 };
    let ndcg_at_10 = mean(&|r| r.ndcg_at_10);
    let empty_result_rate = mean(&|r| if r.empty { 1.0 } else { 0.0 });
    RunResult { strategy, per_query, rankings, ndcg_at_10, empty_result_rate }
}

fn open(path: &Path) -> Result<BufReader<File>, EvalError> {
    File::open(path).map(BufReader::new).map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}

pub fn read_queries<R: BufRead>(reader: R, file: &str) -> Result<QuerySet, EvalError> {
    let mut queries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io { path: file.to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: &str| EvalError::Parse { file: file.to_string(), line: i + 1, message: message.to_string() };
        let (id, text) = line.split_once('\t').ok_or_else(|| parse("expected query_id<TAB>text"))?;
        if id.trim().is_empty() {
            return Err(parse("empty query id"));
        }
        queries.push((id.trim().to_string(), text.trim().to_string()));
    }
    QuerySet::new(queries).map_err(|m| EvalError::Parse { file: file.to_string(), line: 0, message: m })
}

pub fn read_qrels<R: BufRead>(reader: R, file: &str) -> Result<Qrels, EvalError> {
    let mut qrels = Qrels::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io { path: file.to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| EvalError::Parse { file: file.to_string(), line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [q, d, g] = cols[..] else {
            return Err(parse("expected query_id<TAB>doc_id<TAB>grade".into()));
        };
        let grade: u8 = g.parse().map_err(|_| parse(format!("bad grade {g:?}")))?;
        if grade > 1 {
            return Err(parse(format!("grade {grade} is not binary")));
        }
        qrels.insert(q, d, grade);
    }
    Ok(qrels)
}

#[derive(Debug)]
pub struct MldrSubset {
    pub queries: QuerySet,
    pub corpus: Corpus,
    pub qrels: Qrels,
    /// Qrels rows naming documents that are not in the corpus.
    pub missing_docs: Vec<(String, String)>,
}

/// Loads a query/corpus/qrels triple. Any malformed corpus line is fatal here.
pub fn load_mldr_subset(queries: impl AsRef<Path>, corpus: impl AsRef<Path>, qrels: impl AsRef<Path>) -> Result<MldrSubset, EvalError> {
    let (qp, cp, rp) = (queries.as_ref(), corpus.as_ref(), qrels.as_ref());
    let queries = read_queries(open(qp)?, &qp.display().to_string())?;
    let loaded = load_corpus_file(cp)?;
    if let Some(err) = loaded.errors.first() {
        return Err(EvalError::Parse { file: cp.display().to_string(), line: err.line, message: err.message.clone() });
    }
    let qrels = read_qrels(open(rp)?, &rp.display().to_string())?;
    let missing_docs =
        qrels.pairs().filter(|(_, d, _)| loaded.corpus.get(d).is_none()).map(|(q, d, _)| (q.to_string(), d.to_string())).collect();
    Ok(MldrSubset { queries, corpus: loaded.corpus, qrels, missing_docs })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageParams {
    pub doc_count: u64,
    pub chunks_per_doc: u64,
    pub embedding_dim: u64,
    pub bytes_per_dim: u64,
    pub avg_token_bytes_per_doc: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageEstimate {
    pub dense_bytes: u128,
    pub sparse_bytes: u128,
}

/// `dense = docs·chunks·dim·bytes_per_dim + docs·token_bytes`,
/// `sparse = docs·token_bytes`. Exact integer arithmetic.
pub fn estimate_storage(p: &StorageParams) -> StorageEstimate {
    let docs = p.doc_count as u128;
    let tokens = docs * p.avg_token_bytes_per_doc as u128;
    let vectors = docs * p.chunks_per_doc as u128 * p.embedding_dim as u128 * p.bytes_per_dim as u128;
    StorageEstimate { dense_bytes: vectors + tokens, sparse_bytes: tokens }
}
