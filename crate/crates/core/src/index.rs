//! Fielded inverted index with BM25 scoring and MUST/SHOULD clause execution.
//!
//! ```text
//! bm25(q, d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·len/avglen))
//! idf(t)     = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! `N` and `avglen` are taken over the documents that have the field.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, AnalyzerConfig, AnalyzerKind};
use crate::corpus::{Corpus, DocField};
use crate::query::{PlanError, QueryPlan};
use crate::trace::{Stage, StageEvent};

pub const INDEX_FORMAT: &str = "funnel-sparse-index";
pub const INDEX_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Postings and length statistics for one (field, analyzer) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldIndex {
    pub name: String,
    pub analyzer: AnalyzerConfig,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    docs_with_field: u32,
    total_tokens: u64,
}

impl FieldIndex {
    /// Indexes `texts`; the i-th text becomes document ordinal `i`.
    pub fn build<'a>(name: impl Into<String>, analyzer: AnalyzerConfig, texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::new();
        let mut docs_with_field = 0;
        let mut total_tokens = 0u64;
        for (ordinal, text) in texts.into_iter().enumerate() {
            let tokens = analyze(text, &analyzer);
            doc_lengths.push(tokens.len() as u32);
            if tokens.is_empty() {
                continue;
            }
            docs_with_field += 1;
            total_tokens += tokens.len() as u64;
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc: ordinal as u32, tf: count });
            }
        }
        Self { name: name.into(), analyzer, postings, doc_lengths, docs_with_field, total_tokens }
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn term_freq(&self, term: &str, doc: u32) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&doc, |p| p.doc).map(|i| list[i].tf).unwrap_or(0)
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_lengths.get(doc as usize).copied().unwrap_or(0)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn docs_with_field(&self) -> usize {
        self.docs_with_field as usize
    }

    pub fn avg_len(&self) -> f64 {
        if self.docs_with_field == 0 {
            0.0
        } else {
            self.total_tokens as f64 / self.docs_with_field as f64
        }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs_with_field as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, doc: u32, params: &Bm25Params) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - params.b + params.b * self.doc_len(doc) as f64 / self.avg_len();
        tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    }

    /// BM25 of `tokens` (already analyzed) against one document. Repeated
    /// query tokens count once per occurrence.
    pub fn bm25_score(&self, tokens: &[String], doc: u32, params: &Bm25Params) -> f64 {
        tokens
            .iter()
            .map(|t| match self.term_freq(t, doc) {
                0 => 0.0,
                tf => self.idf(t) * self.term_weight(tf, doc, params),
            })
            .sum()
    }

    /// Term-at-a-time BM25 over all documents, adding `scale · bm25` into `acc`.
    pub fn accumulate(&self, tokens: &[String], params: &Bm25Params, scale: f64, acc: &mut HashMap<u32, f64>) {
        for t in tokens {
            let list = self.postings(t);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(t);
            for p in list {
                *acc.entry(p.doc).or_default() += scale * idf * self.term_weight(p.tf, p.doc, params);
            }
        }
    }
}

/// Which document field feeds an index field, and how it is analyzed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub source: DocField,
    pub analyzer: AnalyzerConfig,
}

impl FieldSpec {
    /// Only standard subfields decide whether a document matches a clause;
    /// n-gram subfields add score.
    pub fn is_matching(&self) -> bool {
        self.analyzer.kind == AnalyzerKind::Standard
    }

    /// `title`, `abstract`, `sections`, each with a `.ngram` subfield.
    pub fn defaults() -> Vec<FieldSpec> {
        DocField::ALL
            .iter()
            .flat_map(|&source| {
                [
                    FieldSpec { name: source.as_str().to_string(), source, analyzer: AnalyzerConfig::english() },
                    FieldSpec { name: format!("{}.ngram", source.as_str()), source, analyzer: AnalyzerConfig::ngram(3) },
                ]
            })
            .collect()
    }
}

/// Per-field multipliers used by most_fields scoring. Unlisted fields weigh 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldBoosts(pub BTreeMap<String, f64>);

impl FieldBoosts {
    pub fn get(&self, field: &str) -> f64 {
        self.0.get(field).copied().unwrap_or(1.0)
    }
}

impl Default for FieldBoosts {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("title".into(), 3.0);
        m.insert("abstract".into(), 2.0);
        m.insert("sections".into(), 1.0);
        for f in DocField::ALL {
            m.insert(format!("{}.ngram", f.as_str()), 0.3);
        }
        Self(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("k must be at least 1")]
    ZeroDepth,
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrievePayload<'a> {
    pub k: usize,
    pub candidates: usize,
    pub hits: &'a [ScoredDoc],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseIndex {
    doc_ids: Vec<String>,
    fields: Vec<(FieldSpec, FieldIndex)>,
    params: Bm25Params,
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: String,
}

pub fn build_index(corpus: &Corpus, specs: &[FieldSpec], params: Bm25Params) -> SparseIndex {
    let doc_ids = corpus.docs().iter().map(|d| d.id.clone()).collect();
    let fields = specs
        .iter()
        .map(|spec| {
            let texts: Vec<_> = corpus.docs().iter().map(|d| d.field_text(spec.source)).collect();
            let index = FieldIndex::build(spec.name.clone(), spec.analyzer.clone(), texts.iter().map(|t| t.as_ref()));
            (spec.clone(), index)
        })
        .collect();
    SparseIndex { doc_ids, fields, params }
}

impl SparseIndex {
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn field(&self, name: &str) -> Option<&FieldIndex> {
        self.fields.iter().find(|(s, _)| s.name == name).map(|(_, f)| f)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&FieldSpec, &FieldIndex)> {
        self.fields.iter().map(|(s, f)| (s, f))
    }

    /// Per-document score of one variation text under most_fields, plus the
    /// documents it matches on a standard subfield.
    fn score_text(&self, text: &str, boosts: &FieldBoosts) -> (HashMap<u32, f64>, HashSet<u32>) {
        let mut scores = HashMap::new();
        let mut matched = HashSet::new();
        for (spec, field) in &self.fields {
            let tokens = analyze(text, &field.analyzer);
            if spec.is_matching() {
                for t in &tokens {
                    matched.extend(field.postings(t).iter().map(|p| p.doc));
                }
            }
            field.accumulate(&tokens, &self.params, boosts.get(&spec.name), &mut scores);
        }
        (scores, matched)
    }

    /// Runs a clause tree. A document is a candidate when it matches at least
    /// one variation of every MUST group, or, without MUST groups, at least
    /// one SHOULD variation. Its score sums `boost · max_v(weight_v · Σ_f
    /// boost_f · bm25_f)` over all groups. Ties break by ascending doc id.
    pub fn execute(&self, plan: &QueryPlan, boosts: &FieldBoosts, k: usize) -> Result<(Vec<ScoredDoc>, StageEvent), IndexError> {
        if plan.is_empty() {
            return Err(PlanError::EmptyPlan.into());
        }
        if k == 0 {
            return Err(IndexError::ZeroDepth);
        }
        let mut total: HashMap<u32, f64> = HashMap::new();
        let mut must_sets: Vec<HashSet<u32>> = Vec::new();
        let mut should_set: HashSet<u32> = HashSet::new();
        for (is_must, group) in plan.must.iter().map(|g| (true, g)).chain(plan.should.iter().map(|g| (false, g))) {
            let mut best: HashMap<u32, f64> = HashMap::new();
            let mut group_matches = HashSet::new();
            for variation in &group.variations {
                let (scores, matched) = self.score_text(&variation.text, boosts);
                for (doc, s) in scores {
                    let s = variation.weight * s;
                    let slot = best.entry(doc).or_insert(s);
                    if s > *slot {
                        *slot = s;
                    }
                }
                group_matches.extend(matched);
            }
            for (doc, s) in best {
                *total.entry(doc).or_default() += group.boost * s;
            }
            if is_must {
                must_sets.push(group_matches);
            } else {
                should_set.extend(group_matches);
            }
        }

        let candidates: Vec<u32> = if must_sets.is_empty() {
            should_set.into_iter().collect()
        } else {
            let (first, rest) = must_sets.split_first().expect("non-empty");
            first.iter().copied().filter(|d| rest.iter().all(|s| s.contains(d))).collect()
        };
        let candidate_count = candidates.len();
        let mut hits: Vec<(u32, f64)> = candidates.into_iter().map(|d| (d, total.get(&d).copied().unwrap_or(0.0))).collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize])));
        hits.truncate(k);
        let hits: Vec<ScoredDoc> = hits
            .into_iter()
            .enumerate()
            .map(|(i, (d, score))| ScoredDoc { doc_id: self.doc_ids[d as usize].clone(), score, rank: i + 1 })
            .collect();
        let event = StageEvent::new(Stage::Retrieve, RetrievePayload { k, candidates: candidate_count, hits: &hits });
        Ok((hits, event))
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<(), IndexError> {
        let header = IndexHeader { format: INDEX_FORMAT.into(), version: INDEX_VERSION.into() };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, IndexError> {
        let mut lines = reader.lines();
        let header_line = lines.next().ok_or_else(|| IndexError::Format("empty file".into()))??;
        let header: IndexHeader = serde_json::from_str(&header_line)?;
        if header.format != INDEX_FORMAT {
            return Err(IndexError::Format(format!("unexpected format {:?}", header.format)));
        }
        let major = |v: &str| v.split('.').next().unwrap_or("").to_string();
        if major(&header.version) != major(INDEX_VERSION) {
            return Err(IndexError::Format(format!("unsupported version {}", header.version)));
        }
        let body = lines.next().ok_or_else(|| IndexError::Format("missing index body".into()))??;
        Ok(serde_json::from_str(&body)?)
    }
}
