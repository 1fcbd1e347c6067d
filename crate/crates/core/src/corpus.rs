//! Fielded long documents, section-aware chunking and corpus statistics.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, word_tokens, AnalyzerConfig};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document {id:?} has no title, abstract or sections")]
    EmptyDocument { id: String },
    #[error("document id is empty")]
    MissingId,
    #[error("document {id:?}: section {index} has blank text")]
    EmptySection { id: String, index: usize },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("corpus file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid chunk policy: overlap {overlap} must be smaller than max_tokens {max_tokens}")]
    InvalidPolicy { max_tokens: usize, overlap: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    #[serde(default)]
    pub heading: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub sections: Vec<Section>,
    pub metadata: BTreeMap<String, String>,
}

/// One corpus line as it appears on disk. Missing text fields default to
/// empty; unknown fields are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawDocument {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub sections: Vec<Section>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Validates a raw record. Duplicate ids are caught by [`Corpus::insert`].
pub fn ingest_document(raw: RawDocument) -> Result<Document, CorpusError> {
    if raw.id.trim().is_empty() {
        return Err(CorpusError::MissingId);
    }
    if let Some(index) = raw.sections.iter().position(|s| s.text.trim().is_empty()) {
        return Err(CorpusError::EmptySection { id: raw.id, index });
    }
    if raw.title.trim().is_empty() && raw.abstract_text.trim().is_empty() && raw.sections.is_empty() {
        return Err(CorpusError::EmptyDocument { id: raw.id });
    }
    Ok(Document { id: raw.id, title: raw.title, abstract_text: raw.abstract_text, sections: raw.sections, metadata: raw.metadata })
}

impl Document {
    /// Section texts joined by a newline; the text of the `sections` search field.
    pub fn sections_text(&self) -> String {
        self.sections.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n")
    }

    pub fn field_text(&self, field: DocField) -> std::borrow::Cow<'_, str> {
        match field {
            DocField::Title => self.title.as_str().into(),
            DocField::Abstract => self.abstract_text.as_str().into(),
            DocField::Sections => self.sections_text().into(),
        }
    }
}

/// The three searchable fields of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocField {
    Title,
    Abstract,
    Sections,
}

impl DocField {
    pub const ALL: [DocField; 3] = [DocField::Title, DocField::Abstract, DocField::Sections];

    pub fn as_str(self) -> &'static str {
        match self {
            DocField::Title => "title",
            DocField::Abstract => "abstract",
            DocField::Sections => "sections",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceField {
    Title,
    Abstract,
    Section,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_id: usize,
    pub source_field: SourceField,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section_index: Option<usize>,
    pub text: String,
    pub token_count: usize,
    /// Byte offset of `text` inside its source field text.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPolicy {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl ChunkPolicy {
    pub fn new(max_tokens: usize, overlap: usize) -> Result<Self, CorpusError> {
        if max_tokens == 0 || overlap >= max_tokens {
            return Err(CorpusError::InvalidPolicy { max_tokens, overlap });
        }
        Ok(Self { max_tokens, overlap })
    }

    fn stride(&self) -> usize {
        self.max_tokens - self.overlap
    }

    /// Windows needed for a field of `tokens` tokens.
    pub fn window_count(&self, tokens: usize) -> usize {
        if tokens <= self.max_tokens {
            1
        } else {
            (tokens - self.overlap).div_ceil(self.stride())
        }
    }
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        Self { max_tokens: 512, overlap: 64 }
    }
}

/// Splits a document into one chunk per non-blank title/abstract/section.
/// Fields longer than `policy.max_tokens` fall back to overlapping token
/// windows; each window ends where the next non-overlapping token starts so
/// the windows tile the field text.
pub fn chunk_document(doc: &Document, policy: &ChunkPolicy) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut push_field = |source: SourceField, section_index: Option<usize>, text: &str| {
        if text.trim().is_empty() {
            return;
        }
        for (start, end) in window_spans(text, policy) {
            let piece = &text[start..end];
            chunks.push(Chunk {
                doc_id: doc.id.clone(),
                chunk_id: 0,
                source_field: source,
                section_index,
                text: piece.to_string(),
                token_count: crate::analysis::token_count(piece),
                start,
                end,
            });
        }
    };
    push_field(SourceField::Title, None, &doc.title);
    push_field(SourceField::Abstract, None, &doc.abstract_text);
    for (i, section) in doc.sections.iter().enumerate() {
        push_field(SourceField::Section, Some(i), &section.text);
    }
    for (i, chunk) in chunks.iter_mut().enumerate() {
        chunk.chunk_id = i;
    }
    chunks
}

fn window_spans(text: &str, policy: &ChunkPolicy) -> Vec<(usize, usize)> {
    let tokens = word_tokens(text);
    let n = tokens.len();
    if n <= policy.max_tokens {
        return vec![(0, text.len())];
    }
    let windows = policy.window_count(n);
    let stride = policy.stride();
    (0..windows)
        .map(|w| {
            let first = w * stride;
            let start = if w == 0 { 0 } else { tokens[first].start };
            let end = if w + 1 == windows { text.len() } else { tokens[first + policy.max_tokens].start };
            (start, end)
        })
        .collect()
}

/// Reassembles the text of one field from its chunks (in chunk order),
/// dropping the overlap each window shares with its predecessor.
pub fn reconstruct_field<'a>(chunks: impl IntoIterator<Item = &'a Chunk>) -> String {
    let mut out = String::new();
    let mut covered = 0usize;
    for chunk in chunks {
        let skip = covered.saturating_sub(chunk.start);
        out.push_str(&chunk.text[skip..]);
        covered = chunk.end;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub total_tokens: u64,
    pub docs_with_field: usize,
    pub doc_freq: BTreeMap<String, usize>,
    pub avg_len: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub fields: BTreeMap<DocField, FieldStats>,
}

/// An ordered set of documents with unique ids. Insert-only; share it behind
/// an `Arc` once loading is finished.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&doc.id) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        self.by_id.insert(doc.id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    pub fn ingest(&mut self, raw: RawDocument) -> Result<(), CorpusError> {
        self.insert(ingest_document(raw)?)
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Copy of the corpus without `id`.
    pub fn without(&self, id: &str) -> Corpus {
        let mut out = Corpus::new();
        for doc in self.docs.iter().filter(|d| d.id != id) {
            out.insert(doc.clone()).expect("ids already unique");
        }
        out
    }

    pub fn stats(&self) -> CorpusStats {
        let analyzer = AnalyzerConfig::standard();
        let mut fields = BTreeMap::new();
        for field in DocField::ALL {
            let mut stats = FieldStats::default();
            for doc in &self.docs {
                let tokens = analyze(&doc.field_text(field), &analyzer);
                if tokens.is_empty() {
                    continue;
                }
                stats.docs_with_field += 1;
                stats.total_tokens += tokens.len() as u64;
                let mut uniq: Vec<&String> = tokens.iter().collect();
                uniq.sort();
                uniq.dedup();
                for t in uniq {
                    *stats.doc_freq.entry(t.clone()).or_default() += 1;
                }
            }
            if stats.docs_with_field > 0 {
                stats.avg_len = stats.total_tokens as f64 / stats.docs_with_field as f64;
            }
            fields.insert(field, stats);
        }
        CorpusStats { doc_count: self.docs.len(), fields }
    }

    /// Writes the corpus in its line format.
    pub fn write_lines<W: Write>(&self, mut out: W) -> io::Result<()> {
        for doc in &self.docs {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Failure on a single corpus line; loading continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub stats: CorpusStats,
    pub errors: Vec<LineError>,
}

pub fn parse_corpus_line(line: &str) -> Result<RawDocument, String> {
    serde_json::from_str::<RawDocument>(line).map_err(|e| e.to_string())
}

pub fn load_corpus_file(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::Io(e),
    })?;
    load_corpus_reader(BufReader::new(file))
}

pub fn load_corpus_reader<R: BufRead>(reader: R) -> Result<LoadedCorpus, CorpusError> {
    let mut corpus = Corpus::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let result = parse_corpus_line(&line).and_then(|raw| corpus.ingest(raw).map_err(|e| e.to_string()));
        if let Err(message) = result {
            errors.push(LineError { line: lineno, message });
        }
    }
    let stats = corpus.stats();
    Ok(LoadedCorpus { corpus, stats, errors })
}
