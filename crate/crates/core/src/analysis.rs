//! Text analysis shared by every index in the crate.
//!
//! Two analyzer kinds exist: `standard` (Unicode word segmentation, lowercased,
//! optional stopword removal) and `ngram` (character n-grams taken per word of
//! the lowercased text). Chunk token counts, corpus statistics and BM25 all go
//! through [`analyze`] so their numbers agree.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

/// Lucene's English stopword list.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it", "no", "not", "of", "on", "or", "such",
    "that", "the", "their", "then", "there", "these", "they", "this", "to", "was", "will", "with",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzerKind {
    Standard,
    Ngram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub kind: AnalyzerKind,
    /// Only read when `kind` is `Ngram`.
    #[serde(default = "default_ngram_size")]
    pub ngram_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<BTreeSet<String>>,
}

fn default_ngram_size() -> usize {
    3
}

impl AnalyzerConfig {
    /// Standard analyzer without stopwords. This is the analyzer that defines
    /// chunk token counts.
    pub fn standard() -> Self {
        Self { kind: AnalyzerKind::Standard, ngram_size: default_ngram_size(), stopwords: None }
    }

    /// Standard analyzer with [`ENGLISH_STOPWORDS`] removed; used for search fields.
    pub fn english() -> Self {
        Self::standard().with_stopwords(ENGLISH_STOPWORDS.iter().copied())
    }

    /// # Panics
    ///
    /// Panics if `size < 2`.
    pub fn ngram(size: usize) -> Self {
        assert!(size >= 2, "ngram_size must be at least 2, got {size}");
        Self { kind: AnalyzerKind::Ngram, ngram_size: size, stopwords: None }
    }

    pub fn with_stopwords<'a>(mut self, words: impl IntoIterator<Item = &'a str>) -> Self {
        self.stopwords = Some(words.into_iter().map(str::to_lowercase).collect());
        self
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.as_ref().is_some_and(|s| s.contains(token))
    }
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self::standard()
    }
}

/// A standard-analyzer token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Word tokens of `text`, lowercased, with byte offsets. No stopword removal.
pub fn word_tokens(text: &str) -> Vec<Token> {
    text.unicode_word_indices().map(|(start, word)| Token { text: word.to_lowercase(), start, end: start + word.len() }).collect()
}

pub fn analyze(text: &str, config: &AnalyzerConfig) -> Vec<String> {
    match config.kind {
        AnalyzerKind::Standard => text.unicode_words().map(str::to_lowercase).filter(|t| !config.is_stopword(t)).collect(),
        AnalyzerKind::Ngram => {
            let n = config.ngram_size.max(2);
            let mut grams = Vec::new();
            for word in text.unicode_words() {
                let lower = word.to_lowercase();
                if config.is_stopword(&lower) {
                    continue;
                }
                let chars: Vec<char> = lower.chars().collect();
                if chars.len() < n {
                    continue;
                }
                grams.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
            }
            grams
        }
    }
}

/// Number of tokens the standard analyzer (no stopwords) finds in `text`.
pub fn token_count(text: &str) -> usize {
    text.unicode_words().count()
}
