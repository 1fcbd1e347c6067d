mod common;

use std::io::Write;

use proptest::prelude::*;

use funnel_core::analysis::word_tokens;
use funnel_core::corpus::{
    chunk_document, load_corpus_file, load_corpus_reader, reconstruct_field, ChunkPolicy, CorpusError, Document, Section, SourceField,
};

fn temp_file(name: &str, contents: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("funnel-core-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::File::create(&path).unwrap().write_all(contents.as_bytes()).unwrap();
    path
}

#[test]
fn one_bad_line_among_four() {
    let contents = [
        r#"{"id":"a","title":"Alpha"}"#,
        r#"{"id":"b","title":"Bravo","sections":[{"heading":"h","text":"body"}]}"#,
        r#"{"id":"c", "title": broken"#,
        r#"{"id":"d","abstract":"Delta abstract"}"#,
    ]
    .join("\n");
    let loaded = load_corpus_file(temp_file("four.jsonl", &contents)).unwrap();
    assert_eq!(loaded.corpus.len(), 3);
    assert_eq!(loaded.errors.len(), 1);
    assert_eq!(loaded.errors[0].line, 3);
    assert_eq!(loaded.stats.doc_count, 3);
}

#[test]
fn empty_and_missing_files() {
    let loaded = load_corpus_file(temp_file("empty.jsonl", "")).unwrap();
    assert!(loaded.corpus.is_empty());
    assert!(loaded.errors.is_empty());
    let err = load_corpus_file("/definitely/not/here.jsonl").unwrap_err();
    assert!(matches!(err, CorpusError::FileNotFound(_)));
}

#[test]
fn duplicate_and_blank_records_are_line_errors() {
    let contents = "{\"id\":\"a\",\"title\":\"x\"}\n{\"id\":\"a\",\"title\":\"y\"}\n{\"id\":\"b\"}\n";
    let loaded = load_corpus_reader(contents.as_bytes()).unwrap();
    assert_eq!(loaded.corpus.len(), 1);
    assert_eq!(loaded.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 3]);
}

#[test]
fn export_round_trip() {
    let corpus = common::load_corpus("fixture");
    let mut buf = Vec::new();
    corpus.write_lines(&mut buf).unwrap();
    let again = load_corpus_reader(buf.as_slice()).unwrap();
    assert!(again.errors.is_empty());
    assert_eq!(again.corpus.docs(), corpus.docs());
}

#[test]
fn stats_count_fields() {
    let corpus = common::load_corpus("fixture");
    let stats = corpus.stats();
    assert_eq!(stats.doc_count, corpus.len());
    let title = &stats.fields[&funnel_core::corpus::DocField::Title];
    assert_eq!(title.docs_with_field, corpus.len());
    assert!(title.doc_freq["aspirin"] >= 1);
}

#[test]
fn fixture_article_chunks_by_section() {
    let corpus = common::load_corpus("fixture");
    let doc = corpus.get("aspirin-review").unwrap();
    let chunks = chunk_document(doc, &ChunkPolicy::default());
    assert_eq!(chunks.len(), 2 + doc.sections.len());
    assert_eq!(chunks[0].source_field, SourceField::Title);
    assert_eq!(chunks[1].source_field, SourceField::Abstract);
    for (i, c) in chunks.iter().enumerate().skip(2) {
        assert_eq!(c.section_index, Some(i - 2));
        assert_eq!(c.text, doc.sections[i - 2].text);
        assert_eq!(c.chunk_id, i);
    }
}

fn doc_with_section(text: String) -> Document {
    Document {
        id: "p".into(),
        title: String::new(),
        abstract_text: String::new(),
        sections: vec![Section { heading: String::new(), text }],
        metadata: Default::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn windows_tile_the_field(words in prop::collection::vec("[a-z]{1,8}", 1..400),
                              max in 2usize..60, overlap_frac in 0.0f64..0.9) {
        let overlap = ((max as f64) * overlap_frac) as usize;
        let overlap = overlap.min(max - 1);
        let policy = ChunkPolicy::new(max, overlap).unwrap();
        let text = words.join(" ");
        let doc = doc_with_section(text.clone());
        let chunks = chunk_document(&doc, &policy);
        let n = words.len();
        prop_assert_eq!(chunks.len(), policy.window_count(n));
        prop_assert_eq!(reconstruct_field(&chunks), text.clone());
        prop_assert!(chunks.iter().all(|c| c.token_count <= max));
        let total: usize = chunks.iter().map(|c| c.token_count).sum();
        prop_assert_eq!(total - n, overlap * (chunks.len() - 1));
        for c in &chunks {
            prop_assert_eq!(&text[c.start..c.end], c.text.as_str());
            prop_assert_eq!(word_tokens(&c.text).len(), c.token_count);
        }
    }
}
