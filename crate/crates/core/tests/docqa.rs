mod common;

use std::sync::Arc;

use funnel_core::analysis::{analyze, AnalyzerConfig};
use funnel_core::corpus::{ChunkPolicy, Document, Section};
use funnel_core::docqa::{
    fuse_sparse_dense, multihop_dense_search, pack_context, sparse_chunk_search, AnswerOutput, ChunkIndex, DocQa, DocQaConfig, DocQaError,
    FusionRow, PairScorer, ScorerError, TemplateGenerator, TextGenerator,
};
use funnel_core::embed::{Embedder, ReferenceEmbedder};
use funnel_core::trace::ordinals_contiguous;

fn doc(title: &str, sections: &[&str]) -> Document {
    Document {
        id: "t".into(),
        title: title.into(),
        abstract_text: String::new(),
        sections: sections.iter().map(|s| Section { heading: String::new(), text: s.to_string() }).collect(),
        metadata: Default::default(),
    }
}

fn reference() -> Arc<dyn Embedder> {
    Arc::new(ReferenceEmbedder::default())
}

#[test]
fn second_hop_follows_shared_vocabulary() {
    let d = doc(
        "Notes",
        &[
            "aspirin blocks thromboxane synthesis",
            "weather reports mention rain and wind",
            "thromboxane synthesis drives platelet aggregation",
        ],
    );
    let embedder = ReferenceEmbedder::default();
    let index = ChunkIndex::build(&d, &embedder, &ChunkPolicy::default()).unwrap();
    let q = embedder.embed("how does aspirin work").unwrap();
    let hops = multihop_dense_search(&q, &index, 2, 1, 0.5);
    assert_eq!(hops[0].selected[0].chunk_id, 1);
    // chunk 3 shares nothing with the question but follows from chunk 1
    assert_eq!(hops[1].selected[0].chunk_id, 3);
    let plain = multihop_dense_search(&q, &index, 2, 1, 1.0);
    assert_eq!(plain[1].selected[0].chunk_id, 0);
}

#[test]
fn hops_stop_when_chunks_run_out() {
    let d = doc("Only a title here", &[]);
    let embedder = ReferenceEmbedder::default();
    let index = ChunkIndex::build(&d, &embedder, &ChunkPolicy::default()).unwrap();
    assert_eq!(index.len(), 1);
    let q = embedder.embed("title").unwrap();
    let hops = multihop_dense_search(&q, &index, 3, 5, 0.5);
    assert_eq!(hops.len(), 1);
    assert_eq!(hops[0].selected.len(), 1);
}

#[test]
fn sparse_chunk_scores_match_brute_force() {
    let corpus = common::load_corpus("fixture");
    let d = corpus.get("aspirin-review").unwrap();
    let index = ChunkIndex::build(d, &ReferenceEmbedder::default(), &ChunkPolicy::default()).unwrap();
    let english = AnalyzerConfig::english();
    let docs: Vec<Vec<String>> = index.chunks().iter().map(|c| analyze(&c.text, &english)).collect();
    let question = "does aspirin reduce bleeding after a heart attack";
    let q = analyze(question, &english);
    let hits = sparse_chunk_search(question, &index, 100);
    for h in &hits {
        let want = common::brute_bm25(&docs, &q, h.chunk_id, 1.2, 0.75);
        assert!((h.score - want).abs() < 1e-9);
    }
    let with_terms = docs.iter().filter(|d| q.iter().any(|t| d.contains(t))).count();
    assert_eq!(hits.len(), with_terms);
}

#[test]
fn fusion_matches_enumeration() {
    let corpus = common::load_corpus("fixture");
    let d = corpus.get("aspirin-review").unwrap();
    let embedder = ReferenceEmbedder::default();
    let index = ChunkIndex::build(d, &embedder, &ChunkPolicy::default()).unwrap();
    let question = "why does aspirin cause bleeding";
    let sparse = sparse_chunk_search(question, &index, 15);
    let hops = multihop_dense_search(&embedder.embed(question).unwrap(), &index, 3, 2, 0.5);
    let rows = fuse_sparse_dense(&sparse, &hops, 60.0);
    let lists =
        [sparse.iter().map(|s| s.chunk_id).collect::<Vec<_>>(), hops.iter().flat_map(|h| h.selected.iter().map(|s| s.chunk_id)).collect()];
    let want = common::brute_rrf(&lists, 60.0);
    assert_eq!(rows.len(), want.len());
    for (row, (id, score)) in rows.iter().zip(&want) {
        assert_eq!(row.chunk_id, *id);
        assert!((row.fused - score).abs() < 1e-15);
    }
}

fn hundred_token_doc() -> Document {
    let sections: Vec<String> = (0..5).map(|i| vec![format!("w{i}"); 100].join(" ")).collect();
    let refs: Vec<&str> = sections.iter().map(String::as_str).collect();
    doc("", &refs)
}

fn rows(order: &[usize]) -> Vec<FusionRow> {
    order
        .iter()
        .enumerate()
        .map(|(i, &c)| FusionRow { chunk_id: c, fused: 1.0 / (61 + i) as f64, sparse_rank: Some(i + 1), dense_rank: None })
        .collect()
}

#[test]
fn packing_keeps_prefix_then_reorders() {
    let index = ChunkIndex::build(&hundred_token_doc(), &ReferenceEmbedder::default(), &ChunkPolicy::default()).unwrap();
    assert!(index.chunks().iter().all(|c| c.token_count == 100));
    let pack = pack_context(&rows(&[0, 1, 2, 3, 4]), &index, 300);
    assert_eq!(pack.chunk_ids(), vec![0, 2, 1]);
    assert_eq!(pack.total_tokens, 300);

    let pack = pack_context(&rows(&[4, 0, 2, 1, 3]), &index, 250);
    assert_eq!(pack.chunk_ids(), vec![4, 0]);

    let tiny = pack_context(&rows(&[3, 1]), &index, 40);
    assert_eq!(tiny.chunk_ids(), vec![3]);
    assert!(tiny.chunks[0].truncated);
    assert_eq!(tiny.chunks[0].token_count, 40);
}

#[test]
fn every_output_traces_its_stages() {
    let corpus = common::load_corpus("fixture");
    let d = corpus.get("aspirin-review").unwrap();
    let qa = DocQa::new(DocQaConfig::default(), reference()).unwrap();
    let index = qa.build_index(d).unwrap();
    for output in [AnswerOutput::Extractive, AnswerOutput::Chain, AnswerOutput::Packed] {
        let bundle = qa.answer(&index, "What limits aspirin use in primary prevention?", output).unwrap();
        let hops = bundle.trace.iter().filter(|e| e.stage.as_str() == "dense-hop").count();
        assert_eq!(bundle.stages(), output.stages(hops));
        assert!(ordinals_contiguous(&bundle.trace));
        match output {
            AnswerOutput::Packed => {
                assert!(bundle.passages.is_empty());
                assert!(!bundle.context.is_empty());
                let pack = bundle.pack.as_ref().unwrap();
                assert!(pack.total_tokens <= pack.budget);
            }
            _ => {
                assert!(!bundle.passages.is_empty() && bundle.passages.len() <= 3);
                for p in &bundle.passages {
                    assert_eq!(&index.chunks()[p.chunk_id].text[p.start..p.end], p.text);
                }
            }
        }
        if output == AnswerOutput::Chain {
            assert_eq!(bundle.chain.len(), hops);
            assert!(bundle.chain.iter().all(|s| s.evidence.iter().all(|e| e.excerpt.chars().count() <= 280)));
        }
    }
}

#[test]
fn template_generator_cites_chunks() {
    let corpus = common::load_corpus("fixture");
    let d = corpus.get("aspirin-review").unwrap();
    let qa = DocQa::new(DocQaConfig::default(), reference()).unwrap();
    let bundle = qa.answer_document(d, "What does aspirin do to platelets?", AnswerOutput::Extractive).unwrap();
    let text = TemplateGenerator.generate(&bundle.question, &bundle.passages, &Default::default()).unwrap();
    assert!(text.starts_with(&format!("Based on [c{}", bundle.passages[0].chunk_id)));
}

struct Constant;

impl PairScorer for Constant {
    fn score(&self, _q: &str, passages: &[&str], _i: &ChunkIndex) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![0.5; passages.len()])
    }
}

struct ShortBy1;

impl PairScorer for ShortBy1 {
    fn score(&self, _q: &str, passages: &[&str], _i: &ChunkIndex) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![0.5; passages.len().saturating_sub(1)])
    }
}

#[test]
fn constant_scorer_keeps_fusion_order() {
    let corpus = common::load_corpus("fixture");
    let d = corpus.get("aspirin-review").unwrap();
    let qa = DocQa::new(DocQaConfig::default(), reference()).unwrap().with_scorer(Arc::new(Constant));
    let bundle = qa.answer_document(d, "aspirin bleeding risk", AnswerOutput::Extractive).unwrap();
    let fusion: Vec<u64> = bundle.trace[bundle.stages().iter().position(|s| s.as_str() == "fusion").unwrap()]
        .payload
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["chunk_id"].as_u64().unwrap())
        .collect();
    let rerank: Vec<u64> = bundle.trace[bundle.stages().iter().position(|s| s.as_str() == "rerank").unwrap()]
        .payload
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["chunk_id"].as_u64().unwrap())
        .collect();
    assert_eq!(fusion, rerank);
}

#[test]
fn failures_surface_as_errors() {
    let corpus = common::load_corpus("fixture");
    let d = corpus.get("aspirin-review").unwrap();
    let qa = DocQa::new(DocQaConfig::default(), reference()).unwrap().with_scorer(Arc::new(ShortBy1));
    assert!(matches!(qa.answer_document(d, "aspirin", AnswerOutput::Chain), Err(DocQaError::ScorerFailure(_))));
    // packing never calls the scorer
    assert!(qa.answer_document(d, "aspirin", AnswerOutput::Packed).is_ok());
    assert!(matches!(qa.answer_document(d, "   ", AnswerOutput::Packed), Err(DocQaError::EmptyQuestion)));
    let bad = DocQaConfig { alpha: 1.5, ..Default::default() };
    assert!(matches!(DocQa::new(bad, reference()), Err(DocQaError::Config(_))));
}

#[test]
fn title_only_document() {
    let d = doc("Aspirin and the heart", &[]);
    let qa = DocQa::new(DocQaConfig::default(), reference()).unwrap();
    for output in [AnswerOutput::Extractive, AnswerOutput::Chain, AnswerOutput::Packed] {
        let bundle = qa.answer_document(&d, "aspirin heart", output).unwrap();
        assert_eq!(bundle.stages(), output.stages(1));
    }
}
