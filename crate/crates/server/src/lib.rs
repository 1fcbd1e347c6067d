//! HTTP front end for the search-then-ask journey.
//!
//! | method | path | purpose |
//! |---|---|---|
//! | POST | `/search` | expand and retrieve, or run an edited clause tree |
//! | POST | `/expansion/preview` | the clause tree a query would produce |
//! | POST | `/ask` | question answering inside one document |
//! | GET | `/trace/{id}` | ordered stage events of a finished request |
//! | GET | `/documents/{id}` | a document; `?session=` selects it |
//! | GET | `/sessions/{id}` | session state |
//! | GET | `/healthz` | liveness and corpus size |
//!
//! Errors are `{code, message, detail}` with `bad_request` 400, `not_found`
//! 404, `conflict` 409, `upstream_failure` 502 and `internal` 500.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::fs::File;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use funnel_core::corpus::{load_corpus_file, CorpusError};
use funnel_core::docqa::{DocQa, DocQaError};
use funnel_core::embed::EmbedError;
use funnel_core::engine::SearchEngine;
use funnel_core::expansion::{load_lexicon, load_ontology, Expander, ExpansionError, Ontology, VerbLexicon};
use funnel_core::index::{IndexError, SparseIndex};
use thiserror::Error;

pub use config::{ConfigError, ScorerConfig, ScorerKind, ServiceConfig};
pub use error::{ApiError, ErrorCode};
pub use routes::router;
pub use state::AppState;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("ontology or lexicon: {0}")]
    Expansion(#[from] ExpansionError),
    #[error("index: {0}")]
    Index(#[from] IndexError),
    #[error("index {path} does not match the corpus")]
    StaleIndex { path: String },
    #[error("embedder: {0}")]
    Embedder(#[from] EmbedError),
    #[error("question answering: {0}")]
    DocQa(#[from] DocQaError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Loads ontology and lexicon; missing paths give empty ones.
pub fn load_expander(config: &ServiceConfig) -> Result<Expander, StartupError> {
    let ontology = match &config.ontology {
        Some(p) => {
            let (ontology, dangling) = load_ontology(p)?;
            for d in dangling {
                tracing::warn!(concept = %d.concept_id, missing = %d.missing, "dropped dangling ontology link");
            }
            ontology
        }
        None => Ontology::default(),
    };
    let lexicon = match &config.lexicon {
        Some(p) => load_lexicon(p)?,
        None => VerbLexicon::default(),
    };
    Ok(Expander::new(ontology, lexicon))
}

/// Loads the corpus (and a prebuilt index when configured) into a search
/// engine. Malformed corpus lines are logged and skipped.
pub fn load_engine(config: &ServiceConfig, expander: Expander) -> Result<Option<SearchEngine>, StartupError> {
    let Some(path) = &config.corpus else { return Ok(None) };
    let loaded = load_corpus_file(path)?;
    for e in &loaded.errors {
        tracing::warn!(line = e.line, message = %e.message, "skipped corpus line");
    }
    let corpus = Arc::new(loaded.corpus);
    let engine = match &config.index {
        Some(index_path) => {
            let index = SparseIndex::load(BufReader::new(File::open(index_path)?))?;
            let ids: Vec<&str> = corpus.docs().iter().map(|d| d.id.as_str()).collect();
            if index.doc_ids().iter().map(String::as_str).ne(ids) {
                return Err(StartupError::StaleIndex { path: index_path.display().to_string() });
            }
            SearchEngine::with_index(corpus, Arc::new(index), expander)
        }
        None => SearchEngine::new(corpus, expander),
    };
    Ok(Some(engine))
}

pub fn build_docqa(config: &ServiceConfig) -> Result<DocQa, StartupError> {
    let embedder = config.embedder.build()?;
    let docqa = DocQa::new(config.docqa.clone(), embedder)?;
    // the lexical scorer is the DocQa default
    match config.scorer.kind {
        ScorerKind::Lexical => Ok(docqa),
    }
}

pub fn build_state(config: &ServiceConfig) -> Result<AppState, StartupError> {
    let expander = load_expander(config)?;
    let engine = load_engine(config, expander.clone())?;
    let docqa = build_docqa(config)?;
    let mut state = AppState::new(engine, expander, docqa, config.trace_capacity, config.cache_capacity);
    if let Some(p) = &config.corpus {
        state = state.with_corpus_name(corpus_name(p));
    }
    Ok(state)
}

fn corpus_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), StartupError> {
    let state = Arc::new(build_state(&config)?);
    let addr = format!("{}:{}", config.host, config.port);
    let socket: SocketAddr =
        addr.parse().map_err(|_| StartupError::Config(ConfigError::Env { key: "host".into(), value: config.host.clone() }))?;
    let listener = tokio::net::TcpListener::bind(socket).await.map_err(|source| StartupError::Bind { addr: addr.clone(), source })?;
    tracing::info!(%addr, documents = state.engine.as_ref().map_or(0, |e| e.corpus().len()), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
