use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use funnel_core::corpus::Document;
use funnel_core::docqa::{AnswerOutput, ChainStep, ContextPack, Passage, TemplateGenerator, TextGenerator};
use funnel_core::eval::RETRIEVAL_DEPTH;
use funnel_core::expansion::{EntityMention, ExpansionSet, Strategy};
use funnel_core::index::FieldBoosts;
use funnel_core::query::{QueryPlan, VariationGroup};
use funnel_core::trace::TraceEvent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, SessionState};

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/search", post(search))
        .route("/expansion/preview", post(preview))
        .route("/ask", post(ask))
        .route("/trace/:id", get(trace))
        .route("/documents/:id", get(document))
        .route("/sessions/:id", get(session))
        .route("/healthz", get(healthz))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("malformed request body").with_detail(e))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal("worker failed").with_detail(e))
}

fn default_k() -> usize {
    10
}

fn default_strategy() -> Strategy {
    Strategy::ShouldExpansion
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default)]
    pub query: String,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_k")]
    pub k: usize,
    /// An edited clause tree executed verbatim instead of expanding `query`.
    #[serde(default, rename = "override")]
    pub plan_override: Option<QueryPlan>,
    #[serde(default)]
    pub session: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SearchResult {
    pub rank: usize,
    pub doc_id: String,
    pub score: f64,
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Serialize)]
pub struct SearchResponse {
    pub results: Vec<SearchResult>,
    pub trace_id: String,
    pub session: String,
    pub strategy: Option<Strategy>,
    pub plan: QueryPlan,
}

fn snippet(doc: &Document) -> String {
    let source = if !doc.abstract_text.trim().is_empty() {
        doc.abstract_text.as_str()
    } else {
        doc.sections.first().map(|s| s.text.as_str()).unwrap_or("")
    };
    funnel_core::docqa::excerpt(source, 200)
}

async fn search(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SearchResponse>, ApiError> {
    let req: SearchRequest = parse(&body)?;
    if req.plan_override.is_none() && req.query.trim().is_empty() {
        return Err(ApiError::bad_request("query is empty"));
    }
    if req.k == 0 || req.k > RETRIEVAL_DEPTH {
        return Err(ApiError::bad_request(format!("k must lie in 1..={RETRIEVAL_DEPTH}")));
    }
    state.engine()?;
    let session = state.sessions.resolve(req.session.as_deref(), state.corpus_name.as_deref())?;
    let worker = state.clone();
    let (outcome, strategy, req) = blocking(move || {
        let engine = worker.engine.as_ref().expect("checked above");
        let result = match &req.plan_override {
            Some(plan) => engine.search_plan(plan, req.k).map(|o| (o, None)),
            None => engine.search(&req.query, req.strategy, req.k).map(|o| (o, Some(req.strategy))),
        };
        result.map(|(o, s)| (o, s, req))
    })
    .await??;
    state.sessions.update(&session, |st| {
        if !req.query.trim().is_empty() {
            st.last_query = Some(req.query.clone());
        }
        st.last_plan = Some(outcome.plan.clone());
    });
    let corpus = state.engine()?.corpus();
    let results = outcome
        .hits
        .iter()
        .map(|h| {
            let doc = corpus.get(&h.doc_id).expect("hits come from the corpus");
            SearchResult { rank: h.rank, doc_id: h.doc_id.clone(), score: h.score, title: doc.title.clone(), snippet: snippet(doc) }
        })
        .collect();
    let trace_id = state.traces.record(outcome.trace.into_events());
    Ok(Json(SearchResponse { results, trace_id, session, strategy, plan: outcome.plan }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewRequest {
    pub query: String,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
}

#[derive(Debug, Serialize)]
pub struct PreviewResponse {
    pub query: String,
    pub strategy: Strategy,
    pub mentions: Vec<EntityMention>,
    pub expansions: Vec<ExpansionSet>,
    pub verb_groups: Vec<VariationGroup>,
    pub residual: Option<String>,
    /// The editable clause tree; send it back as `override` to `/search`.
    pub plan: QueryPlan,
    pub field_boosts: FieldBoosts,
}

async fn preview(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<PreviewResponse>, ApiError> {
    let req: PreviewRequest = parse(&body)?;
    if req.query.trim().is_empty() {
        return Err(ApiError::bad_request("query is empty"));
    }
    let planned = state.expander.build_query_plan(&req.query, req.strategy)?;
    Ok(Json(PreviewResponse {
        query: req.query,
        strategy: req.strategy,
        mentions: planned.mentions,
        expansions: planned.expansions,
        verb_groups: planned.verb_groups,
        residual: planned.residual,
        plan: planned.plan,
        field_boosts: FieldBoosts::default(),
    }))
}

fn default_output() -> AnswerOutput {
    AnswerOutput::Extractive
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    #[serde(default)]
    pub session: Option<String>,
    /// Defaults to the session's selected document.
    #[serde(default)]
    pub doc_id: Option<String>,
    pub question: String,
    #[serde(default = "default_output")]
    pub output: AnswerOutput,
}

#[derive(Debug, Serialize)]
pub struct AskResponse {
    pub trace_id: String,
    pub session: String,
    pub doc_id: String,
    pub question: String,
    pub output: AnswerOutput,
    pub answer: String,
    pub passages: Vec<Passage>,
    pub chain: Vec<ChainStep>,
    pub context: Option<ContextPack>,
}

async fn ask(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<AskResponse>, ApiError> {
    let req: AskRequest = parse(&body)?;
    if req.question.trim().is_empty() {
        return Err(ApiError::bad_request("question is empty"));
    }
    let session = state.sessions.resolve(req.session.as_deref(), state.corpus_name.as_deref())?;
    let doc_id = match req.doc_id.clone().or_else(|| state.sessions.get(&session).and_then(|s| s.selected_doc)) {
        Some(id) => id,
        None => return Err(ApiError::bad_request("no document selected").with_detail("pass doc_id or select a document first")),
    };
    let corpus = state.engine()?.corpus().clone();
    if corpus.get(&doc_id).is_none() {
        return Err(ApiError::not_found(format!("unknown document {doc_id:?}")));
    }
    state.sessions.update(&session, |s| s.selected_doc = Some(doc_id.clone()));

    let index = state.chunks.get_or_build(&state.docqa, &corpus, &doc_id).await?;
    let docqa = state.docqa.clone();
    let question = req.question.clone();
    let bundle = blocking(move || docqa.answer(&index, &question, req.output)).await??;
    let answer = TemplateGenerator
        .generate(&bundle.question, &bundle.passages, bundle.pack.as_ref().unwrap_or(&ContextPack::default()))
        .map_err(|e| ApiError::internal("generation failed").with_detail(e))?;
    let trace_id = state.traces.record(bundle.trace);
    Ok(Json(AskResponse {
        trace_id,
        session,
        doc_id,
        question: bundle.question,
        output: bundle.output,
        answer,
        passages: bundle.passages,
        chain: bundle.chain,
        context: bundle.pack,
    }))
}

#[derive(Debug, Serialize)]
pub struct TraceResponse {
    pub trace_id: String,
    pub events: Vec<TraceEvent>,
}

async fn trace(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<TraceResponse>, ApiError> {
    let events = state.traces.get(&id).ok_or_else(|| ApiError::not_found(format!("unknown or expired trace {id:?}")))?;
    Ok(Json(TraceResponse { trace_id: id, events: events.as_ref().clone() }))
}

#[derive(Debug, Deserialize)]
pub struct DocumentQuery {
    pub session: Option<String>,
}

/// Returns a document; with `?session=` it also becomes that session's
/// selected document.
async fn document(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<DocumentQuery>,
) -> Result<Json<Document>, ApiError> {
    let doc = state.engine()?.corpus().get(&id).cloned().ok_or_else(|| ApiError::not_found(format!("unknown document {id:?}")))?;
    if let Some(session) = q.session {
        let session = state.sessions.resolve(Some(&session), None)?;
        state.sessions.update(&session, |s| s.selected_doc = Some(id.clone()));
    }
    Ok(Json(doc))
}

async fn session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    state.sessions.get(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
}

#[derive(Debug, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub documents: usize,
    pub concepts: usize,
    pub traces: usize,
    pub cached_documents: usize,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        documents: state.engine.as_ref().map_or(0, |e| e.corpus().len()),
        concepts: state.expander.ontology().len(),
        traces: state.traces.len(),
        cached_documents: state.chunks.len(),
    })
}
