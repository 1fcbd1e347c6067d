use std::collections::{HashMap, VecDeque};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use funnel_core::corpus::Corpus;
use funnel_core::docqa::{ChunkIndex, DocQa, DocQaError};
use funnel_core::engine::SearchEngine;
use funnel_core::expansion::Expander;
use funnel_core::query::QueryPlan;
use funnel_core::trace::TraceEvent;
use lru::LruCache;
use serde::Serialize;
use tokio::sync::OnceCell;

use crate::error::ApiError;

/// Bounded ring of finished traces; the oldest is evicted first. Stored
/// traces are never modified.
#[derive(Debug)]
pub struct TraceStore {
    capacity: usize,
    next: AtomicU64,
    inner: Mutex<TraceRing>,
}

/// Insertion order plus the traces themselves.
type TraceRing = (VecDeque<String>, HashMap<String, Arc<Vec<TraceEvent>>>);

impl TraceStore {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), next: AtomicU64::new(1), inner: Mutex::default() }
    }

    /// Timestamps every event and stores the trace under a fresh id.
    pub fn record(&self, mut events: Vec<TraceEvent>) -> String {
        let now = humantime::format_rfc3339_millis(SystemTime::now()).to_string();
        for e in &mut events {
            e.timestamp.get_or_insert_with(|| now.clone());
        }
        let id = format!("t{}", self.next.fetch_add(1, Ordering::Relaxed));
        let mut guard = self.inner.lock().expect("trace store poisoned");
        let (order, map) = &mut *guard;
        while order.len() >= self.capacity {
            if let Some(old) = order.pop_front() {
                map.remove(&old);
            }
        }
        order.push_back(id.clone());
        map.insert(id.clone(), Arc::new(events));
        id
    }

    pub fn get(&self, id: &str) -> Option<Arc<Vec<TraceEvent>>> {
        self.inner.lock().expect("trace store poisoned").1.get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("trace store poisoned").0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SessionState {
    pub session_id: String,
    pub corpus: Option<String>,
    pub selected_doc: Option<String>,
    pub last_query: Option<String>,
    pub last_plan: Option<QueryPlan>,
}

#[derive(Debug, Default)]
pub struct SessionStore {
    next: AtomicU64,
    sessions: Mutex<HashMap<String, SessionState>>,
}

impl SessionStore {
    /// Returns the id of the named session, or opens a new one when `id` is
    /// `None`. Unknown ids are an error.
    pub fn resolve(&self, id: Option<&str>, corpus: Option<&str>) -> Result<String, ApiError> {
        let mut sessions = self.sessions.lock().expect("session store poisoned");
        match id {
            Some(id) if sessions.contains_key(id) => Ok(id.to_string()),
            Some(id) => Err(ApiError::not_found(format!("unknown session {id:?}"))),
            None => {
                let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
                let state = SessionState { session_id: id.clone(), corpus: corpus.map(str::to_string), ..Default::default() };
                sessions.insert(id.clone(), state);
                Ok(id)
            }
        }
    }

    pub fn update(&self, id: &str, f: impl FnOnce(&mut SessionState)) {
        if let Some(s) = self.sessions.lock().expect("session store poisoned").get_mut(id) {
            f(s);
        }
    }

    pub fn get(&self, id: &str) -> Option<SessionState> {
        self.sessions.lock().expect("session store poisoned").get(id).cloned()
    }
}

type CacheKey = (String, String);

/// LRU of per-document chunk indexes keyed by (doc id, embedder cache key).
/// Concurrent requests for the same document share one build.
pub struct ChunkCache {
    entries: Mutex<LruCache<CacheKey, Arc<OnceCell<Arc<ChunkIndex>>>>>,
}

impl ChunkCache {
    pub fn new(capacity: usize) -> Self {
        let capacity = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        Self { entries: Mutex::new(LruCache::new(capacity)) }
    }

    pub async fn get_or_build(&self, docqa: &DocQa, corpus: &Arc<Corpus>, doc_id: &str) -> Result<Arc<ChunkIndex>, DocQaError> {
        let key = (doc_id.to_string(), docqa.embedder().cache_key());
        let cell = {
            let mut entries = self.entries.lock().expect("chunk cache poisoned");
            entries.get_or_insert(key, || Arc::new(OnceCell::new())).clone()
        };
        let index = cell
            .get_or_try_init(|| {
                let docqa = docqa.clone();
                let corpus = corpus.clone();
                let doc_id = doc_id.to_string();
                async move {
                    tokio::task::spawn_blocking(move || {
                        let doc = corpus.get(&doc_id).expect("caller checked the document exists");
                        docqa.build_index(doc).map(Arc::new)
                    })
                    .await
                    .expect("index build panicked")
                }
            })
            .await?;
        Ok(index.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("chunk cache poisoned").iter().filter(|(_, c)| c.initialized()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything the handlers share. The corpus, index and pipelines are
/// immutable; sessions, traces and the chunk cache synchronise internally.
pub struct AppState {
    pub corpus_name: Option<String>,
    pub engine: Option<SearchEngine>,
    pub expander: Expander,
    pub docqa: DocQa,
    pub traces: TraceStore,
    pub sessions: SessionStore,
    pub chunks: ChunkCache,
}

impl AppState {
    pub fn new(engine: Option<SearchEngine>, expander: Expander, docqa: DocQa, trace_capacity: usize, cache_capacity: usize) -> Self {
        Self {
            corpus_name: None,
            engine,
            expander,
            docqa,
            traces: TraceStore::new(trace_capacity),
            sessions: SessionStore::default(),
            chunks: ChunkCache::new(cache_capacity),
        }
    }

    pub fn with_corpus_name(mut self, name: impl Into<String>) -> Self {
        self.corpus_name = Some(name.into());
        self
    }

    pub fn engine(&self) -> Result<&SearchEngine, ApiError> {
        self.engine.as_ref().ok_or_else(|| ApiError::not_found("no corpus loaded"))
    }
}
