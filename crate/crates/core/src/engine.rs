//! The block-one search path shared by the CLI and the HTTP service.

use std::sync::Arc;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::expansion::{Expander, ExpansionError, PlannedQuery, Strategy};
use crate::index::{build_index, Bm25Params, FieldBoosts, FieldSpec, IndexError, ScoredDoc, SparseIndex};
use crate::query::{PlanError, QueryPlan};
use crate::trace::{Stage, StageEvent, Trace};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("invalid clause tree: {0}")]
    InvalidPlan(#[from] PlanError),
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub hits: Vec<ScoredDoc>,
    pub plan: QueryPlan,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct SearchEngine {
    corpus: Arc<Corpus>,
    index: Arc<SparseIndex>,
    expander: Expander,
    boosts: FieldBoosts,
}

impl SearchEngine {
    pub fn new(corpus: Arc<Corpus>, expander: Expander) -> Self {
        let index = build_index(&corpus, &FieldSpec::defaults(), Bm25Params::default());
        Self::with_index(corpus, Arc::new(index), expander)
    }

    /// Uses a prebuilt index, which must have been built from `corpus`.
    pub fn with_index(corpus: Arc<Corpus>, index: Arc<SparseIndex>, expander: Expander) -> Self {
        Self { corpus, index, expander, boosts: FieldBoosts::default() }
    }

    pub fn with_boosts(mut self, boosts: FieldBoosts) -> Self {
        self.boosts = boosts;
        self
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn index(&self) -> &SparseIndex {
        &self.index
    }

    pub fn expander(&self) -> &Expander {
        &self.expander
    }

    pub fn plan(&self, query: &str, strategy: Strategy) -> Result<PlannedQuery, ExpansionError> {
        self.expander.build_query_plan(query, strategy)
    }

    /// Expansion followed by retrieval; trace stages `entities, expansion,
    /// plan, retrieve` (only `plan, retrieve` for most-fields).
    pub fn search(&self, query: &str, strategy: Strategy, k: usize) -> Result<SearchOutcome, SearchError> {
        let planned = self.plan(query, strategy)?;
        let mut trace = Trace::new();
        trace.extend(planned.events);
        let (hits, event) = self.index.execute(&planned.plan, &self.boosts, k)?;
        trace.push(event);
        Ok(SearchOutcome { hits, plan: planned.plan, trace })
    }

    /// Runs a caller-supplied clause tree as-is; trace stages `plan, retrieve`.
    pub fn search_plan(&self, plan: &QueryPlan, k: usize) -> Result<SearchOutcome, SearchError> {
        plan.validate()?;
        let mut trace = Trace::new();
        trace.push(StageEvent::new(Stage::Plan, plan));
        let (hits, event) = self.index.execute(plan, &self.boosts, k)?;
        trace.push(event);
        Ok(SearchOutcome { hits, plan: plan.clone(), trace })
    }
}
