//! Two-block retrieval engine for long scientific documents.
//!
//! Block one searches a corpus with a fielded BM25 index whose queries are
//! expanded through an ontology ([`expansion`], [`index`]). Block two answers
//! a question inside one selected document with a hybrid sparse + multihop
//! dense pipeline ([`docqa`]). Every stage records a [`trace::TraceEvent`].

pub mod analysis;
pub mod corpus;
pub mod docqa;
pub mod embed;
pub mod engine;
pub mod eval;
pub mod expansion;
pub mod index;
pub mod query;
pub mod trace;
