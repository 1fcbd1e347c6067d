//! Access-point records: every pipeline stage leaves one event behind so a
//! user can inspect what the system did between query and answer.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// The closed stage vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Entities,
    Expansion,
    Plan,
    Retrieve,
    Chunking,
    Sparse,
    DenseHop,
    Fusion,
    Rerank,
    Extract,
    Chain,
    Pack,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Entities => "entities",
            Stage::Expansion => "expansion",
            Stage::Plan => "plan",
            Stage::Retrieve => "retrieve",
            Stage::Chunking => "chunking",
            Stage::Sparse => "sparse",
            Stage::DenseHop => "dense-hop",
            Stage::Fusion => "fusion",
            Stage::Rerank => "rerank",
            Stage::Extract => "extract",
            Stage::Chain => "chain",
            Stage::Pack => "pack",
        }
    }
}

/// A stage output before it has been placed in a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageEvent {
    pub stage: Stage,
    pub payload: Value,
}

impl StageEvent {
    pub fn new(stage: Stage, payload: impl Serialize) -> Self {
        let payload = serde_json::to_value(payload).expect("stage payloads serialize");
        Self { stage, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub ordinal: u32,
    pub stage: Stage,
    pub payload: Value,
    /// Filled in by whoever stores the trace; pipeline output leaves it empty
    /// so repeated runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: StageEvent) {
        let ordinal = self.events.len() as u32 + 1;
        self.events.push(TraceEvent { ordinal, stage: event.stage, payload: event.payload, timestamp: None });
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = StageEvent>) {
        for e in events {
            self.push(e);
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.events.iter().map(|e| e.stage).collect()
    }

    pub fn stamp(&mut self, timestamp: &str) {
        for e in &mut self.events {
            e.timestamp = Some(timestamp.to_string());
        }
    }
}

/// True when ordinals run 1..=n without gaps.
pub fn ordinals_contiguous(events: &[TraceEvent]) -> bool {
    events.iter().enumerate().all(|(i, e)| e.ordinal as usize == i + 1)
}
