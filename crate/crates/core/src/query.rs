//! Boolean clause trees executed by the sparse index.
//!
//! The serialized form is the editable clause tree exchanged with clients:
//! `{must:[group], should:[group]}` with
//! `group = {origin, boost, variations:[{text, weight, tier}]}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Entity,
    Verb,
    /// Raw or residual query tokens.
    Query,
}

/// Where a variation came from relative to the detected concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Exact,
    Synonym,
    Hyponym,
    Hypernym,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub text: String,
    pub weight: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationGroup {
    pub origin: Origin,
    pub boost: f64,
    pub variations: Vec<Variation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    #[serde(default)]
    pub must: Vec<VariationGroup>,
    #[serde(default)]
    pub should: Vec<VariationGroup>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("query plan has no clauses")]
    EmptyPlan,
    #[error("group {0} has no variations")]
    EmptyGroup(usize),
    #[error("group {0} has non-positive boost")]
    BadBoost(usize),
    #[error("group {group}: variation weight {weight} outside (0, 1]")]
    BadWeight { group: usize, weight: f64 },
}

impl QueryPlan {
    pub fn is_empty(&self) -> bool {
        self.must.is_empty() && self.should.is_empty()
    }

    pub fn groups(&self) -> impl Iterator<Item = &VariationGroup> {
        self.must.iter().chain(self.should.iter())
    }

    /// Checks the structural invariants. Groups are numbered must-first.
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.is_empty() {
            return Err(PlanError::EmptyPlan);
        }
        for (i, group) in self.groups().enumerate() {
            if group.variations.is_empty() {
                return Err(PlanError::EmptyGroup(i));
            }
            if !group.boost.is_finite() || group.boost <= 0.0 {
                return Err(PlanError::BadBoost(i));
            }
            for v in &group.variations {
                if !(v.weight > 0.0 && v.weight <= 1.0) {
                    return Err(PlanError::BadWeight { group: i, weight: v.weight });
                }
            }
        }
        Ok(())
    }

    /// The same plan with every MUST group demoted to SHOULD.
    pub fn relaxed(&self) -> QueryPlan {
        QueryPlan { must: Vec::new(), should: self.must.iter().chain(&self.should).cloned().collect() }
    }
}

impl VariationGroup {
    pub fn single(origin: Origin, boost: f64, text: impl Into<String>) -> Self {
        Self { origin, boost, variations: vec![Variation { text: text.into(), weight: 1.0, tier: Tier::Exact }] }
    }
}
