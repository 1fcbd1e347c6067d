//! Ontology-oriented query expansion.
//!
//! Entities found in the query are expanded through the ontology (synonyms,
//! one hop of hyponyms and hypernyms) and verbs through a synonym lexicon.
//! The result is a [`QueryPlan`] shaped by one of three [`Strategy`] values.

mod ontology;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ontology::{load_lexicon, load_ontology, read_lexicon, read_ontology, DanglingReference, Ontology, OntologyEntry, VerbLexicon};

use crate::analysis::word_tokens;
use crate::query::{Origin, QueryPlan, Tier, Variation, VariationGroup};
use crate::trace::{Stage, StageEvent};

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("query is empty")]
    EmptyQuery,
    #[error("entity tagger returned an invalid mention: {0}")]
    InvalidMention(String),
    #[error("entity tagger failed: {0}")]
    Tagger(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    /// Byte span in the query.
    pub start: usize,
    pub end: usize,
    pub concept_id: String,
}

/// Source of entity mentions. The built-in [`Gazetteer`] can be swapped for
/// an external tagger.
pub trait EntityTagger: Send + Sync {
    fn tag(&self, query: &str, ontology: &Ontology) -> Result<Vec<EntityMention>, ExpansionError>;
}

/// Case-insensitive, token-aligned dictionary matcher over ontology labels
/// and synonyms. Overlaps resolve to the longest span, then the leftmost.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gazetteer;

impl EntityTagger for Gazetteer {
    fn tag(&self, query: &str, ontology: &Ontology) -> Result<Vec<EntityMention>, ExpansionError> {
        Ok(extract_entities(query, ontology))
    }
}

pub fn extract_entities(query: &str, ontology: &Ontology) -> Vec<EntityMention> {
    let tokens = word_tokens(query);
    let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    let max = ontology.max_surface_tokens();
    // (first token, token count, concept)
    let mut candidates = Vec::new();
    for i in 0..words.len() {
        for len in 1..=max.min(words.len() - i) {
            if let Some(entry) = ontology.lookup(&words[i..i + len]) {
                candidates.push((i, len, entry));
            }
        }
    }
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut taken = vec![false; words.len()];
    let mut chosen = Vec::new();
    for (i, len, entry) in candidates {
        if taken[i..i + len].iter().any(|&t| t) {
            continue;
        }
        taken[i..i + len].iter_mut().for_each(|t| *t = true);
        chosen.push((i, len, entry));
    }
    chosen.sort_by_key(|c| c.0);
    chosen
        .into_iter()
        .map(|(i, len, entry)| {
            let start = tokens[i].start;
            let end = tokens[i + len - 1].end;
            EntityMention { surface: query[start..end].to_string(), start, end, concept_id: entry.concept_id.clone() }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredVariation {
    pub text: String,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSet {
    pub concept_id: String,
    pub variations: Vec<TieredVariation>,
}

/// Label, synonyms, then one hop of hyponym and hypernym labels. Texts are
/// deduplicated case-insensitively; the first (most precise) tier wins.
pub fn expand_entity(concept_id: &str, ontology: &Ontology) -> Result<ExpansionSet, ExpansionError> {
    let entry = ontology.get(concept_id).ok_or_else(|| ExpansionError::UnknownConcept(concept_id.to_string()))?;
    let mut seen = HashSet::new();
    let mut variations = Vec::new();
    let mut push = |text: &str, tier: Tier| {
        let text = text.trim();
        if !text.is_empty() && seen.insert(text.to_lowercase()) {
            variations.push(TieredVariation { text: text.to_string(), tier });
        }
    };
    push(&entry.label, Tier::Exact);
    for s in &entry.synonyms {
        push(s, Tier::Synonym);
    }
    for id in &entry.hyponyms {
        if let Some(e) = ontology.get(id) {
            push(&e.label, Tier::Hyponym);
        }
    }
    for id in &entry.hypernyms {
        if let Some(e) = ontology.get(id) {
            push(&e.label, Tier::Hypernym);
        }
    }
    Ok(ExpansionSet { concept_id: concept_id.to_string(), variations })
}

fn inside_any(start: usize, end: usize, mentions: &[EntityMention]) -> bool {
    mentions.iter().any(|m| start < m.end && m.start < end)
}

/// One verb group per distinct lexicon verb found outside entity spans.
pub fn expand_verbs(query: &str, mentions: &[EntityMention], lexicon: &VerbLexicon, config: &ExpansionConfig) -> Vec<VariationGroup> {
    let mut seen = HashSet::new();
    let mut groups = Vec::new();
    for token in word_tokens(query) {
        if inside_any(token.start, token.end, mentions) || !seen.insert(token.text.clone()) {
            continue;
        }
        let Some(synonyms) = lexicon.synonyms(&token.text) else { continue };
        let mut texts = HashSet::from([token.text.clone()]);
        let mut variations = vec![Variation { text: token.text.clone(), weight: 1.0, tier: Tier::Exact }];
        for s in synonyms {
            if texts.insert(s.to_lowercase()) {
                variations.push(Variation { text: s.clone(), weight: config.verb_synonym_weight, tier: Tier::Synonym });
            }
        }
        groups.push(VariationGroup { origin: Origin::Verb, boost: config.verb_boost, variations });
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Raw query tokens in one SHOULD group, no expansion.
    MostFields,
    /// Expanded entities as MUST groups.
    MustExpansion,
    /// Expanded entities as SHOULD groups.
    ShouldExpansion,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::MostFields, Strategy::MustExpansion, Strategy::ShouldExpansion];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MostFields => "most-fields",
            Strategy::MustExpansion => "must-expansion",
            Strategy::ShouldExpansion => "should-expansion",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected most-fields, must-expansion or should-expansion)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierWeights {
    pub exact: f64,
    pub synonym: f64,
    pub hyponym: f64,
    pub hypernym: f64,
}

impl TierWeights {
    pub fn weight(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Exact => self.exact,
            Tier::Synonym => self.synonym,
            Tier::Hyponym => self.hyponym,
            Tier::Hypernym => self.hypernym,
        }
    }
}

impl Default for TierWeights {
    fn default() -> Self {
        Self { exact: 1.0, synonym: 0.8, hyponym: 0.6, hypernym: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionConfig {
    pub tier_weights: TierWeights,
    pub entity_boost: f64,
    pub verb_boost: f64,
    pub residual_boost: f64,
    pub verb_synonym_weight: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self { tier_weights: TierWeights::default(), entity_boost: 2.0, verb_boost: 1.0, residual_boost: 0.5, verb_synonym_weight: 0.8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionPayload<'a> {
    pub entities: &'a [ExpansionSet],
    pub verbs: &'a [VariationGroup],
    pub residual: Option<&'a str>,
}

/// Everything the expansion step produced for one query.
#[derive(Debug, Clone)]
pub struct PlannedQuery {
    pub plan: QueryPlan,
    pub mentions: Vec<EntityMention>,
    pub expansions: Vec<ExpansionSet>,
    pub verb_groups: Vec<VariationGroup>,
    pub residual: Option<String>,
    pub events: Vec<StageEvent>,
}

/// Ontology, lexicon and tagger bundled for plan construction. Immutable
/// after construction.
#[derive(Clone)]
pub struct Expander {
    ontology: Arc<Ontology>,
    lexicon: Arc<VerbLexicon>,
    tagger: Arc<dyn EntityTagger>,
    config: ExpansionConfig,
}

impl fmt::Debug for Expander {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Expander")
            .field("concepts", &self.ontology.len())
            .field("verbs", &self.lexicon.len())
            .field("config", &self.config)
            .finish()
    }
}

impl Expander {
    pub fn new(ontology: Ontology, lexicon: VerbLexicon) -> Self {
        Self { ontology: Arc::new(ontology), lexicon: Arc::new(lexicon), tagger: Arc::new(Gazetteer), config: ExpansionConfig::default() }
    }

    pub fn with_tagger(mut self, tagger: Arc<dyn EntityTagger>) -> Self {
        self.tagger = tagger;
        self
    }

    pub fn with_config(mut self, config: ExpansionConfig) -> Self {
        self.config = config;
        self
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn lexicon(&self) -> &VerbLexicon {
        &self.lexicon
    }

    pub fn config(&self) -> &ExpansionConfig {
        &self.config
    }

    fn tag(&self, query: &str) -> Result<Vec<EntityMention>, ExpansionError> {
        let mut mentions = self.tagger.tag(query, &self.ontology)?;
        mentions.sort_by_key(|m| m.start);
        let mut last_end = 0;
        for m in &mentions {
            let valid = m.start < m.end
                && m.end <= query.len()
                && m.start >= last_end
                && query.is_char_boundary(m.start)
                && query.is_char_boundary(m.end);
            if !valid {
                return Err(ExpansionError::InvalidMention(format!("span {}..{}", m.start, m.end)));
            }
            if self.ontology.get(&m.concept_id).is_none() {
                return Err(ExpansionError::UnknownConcept(m.concept_id.clone()));
            }
            last_end = m.end;
        }
        Ok(mentions)
    }

    pub fn build_query_plan(&self, query: &str, strategy: Strategy) -> Result<PlannedQuery, ExpansionError> {
        let tokens = word_tokens(query);
        if tokens.is_empty() {
            return Err(ExpansionError::EmptyQuery);
        }
        if strategy == Strategy::MostFields {
            let text = tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            let plan = QueryPlan { must: vec![], should: vec![VariationGroup::single(Origin::Query, 1.0, text)] };
            let events = vec![StageEvent::new(Stage::Plan, &plan)];
            return Ok(PlannedQuery { plan, mentions: vec![], expansions: vec![], verb_groups: vec![], residual: None, events });
        }

        let mentions = self.tag(query)?;
        let mut events = vec![StageEvent::new(Stage::Entities, &mentions)];

        let mut expansions = Vec::new();
        let mut seen_concepts = HashSet::new();
        for m in &mentions {
            if seen_concepts.insert(m.concept_id.clone()) {
                expansions.push(expand_entity(&m.concept_id, &self.ontology)?);
            }
        }
        let verb_groups = expand_verbs(query, &mentions, &self.lexicon, &self.config);
        let residual: Vec<&str> = tokens
            .iter()
            .filter(|t| !inside_any(t.start, t.end, &mentions) && !self.lexicon.contains(&t.text))
            .map(|t| t.text.as_str())
            .collect();
        let residual = (!residual.is_empty()).then(|| residual.join(" "));
        events.push(StageEvent::new(
            Stage::Expansion,
            ExpansionPayload { entities: &expansions, verbs: &verb_groups, residual: residual.as_deref() },
        ));

        let weights = &self.config.tier_weights;
        let entity_groups: Vec<VariationGroup> = expansions
            .iter()
            .map(|set| VariationGroup {
                origin: Origin::Entity,
                boost: self.config.entity_boost,
                variations: set
                    .variations
                    .iter()
                    .map(|v| Variation { text: v.text.clone(), weight: weights.weight(v.tier), tier: v.tier })
                    .collect(),
            })
            .collect();
        let mut should = Vec::new();
        let must = match strategy {
            Strategy::MustExpansion => entity_groups,
            _ => {
                should.extend(entity_groups);
                Vec::new()
            }
        };
        should.extend(verb_groups.iter().cloned());
        if let Some(r) = &residual {
            should.push(VariationGroup::single(Origin::Query, self.config.residual_boost, r.clone()));
        }
        let plan = QueryPlan { must, should };
        events.push(StageEvent::new(Stage::Plan, &plan));
        Ok(PlannedQuery { plan, mentions, expansions, verb_groups, residual, events })
    }
}
