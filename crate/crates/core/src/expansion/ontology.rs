use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExpansionError;
use crate::analysis::{analyze, AnalyzerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyEntry {
    #[serde(rename = "id")]
    pub concept_id: String,
    pub label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub hypernyms: Vec<String>,
    #[serde(default)]
    pub hyponyms: Vec<String>,
}

/// A hypernym/hyponym link pointing at a concept that is not in the file.
/// The link is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DanglingReference {
    pub concept_id: String,
    pub missing: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SurfaceRef {
    pub entry: usize,
    pub is_label: bool,
}

/// Concepts indexed by id and by the token sequence of every label and synonym.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    entries: Vec<OntologyEntry>,
    by_id: HashMap<String, usize>,
    surfaces: HashMap<Vec<String>, Vec<SurfaceRef>>,
    max_surface_tokens: usize,
}

impl Ontology {
    /// Builds from parsed entries; returns the dropped links alongside.
    pub fn from_entries(entries: Vec<OntologyEntry>) -> Result<(Self, Vec<DanglingReference>), ExpansionError> {
        let mut by_id = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.label.trim().is_empty() {
                return Err(ExpansionError::Parse { line: i + 1, message: format!("concept {:?} has an empty label", e.concept_id) });
            }
            if by_id.insert(e.concept_id.clone(), i).is_some() {
                return Err(ExpansionError::Parse { line: i + 1, message: format!("duplicate concept id {:?}", e.concept_id) });
            }
        }
        let mut warnings = Vec::new();
        let mut entries = entries;
        for e in &mut entries {
            for links in [&mut e.hypernyms, &mut e.hyponyms] {
                links.retain(|id| {
                    let ok = by_id.contains_key(id);
                    if !ok {
                        warnings.push(DanglingReference { concept_id: e.concept_id.clone(), missing: id.clone() });
                    }
                    ok
                });
            }
        }
        let mut ontology = Ontology { entries, by_id, ..Default::default() };
        ontology.index_surfaces();
        Ok((ontology, warnings))
    }

    fn index_surfaces(&mut self) {
        let analyzer = AnalyzerConfig::standard();
        for (i, e) in self.entries.iter().enumerate() {
            let forms = std::iter::once((&e.label, true)).chain(e.synonyms.iter().map(|s| (s, false)));
            let mut seen = HashSet::new();
            for (form, is_label) in forms {
                let key = analyze(form, &analyzer);
                if key.is_empty() || !seen.insert(key.clone()) {
                    continue;
                }
                self.max_surface_tokens = self.max_surface_tokens.max(key.len());
                self.surfaces.entry(key).or_default().push(SurfaceRef { entry: i, is_label });
            }
        }
    }

    pub fn get(&self, concept_id: &str) -> Option<&OntologyEntry> {
        self.by_id.get(concept_id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[OntologyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn max_surface_tokens(&self) -> usize {
        self.max_surface_tokens
    }

    /// Concept for an exact lowercased token sequence. Label matches beat
    /// synonym matches, then the smaller concept id wins.
    pub(crate) fn lookup(&self, tokens: &[String]) -> Option<&OntologyEntry> {
        self.surfaces
            .get(tokens)?
            .iter()
            .map(|r| (r, &self.entries[r.entry]))
            .min_by(|(ra, ea), (rb, eb)| rb.is_label.cmp(&ra.is_label).then_with(|| ea.concept_id.cmp(&eb.concept_id)))
            .map(|(_, e)| e)
    }
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<(Ontology, Vec<DanglingReference>), ExpansionError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ExpansionError::Io { path: path.display().to_string(), source: e })?;
    read_ontology(BufReader::new(file))
}

pub fn read_ontology<R: BufRead>(reader: R) -> Result<(Ontology, Vec<DanglingReference>), ExpansionError> {
    let mut entries = Vec::new();
    let mut line_of = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ExpansionError::Io { path: "<reader>".into(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: OntologyEntry =
            serde_json::from_str(&line).map_err(|e| ExpansionError::Parse { line: i + 1, message: e.to_string() })?;
        entries.push(entry);
        line_of.push(i + 1);
    }
    Ontology::from_entries(entries).map_err(|e| match e {
        // report the file line rather than the entry position
        ExpansionError::Parse { line, message } => ExpansionError::Parse { line: line_of[line - 1], message },
        other => other,
    })
}

/// Verb → synonyms, from `verb<TAB>syn1,syn2,...` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerbLexicon {
    map: HashMap<String, Vec<String>>,
}

impl VerbLexicon {
    pub fn new(pairs: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        let map = pairs
            .into_iter()
            .map(|(verb, syns)| (verb.to_lowercase(), syns.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()))
            .collect();
        Self { map }
    }

    pub fn synonyms(&self, verb: &str) -> Option<&[String]> {
        self.map.get(verb).map(Vec::as_slice)
    }

    pub fn contains(&self, verb: &str) -> bool {
        self.map.contains_key(verb)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn read_lexicon<R: BufRead>(reader: R) -> Result<VerbLexicon, ExpansionError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ExpansionError::Io { path: "<reader>".into(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let (verb, syns) =
            line.split_once('\t').ok_or_else(|| ExpansionError::Parse { line: i + 1, message: "expected verb<TAB>synonyms".into() })?;
        let verb = verb.trim();
        if verb.is_empty() {
            return Err(ExpansionError::Parse { line: i + 1, message: "empty verb".into() });
        }
        pairs.push((verb.to_string(), syns.split(',').map(str::to_string).collect()));
    }
    Ok(VerbLexicon::new(pairs))
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<VerbLexicon, ExpansionError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ExpansionError::Io { path: path.display().to_string(), source: e })?;
    read_lexicon(BufReader::new(file))
}
