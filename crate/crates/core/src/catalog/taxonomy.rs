use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed taxonomy shipped with the crate. Swappable through configuration.
pub const SEED_TAXONOMY: &str = include_str!("../../data/taxonomy.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdlcStage {
    Requirements,
    Design,
    Implementation,
    QualityAssurance,
    Maintenance,
}

impl SdlcStage {
    pub const ALL: [SdlcStage; 5] = [
        SdlcStage::Requirements,
        SdlcStage::Design,
        SdlcStage::Implementation,
        SdlcStage::QualityAssurance,
        SdlcStage::Maintenance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SdlcStage::Requirements => "requirements",
            SdlcStage::Design => "design",
            SdlcStage::Implementation => "implementation",
            SdlcStage::QualityAssurance => "quality_assurance",
            SdlcStage::Maintenance => "maintenance",
        }
    }
}

impl fmt::Display for SdlcStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SdlcStage {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        SdlcStage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub task_id: String,
    pub task_name: String,
    pub sdlc_stage: SdlcStage,
    pub lexicon: Vec<String>,
    #[serde(default)]
    pub ambiguity_terms: Vec<String>,
}

impl TaxonomyEntry {
    pub fn is_ambiguous(&self, term: &str) -> bool {
        self.ambiguity_terms
            .iter()
            .any(|t| t.eq_ignore_ascii_case(term))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("taxonomy parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate task_id `{0}`")]
    DuplicateTaskId(String),
    #[error("task `{0}` has an empty lexicon")]
    EmptyLexicon(String),
    #[error("task `{task_id}` has unknown sdlc_stage `{stage}`")]
    UnknownStage { task_id: String, stage: String },
    #[error("task `{task_id}`: ambiguity term `{term}` is not in the lexicon")]
    AmbiguityTermNotInLexicon { task_id: String, term: String },
    #[error("task entry with an empty task_id")]
    EmptyTaskId,
}

// Wire shape: the stage stays a string so an unknown value is reported as a
// validation error rather than a parse error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    task_id: String,
    task_name: String,
    sdlc_stage: String,
    lexicon: Vec<String>,
    #[serde(default)]
    ambiguity_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    entries: Vec<TaxonomyEntry>,
    index: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn new(entries: Vec<TaxonomyEntry>) -> Result<Self, TaxonomyError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.task_id.trim().is_empty() {
                return Err(TaxonomyError::EmptyTaskId);
            }
            if index.insert(e.task_id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateTaskId(e.task_id.clone()));
            }
            if e.lexicon.iter().all(|t| t.trim().is_empty()) {
                return Err(TaxonomyError::EmptyLexicon(e.task_id.clone()));
            }
            for term in &e.ambiguity_terms {
                if !e.lexicon.iter().any(|l| l.eq_ignore_ascii_case(term)) {
                    return Err(TaxonomyError::AmbiguityTermNotInLexicon {
                        task_id: e.task_id.clone(),
                        term: term.clone(),
                    });
                }
            }
        }
        Ok(Taxonomy { entries, index })
    }

    pub fn seed() -> Self {
        load_taxonomy(SEED_TAXONOMY).expect("shipped seed taxonomy is valid")
    }

    pub fn entries(&self) -> &[TaxonomyEntry] {
        &self.entries
    }

    pub fn get(&self, task_id: &str) -> Option<&TaxonomyEntry> {
        self.index.get(task_id).map(|&i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stages(&self) -> BTreeSet<SdlcStage> {
        self.entries.iter().map(|e| e.sdlc_stage).collect()
    }

    pub fn missing_stages(&self) -> Vec<SdlcStage> {
        let present = self.stages();
        SdlcStage::ALL
            .into_iter()
            .filter(|s| !present.contains(s))
            .collect()
    }
}

/// Parses and validates a taxonomy document (a JSON array of task objects).
pub fn load_taxonomy(source: &str) -> Result<Taxonomy, TaxonomyError> {
    let raw: Vec<RawEntry> = serde_json::from_str(source).map_err(|e| TaxonomyError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let entries = raw
        .into_iter()
        .map(|r| {
            let sdlc_stage = r
                .sdlc_stage
                .parse()
                .map_err(|()| TaxonomyError::UnknownStage {
                    task_id: r.task_id.clone(),
                    stage: r.sdlc_stage.clone(),
                })?;
            Ok(TaxonomyEntry {
                task_id: r.task_id,
                task_name: r.task_name,
                sdlc_stage,
                lexicon: r.lexicon,
                ambiguity_terms: r.ambiguity_terms,
            })
        })
        .collect::<Result<Vec<_>, TaxonomyError>>()?;
    Taxonomy::new(entries)
}
