//! Domain model for catalogue entries and the cataloguing pipeline.
//!
//! A raw registry asset becomes a catalogue entry only after it has been
//! classified against the task taxonomy ([`classify`]), survived lexical
//! outlier rejection ([`outliers`]) and been grouped with its near duplicates
//! ([`dedup`]).

pub mod batch;
pub mod classify;
pub mod dedup;
pub mod outliers;
pub mod taxonomy;
pub mod text;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leaderboard::EvalRecord;

pub use batch::{classify_batch, duplicate_links, BatchVerdict};
pub use classify::{classify_asset, classify_detailed, ClassifyError, TaskMatch};
pub use dedup::{deduplicate, DedupInput, DuplicateGroup, DEFAULT_DEDUP_THRESHOLD};
pub use outliers::{
    detect_lexical_outliers, OutlierConfig, OutlierDecision, OutlierPartition, TaskCandidate,
};
pub use taxonomy::{load_taxonomy, SdlcStage, Taxonomy, TaxonomyEntry, TaxonomyError};
pub use text::{cosine_similarity, tokenize, CorpusStats, DocumentVector};

/// Stable identifier of a catalogue entry: `<provider>:<repo path>`.
///
/// Dataset repo paths carry the registry's `datasets/` prefix, so a model and
/// a dataset with the same owner/name never collide.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(String);

impl AssetId {
    pub fn new(provider: &str, repo_path: &str) -> Self {
        AssetId(format!("{provider}:{repo_path}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn provider(&self) -> &str {
        self.0.split_once(':').map(|(p, _)| p).unwrap_or("")
    }

    pub fn repo_path(&self) -> &str {
        self.0.split_once(':').map(|(_, r)| r).unwrap_or(&self.0)
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AssetId {
    fn from(s: &str) -> Self {
        AssetId(s.to_string())
    }
}

impl From<String> for AssetId {
    fn from(s: String) -> Self {
        AssetId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Model,
    Dataset,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Model => "model",
            AssetKind::Dataset => "dataset",
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" | "models" => Ok(AssetKind::Model),
            "dataset" | "datasets" => Ok(AssetKind::Dataset),
            other => Err(format!("unknown asset kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityMetrics {
    pub downloads: u64,
    pub likes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityMetrics {
    pub commits: u64,
    pub contributors: u64,
}

impl ActivityMetrics {
    /// A contributor implies at least one commit.
    pub fn is_consistent(&self) -> bool {
        self.contributors <= self.commits
    }
}

/// Dataset size measured in rows, bucketed on powers of ten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBucket {
    Under1K,
    From1KTo10K,
    From10KTo100K,
    From100KTo1M,
    From1MTo10M,
    From10MTo100M,
    From100MTo1B,
    Over1B,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 8] = [
        SizeBucket::Under1K,
        SizeBucket::From1KTo10K,
        SizeBucket::From10KTo100K,
        SizeBucket::From100KTo1M,
        SizeBucket::From1MTo10M,
        SizeBucket::From10MTo100M,
        SizeBucket::From100MTo1B,
        SizeBucket::Over1B,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SizeBucket::Under1K => "<1K",
            SizeBucket::From1KTo10K => "1K-10K",
            SizeBucket::From10KTo100K => "10K-100K",
            SizeBucket::From100KTo1M => "100K-1M",
            SizeBucket::From1MTo10M => "1M-10M",
            SizeBucket::From10MTo100M => "10M-100M",
            SizeBucket::From100MTo1B => "100M-1B",
            SizeBucket::Over1B => ">1B",
        }
    }

    pub fn from_row_count(rows: u64) -> Self {
        match rows {
            0..1_000 => SizeBucket::Under1K,
            1_000..10_000 => SizeBucket::From1KTo10K,
            10_000..100_000 => SizeBucket::From10KTo100K,
            100_000..1_000_000 => SizeBucket::From100KTo1M,
            1_000_000..10_000_000 => SizeBucket::From1MTo10M,
            10_000_000..100_000_000 => SizeBucket::From10MTo100M,
            100_000_000..1_000_000_000 => SizeBucket::From100MTo1B,
            _ => SizeBucket::Over1B,
        }
    }

    /// Parses our own labels (ASCII or en dash) as well as the registry's
    /// `size_categories` notation such as `100M<n<1B`.
    pub fn parse(label: &str) -> Option<Self> {
        let norm: String = label
            .trim()
            .replace(['\u{2013}', '\u{2014}'], "-")
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_uppercase();
        let found = match norm.as_str() {
            "<1K" | "N<1K" => SizeBucket::Under1K,
            "1K-10K" | "1K<N<10K" => SizeBucket::From1KTo10K,
            "10K-100K" | "10K<N<100K" => SizeBucket::From10KTo100K,
            "100K-1M" | "100K<N<1M" => SizeBucket::From100KTo1M,
            "1M-10M" | "1M<N<10M" => SizeBucket::From1MTo10M,
            "10M-100M" | "10M<N<100M" => SizeBucket::From10MTo100M,
            "100M-1B" | "100M<N<1B" => SizeBucket::From100MTo1B,
            ">1B" | "1B<N<10B" | "10B<N<100B" | "100B<N<1T" | "N>1T" => SizeBucket::Over1B,
            _ => return None,
        };
        Some(found)
    }
}

impl fmt::Display for SizeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for SizeBucket {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for SizeBucket {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        SizeBucket::parse(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown size bucket `{raw}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelExtension {
    pub size_bytes: u64,
    pub region: Option<String>,
    pub training_datasets: BTreeSet<String>,
    pub inference_providers: BTreeSet<String>,
    pub eval_records: Vec<EvalRecord>,
    pub parameter_count: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetExtension {
    /// Absent when the registry reports neither a size category nor a row count.
    pub size_rows_bucket: Option<SizeBucket>,
    pub formats: BTreeSet<String>,
    pub modalities: BTreeSet<String>,
    pub disciplines: BTreeSet<String>,
}

/// Kind-specific attributes. The variant *is* the asset kind, so exactly one
/// extension exists per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssetExtension {
    Model(ModelExtension),
    Dataset(DatasetExtension),
}

impl AssetExtension {
    pub fn kind(&self) -> AssetKind {
        match self {
            AssetExtension::Model(_) => AssetKind::Model,
            AssetExtension::Dataset(_) => AssetKind::Dataset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTaskAssignment {
    pub task_id: String,
    pub confidence: f64,
    /// Verbatim excerpt of the card or abstract containing the matched phrase.
    pub rationale: String,
    /// Kept despite an ambiguous-only match because no reference documents
    /// existed to judge it against.
    #[serde(default)]
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub asset_id: AssetId,
    pub name: String,
    pub provider: String,
    pub repo_url: String,
    pub created_at: DateTime<Utc>,
    pub last_refreshed_at: DateTime<Utc>,
    pub licenses: BTreeSet<String>,
    pub libraries: BTreeSet<String>,
    pub natural_languages: BTreeSet<String>,
    pub ml_tasks: BTreeSet<String>,
    pub se_tasks: Vec<SeTaskAssignment>,
    pub popularity: PopularityMetrics,
    pub activity: ActivityMetrics,
    pub card_text: String,
    pub abstract_text: Option<String>,
    pub extension: AssetExtension,
    /// Canonical member of this asset's near-duplicate group, when this asset
    /// is not itself canonical.
    #[serde(default)]
    pub duplicate_of: Option<AssetId>,
    /// Set after repeated refresh failures (vanished or renamed upstream).
    #[serde(default)]
    pub stale: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("created_at is later than last_refreshed_at")]
    RefreshedBeforeCreated,
    #[error("{contributors} contributors reported for {commits} commits")]
    InconsistentActivity { commits: u64, contributors: u64 },
    #[error("repo_url `{0}` is not an absolute URL")]
    RelativeRepoUrl(String),
    #[error("assignment to `{0}` has confidence outside [0, 1]")]
    ConfidenceOutOfRange(String),
    #[error("rationale for `{0}` is not an excerpt of the documentation")]
    RationaleNotVerbatim(String),
    #[error("assignment references unknown task `{0}`")]
    UnknownTask(String),
    #[error("asset is its own duplicate")]
    SelfDuplicate,
}

impl AssetRecord {
    pub fn kind(&self) -> AssetKind {
        self.extension.kind()
    }

    pub fn model(&self) -> Option<&ModelExtension> {
        match &self.extension {
            AssetExtension::Model(m) => Some(m),
            AssetExtension::Dataset(_) => None,
        }
    }

    pub fn model_mut(&mut self) -> Option<&mut ModelExtension> {
        match &mut self.extension {
            AssetExtension::Model(m) => Some(m),
            AssetExtension::Dataset(_) => None,
        }
    }

    pub fn dataset(&self) -> Option<&DatasetExtension> {
        match &self.extension {
            AssetExtension::Dataset(d) => Some(d),
            AssetExtension::Model(_) => None,
        }
    }

    pub fn eval_records(&self) -> &[EvalRecord] {
        self.model()
            .map(|m| m.eval_records.as_slice())
            .unwrap_or(&[])
    }

    pub fn is_duplicate(&self) -> bool {
        self.duplicate_of.is_some()
    }

    /// Card text with any leading YAML front-matter block removed. Always a
    /// suffix of `card_text`.
    pub fn card_body(&self) -> &str {
        text::strip_front_matter(&self.card_text)
    }

    /// Registry tags that take part in classification and similarity.
    pub fn metadata_tags(&self) -> Vec<&str> {
        let mut tags: Vec<&str> = self
            .ml_tasks
            .iter()
            .chain(&self.libraries)
            .map(String::as_str)
            .collect();
        if let Some(d) = self.dataset() {
            tags.extend(
                d.modalities
                    .iter()
                    .chain(&d.disciplines)
                    .map(String::as_str),
            );
        }
        tags
    }

    /// Card body, abstract and metadata tags concatenated: the text that is
    /// vectorized for outlier detection and deduplication.
    pub fn documentation_text(&self) -> String {
        let mut doc = String::from(self.card_body());
        if let Some(a) = &self.abstract_text {
            doc.push('\n');
            doc.push_str(a);
        }
        for tag in self.metadata_tags() {
            doc.push('\n');
            doc.push_str(tag);
        }
        doc
    }

    pub fn validate(&self, taxonomy: Option<&Taxonomy>) -> Result<(), RecordError> {
        if self.created_at > self.last_refreshed_at {
            return Err(RecordError::RefreshedBeforeCreated);
        }
        if !self.activity.is_consistent() {
            return Err(RecordError::InconsistentActivity {
                commits: self.activity.commits,
                contributors: self.activity.contributors,
            });
        }
        match url::Url::parse(&self.repo_url) {
            Ok(u) if u.has_host() => {}
            _ => return Err(RecordError::RelativeRepoUrl(self.repo_url.clone())),
        }
        for a in &self.se_tasks {
            if !(0.0..=1.0).contains(&a.confidence) {
                return Err(RecordError::ConfidenceOutOfRange(a.task_id.clone()));
            }
            let in_card = self.card_text.contains(&a.rationale);
            let in_abstract = self
                .abstract_text
                .as_deref()
                .is_some_and(|t| t.contains(&a.rationale));
            if a.rationale.is_empty() || !(in_card || in_abstract) {
                return Err(RecordError::RationaleNotVerbatim(a.task_id.clone()));
            }
            if let Some(tax) = taxonomy {
                if tax.get(&a.task_id).is_none() {
                    return Err(RecordError::UnknownTask(a.task_id.clone()));
                }
            }
        }
        if self.duplicate_of.as_ref() == Some(&self.asset_id) {
            return Err(RecordError::SelfDuplicate);
        }
        Ok(())
    }
}
