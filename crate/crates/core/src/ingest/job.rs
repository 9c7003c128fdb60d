use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::AssetId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobType {
    Ingest,
    Refresh,
}

impl JobType {
    pub const ALL: [JobType; 2] = [JobType::Ingest, JobType::Refresh];

    pub fn as_str(self) -> &'static str {
        match self {
            JobType::Ingest => "ingest",
            JobType::Refresh => "refresh",
        }
    }
}

impl fmt::Display for JobType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ingest" => Ok(JobType::Ingest),
            "refresh" => Ok(JobType::Refresh),
            other => Err(format!(
                "unknown job type `{other}`; expected ingest or refresh"
            )),
        }
    }
}

/// Why a listed asset was not catalogued.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum SkipCause {
    /// Neither a card body nor a linked abstract to classify.
    MissingDocumentation,
    /// No taxonomy task survived classification and outlier rejection.
    NotSeRelevant,
    /// The provider returned a document that does not form a valid record.
    InvalidRecord(String),
    /// Fetching the card or metadata failed.
    FetchFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedAsset {
    pub asset_id: AssetId,
    #[serde(flatten)]
    pub cause: SkipCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRun {
    /// Assigned when the run is persisted.
    pub job_id: Option<i64>,
    pub job_type: JobType,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub assets_seen: u64,
    pub assets_catalogued: u64,
    pub assets_skipped: u64,
    /// Seen again with identical content; neither catalogued nor skipped.
    pub assets_unchanged: u64,
    pub skipped: Vec<SkippedAsset>,
    pub errors: Vec<String>,
}

impl JobRun {
    pub fn started(job_type: JobType, at: DateTime<Utc>) -> Self {
        JobRun {
            job_id: None,
            job_type,
            started_at: at,
            finished_at: at,
            assets_seen: 0,
            assets_catalogued: 0,
            assets_skipped: 0,
            assets_unchanged: 0,
            skipped: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn skip(&mut self, asset_id: AssetId, cause: SkipCause) {
        self.assets_skipped += 1;
        self.skipped.push(SkippedAsset { asset_id, cause });
    }

    pub fn is_consistent(&self) -> bool {
        self.finished_at >= self.started_at
            && self.assets_catalogued + self.assets_skipped <= self.assets_seen
    }
}
