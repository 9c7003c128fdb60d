//! Unified leaderboard over self-reported evaluations.
//!
//! Results are pulled out of model-card metadata by [`parse`], normalized
//! against a [`MetricRegistry`], and served as rankings, trend series and
//! filter facets by [`Leaderboard`].

pub mod metrics;
pub mod parse;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AssetId, AssetRecord};

pub use metrics::{
    normalize_metric, Direction, MetricDescriptor, MetricRegistry, NormalizedMetric,
};
pub use parse::{
    card_metadata, parse_card_evaluations, parse_eval_metadata, split_dataset_name, EvalParse,
    MetadataError, SkipReason,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub asset_id: AssetId,
    pub benchmark: String,
    pub implementation: Option<String>,
    pub language: Option<String>,
    pub metric_name: String,
    pub metric_config: Option<String>,
    pub score: f64,
    pub reported_at: DateTime<Utc>,
    /// The card reported a percentage that was divided by 100.
    #[serde(default)]
    pub percent_scaled: bool,
    /// The metric label matched no registry alias.
    #[serde(default)]
    pub unrecognized_metric: bool,
}

/// Identity of an evaluation: re-ingestion overwrites on this key.
pub type EvalKey<'a> = (
    &'a AssetId,
    &'a str,
    Option<&'a str>,
    Option<&'a str>,
    &'a str,
    Option<&'a str>,
);

impl EvalRecord {
    pub fn key(&self) -> EvalKey<'_> {
        (
            &self.asset_id,
            &self.benchmark,
            self.implementation.as_deref(),
            self.language.as_deref(),
            &self.metric_name,
            self.metric_config.as_deref(),
        )
    }
}

/// The five leaderboard filters plus a name search that never reorders.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, rename = "metric", skip_serializing_if = "Option::is_none")]
    pub metric_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_config: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_search: Option<String>,
}

impl LeaderboardQuery {
    pub fn new(benchmark: &str, metric: &str) -> Self {
        LeaderboardQuery {
            benchmark: Some(benchmark.to_string()),
            metric_name: Some(metric.to_string()),
            ..Default::default()
        }
    }

    pub fn implementation(mut self, v: &str) -> Self {
        self.implementation = Some(v.to_string());
        self
    }

    pub fn language(mut self, v: &str) -> Self {
        self.language = Some(v.to_string());
        self
    }

    pub fn metric_config(mut self, v: &str) -> Self {
        self.metric_config = Some(v.to_string());
        self
    }

    pub fn name_search(mut self, v: &str) -> Self {
        self.name_search = Some(v.to_string());
        self
    }

    /// Benchmark and metric are required for rankings and trends.
    pub fn validate(&self) -> Result<(), LeaderboardError> {
        let mut missing = Vec::new();
        if self
            .benchmark
            .as_deref()
            .is_none_or(|s| s.trim().is_empty())
        {
            missing.push("benchmark");
        }
        if self
            .metric_name
            .as_deref()
            .is_none_or(|s| s.trim().is_empty())
        {
            missing.push("metric");
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(LeaderboardError::MissingFilters(missing))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LeaderboardError {
    #[error("required leaderboard filters missing: {}", .0.join(", "))]
    MissingFilters(Vec<&'static str>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub asset_id: AssetId,
    pub model_name: String,
    pub score: f64,
    pub parameter_count: Option<u64>,
    pub created_at: DateTime<Utc>,
    pub likes: u64,
}

/// Explains an empty ranking instead of failing the request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "value", rename_all = "snake_case")]
pub enum EmptyReason {
    UnknownBenchmark(String),
    UnknownMetric(String),
    NoMatchingRecords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty_reason: Option<EmptyReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendAxis {
    Time,
    ModelSize,
}

impl FromStr for TrendAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "time" => Ok(TrendAxis::Time),
            "model_size" | "size" => Ok(TrendAxis::ModelSize),
            other => Err(format!("unknown trend axis `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrendX {
    Time(DateTime<Utc>),
    ModelSize(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub x: TrendX,
    pub y: f64,
    pub asset_id: AssetId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDimension {
    Benchmark,
    Implementation,
    Language,
    Metric,
    MetricConfig,
}

impl FilterDimension {
    pub const ALL: [FilterDimension; 5] = [
        FilterDimension::Benchmark,
        FilterDimension::Implementation,
        FilterDimension::Language,
        FilterDimension::Metric,
        FilterDimension::MetricConfig,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterDimension::Benchmark => "benchmark",
            FilterDimension::Implementation => "implementation",
            FilterDimension::Language => "language",
            FilterDimension::Metric => "metric",
            FilterDimension::MetricConfig => "metric_config",
        }
    }
}

impl fmt::Display for FilterDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterDimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FilterDimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown leaderboard dimension `{s}`"))
    }
}

/// An evaluation joined with the model attributes used for ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub record: EvalRecord,
    pub model_name: String,
    pub likes: u64,
    pub created_at: DateTime<Utc>,
    pub parameter_count: Option<u64>,
}

impl LeaderboardRow {
    fn value(&self, dim: FilterDimension) -> Option<&str> {
        match dim {
            FilterDimension::Benchmark => Some(&self.record.benchmark),
            FilterDimension::Implementation => self.record.implementation.as_deref(),
            FilterDimension::Language => self.record.language.as_deref(),
            FilterDimension::Metric => Some(&self.record.metric_name),
            FilterDimension::MetricConfig => self.record.metric_config.as_deref(),
        }
    }
}

fn eq_ci(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Ordering of two rows on one metric: score by direction, then likes
/// descending, then model name and id ascending.
pub fn compare_rows(a: &LeaderboardRow, b: &LeaderboardRow, direction: Direction) -> Ordering {
    let by_score = match direction {
        Direction::HigherIsBetter => b.record.score.total_cmp(&a.record.score),
        Direction::LowerIsBetter => a.record.score.total_cmp(&b.record.score),
    };
    by_score
        .then_with(|| b.likes.cmp(&a.likes))
        .then_with(|| a.model_name.cmp(&b.model_name))
        .then_with(|| a.record.asset_id.cmp(&b.record.asset_id))
}

#[derive(Debug, Clone)]
pub struct Leaderboard {
    rows: Vec<LeaderboardRow>,
    registry: MetricRegistry,
}

impl Leaderboard {
    pub fn new(rows: Vec<LeaderboardRow>, registry: MetricRegistry) -> Self {
        Leaderboard { rows, registry }
    }

    /// Rows for every evaluation of every canonical (non-duplicate) model.
    pub fn from_assets<'a, I>(assets: I, registry: MetricRegistry) -> Self
    where
        I: IntoIterator<Item = &'a AssetRecord>,
    {
        let rows = assets
            .into_iter()
            .filter(|a| !a.is_duplicate())
            .filter_map(|a| a.model().map(|m| (a, m)))
            .flat_map(|(a, m)| {
                m.eval_records.iter().map(move |r| LeaderboardRow {
                    record: r.clone(),
                    model_name: a.name.clone(),
                    likes: a.popularity.likes,
                    created_at: a.created_at,
                    parameter_count: m.parameter_count,
                })
            })
            .collect();
        Leaderboard { rows, registry }
    }

    pub fn rows(&self) -> &[LeaderboardRow] {
        &self.rows
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.registry
    }

    fn canonical_metric(&self, metric: &str) -> String {
        self.registry
            .lookup(metric)
            .map(|d| d.canonical_name.clone())
            .unwrap_or_else(|| metric.trim().to_string())
    }

    fn matches(
        &self,
        row: &LeaderboardRow,
        q: &LeaderboardQuery,
        skip: Option<FilterDimension>,
    ) -> bool {
        let wanted = [
            (FilterDimension::Benchmark, q.benchmark.clone()),
            (FilterDimension::Implementation, q.implementation.clone()),
            (FilterDimension::Language, q.language.clone()),
            (
                FilterDimension::Metric,
                q.metric_name.as_deref().map(|m| self.canonical_metric(m)),
            ),
            (FilterDimension::MetricConfig, q.metric_config.clone()),
        ];
        wanted.iter().all(|(dim, want)| {
            if Some(*dim) == skip {
                return true;
            }
            match want {
                None => true,
                Some(w) => row.value(*dim).is_some_and(|v| eq_ci(v, w)),
            }
        })
    }

    /// Rows passing every filter set in `query`; unset filters match all.
    pub fn matching_rows<'a>(
        &'a self,
        query: &'a LeaderboardQuery,
    ) -> impl Iterator<Item = &'a LeaderboardRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| self.matches(r, query, None))
    }

    pub fn rank(&self, query: &LeaderboardQuery) -> Result<Ranking, LeaderboardError> {
        query.validate()?;
        let benchmark = query.benchmark.as_deref().unwrap_or_default();
        let metric = self.canonical_metric(query.metric_name.as_deref().unwrap_or_default());
        if !self
            .rows
            .iter()
            .any(|r| eq_ci(&r.record.benchmark, benchmark))
        {
            return Ok(Ranking {
                entries: vec![],
                empty_reason: Some(EmptyReason::UnknownBenchmark(benchmark.to_string())),
            });
        }
        if !self
            .rows
            .iter()
            .any(|r| eq_ci(&r.record.metric_name, &metric))
        {
            return Ok(Ranking {
                entries: vec![],
                empty_reason: Some(EmptyReason::UnknownMetric(metric)),
            });
        }
        let direction = self.registry.direction(&metric);

        // one row per model: its best matching score
        let mut best: BTreeMap<&AssetId, &LeaderboardRow> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| self.matches(r, query, None)) {
            best.entry(&row.record.asset_id)
                .and_modify(|cur| {
                    if compare_rows(row, cur, direction) == Ordering::Less {
                        *cur = row;
                    }
                })
                .or_insert(row);
        }
        let mut ordered: Vec<&LeaderboardRow> = best.into_values().collect();
        ordered.sort_by(|a, b| compare_rows(a, b, direction));

        let search = query
            .name_search
            .as_deref()
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty());
        let entries: Vec<RankedEntry> = ordered
            .iter()
            .enumerate()
            .map(|(i, r)| RankedEntry {
                rank: i + 1,
                asset_id: r.record.asset_id.clone(),
                model_name: r.model_name.clone(),
                score: r.record.score,
                parameter_count: r.parameter_count,
                created_at: r.created_at,
                likes: r.likes,
            })
            .filter(|e| {
                search
                    .as_deref()
                    .is_none_or(|s| e.model_name.to_lowercase().contains(s))
            })
            .collect();
        let empty_reason = ordered.is_empty().then_some(EmptyReason::NoMatchingRecords);
        Ok(Ranking {
            entries,
            empty_reason,
        })
    }

    /// One point per matching evaluation, ascending by x then asset id.
    /// Size-axis points omit models without a parameter count.
    pub fn trend_series(
        &self,
        query: &LeaderboardQuery,
        axis: TrendAxis,
    ) -> Result<Vec<TrendPoint>, LeaderboardError> {
        query.validate()?;
        let mut points: Vec<TrendPoint> = self
            .rows
            .iter()
            .filter(|r| self.matches(r, query, None))
            .filter_map(|r| {
                let x = match axis {
                    TrendAxis::Time => TrendX::Time(r.created_at),
                    TrendAxis::ModelSize => TrendX::ModelSize(r.parameter_count?),
                };
                Some(TrendPoint {
                    x,
                    y: r.record.score,
                    asset_id: r.record.asset_id.clone(),
                })
            })
            .collect();
        points.sort_by(|a, b| {
            a.x.cmp(&b.x)
                .then_with(|| a.asset_id.cmp(&b.asset_id))
                .then_with(|| a.y.total_cmp(&b.y))
        });
        Ok(points)
    }

    /// Distinct values of `dimension` among rows matching the other chosen
    /// filters. The dimension's own selection is ignored so a dropdown keeps
    /// offering its alternatives.
    pub fn list_filter_values(
        &self,
        dimension: FilterDimension,
        partial: &LeaderboardQuery,
    ) -> Vec<String> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut out: BTreeMap<String, String> = BTreeMap::new();
        for row in self
            .rows
            .iter()
            .filter(|r| self.matches(r, partial, Some(dimension)))
        {
            if let Some(v) = row.value(dimension) {
                let key = v.trim().to_lowercase();
                if seen.insert(key) {
                    out.insert(v.to_string(), v.to_string());
                } else if let Some(existing) = out.keys().find(|k| eq_ci(k, v)).cloned() {
                    // keep the lexicographically smallest spelling
                    if v < existing.as_str() {
                        out.remove(&existing);
                        out.insert(v.to_string(), v.to_string());
                    }
                }
            }
        }
        out.into_keys().collect()
    }
}
