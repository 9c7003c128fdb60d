//! Faceted search over the catalogue and export of result sets.

pub mod export;
pub mod params;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AssetKind, AssetRecord, SizeBucket};

pub use export::{export, AssetRow, ExportError, ExportFormat, Exported, COLUMNS};
pub use params::{from_query_pairs, to_query_pairs};

pub const MAX_PAGE_LIMIT: usize = 500;
pub const DEFAULT_PAGE_LIMIT: usize = 50;

/// Inclusive integer range; an absent bound is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u64>,
}

impl CountRange {
    pub fn at_least(min: u64) -> Self {
        CountRange {
            min: Some(min),
            max: None,
        }
    }

    pub fn between(min: u64, max: u64) -> Self {
        CountRange {
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn contains(&self, v: u64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }

    fn is_inverted(&self) -> bool {
        matches!((self.min, self.max), (Some(a), Some(b)) if a > b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<DateTime<Utc>>,
}

impl TimeRange {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t <= e)
    }

    fn is_inverted(&self) -> bool {
        matches!((self.from, self.to), (Some(a), Some(b)) if a > b)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFilters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes_range: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_datasets: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_providers: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_eval_results: Option<bool>,
}

impl ModelFilters {
    fn is_empty(&self) -> bool {
        *self == ModelFilters::default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFilters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_rows_buckets: Option<BTreeSet<SizeBucket>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modalities: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disciplines: Option<BTreeSet<String>>,
}

impl DatasetFilters {
    fn is_empty(&self) -> bool {
        *self == DatasetFilters::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    Name,
    CreatedAt,
    Downloads,
    Likes,
    Commits,
    Contributors,
}

impl SortKey {
    pub const ALL: [SortKey; 6] = [
        SortKey::Name,
        SortKey::CreatedAt,
        SortKey::Downloads,
        SortKey::Likes,
        SortKey::Commits,
        SortKey::Contributors,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SortKey::Name => "name",
            SortKey::CreatedAt => "created_at",
            SortKey::Downloads => "downloads",
            SortKey::Likes => "likes",
            SortKey::Commits => "commits",
            SortKey::Contributors => "contributors",
        }
    }
}

impl FromStr for SortKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SortKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown sort key `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDirection {
    #[serde(alias = "asc")]
    Ascending,
    #[serde(alias = "desc")]
    Descending,
}

impl SortDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SortDirection::Ascending => "asc",
            SortDirection::Descending => "desc",
        }
    }
}

impl FromStr for SortDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "asc" | "ascending" => Ok(SortDirection::Ascending),
            "desc" | "descending" => Ok(SortDirection::Descending),
            other => Err(format!("unknown sort order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortSpec {
    pub key: SortKey,
    pub direction: SortDirection,
}

impl Default for SortSpec {
    fn default() -> Self {
        SortSpec {
            key: SortKey::CreatedAt,
            direction: SortDirection::Descending,
        }
    }
}

impl SortSpec {
    pub fn new(key: SortKey, direction: SortDirection) -> Self {
        SortSpec { key, direction }
    }

    /// Full ordering: the key in the requested direction, then asset id
    /// ascending regardless of direction.
    pub fn compare(&self, a: &AssetRecord, b: &AssetRecord) -> Ordering {
        let by_key = match self.key {
            SortKey::Name => a
                .name
                .to_lowercase()
                .cmp(&b.name.to_lowercase())
                .then_with(|| a.name.cmp(&b.name)),
            SortKey::CreatedAt => a.created_at.cmp(&b.created_at),
            SortKey::Downloads => a.popularity.downloads.cmp(&b.popularity.downloads),
            SortKey::Likes => a.popularity.likes.cmp(&b.popularity.likes),
            SortKey::Commits => a.activity.commits.cmp(&b.activity.commits),
            SortKey::Contributors => a.activity.contributors.cmp(&b.activity.contributors),
        };
        let by_key = match self.direction {
            SortDirection::Ascending => by_key,
            SortDirection::Descending => by_key.reverse(),
        };
        by_key.then_with(|| a.asset_id.cmp(&b.asset_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Page {
            offset: 0,
            limit: DEFAULT_PAGE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterQuery {
    pub kind: AssetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifier_substring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_task_ids: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub licenses: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub libraries: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natural_languages: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml_tasks: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_between: Option<TimeRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downloads_range: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likes_range: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commits_range: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contributors_range: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_only: Option<ModelFilters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_only: Option<DatasetFilters>,
    #[serde(default)]
    pub sort: SortSpec,
    #[serde(default)]
    pub page: Page,
}

impl FilterQuery {
    /// Matches every non-duplicate asset of `kind`.
    pub fn all(kind: AssetKind) -> Self {
        FilterQuery {
            kind,
            identifier_substring: None,
            se_task_ids: None,
            licenses: None,
            libraries: None,
            natural_languages: None,
            ml_tasks: None,
            created_between: None,
            downloads_range: None,
            likes_range: None,
            commits_range: None,
            contributors_range: None,
            model_only: None,
            dataset_only: None,
            sort: SortSpec::default(),
            page: Page::default(),
        }
    }

    pub fn validate(&self) -> Result<(), InvalidQuery> {
        let mut errors = InvalidQuery::default();
        let sets: [(&str, &Option<BTreeSet<String>>); 5] = [
            ("se_task_ids", &self.se_task_ids),
            ("licenses", &self.licenses),
            ("libraries", &self.libraries),
            ("natural_languages", &self.natural_languages),
            ("ml_tasks", &self.ml_tasks),
        ];
        for (field, set) in sets {
            check_set(&mut errors, field, set.as_ref().map(BTreeSet::len));
        }
        if self.created_between.is_some_and(|r| r.is_inverted()) {
            errors.add("created_between", "from is later than to");
        }
        let ranges = [
            ("downloads_range", self.downloads_range),
            ("likes_range", self.likes_range),
            ("commits_range", self.commits_range),
            ("contributors_range", self.contributors_range),
        ];
        for (field, range) in ranges {
            if range.is_some_and(|r| r.is_inverted()) {
                errors.add(field, "min is greater than max");
            }
        }
        if let Some(m) = &self.model_only {
            if self.kind != AssetKind::Model && !m.is_empty() {
                errors.add("model_only", "model filters require kind=model");
            }
            if m.size_bytes_range.is_some_and(|r| r.is_inverted()) {
                errors.add("model_only.size_bytes_range", "min is greater than max");
            }
            check_set(
                &mut errors,
                "model_only.regions",
                m.regions.as_ref().map(BTreeSet::len),
            );
            check_set(
                &mut errors,
                "model_only.training_datasets",
                m.training_datasets.as_ref().map(BTreeSet::len),
            );
            check_set(
                &mut errors,
                "model_only.inference_providers",
                m.inference_providers.as_ref().map(BTreeSet::len),
            );
        }
        if let Some(d) = &self.dataset_only {
            if self.kind != AssetKind::Dataset && !d.is_empty() {
                errors.add("dataset_only", "dataset filters require kind=dataset");
            }
            check_set(
                &mut errors,
                "dataset_only.size_rows_buckets",
                d.size_rows_buckets.as_ref().map(BTreeSet::len),
            );
            check_set(
                &mut errors,
                "dataset_only.formats",
                d.formats.as_ref().map(BTreeSet::len),
            );
            check_set(
                &mut errors,
                "dataset_only.modalities",
                d.modalities.as_ref().map(BTreeSet::len),
            );
            check_set(
                &mut errors,
                "dataset_only.disciplines",
                d.disciplines.as_ref().map(BTreeSet::len),
            );
        }
        if self.page.limit == 0 || self.page.limit > MAX_PAGE_LIMIT {
            errors.add(
                "page.limit",
                &format!("must be between 1 and {MAX_PAGE_LIMIT}"),
            );
        }
        if errors.field_errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// The conjunction of every provided predicate. Assets lacking a filtered
    /// attribute fail that predicate.
    pub fn matches(&self, a: &AssetRecord) -> bool {
        if a.kind() != self.kind || a.is_duplicate() {
            return false;
        }
        if let Some(needle) = self.identifier_substring.as_deref().map(str::to_lowercase) {
            let hit = a.name.to_lowercase().contains(&needle)
                || a.asset_id.repo_path().to_lowercase().contains(&needle);
            if !hit {
                return false;
            }
        }
        if let Some(ids) = &self.se_task_ids {
            if !intersects(ids, a.se_tasks.iter().map(|t| t.task_id.as_str())) {
                return false;
            }
        }
        let sets = [
            (&self.licenses, &a.licenses),
            (&self.libraries, &a.libraries),
            (&self.natural_languages, &a.natural_languages),
            (&self.ml_tasks, &a.ml_tasks),
        ];
        for (wanted, have) in sets {
            if let Some(w) = wanted {
                if !intersects(w, have.iter().map(String::as_str)) {
                    return false;
                }
            }
        }
        if self
            .created_between
            .is_some_and(|r| !r.contains(a.created_at))
        {
            return false;
        }
        let counts = [
            (self.downloads_range, a.popularity.downloads),
            (self.likes_range, a.popularity.likes),
            (self.commits_range, a.activity.commits),
            (self.contributors_range, a.activity.contributors),
        ];
        if counts
            .iter()
            .any(|(r, v)| r.is_some_and(|r| !r.contains(*v)))
        {
            return false;
        }
        if let Some(f) = &self.model_only {
            let Some(m) = a.model() else { return false };
            if f.size_bytes_range
                .is_some_and(|r| !r.contains(m.size_bytes))
            {
                return false;
            }
            if let Some(regions) = &f.regions {
                if !intersects(regions, m.region.as_deref()) {
                    return false;
                }
            }
            if let Some(w) = &f.training_datasets {
                if !intersects(w, m.training_datasets.iter().map(String::as_str)) {
                    return false;
                }
            }
            if let Some(w) = &f.inference_providers {
                if !intersects(w, m.inference_providers.iter().map(String::as_str)) {
                    return false;
                }
            }
            if f.has_eval_results
                .is_some_and(|want| want == m.eval_records.is_empty())
            {
                return false;
            }
        }
        if let Some(f) = &self.dataset_only {
            let Some(d) = a.dataset() else { return false };
            if let Some(buckets) = &f.size_rows_buckets {
                if !d.size_rows_bucket.is_some_and(|b| buckets.contains(&b)) {
                    return false;
                }
            }
            let sets = [
                (&f.formats, &d.formats),
                (&f.modalities, &d.modalities),
                (&f.disciplines, &d.disciplines),
            ];
            for (wanted, have) in sets {
                if let Some(w) = wanted {
                    if !intersects(w, have.iter().map(String::as_str)) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn check_set(errors: &mut InvalidQuery, field: &str, len: Option<usize>) {
    if len == Some(0) {
        errors.add(field, "empty set matches nothing; omit the filter instead");
    }
}

fn intersects<'a>(wanted: &BTreeSet<String>, have: impl IntoIterator<Item = &'a str>) -> bool {
    let wanted: BTreeSet<String> = wanted.iter().map(|w| w.trim().to_lowercase()).collect();
    have.into_iter()
        .any(|h| wanted.contains(&h.trim().to_lowercase()))
}

/// Validation failure with one message per offending field.
#[derive(Debug, Clone, Default, PartialEq, Eq, Error, Serialize, Deserialize)]
pub struct InvalidQuery {
    pub field_errors: BTreeMap<String, String>,
}

impl InvalidQuery {
    pub fn single(field: &str, message: &str) -> Self {
        let mut e = InvalidQuery::default();
        e.add(field, message);
        e
    }

    pub fn add(&mut self, field: &str, message: &str) {
        self.field_errors
            .entry(field.to_string())
            .or_insert_with(|| message.to_string());
    }
}

impl fmt::Display for InvalidQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid query:")?;
        for (field, msg) in &self.field_errors {
            write!(f, " {field}: {msg};")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPage {
    pub total_matching: usize,
    pub items: Vec<AssetRow>,
    pub applied_query: FilterQuery,
}

/// Every matching asset in result order, ignoring pagination.
pub fn matching_assets<'a>(
    query: &FilterQuery,
    assets: impl IntoIterator<Item = &'a AssetRecord>,
) -> Result<Vec<&'a AssetRecord>, InvalidQuery> {
    query.validate()?;
    let mut hits: Vec<&AssetRecord> = assets.into_iter().filter(|a| query.matches(a)).collect();
    hits.sort_by(|a, b| query.sort.compare(a, b));
    Ok(hits)
}

pub fn apply_filters<'a>(
    query: &FilterQuery,
    assets: impl IntoIterator<Item = &'a AssetRecord>,
) -> Result<ResultPage, InvalidQuery> {
    let hits = matching_assets(query, assets)?;
    let items = hits
        .iter()
        .skip(query.page.offset)
        .take(query.page.limit)
        .map(|a| AssetRow::from_record(a))
        .collect();
    Ok(ResultPage {
        total_matching: hits.len(),
        items,
        applied_query: query.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_ranges_are_inclusive() {
        let r = CountRange::between(10, 20);
        assert!(r.contains(10) && r.contains(20) && !r.contains(9) && !r.contains(21));
        assert!(CountRange::default().contains(0));
    }

    #[test]
    fn validation_reports_every_field() {
        let mut q = FilterQuery::all(AssetKind::Dataset);
        q.downloads_range = Some(CountRange::between(5, 1));
        q.model_only = Some(ModelFilters {
            has_eval_results: Some(true),
            ..Default::default()
        });
        q.licenses = Some(BTreeSet::new());
        q.page.limit = 501;
        let err = q.validate().unwrap_err();
        let fields: Vec<_> = err.field_errors.keys().map(String::as_str).collect();
        assert_eq!(
            fields,
            vec!["downloads_range", "licenses", "model_only", "page.limit"]
        );
    }

    #[test]
    fn sort_spec_parses_short_and_long_forms() {
        assert_eq!("asc".parse::<SortDirection>(), Ok(SortDirection::Ascending));
        assert_eq!(
            "descending".parse::<SortDirection>(),
            Ok(SortDirection::Descending)
        );
        assert!("up".parse::<SortDirection>().is_err());
        assert_eq!("created_at".parse::<SortKey>(), Ok(SortKey::CreatedAt));
    }

    #[test]
    fn unknown_json_fields_are_rejected() {
        let ok: FilterQuery = serde_json::from_str(r#"{"kind": "model"}"#).unwrap();
        assert_eq!(ok, FilterQuery::all(AssetKind::Model));
        assert!(serde_json::from_str::<FilterQuery>(r#"{"kind": "model", "colour": 1}"#).is_err());
    }
}
