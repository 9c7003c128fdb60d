//! Serialization of result sets. Column order is frozen in `COLUMNS` and in
//! `docs/export-format.md`; change both together.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{matching_assets, FilterQuery, InvalidQuery};
use crate::catalog::AssetRecord;
use crate::leaderboard::{Direction, MetricRegistry};

pub const COLUMNS: [&str; 28] = [
    "asset_id",
    "kind",
    "name",
    "provider",
    "repo_url",
    "created_at",
    "last_refreshed_at",
    "licenses",
    "libraries",
    "natural_languages",
    "ml_tasks",
    "se_tasks",
    "downloads",
    "likes",
    "commits",
    "contributors",
    "size_bytes",
    "region",
    "parameter_count",
    "training_datasets",
    "inference_providers",
    "eval_best",
    "size_rows_bucket",
    "formats",
    "modalities",
    "disciplines",
    "has_card_text",
    "has_abstract",
];

/// Flat projection of an asset: what list endpoints return and what every
/// export format carries. Field order matches `COLUMNS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRow {
    pub asset_id: String,
    pub kind: String,
    pub name: String,
    pub provider: String,
    pub repo_url: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    #[serde(with = "rfc3339")]
    pub last_refreshed_at: DateTime<Utc>,
    pub licenses: Vec<String>,
    pub libraries: Vec<String>,
    pub natural_languages: Vec<String>,
    pub ml_tasks: Vec<String>,
    pub se_tasks: Vec<String>,
    pub downloads: u64,
    pub likes: u64,
    pub commits: u64,
    pub contributors: u64,
    pub size_bytes: Option<u64>,
    pub region: Option<String>,
    pub parameter_count: Option<u64>,
    pub training_datasets: Vec<String>,
    pub inference_providers: Vec<String>,
    /// `<benchmark> / <metric> = <score>`, best score per benchmark and metric.
    pub eval_best: Vec<String>,
    pub size_rows_bucket: Option<String>,
    pub formats: Vec<String>,
    pub modalities: Vec<String>,
    pub disciplines: Vec<String>,
    pub has_card_text: bool,
    pub has_abstract: bool,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Best score per (benchmark, metric), compared case-insensitively, ordered
/// by benchmark then metric.
fn eval_summary(record: &AssetRecord, registry: &MetricRegistry) -> Vec<String> {
    let mut best: BTreeMap<(String, String), (String, String, f64)> = BTreeMap::new();
    for r in record.eval_records() {
        let key = (r.benchmark.to_lowercase(), r.metric_name.to_lowercase());
        let better = |old: f64| match registry.direction(&r.metric_name) {
            Direction::HigherIsBetter => r.score > old,
            Direction::LowerIsBetter => r.score < old,
        };
        match best.get(&key) {
            Some((_, _, old)) if !better(*old) => {}
            _ => {
                best.insert(key, (r.benchmark.clone(), r.metric_name.clone(), r.score));
            }
        }
    }
    best.into_values()
        .map(|(b, m, s)| format!("{b} / {m} = {s}"))
        .collect()
}

impl AssetRow {
    pub fn from_record(a: &AssetRecord) -> Self {
        AssetRow::with_registry(a, &MetricRegistry::builtin())
    }

    pub fn with_registry(a: &AssetRecord, registry: &MetricRegistry) -> Self {
        let model = a.model();
        let dataset = a.dataset();
        let list = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>();
        AssetRow {
            asset_id: a.asset_id.to_string(),
            kind: a.kind().as_str().to_string(),
            name: a.name.clone(),
            provider: a.provider.clone(),
            repo_url: a.repo_url.clone(),
            created_at: a.created_at,
            last_refreshed_at: a.last_refreshed_at,
            licenses: list(&a.licenses),
            libraries: list(&a.libraries),
            natural_languages: list(&a.natural_languages),
            ml_tasks: list(&a.ml_tasks),
            se_tasks: a.se_tasks.iter().map(|t| t.task_id.clone()).collect(),
            downloads: a.popularity.downloads,
            likes: a.popularity.likes,
            commits: a.activity.commits,
            contributors: a.activity.contributors,
            size_bytes: model.map(|m| m.size_bytes),
            region: model.and_then(|m| m.region.clone()),
            parameter_count: model.and_then(|m| m.parameter_count),
            training_datasets: model
                .map(|m| list(&m.training_datasets))
                .unwrap_or_default(),
            inference_providers: model
                .map(|m| list(&m.inference_providers))
                .unwrap_or_default(),
            eval_best: eval_summary(a, registry),
            size_rows_bucket: dataset
                .and_then(|d| d.size_rows_bucket)
                .map(|b| b.label().to_string()),
            formats: dataset.map(|d| list(&d.formats)).unwrap_or_default(),
            modalities: dataset.map(|d| list(&d.modalities)).unwrap_or_default(),
            disciplines: dataset.map(|d| list(&d.disciplines)).unwrap_or_default(),
            has_card_text: !a.card_text.trim().is_empty(),
            has_abstract: a
                .abstract_text
                .as_deref()
                .is_some_and(|t| !t.trim().is_empty()),
        }
    }

    /// Values in `COLUMNS` order, multi-valued fields as lists.
    fn cells(&self) -> [Cell<'_>; 28] {
        use Cell::*;
        let opt_num = |v: Option<u64>| v.map(|n| n.to_string()).unwrap_or_default();
        [
            One(self.asset_id.clone()),
            One(self.kind.clone()),
            One(self.name.clone()),
            One(self.provider.clone()),
            One(self.repo_url.clone()),
            One(timestamp(&self.created_at)),
            One(timestamp(&self.last_refreshed_at)),
            Many(&self.licenses),
            Many(&self.libraries),
            Many(&self.natural_languages),
            Many(&self.ml_tasks),
            Many(&self.se_tasks),
            One(self.downloads.to_string()),
            One(self.likes.to_string()),
            One(self.commits.to_string()),
            One(self.contributors.to_string()),
            Opt(self.size_bytes.map(|_| opt_num(self.size_bytes))),
            Opt(self.region.clone()),
            Opt(self.parameter_count.map(|_| opt_num(self.parameter_count))),
            Many(&self.training_datasets),
            Many(&self.inference_providers),
            Many(&self.eval_best),
            Opt(self.size_rows_bucket.clone()),
            Many(&self.formats),
            Many(&self.modalities),
            Many(&self.disciplines),
            One(self.has_card_text.to_string()),
            One(self.has_abstract.to_string()),
        ]
    }
}

enum Cell<'a> {
    One(String),
    Opt(Option<String>),
    Many(&'a [String]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
    Xml,
}

impl ExportFormat {
    pub fn media_type(self) -> &'static str {
        match self {
            ExportFormat::Csv => "text/csv",
            ExportFormat::Json => "application/json",
            ExportFormat::Xml => "application/xml",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
            ExportFormat::Xml => "xml",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, ExportError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            "xml" => Ok(ExportFormat::Xml),
            _ => Err(ExportError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExportError {
    #[error(transparent)]
    InvalidQuery(#[from] InvalidQuery),
    #[error("unsupported export format `{0}`; expected csv, json or xml")]
    UnsupportedFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exported {
    pub bytes: Vec<u8>,
    pub media_type: &'static str,
}

/// Serializes the full, unpaginated match set of `query`.
pub fn export<'a>(
    query: &FilterQuery,
    assets: impl IntoIterator<Item = &'a AssetRecord>,
    format: ExportFormat,
) -> Result<Exported, ExportError> {
    let rows: Vec<AssetRow> = matching_assets(query, assets)?
        .into_iter()
        .map(AssetRow::from_record)
        .collect();
    Ok(Exported {
        bytes: write_rows(&rows, format),
        media_type: format.media_type(),
    })
}

pub fn write_rows(rows: &[AssetRow], format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => to_csv(rows),
        ExportFormat::Json => to_json(rows),
        ExportFormat::Xml => to_xml(rows),
    }
}

pub fn to_csv(rows: &[AssetRow]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    w.write_record(COLUMNS).expect("writing to memory");
    for row in rows {
        let fields = row.cells().map(|c| match c {
            Cell::One(v) => v,
            Cell::Opt(v) => v.unwrap_or_default(),
            Cell::Many(vs) => vs.join("; "),
        });
        w.write_record(&fields).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

pub fn to_json(rows: &[AssetRow]) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(rows).expect("rows serialize");
    out.push(b'\n');
    out
}

/// Element name for one value of a multi-valued column.
pub fn xml_item_name(column: &str) -> &str {
    match column {
        "licenses" => "license",
        "libraries" => "library",
        "natural_languages" => "natural_language",
        "ml_tasks" => "ml_task",
        "se_tasks" => "se_task",
        "training_datasets" => "training_dataset",
        "inference_providers" => "inference_provider",
        "formats" => "format",
        "modalities" => "modality",
        "disciplines" => "discipline",
        other => other,
    }
}

pub fn to_xml(rows: &[AssetRow]) -> Vec<u8> {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    let io = "writing to memory";
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .expect(io);
    w.write_event(Event::Start(BytesStart::new("assets")))
        .expect(io);
    for row in rows {
        w.write_event(Event::Start(BytesStart::new("asset")))
            .expect(io);
        for (column, cell) in COLUMNS.iter().zip(row.cells()) {
            let values: Vec<String> = match cell {
                Cell::One(v) => vec![v],
                Cell::Opt(v) => v.into_iter().collect(),
                Cell::Many(vs) => vs.to_vec(),
            };
            let name = xml_item_name(column);
            for v in values {
                w.write_event(Event::Start(BytesStart::new(name)))
                    .expect(io);
                w.write_event(Event::Text(BytesText::new(&v))).expect(io);
                w.write_event(Event::End(BytesEnd::new(name))).expect(io);
            }
        }
        w.write_event(Event::End(BytesEnd::new("asset"))).expect(io);
    }
    w.write_event(Event::End(BytesEnd::new("assets")))
        .expect(io);
    let mut out = w.into_inner();
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_header_only() {
        let out = String::from_utf8(to_csv(&[])).unwrap();
        assert_eq!(out, format!("{}\r\n", COLUMNS.join(",")));
    }

    #[test]
    fn formats_parse_and_reject() {
        assert_eq!("CSV".parse::<ExportFormat>(), Ok(ExportFormat::Csv));
        assert_eq!(
            "yaml".parse::<ExportFormat>(),
            Err(ExportError::UnsupportedFormat("yaml".into()))
        );
        assert_eq!(ExportFormat::Xml.media_type(), "application/xml");
    }

    #[test]
    fn empty_xml_has_root() {
        let out = String::from_utf8(to_xml(&[])).unwrap();
        assert!(out.starts_with("<?xml version=\"1.0\" encoding=\"UTF-8\"?>"));
        assert!(out.contains("<assets>") && out.contains("</assets>"));
    }
}
