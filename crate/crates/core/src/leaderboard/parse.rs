//! Extraction of self-reported results from the model-index block of a card.

use chrono::{DateTime, Utc};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use super::metrics::{split_trailing_config, MetricRegistry};
use super::EvalRecord;
use crate::catalog::text::split_front_matter;
use crate::catalog::AssetId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetadataError {
    #[error("malformed card metadata: {0}")]
    MalformedMetadata(String),
}

/// Why a reported result did not become an [`EvalRecord`].
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    MissingDatasetName,
    MissingMetricName,
    MissingScore,
    UnparseableScore(String),
    NonFiniteScore,
    NotAnObject,
    /// A later entry in the same card overwrote this one.
    Superseded {
        previous: f64,
        replacement: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalParse {
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkipReason>,
}

/// `Benchmark`, `Benchmark (Implementation)` or
/// `Benchmark (Implementation, Language)`; anything else is kept verbatim as
/// the benchmark.
pub fn split_dataset_name(raw: &str) -> (String, Option<String>, Option<String>) {
    let verbatim = || (raw.trim().to_string(), None, None);
    let (bench, inner) = split_trailing_config(raw);
    let Some(inner) = inner else {
        return verbatim();
    };
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty() || p.contains(['(', ')'])) || bench.contains(['(', ')']) {
        return verbatim();
    }
    match parts.as_slice() {
        [imp] => (bench.to_string(), Some(imp.to_string()), None),
        [imp, lang] => (
            bench.to_string(),
            Some(imp.to_string()),
            Some(lang.to_string()),
        ),
        _ => verbatim(),
    }
}

/// YAML front matter of a card as a JSON value. `Ok(None)` when the card has
/// no front matter.
pub fn card_metadata(card_text: &str) -> Result<Option<Value>, MetadataError> {
    let Some((yaml, _)) = split_front_matter(card_text) else {
        return Ok(None);
    };
    if yaml.trim().is_empty() {
        return Ok(None);
    }
    serde_yaml::from_str::<Value>(yaml)
        .map(Some)
        .map_err(|e| MetadataError::MalformedMetadata(e.to_string()))
}

enum Score {
    Plain(f64),
    Percent(f64),
}

fn parse_score(v: &Value) -> Result<Score, SkipReason> {
    let score = match v {
        Value::Number(n) => Score::Plain(n.as_f64().ok_or(SkipReason::NonFiniteScore)?),
        Value::String(s) => {
            let t = s.trim();
            if let Some(p) = t.strip_suffix('%') {
                let x: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| SkipReason::UnparseableScore(s.clone()))?;
                Score::Percent(x / 100.0)
            } else {
                Score::Plain(
                    t.parse()
                        .map_err(|_| SkipReason::UnparseableScore(s.clone()))?,
                )
            }
        }
        Value::Null => return Err(SkipReason::MissingScore),
        other => return Err(SkipReason::UnparseableScore(other.to_string())),
    };
    let x = match score {
        Score::Plain(x) | Score::Percent(x) => x,
    };
    if !x.is_finite() {
        return Err(SkipReason::NonFiniteScore);
    }
    Ok(score)
}

fn non_empty_str(v: Option<&Value>) -> Option<&str> {
    v.and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

fn as_list<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>, MetadataError> {
    v.as_array()
        .ok_or_else(|| MetadataError::MalformedMetadata(format!("`{what}` is not a list")))
}

/// Parses the model-index block found in `card_metadata`.
///
/// `card_metadata` is either the whole front-matter document (the block sits
/// under `model-index`) or the block itself. A document without the block
/// yields no records.
pub fn parse_eval_metadata(
    card_metadata: &Value,
    asset_id: &AssetId,
    reported_at: DateTime<Utc>,
    registry: &MetricRegistry,
) -> Result<EvalParse, MetadataError> {
    let block = match card_metadata {
        Value::Null => return Ok(EvalParse::default()),
        Value::Array(_) => card_metadata,
        Value::Object(map) => match map.get("model-index").or_else(|| map.get("model_index")) {
            None | Some(Value::Null) => return Ok(EvalParse::default()),
            Some(b) => b,
        },
        _ => {
            return Err(MetadataError::MalformedMetadata(
                "metadata is not a mapping".into(),
            ))
        }
    };

    let mut out = EvalParse::default();
    for model in as_list(block, "model-index")? {
        let Some(model) = model.as_object() else {
            return Err(MetadataError::MalformedMetadata(
                "model-index entry is not a mapping".into(),
            ));
        };
        let Some(results) = model.get("results") else {
            continue;
        };
        for result in as_list(results, "results")? {
            let Some(result) = result.as_object() else {
                out.skipped.push(SkipReason::NotAnObject);
                continue;
            };
            let dataset = result.get("dataset");
            let Some(dataset_name) = non_empty_str(dataset.and_then(|d| d.get("name")))
                .or_else(|| non_empty_str(dataset.and_then(|d| d.get("type"))))
            else {
                out.skipped.push(SkipReason::MissingDatasetName);
                continue;
            };
            let (benchmark, implementation, language) = split_dataset_name(dataset_name);
            let metrics = match result.get("metrics") {
                Some(Value::Array(m)) => m,
                _ => {
                    out.skipped.push(SkipReason::MissingMetricName);
                    continue;
                }
            };
            for metric in metrics {
                let Some(metric) = metric.as_object() else {
                    out.skipped.push(SkipReason::NotAnObject);
                    continue;
                };
                let Some(label) =
                    non_empty_str(metric.get("name")).or_else(|| non_empty_str(metric.get("type")))
                else {
                    out.skipped.push(SkipReason::MissingMetricName);
                    continue;
                };
                let score = match metric.get("value").map(parse_score) {
                    None => {
                        out.skipped.push(SkipReason::MissingScore);
                        continue;
                    }
                    Some(Err(reason)) => {
                        out.skipped.push(reason);
                        continue;
                    }
                    Some(Ok(s)) => s,
                };
                let norm = registry.normalize(label);
                let metric_config = norm
                    .metric_config
                    .or_else(|| non_empty_str(metric.get("config")).map(str::to_string));
                let (score, percent_scaled) = match score {
                    Score::Plain(x) => (x, false),
                    Score::Percent(x) => (x, true),
                };
                let record = EvalRecord {
                    asset_id: asset_id.clone(),
                    benchmark: benchmark.clone(),
                    implementation: implementation.clone(),
                    language: language.clone(),
                    metric_name: norm.canonical_name,
                    metric_config,
                    score,
                    reported_at,
                    percent_scaled,
                    unrecognized_metric: norm.unrecognized,
                };
                match out.records.iter_mut().find(|r| r.key() == record.key()) {
                    Some(existing) => {
                        warn!(
                            asset = %asset_id,
                            benchmark = %record.benchmark,
                            metric = %record.metric_name,
                            previous = existing.score,
                            replacement = record.score,
                            "conflicting duplicate evaluation in one card; keeping the last"
                        );
                        out.skipped.push(SkipReason::Superseded {
                            previous: existing.score,
                            replacement: record.score,
                        });
                        *existing = record;
                    }
                    None => out.records.push(record),
                }
            }
        }
    }
    for reason in &out.skipped {
        if !matches!(reason, SkipReason::Superseded { .. }) {
            warn!(asset = %asset_id, ?reason, "skipped evaluation entry");
        }
    }
    Ok(out)
}

/// Card-level convenience: front matter of `card_text`, falling back to the
/// registry-provided metadata document when the card has none.
pub fn parse_card_evaluations(
    card_text: &str,
    fallback_metadata: Option<&Value>,
    asset_id: &AssetId,
    reported_at: DateTime<Utc>,
    registry: &MetricRegistry,
) -> Result<EvalParse, MetadataError> {
    match card_metadata(card_text)? {
        Some(meta) => parse_eval_metadata(&meta, asset_id, reported_at, registry),
        None => match fallback_metadata {
            Some(meta) => parse_eval_metadata(meta, asset_id, reported_at, registry),
            None => Ok(EvalParse::default()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use serde_json::json;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap()
    }

    fn parse(v: Value) -> Result<EvalParse, MetadataError> {
        parse_eval_metadata(
            &v,
            &AssetId::from("hf:org/m"),
            t0(),
            &MetricRegistry::builtin(),
        )
    }

    #[test]
    fn three_way_split() {
        let got = parse(json!({"model-index": [{"name": "m", "results": [{
            "task": {"type": "text-generation"},
            "dataset": {"name": "HumanEval (Explain, C++)", "type": "openai_humaneval"},
            "metrics": [{"type": "pass@1", "value": 0.41}]
        }]}]}))
        .unwrap();
        assert_eq!(got.records.len(), 1);
        let r = &got.records[0];
        assert_eq!(r.benchmark, "HumanEval");
        assert_eq!(r.implementation.as_deref(), Some("Explain"));
        assert_eq!(r.language.as_deref(), Some("C++"));
        assert_eq!(r.metric_name, "pass@1");
        assert_eq!(r.metric_config, None);
        assert_eq!(r.score, 0.41);
        assert!(!r.percent_scaled);
    }

    #[test]
    fn metric_configuration() {
        let got = parse(json!([{"results": [{
            "dataset": {"name": "HumanEval"},
            "metrics": [{"name": "pass@1 (threshold 0.2)", "type": "pass@1", "value": 0.3}]
        }]}]))
        .unwrap();
        assert_eq!(got.records[0].metric_name, "pass@1");
        assert_eq!(
            got.records[0].metric_config.as_deref(),
            Some("threshold 0.2")
        );
    }

    #[test]
    fn empty_block() {
        assert!(parse(json!({"model-index": []}))
            .unwrap()
            .records
            .is_empty());
        assert!(parse(json!({"license": "mit"})).unwrap().records.is_empty());
        assert!(parse(Value::Null).unwrap().records.is_empty());
    }

    #[test]
    fn malformed_block() {
        assert!(parse(json!({"model-index": "oops"})).is_err());
        assert!(parse(json!({"model-index": [{"results": 3}]})).is_err());
        assert!(parse(json!(42)).is_err());
    }

    #[test]
    fn percent_scores_are_scaled() {
        let got = parse(json!([{"results": [{
            "dataset": {"name": "MBPP"},
            "metrics": [{"type": "pass@1", "value": "41%"}, {"type": "accuracy", "value": "0.5"}]
        }]}]))
        .unwrap();
        assert!((got.records[0].score - 0.41).abs() < 1e-12);
        assert!(got.records[0].percent_scaled);
        assert_eq!(got.records[1].score, 0.5);
        assert!(!got.records[1].percent_scaled);
    }

    #[test]
    fn missing_fields_are_skipped_not_fabricated() {
        let got = parse(json!([{"results": [
            {"dataset": {}, "metrics": [{"type": "pass@1", "value": 0.1}]},
            {"dataset": {"name": "X"}, "metrics": [{"value": 0.1}, {"type": "acc"}, {"type": "acc", "value": "n/a"}]},
            {"dataset": {"name": "X"}}
        ]}]))
        .unwrap();
        assert!(got.records.is_empty());
        assert_eq!(got.skipped.len(), 5);
    }

    #[test]
    fn duplicate_key_keeps_last() {
        let got = parse(json!([{"results": [
            {"dataset": {"name": "HumanEval"}, "metrics": [{"type": "pass@1", "value": 0.2}]},
            {"dataset": {"name": "HumanEval"}, "metrics": [{"type": "Pass@1", "value": 0.3}]}
        ]}]))
        .unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.records[0].score, 0.3);
    }

    #[test]
    fn dataset_name_grammar() {
        assert_eq!(split_dataset_name("MBPP"), ("MBPP".into(), None, None));
        assert_eq!(
            split_dataset_name("MultiPL-E (Base)"),
            ("MultiPL-E".into(), Some("Base".into()), None)
        );
        assert_eq!(
            split_dataset_name("HumanEval (Explain, C++)"),
            (
                "HumanEval".into(),
                Some("Explain".into()),
                Some("C++".into())
            )
        );
        assert_eq!(
            split_dataset_name("HumanEval (a, b, c)"),
            ("HumanEval (a, b, c)".into(), None, None)
        );
        assert_eq!(
            split_dataset_name("X (a, )"),
            ("X (a, )".into(), None, None)
        );
    }

    #[test]
    fn front_matter_round_trip() {
        let card = "---\nmodel-index:\n- name: m\n  results:\n  - dataset:\n      name: HumanEval (Explain, C++)\n    metrics:\n    - type: pass@1\n      value: 0.41\n---\n# m\n";
        let got = parse_card_evaluations(
            card,
            None,
            &AssetId::from("hf:org/m"),
            t0(),
            &MetricRegistry::builtin(),
        )
        .unwrap();
        assert_eq!(got.records.len(), 1);
        let broken = "---\nmodel-index: [unclosed\n---\nbody";
        assert!(card_metadata(broken).is_err());
    }
}
