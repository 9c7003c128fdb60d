//! Mapping of registry metadata documents onto catalogue records.
//!
//! Documents follow the Hugging Face hub API shape: `id`, `createdAt`,
//! `lastModified`, `downloads`, `likes`, `library_name`, `pipeline_tag`,
//! `cardData`, `safetensors.total`, `usedStorage`, `inferenceProviders` and
//! a flat `tags` list of `prefix:value` strings. `commits` and
//! `contributors` are read when present.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::provider::{RawAssetDoc, RawMetrics};
use crate::catalog::{
    ActivityMetrics, AssetExtension, AssetKind, AssetRecord, DatasetExtension, ModelExtension,
    PopularityMetrics, SizeBucket,
};

fn tag_values<'a>(meta: &'a Value, prefix: &str) -> impl Iterator<Item = &'a str> + 'a {
    let prefix = format!("{prefix}:");
    meta.get("tags")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(Value::as_str)
        .filter_map(move |t| t.strip_prefix(prefix.as_str()))
        .map(str::trim)
        .filter(|v| !v.is_empty())
}

/// A string or list of strings under `key` in `cardData`.
fn card_data_values<'a>(meta: &'a Value, key: &str) -> Vec<&'a str> {
    match meta.get("cardData").and_then(|c| c.get(key)) {
        Some(Value::String(s)) => vec![s.as_str()],
        Some(Value::Array(a)) => a.iter().filter_map(Value::as_str).collect(),
        _ => Vec::new(),
    }
}

fn set_of<'a>(values: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    values
        .into_iter()
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .collect()
}

const LANGUAGE_NAMES: [(&str, &str); 24] = [
    ("ar", "Arabic"),
    ("bn", "Bengali"),
    ("code", "Code"),
    ("cs", "Czech"),
    ("de", "German"),
    ("en", "English"),
    ("es", "Spanish"),
    ("fa", "Persian"),
    ("fr", "French"),
    ("hi", "Hindi"),
    ("id", "Indonesian"),
    ("it", "Italian"),
    ("ja", "Japanese"),
    ("ko", "Korean"),
    ("nl", "Dutch"),
    ("pl", "Polish"),
    ("pt", "Portuguese"),
    ("ru", "Russian"),
    ("sv", "Swedish"),
    ("th", "Thai"),
    ("tr", "Turkish"),
    ("uk", "Ukrainian"),
    ("vi", "Vietnamese"),
    ("zh", "Chinese"),
];

/// Registries tag languages with ISO 639-1 codes; the catalogue stores
/// English names. Unknown codes are kept as given.
pub fn language_name(code: &str) -> String {
    let key = code.trim().to_ascii_lowercase();
    LANGUAGE_NAMES
        .binary_search_by(|(c, _)| c.cmp(&key.as_str()))
        .map(|i| LANGUAGE_NAMES[i].1.to_string())
        .unwrap_or_else(|_| code.trim().to_string())
}

fn u64_at(meta: &Value, pointer: &str) -> Option<u64> {
    meta.pointer(pointer).and_then(Value::as_u64)
}

fn time_at(meta: &Value, key: &str) -> Option<DateTime<Utc>> {
    meta.get(key)
        .and_then(Value::as_str)
        .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
        .map(|t| t.with_timezone(&Utc))
}

pub fn metrics_of(meta: &Value) -> RawMetrics {
    RawMetrics {
        downloads: u64_at(meta, "/downloads").unwrap_or(0),
        likes: u64_at(meta, "/likes").unwrap_or(0),
        commits: u64_at(meta, "/commits").unwrap_or(0),
        contributors: u64_at(meta, "/contributors").unwrap_or(0),
    }
}

/// arXiv ids the asset links to, in tag order.
pub fn linked_papers(meta: &Value) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in tag_values(meta, "arxiv") {
        if !out.iter().any(|o| o == id) {
            out.push(id.to_string());
        }
    }
    out
}

/// Builds the record without classification, duplicates or evaluations.
/// `web_base` is the registry's browsable root, e.g. `https://huggingface.co`.
pub fn record_from_doc(
    doc: &RawAssetDoc,
    abstract_text: Option<String>,
    web_base: &str,
) -> Result<AssetRecord, String> {
    let meta = &doc.raw_metadata;
    if !meta.is_object() {
        return Err("metadata is not a JSON object".into());
    }
    let created_at = time_at(meta, "createdAt").unwrap_or(doc.last_modified);
    let metrics = metrics_of(meta);
    let activity = ActivityMetrics {
        commits: metrics.commits,
        contributors: metrics.contributors,
    };
    if !activity.is_consistent() {
        return Err(format!(
            "{} contributors reported for {} commits",
            activity.contributors, activity.commits
        ));
    }
    let name = doc.asset.name.clone();
    let web_base = web_base.trim_end_matches('/');
    let repo_url = match doc.asset.kind {
        AssetKind::Model => format!("{web_base}/{name}"),
        AssetKind::Dataset => format!("{web_base}/datasets/{name}"),
    };

    let mut licenses = set_of(tag_values(meta, "license"));
    licenses.extend(set_of(card_data_values(meta, "license")));
    let mut natural_languages = set_of(tag_values(meta, "language"));
    natural_languages.extend(set_of(card_data_values(meta, "language")));
    let natural_languages: BTreeSet<String> =
        natural_languages.iter().map(|l| language_name(l)).collect();
    let mut libraries = set_of(tag_values(meta, "library"));
    if let Some(l) = meta.get("library_name").and_then(Value::as_str) {
        libraries.extend(set_of([l]));
    }
    let mut ml_tasks = set_of(tag_values(meta, "task_categories"));
    if let Some(p) = meta.get("pipeline_tag").and_then(Value::as_str) {
        ml_tasks.extend(set_of([p]));
    }

    let extension = match doc.asset.kind {
        AssetKind::Model => {
            let mut training_datasets = set_of(tag_values(meta, "dataset"));
            training_datasets.extend(set_of(card_data_values(meta, "datasets")));
            let inference_providers = meta
                .get("inferenceProviders")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(|p| {
                    p.as_str()
                        .or_else(|| p.get("provider").and_then(Value::as_str))
                })
                .map(str::to_string)
                .collect();
            AssetExtension::Model(ModelExtension {
                size_bytes: u64_at(meta, "/usedStorage").unwrap_or(0),
                region: tag_values(meta, "region").next().map(str::to_string),
                training_datasets,
                inference_providers,
                eval_records: Vec::new(),
                parameter_count: u64_at(meta, "/safetensors/total"),
            })
        }
        AssetKind::Dataset => {
            let size_rows_bucket = tag_values(meta, "size_categories")
                .find_map(SizeBucket::parse)
                .or_else(|| u64_at(meta, "/numRows").map(SizeBucket::from_row_count));
            AssetExtension::Dataset(DatasetExtension {
                size_rows_bucket,
                formats: set_of(tag_values(meta, "format")),
                modalities: set_of(tag_values(meta, "modality")),
                disciplines: set_of(tag_values(meta, "discipline")),
            })
        }
    };

    Ok(AssetRecord {
        asset_id: doc.asset.asset_id(),
        name,
        provider: doc.asset.provider_id.clone(),
        repo_url,
        created_at,
        last_refreshed_at: doc.fetched_at.max(created_at),
        licenses,
        libraries,
        natural_languages,
        ml_tasks,
        se_tasks: Vec::new(),
        popularity: PopularityMetrics {
            downloads: metrics.downloads,
            likes: metrics.likes,
        },
        activity,
        card_text: doc.card_text.clone().unwrap_or_default(),
        abstract_text,
        extension,
        duplicate_of: None,
        stale: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::provider::AssetRef;
    use serde_json::json;

    fn doc(kind: AssetKind, meta: Value) -> RawAssetDoc {
        let t = DateTime::parse_from_rfc3339("2025-01-02T00:00:00Z")
            .unwrap()
            .with_timezone(&Utc);
        RawAssetDoc {
            asset: AssetRef::new("hf", kind, "org/x"),
            raw_metadata: meta,
            card_text: Some("card".into()),
            last_modified: t,
            fetched_at: t,
        }
    }

    #[test]
    fn model_fields() {
        let d = doc(
            AssetKind::Model,
            json!({
                "id": "org/x", "createdAt": "2024-05-01T10:00:00.000Z",
                "downloads": 12, "likes": 3, "library_name": "transformers",
                "pipeline_tag": "text-generation",
                "tags": ["license:mit", "language:en", "dataset:bigcode/the-stack", "region:us", "arxiv:2107.03374"],
                "cardData": {"license": "apache-2.0", "datasets": ["openai_humaneval"]},
                "safetensors": {"total": 1500000000u64}, "usedStorage": 3000000000u64,
                "inferenceProviders": [{"provider": "together"}, "nebius"],
                "commits": 10, "contributors": 2
            }),
        );
        let r = record_from_doc(&d, None, "https://huggingface.co/").unwrap();
        assert_eq!(r.asset_id.as_str(), "hf:org/x");
        assert_eq!(r.repo_url, "https://huggingface.co/org/x");
        assert_eq!(r.licenses, set_of(["apache-2.0", "mit"]));
        assert_eq!(r.ml_tasks, set_of(["text-generation"]));
        let m = r.model().unwrap();
        assert_eq!(m.parameter_count, Some(1_500_000_000));
        assert_eq!(m.region.as_deref(), Some("us"));
        assert_eq!(
            m.training_datasets,
            set_of(["bigcode/the-stack", "openai_humaneval"])
        );
        assert_eq!(m.inference_providers, set_of(["nebius", "together"]));
        assert_eq!(linked_papers(&d.raw_metadata), vec!["2107.03374"]);
        assert!(r.validate(None).is_ok());
    }

    #[test]
    fn dataset_fields() {
        let d = doc(
            AssetKind::Dataset,
            json!({"tags": ["size_categories:100M<n<1B", "modality:text", "format:parquet", "language:en"]}),
        );
        let r = record_from_doc(&d, None, "https://huggingface.co").unwrap();
        assert_eq!(r.repo_url, "https://huggingface.co/datasets/org/x");
        let ds = r.dataset().unwrap();
        assert_eq!(ds.size_rows_bucket, Some(SizeBucket::From100MTo1B));
        assert_eq!(ds.modalities, set_of(["text"]));
        assert_eq!(r.natural_languages, set_of(["English"]));
    }

    #[test]
    fn language_codes() {
        assert_eq!(language_name("EN"), "English");
        assert_eq!(language_name("zh"), "Chinese");
        assert_eq!(language_name("tlh"), "tlh");
        assert!(LANGUAGE_NAMES.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn inconsistent_activity_is_rejected() {
        let d = doc(AssetKind::Model, json!({"commits": 1, "contributors": 4}));
        assert!(record_from_doc(&d, None, "https://h.co").is_err());
        assert!(record_from_doc(&doc(AssetKind::Model, json!([])), None, "https://h.co").is_err());
    }
}
