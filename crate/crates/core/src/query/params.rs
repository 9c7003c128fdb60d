//! Plain query-string encoding of a [`FilterQuery`].
//!
//! Set filters are repeated parameters (`license=mit&license=apache-2.0`),
//! ranges use `<field>_from` / `<field>_to` (inclusive; RFC 3339 or `YYYY-MM-DD`
//! for `created_*`), sorting uses `sort` and `order`, paging `offset` and `limit`.

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};

use super::{
    CountRange, DatasetFilters, FilterQuery, InvalidQuery, ModelFilters, Page, SortDirection,
    SortKey, SortSpec, TimeRange,
};
use crate::catalog::{AssetKind, SizeBucket};

fn parse_time(raw: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc())
        .map_err(|_| format!("`{raw}` is neither RFC 3339 nor YYYY-MM-DD"))
}

fn parse_count(raw: &str) -> Result<u64, String> {
    raw.parse()
        .map_err(|_| format!("`{raw}` is not a non-negative integer"))
}

fn push(set: &mut Option<BTreeSet<String>>, v: &str) {
    set.get_or_insert_with(BTreeSet::new).insert(v.to_string());
}

/// Parses and validates. All problems are reported together.
pub fn from_query_pairs<K, V>(pairs: &[(K, V)]) -> Result<FilterQuery, InvalidQuery>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut errors = InvalidQuery::default();
    let kind = pairs
        .iter()
        .find(|(k, _)| k.as_ref() == "kind")
        .map(|(_, v)| v.as_ref().parse::<AssetKind>());
    let kind = match kind {
        Some(Ok(k)) => k,
        Some(Err(e)) => return Err(InvalidQuery::single("kind", &e)),
        None => return Err(InvalidQuery::single("kind", "required: model or dataset")),
    };
    let mut q = FilterQuery::all(kind);
    let mut model = ModelFilters::default();
    let mut dataset = DatasetFilters::default();

    for (k, v) in pairs {
        let (k, v) = (k.as_ref(), v.as_ref().trim());
        let mut range = |slot: &mut Option<CountRange>, upper: bool| match parse_count(v) {
            Ok(n) => {
                let r = slot.get_or_insert_with(CountRange::default);
                if upper {
                    r.max = Some(n);
                } else {
                    r.min = Some(n);
                }
            }
            Err(e) => errors.add(k, &e),
        };
        match k {
            "kind" => {}
            "q" => q.identifier_substring = Some(v.to_string()).filter(|s| !s.is_empty()),
            "se_task" => push(&mut q.se_task_ids, v),
            "license" => push(&mut q.licenses, v),
            "library" => push(&mut q.libraries, v),
            "language" => push(&mut q.natural_languages, v),
            "ml_task" => push(&mut q.ml_tasks, v),
            "downloads_from" => range(&mut q.downloads_range, false),
            "downloads_to" => range(&mut q.downloads_range, true),
            "likes_from" => range(&mut q.likes_range, false),
            "likes_to" => range(&mut q.likes_range, true),
            "commits_from" => range(&mut q.commits_range, false),
            "commits_to" => range(&mut q.commits_range, true),
            "contributors_from" => range(&mut q.contributors_range, false),
            "contributors_to" => range(&mut q.contributors_range, true),
            "size_bytes_from" => range(&mut model.size_bytes_range, false),
            "size_bytes_to" => range(&mut model.size_bytes_range, true),
            "created_from" | "created_to" => match parse_time(v) {
                Ok(t) => {
                    let r = q.created_between.get_or_insert_with(TimeRange::default);
                    if k == "created_from" {
                        r.from = Some(t);
                    } else {
                        r.to = Some(t);
                    }
                }
                Err(e) => errors.add(k, &e),
            },
            "region" => push(&mut model.regions, v),
            "training_dataset" => push(&mut model.training_datasets, v),
            "inference_provider" => push(&mut model.inference_providers, v),
            "has_eval_results" => match v {
                "true" => model.has_eval_results = Some(true),
                "false" => model.has_eval_results = Some(false),
                _ => errors.add(k, "expected true or false"),
            },
            "size_rows" => match SizeBucket::parse(v) {
                Some(b) => {
                    dataset
                        .size_rows_buckets
                        .get_or_insert_with(BTreeSet::new)
                        .insert(b);
                }
                None => errors.add(k, &format!("unknown size bucket `{v}`")),
            },
            "data_format" => push(&mut dataset.formats, v),
            "modality" => push(&mut dataset.modalities, v),
            "discipline" => push(&mut dataset.disciplines, v),
            "sort" => match v.parse::<SortKey>() {
                Ok(key) => q.sort.key = key,
                Err(e) => errors.add(k, &e),
            },
            "order" => match v.parse::<SortDirection>() {
                Ok(d) => q.sort.direction = d,
                Err(e) => errors.add(k, &e),
            },
            "offset" => match v.parse() {
                Ok(n) => q.page.offset = n,
                Err(_) => errors.add(k, "expected a non-negative integer"),
            },
            "limit" => match v.parse() {
                Ok(n) => q.page.limit = n,
                Err(_) => errors.add(k, "expected an integer between 1 and 500"),
            },
            other => errors.add(other, "unknown parameter"),
        }
    }
    if model != ModelFilters::default() {
        q.model_only = Some(model);
    }
    if dataset != DatasetFilters::default() {
        q.dataset_only = Some(dataset);
    }
    if let Err(e) = q.validate() {
        for (f, m) in e.field_errors {
            errors.add(&f, &m);
        }
    }
    if errors.field_errors.is_empty() {
        Ok(q)
    } else {
        Err(errors)
    }
}

/// Inverse of [`from_query_pairs`] for valid queries. Defaults are omitted.
pub fn to_query_pairs(q: &FilterQuery) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vec![("kind".into(), q.kind.as_str().into())];
    let mut add = |k: &str, v: String| out.push((k.to_string(), v));
    if let Some(s) = &q.identifier_substring {
        add("q", s.clone());
    }
    let sets = [
        ("se_task", &q.se_task_ids),
        ("license", &q.licenses),
        ("library", &q.libraries),
        ("language", &q.natural_languages),
        ("ml_task", &q.ml_tasks),
    ];
    for (k, set) in sets {
        for v in set.iter().flatten() {
            add(k, v.clone());
        }
    }
    if let Some(r) = q.created_between {
        if let Some(t) = r.from {
            add(
                "created_from",
                t.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            );
        }
        if let Some(t) = r.to {
            add("created_to", t.to_rfc3339_opts(SecondsFormat::AutoSi, true));
        }
    }
    let mut ranges = vec![
        ("downloads", q.downloads_range),
        ("likes", q.likes_range),
        ("commits", q.commits_range),
        ("contributors", q.contributors_range),
    ];
    if let Some(m) = &q.model_only {
        ranges.push(("size_bytes", m.size_bytes_range));
    }
    for (k, r) in ranges {
        if let Some(r) = r {
            if let Some(n) = r.min {
                add(&format!("{k}_from"), n.to_string());
            }
            if let Some(n) = r.max {
                add(&format!("{k}_to"), n.to_string());
            }
        }
    }
    if let Some(m) = &q.model_only {
        for (k, set) in [
            ("region", &m.regions),
            ("training_dataset", &m.training_datasets),
            ("inference_provider", &m.inference_providers),
        ] {
            for v in set.iter().flatten() {
                add(k, v.clone());
            }
        }
        if let Some(b) = m.has_eval_results {
            add("has_eval_results", b.to_string());
        }
    }
    if let Some(d) = &q.dataset_only {
        for b in d.size_rows_buckets.iter().flatten() {
            add("size_rows", b.label().to_string());
        }
        for (k, set) in [
            ("data_format", &d.formats),
            ("modality", &d.modalities),
            ("discipline", &d.disciplines),
        ] {
            for v in set.iter().flatten() {
                add(k, v.clone());
            }
        }
    }
    if q.sort != SortSpec::default() {
        add("sort", q.sort.key.as_str().to_string());
        add("order", q.sort.direction.as_str().to_string());
    }
    if q.page != Page::default() {
        add("offset", q.page.offset.to_string());
        add("limit", q.page.limit.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &[(&str, &str)]) -> Vec<(String, String)> {
        s.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn dataset_scenario_parses() {
        let q = from_query_pairs(&pairs(&[
            ("kind", "dataset"),
            ("language", "en"),
            ("modality", "Text"),
            ("size_rows", "100M-1B"),
            ("downloads_from", "10"),
        ]))
        .unwrap();
        assert_eq!(q.downloads_range, Some(CountRange::at_least(10)));
        let d = q.dataset_only.as_ref().unwrap();
        assert_eq!(
            d.size_rows_buckets
                .as_ref()
                .unwrap()
                .iter()
                .collect::<Vec<_>>(),
            vec![&SizeBucket::From100MTo1B]
        );
        assert_eq!(from_query_pairs(&to_query_pairs(&q)).unwrap(), q);
    }

    #[test]
    fn errors_are_collected_per_field() {
        let err = from_query_pairs(&pairs(&[
            ("kind", "dataset"),
            ("likes_from", "ten"),
            ("region", "eu"),
            ("colour", "red"),
            ("created_from", "2024-02-01"),
            ("created_to", "2024-01-01"),
        ]))
        .unwrap_err();
        let fields: Vec<_> = err.field_errors.keys().map(String::as_str).collect();
        assert_eq!(
            fields,
            vec!["colour", "created_between", "likes_from", "model_only"]
        );
    }

    #[test]
    fn kind_is_required() {
        let err = from_query_pairs(&pairs(&[("q", "x")])).unwrap_err();
        assert!(err.field_errors.contains_key("kind"));
    }
}
