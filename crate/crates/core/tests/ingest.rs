mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration as StdDuration;

use asset_catalog::catalog::{AssetId, AssetKind, AssetRecord};
use asset_catalog::ingest::{
    run_ingestion, run_metrics_refresh, AssetRef, Clock, MemoryProvider, ProviderClient,
    RawMetrics, SkipCause, STALE_AFTER_FAILURES,
};
use chrono::Duration;
use common::*;
use serde_json::json;

fn ingest(h: &Harness) -> asset_catalog::ingest::JobRun {
    run_ingestion(&h.ctx, &h.providers, None).unwrap()
}

fn record(h: &Harness, id: &str) -> AssetRecord {
    h.store()
        .snapshot()
        .unwrap()
        .get(&AssetId::from(id))
        .cloned()
        .unwrap()
}

#[test]
fn fifteen_asset_snapshot_catalogues_the_nine_relevant() {
    let (h, mem) = memory_harness();
    for a in snapshot_15(t0() - Duration::days(30)) {
        mem.insert(a);
    }
    let run = ingest(&h);
    assert_eq!(
        (run.assets_seen, run.assets_catalogued, run.assets_skipped),
        (15, 9, 6)
    );
    let causes: BTreeMap<String, SkipCause> = run
        .skipped
        .iter()
        .map(|s| (s.asset_id.to_string(), s.cause.clone()))
        .collect();
    assert_eq!(
        causes["hf:se/undocumented"],
        SkipCause::MissingDocumentation
    );
    assert_eq!(
        causes
            .values()
            .filter(|c| **c == SkipCause::NotSeRelevant)
            .count(),
        5
    );
    assert!(run.errors.is_empty(), "{:?}", run.errors);

    let snap = h.store().snapshot().unwrap();
    assert_eq!(snap.assets().len(), 9);
    assert!(snap.assets().iter().all(|a| !a.se_tasks.is_empty()));
    assert_eq!(
        record(&h, "hf:se/repair").se_tasks[0].task_id,
        "program-repair"
    );
    assert_eq!(
        record(&h, "hf:datasets/se/vulns").se_tasks[0].task_id,
        "vulnerability-detection"
    );

    let again = ingest(&h);
    assert_eq!(again.assets_catalogued, 0);
    assert_eq!(h.store().snapshot().unwrap().assets().len(), 9);
    assert_eq!(h.store().job_runs().unwrap().len(), 2);
}

#[test]
fn changed_card_is_reingested_and_watermark_advances() {
    let (h, mem) = memory_harness();
    let base = t0() - Duration::days(30);
    for a in snapshot_15(base) {
        mem.insert(a);
    }
    ingest(&h);
    let before = h.store().watermark("hf", AssetKind::Model).unwrap();
    assert!(before > base);

    h.clock.advance(StdDuration::from_secs(3600));
    let card = "---\nlicense: apache-2.0\n---\n# se/sql\n\nText-to-SQL over relational schemas, now with joins.\n";
    let meta = json!({"id": "se/sql", "createdAt": (base + Duration::days(3)).to_rfc3339(), "tags": ["license:apache-2.0"]});
    mem.insert(memory_asset(
        AssetKind::Model,
        "se/sql",
        Some(card),
        meta,
        h.clock.now(),
    ));
    let run = ingest(&h);
    assert_eq!(run.assets_seen, 1);
    assert_eq!(run.assets_catalogued, 1);
    assert!(record(&h, "hf:se/sql").licenses.contains("apache-2.0"));
    assert!(h.store().watermark("hf", AssetKind::Model).unwrap() > before);
}

#[test]
fn unavailable_provider_leaves_catalogue_and_watermark_untouched() {
    let (h, mem) = memory_harness();
    for a in snapshot_15(t0() - Duration::days(30)) {
        mem.insert(a);
    }
    ingest(&h);
    let mark = h.store().watermark("hf", AssetKind::Dataset).unwrap();
    let counts = h.store().table_counts().unwrap();
    mem.set_unavailable(true);
    let run = ingest(&h);
    assert!(!run.errors.is_empty());
    assert_eq!(run.assets_catalogued, 0);
    assert_eq!(h.store().watermark("hf", AssetKind::Dataset).unwrap(), mark);
    let after = h.store().table_counts().unwrap();
    assert_eq!(after["assets"], counts["assets"]);
    assert_eq!(after["job_runs"], counts["job_runs"] + 1);
}

#[test]
fn shipped_fixture_ingests_with_expected_counts() {
    let h = fixture_harness();
    let run = ingest(&h);
    assert_eq!(
        (run.assets_seen, run.assets_catalogued, run.assets_skipped),
        (21, 18, 3)
    );
    let skipped: Vec<String> = run.skipped.iter().map(|s| s.asset_id.to_string()).collect();
    for id in [
        "hf:nlp/sentiment-bert",
        "hf:nlp/mt-translator",
        "hf:datasets/nlp/film-opinions",
    ] {
        assert!(
            skipped.contains(&id.to_string()),
            "{id} not skipped: {skipped:?}"
        );
    }
    let coder = record(&h, "hf:acme/codellm-7b");
    assert!(coder
        .abstract_text
        .as_deref()
        .is_some_and(|t| !t.is_empty()));
    let evals = &coder.model().unwrap().eval_records;
    assert!(evals
        .iter()
        .any(|e| e.benchmark == "HumanEval" && e.language.as_deref() == Some("C++")));
    assert!(coder.natural_languages.contains("English"));
    let (fk, _) = (h.store().foreign_key_violations().unwrap(), ());
    assert!(fk.is_empty(), "{fk:?}");
}

fn refreshed_pair(likes_after: u64) -> (AssetRecord, AssetRecord) {
    let (h, mem) = memory_harness();
    let created = t0() - Duration::days(10);
    let meta = json!({"id": "se/codegen", "createdAt": created.to_rfc3339(), "downloads": 40, "likes": 5, "commits": 4, "contributors": 2});
    mem.insert(memory_asset(
        AssetKind::Model,
        "se/codegen",
        Some("---\nlicense: mit\n---\nA model for code generation in Python."),
        meta,
        created,
    ));
    ingest(&h);
    let before = record(&h, "hf:se/codegen");
    h.clock.advance(StdDuration::from_secs(6 * 3600));
    let r = AssetRef::new("hf", AssetKind::Model, "se/codegen");
    mem.set_metrics(
        &r,
        RawMetrics {
            downloads: 40,
            likes: likes_after,
            commits: 4,
            contributors: 2,
        },
    );
    let run = run_metrics_refresh(&h.ctx, &h.providers, None).unwrap();
    assert_eq!(run.assets_seen, 1);
    let after = record(&h, "hf:se/codegen");
    assert_eq!(after.last_refreshed_at, h.clock.now());
    (before, after)
}

#[test]
fn refresh_changes_only_likes_and_timestamp() {
    let (before, after) = refreshed_pair(7);
    assert_eq!(before.popularity.likes, 5);
    assert_eq!(after.popularity.likes, 7);
    let mut expected = before.clone();
    expected.popularity.likes = 7;
    expected.last_refreshed_at = after.last_refreshed_at;
    assert_eq!(after, expected);
    assert!(after.last_refreshed_at > before.last_refreshed_at);
}

#[test]
fn identical_metrics_advance_only_the_timestamp() {
    let (before, after) = refreshed_pair(5);
    let mut expected = before.clone();
    expected.last_refreshed_at = after.last_refreshed_at;
    assert_eq!(after, expected);
    assert!(after.last_refreshed_at > before.last_refreshed_at);
}

#[test]
fn fifty_assets_end_equal_to_provider_table() {
    let (h, mem) = memory_harness();
    let base = t0() - Duration::days(60);
    let tasks = [
        "code generation",
        "program repair",
        "code search",
        "unit test generation",
        "code review",
    ];
    for i in 0..50u64 {
        let name = format!("bulk/model-{i:02}");
        let created = base + Duration::hours(i as i64);
        let meta = json!({"id": name, "createdAt": created.to_rfc3339(), "downloads": i, "likes": 1, "commits": 1, "contributors": 1});
        let card = format!(
            "---\nlicense: mit\n---\nModel {i} for {} in Java.",
            tasks[i as usize % 5]
        );
        mem.insert(memory_asset(
            AssetKind::Model,
            &name,
            Some(&card),
            meta,
            created,
        ));
    }
    let run = ingest(&h);
    assert_eq!(run.assets_catalogued, 50, "{:?}", run.skipped);

    let mut table = BTreeMap::new();
    for i in 0..50u64 {
        let r = AssetRef::new("hf", AssetKind::Model, &format!("bulk/model-{i:02}"));
        let m = RawMetrics {
            downloads: 1000 + i * 7,
            likes: i % 9,
            commits: 10 + i,
            contributors: 1 + i % 4,
        };
        mem.set_metrics(&r, m);
        table.insert(r.asset_id(), m);
    }
    h.clock.advance(StdDuration::from_secs(3600));
    let run = run_metrics_refresh(&h.ctx, &h.providers, None).unwrap();
    assert_eq!(run.assets_seen, 50);
    assert!(run.errors.is_empty());
    for a in h.store().snapshot().unwrap().assets() {
        let m = table[&a.asset_id];
        assert_eq!(
            (
                a.popularity.downloads,
                a.popularity.likes,
                a.activity.commits,
                a.activity.contributors
            ),
            (m.downloads, m.likes, m.commits, m.contributors),
            "{}",
            a.asset_id
        );
        assert_eq!(a.last_refreshed_at, h.clock.now());
    }
}

#[test]
fn vanished_asset_turns_stale_after_repeated_failures() {
    let (h, mem) = memory_harness();
    for a in snapshot_15(t0() - Duration::days(30)) {
        mem.insert(a);
    }
    ingest(&h);
    let gone = AssetRef::new("hf", AssetKind::Model, "se/review");
    mem.remove(&gone);
    for round in 1..=STALE_AFTER_FAILURES {
        let run = run_metrics_refresh(&h.ctx, &h.providers, None).unwrap();
        assert!(run.skipped.iter().any(|s| s.asset_id == gone.asset_id()));
        let stale = record(&h, "hf:se/review").stale;
        assert_eq!(stale, round == STALE_AFTER_FAILURES, "round {round}");
    }
    assert!(!record(&h, "hf:se/repair").stale);
}

#[test]
fn inconsistent_activity_is_rejected_on_refresh() {
    let (h, mem) = memory_harness();
    for a in snapshot_15(t0() - Duration::days(30)) {
        mem.insert(a);
    }
    ingest(&h);
    let before = record(&h, "hf:se/repair");
    let r = AssetRef::new("hf", AssetKind::Model, "se/repair");
    mem.set_metrics(
        &r,
        RawMetrics {
            downloads: 1,
            likes: 1,
            commits: 1,
            contributors: 5,
        },
    );
    let run = run_metrics_refresh(&h.ctx, &h.providers, Some(&[r.asset_id()])).unwrap();
    assert_eq!(run.assets_seen, 1);
    assert!(matches!(run.skipped[0].cause, SkipCause::InvalidRecord(_)));
    assert_eq!(record(&h, "hf:se/repair"), before);
}

#[test]
fn memory_provider_pages_listings() {
    let clock = Arc::new(asset_catalog::ingest::VirtualClock::new(t0()));
    let mem = MemoryProvider::new("hf", clock as Arc<dyn Clock>);
    for i in 0..23 {
        let name = format!("p/m{i}");
        mem.insert(memory_asset(
            AssetKind::Model,
            &name,
            Some("x"),
            json!({}),
            t0() - Duration::days(1),
        ));
    }
    let mut cursor = None;
    let mut total = 0;
    let mut pages = 0;
    loop {
        let page = mem
            .list_assets_since(
                t0() - Duration::days(5),
                AssetKind::Model,
                cursor.as_deref(),
            )
            .unwrap();
        total += page.items.len();
        pages += 1;
        match page.next_cursor {
            Some(c) => cursor = Some(c),
            None => break,
        }
    }
    assert_eq!((total, pages), (23, 3));
}
