#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use asset_catalog::catalog::{
    ActivityMetrics, AssetExtension, AssetId, AssetKind, AssetRecord, DatasetExtension,
    ModelExtension, PopularityMetrics, SeTaskAssignment, SizeBucket, Taxonomy,
};
use asset_catalog::ingest::{
    AssetRef, Clock, FixtureProvider, MemoryAsset, MemoryProvider, PipelineContext, Provider,
    ProviderClient, RateBudget, RawMetrics, VirtualClock,
};
use asset_catalog::leaderboard::{EvalRecord, MetricRegistry};
use asset_catalog::store::Store;
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

pub fn registry_fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/registry")
}

pub fn test_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn ts(s: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
}

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, 1, 0, 0, 0).unwrap()
}

pub fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub struct Harness {
    pub ctx: PipelineContext,
    pub providers: Vec<Provider>,
    pub clock: Arc<VirtualClock>,
}

impl Harness {
    pub fn store(&self) -> &Arc<Store> {
        &self.ctx.store
    }
}

pub fn generous_budget() -> RateBudget {
    RateBudget::new(6000, 1000).unwrap()
}

pub fn context(clock: Arc<VirtualClock>) -> PipelineContext {
    let store = Arc::new(Store::open_in_memory().unwrap());
    let taxonomy = Taxonomy::seed();
    store.sync_taxonomy(&taxonomy).unwrap();
    PipelineContext::new(
        store,
        Arc::new(taxonomy),
        Arc::new(MetricRegistry::builtin()),
        clock as Arc<dyn Clock>,
    )
}

pub fn harness(clients: Vec<Arc<dyn ProviderClient>>, clock: Arc<VirtualClock>) -> Harness {
    let ctx = context(clock.clone());
    let providers = clients
        .into_iter()
        .map(|c| Provider::new(c, generous_budget(), clock.clone() as Arc<dyn Clock>))
        .collect();
    Harness {
        ctx,
        providers,
        clock,
    }
}

/// The shipped registry fixture behind a file-backed provider, not yet ingested.
pub fn fixture_harness() -> Harness {
    let clock = Arc::new(VirtualClock::new(t0()));
    let client = FixtureProvider::new("hf", registry_fixture(), clock.clone() as Arc<dyn Clock>);
    harness(vec![Arc::new(client)], clock)
}

pub fn memory_harness() -> (Harness, Arc<MemoryProvider>) {
    let clock = Arc::new(VirtualClock::new(t0()));
    let mem = Arc::new(MemoryProvider::new("hf", clock.clone() as Arc<dyn Clock>));
    let h = harness(vec![mem.clone() as Arc<dyn ProviderClient>], clock);
    (h, mem)
}

pub fn memory_asset(
    kind: AssetKind,
    name: &str,
    card: Option<&str>,
    meta: Value,
    modified: DateTime<Utc>,
) -> MemoryAsset {
    let metrics = RawMetrics {
        downloads: meta.get("downloads").and_then(Value::as_u64).unwrap_or(0),
        likes: meta.get("likes").and_then(Value::as_u64).unwrap_or(0),
        commits: meta.get("commits").and_then(Value::as_u64).unwrap_or(0),
        contributors: meta
            .get("contributors")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    MemoryAsset {
        asset: AssetRef::new("hf", kind, name),
        raw_metadata: meta,
        card_text: card.map(str::to_string),
        last_modified: modified,
        metrics,
    }
}

/// Fifteen assets: nine with software-engineering documentation, five
/// without, and one whose card is missing.
pub fn snapshot_15(base: DateTime<Utc>) -> Vec<MemoryAsset> {
    let se = [
        (
            AssetKind::Model,
            "se/codegen-a",
            "A model for code generation in Python.",
        ),
        (
            AssetKind::Model,
            "se/codegen-b",
            "Program synthesis for Java methods.",
        ),
        (
            AssetKind::Model,
            "se/repair",
            "Automated program repair of failing Java methods.",
        ),
        (
            AssetKind::Model,
            "se/sql",
            "Text-to-SQL over relational schemas.",
        ),
        (
            AssetKind::Model,
            "se/review",
            "Predicts code review comments for pull requests.",
        ),
        (
            AssetKind::Dataset,
            "se/commits",
            "Diffs paired with commit messages.",
        ),
        (
            AssetKind::Dataset,
            "se/vulns",
            "C functions labelled for vulnerability detection.",
        ),
        (
            AssetKind::Dataset,
            "se/logs",
            "Log parsing benchmark built from system logs.",
        ),
        (
            AssetKind::Dataset,
            "se/stories",
            "User stories with extracted requirements.",
        ),
    ];
    let other = [
        (
            AssetKind::Model,
            "nlp/sentiment",
            "Sentiment polarity of product opinions.",
        ),
        (
            AssetKind::Model,
            "cv/detector",
            "Object detection for street scenes.",
        ),
        (
            AssetKind::Model,
            "audio/asr",
            "Speech recognition for English.",
        ),
        (
            AssetKind::Dataset,
            "nlp/news",
            "News headlines for topic classification.",
        ),
        (
            AssetKind::Dataset,
            "bio/proteins",
            "Protein sequences with structure annotations.",
        ),
    ];
    let mut out = Vec::new();
    for (i, (kind, name, body)) in se.iter().chain(other.iter()).enumerate() {
        let created = base + Duration::days(i as i64);
        let meta = json!({
            "id": name, "createdAt": created.to_rfc3339(),
            "downloads": 100 + i as u64, "likes": i as u64, "commits": 3, "contributors": 1,
            "tags": ["license:mit", "language:en"]
        });
        let card = format!("---\nlicense: mit\n---\n# {name}\n\n{body}\n");
        out.push(memory_asset(
            *kind,
            name,
            Some(&card),
            meta,
            created + Duration::hours(1),
        ));
    }
    let created = base + Duration::days(20);
    out.push(memory_asset(
        AssetKind::Model,
        "se/undocumented",
        None,
        json!({"id": "se/undocumented", "createdAt": created.to_rfc3339(), "tags": ["license:mit"]}),
        created,
    ));
    out
}

pub const LICENSES: [&str; 5] = ["mit", "apache-2.0", "gpl-3.0", "cc-by-4.0", "other"];
pub const LIBRARIES: [&str; 4] = ["transformers", "pytorch", "jax", "keras"];
pub const LANGUAGES: [&str; 4] = ["English", "Chinese", "French", "German"];
pub const ML_TASKS: [&str; 4] = [
    "text-generation",
    "text-classification",
    "fill-mask",
    "translation",
];
pub const SE_TASKS: [&str; 5] = [
    "code-generation",
    "program-repair",
    "code-search",
    "test-generation",
    "code-review",
];
pub const REGIONS: [&str; 3] = ["us", "eu", "asia"];
pub const TRAIN_SETS: [&str; 4] = ["stack", "github-code", "codesearchnet", "apps"];
pub const INFERENCE: [&str; 3] = ["together", "nebius", "fireworks"];
pub const FORMATS: [&str; 3] = ["parquet", "json", "csv"];
pub const MODALITIES: [&str; 3] = ["text", "image", "tabular"];
pub const DISCIPLINES: [&str; 3] = ["computer science", "software engineering", "mathematics"];
pub const NAME_WORDS: [&str; 8] = [
    "Coder", "repair", "Search", "tiny", "BASE", "instruct", "sql", "mini",
];

fn pick_set(rng: &mut StdRng, pool: &[&str], max: usize) -> BTreeSet<String> {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| pool.choose(rng).unwrap().to_string())
        .collect()
}

fn recase(rng: &mut StdRng, s: &str) -> String {
    match rng.random_range(0..3) {
        0 => s.to_uppercase(),
        1 => s.to_string(),
        _ => format!(" {s} "),
    }
}

/// Random record drawn from small vocabularies so that filters hit often.
pub fn synthetic_record(rng: &mut StdRng, i: usize) -> AssetRecord {
    let kind = if i.is_multiple_of(2) {
        AssetKind::Model
    } else {
        AssetKind::Dataset
    };
    let word = NAME_WORDS.choose(rng).unwrap();
    let name = format!("org{}/{}-{}", i % 7, word, i);
    let repo_path = match kind {
        AssetKind::Model => name.clone(),
        AssetKind::Dataset => format!("datasets/{name}"),
    };
    let created = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
        + Duration::hours(rng.random_range(0..45_000));
    let commits = rng.random_range(0..50u64);
    let se_tasks = pick_set(rng, &SE_TASKS, 2)
        .into_iter()
        .map(|task_id| SeTaskAssignment {
            task_id,
            confidence: 0.5,
            rationale: "card".into(),
            low_confidence: false,
        })
        .collect();
    let extension = match kind {
        AssetKind::Model => AssetExtension::Model(ModelExtension {
            size_bytes: rng.random_range(0..10_000u64),
            region: rng
                .random_bool(0.7)
                .then(|| REGIONS.choose(rng).unwrap().to_string()),
            training_datasets: pick_set(rng, &TRAIN_SETS, 2),
            inference_providers: pick_set(rng, &INFERENCE, 2),
            eval_records: if rng.random_bool(0.3) {
                vec![EvalRecord {
                    asset_id: AssetId::new("hf", &repo_path),
                    benchmark: "HumanEval".into(),
                    implementation: None,
                    language: None,
                    metric_name: "pass@1".into(),
                    metric_config: None,
                    score: rng.random_range(0..100) as f64 / 100.0,
                    reported_at: created,
                    percent_scaled: false,
                    unrecognized_metric: false,
                }]
            } else {
                Vec::new()
            },
            parameter_count: rng
                .random_bool(0.5)
                .then(|| rng.random_range(1..100u64) * 1_000_000),
        }),
        AssetKind::Dataset => AssetExtension::Dataset(DatasetExtension {
            size_rows_bucket: rng
                .random_bool(0.85)
                .then(|| *SizeBucket::ALL.choose(rng).unwrap()),
            formats: pick_set(rng, &FORMATS, 2),
            modalities: pick_set(rng, &MODALITIES, 2),
            disciplines: pick_set(rng, &DISCIPLINES, 1),
        }),
    };
    let mut record = AssetRecord {
        asset_id: AssetId::new("hf", &repo_path),
        name,
        provider: "hf".into(),
        repo_url: format!("https://hub.example/{repo_path}"),
        created_at: created,
        last_refreshed_at: created + Duration::days(3),
        licenses: pick_set(rng, &LICENSES, 2),
        libraries: pick_set(rng, &LIBRARIES, 2),
        natural_languages: pick_set(rng, &LANGUAGES, 2),
        ml_tasks: pick_set(rng, &ML_TASKS, 2),
        se_tasks,
        popularity: PopularityMetrics {
            downloads: rng.random_range(0..1000),
            likes: rng.random_range(0..100),
        },
        activity: ActivityMetrics {
            commits,
            contributors: rng.random_range(0..=commits.min(10)),
        },
        card_text: "card".into(),
        abstract_text: None,
        extension,
        duplicate_of: None,
        stale: false,
    };
    if i >= 4 && rng.random_bool(0.05) {
        record.duplicate_of = Some(AssetId::new("hf", "org0/Coder-0"));
    }
    record
}

pub fn synthetic_corpus(rng: &mut StdRng, n: usize) -> Vec<AssetRecord> {
    (0..n).map(|i| synthetic_record(rng, i)).collect()
}

/// Case and whitespace variants of vocabulary values, as a user might type.
pub fn query_value(rng: &mut StdRng, pool: &[&str]) -> String {
    let v = *pool.choose(rng).unwrap();
    recase(rng, v)
}
