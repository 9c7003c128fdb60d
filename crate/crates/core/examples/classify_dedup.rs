//! Shows the task evidence behind each classification and groups
//! near-identical cards. A mirrored copy of one model is planted so the
//! duplicate grouping has something to find.
//!
//!     cargo run --example classify_dedup

use std::sync::Arc;

use asset_catalog::catalog::{
    classify_detailed, deduplicate, AssetId, CorpusStats, DedupInput, Taxonomy,
    DEFAULT_DEDUP_THRESHOLD,
};
use asset_catalog::ingest::{
    run_ingestion, Clock, FixtureProvider, PipelineContext, Provider, RateBudget, SystemClock,
};
use asset_catalog::leaderboard::MetricRegistry;
use asset_catalog::store::Store;
use chrono::Duration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open_in_memory()?);
    let taxonomy = Taxonomy::seed();
    store.sync_taxonomy(&taxonomy)?;
    let ctx = PipelineContext::new(
        store.clone(),
        Arc::new(taxonomy.clone()),
        Arc::new(MetricRegistry::builtin()),
        clock.clone(),
    );
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/registry");
    let providers = vec![Provider::new(
        Arc::new(FixtureProvider::new("hf", root, clock.clone())),
        RateBudget::new(600, 50)?,
        clock,
    )];
    run_ingestion(&ctx, &providers, None)?;

    let mut records = store.snapshot()?.assets().to_vec();
    for r in &records {
        for m in classify_detailed(r, &taxonomy)? {
            let terms: Vec<&str> = m.matched_terms.iter().map(String::as_str).collect();
            println!(
                "{:<42} {:<26} {:.2}  [{}]{}",
                r.asset_id.as_str(),
                m.assignment.task_id,
                m.assignment.confidence,
                terms.join(", "),
                if m.ambiguous_only { " ambiguous" } else { "" }
            );
        }
    }

    let mut mirror = records
        .iter()
        .find(|r| r.asset_id.as_str() == "hf:lab/fix-t5")
        .cloned()
        .expect("fixture model");
    mirror.asset_id = AssetId::new("hf", "mirror/fix-t5");
    mirror.created_at += Duration::days(30);
    records.push(mirror);

    let docs: Vec<String> = records.iter().map(|r| r.documentation_text()).collect();
    let corpus = CorpusStats::from_documents(docs.iter().map(String::as_str));
    let vectors: Vec<_> = docs.iter().map(|d| corpus.vectorize(d)).collect();
    let input: Vec<DedupInput> = records
        .iter()
        .zip(&vectors)
        .map(|(r, v)| DedupInput {
            asset_id: &r.asset_id,
            created_at: r.created_at,
            vector: v,
        })
        .collect();
    println!();
    for g in deduplicate(&input, DEFAULT_DEDUP_THRESHOLD)
        .iter()
        .filter(|g| !g.is_singleton())
    {
        let members: Vec<&str> = g.members.iter().map(AssetId::as_str).collect();
        println!(
            "duplicates of {}: {}",
            g.canonical.as_str(),
            members.join(", ")
        );
    }
    Ok(())
}
