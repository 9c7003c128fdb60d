//! Filters the catalogue with the same query-string parameters the HTTP API
//! accepts.
//!
//!     cargo run --example filter_catalog -- kind=model se_task=code-generation sort=downloads

use std::sync::Arc;

use asset_catalog::catalog::Taxonomy;
use asset_catalog::ingest::{
    run_ingestion, Clock, FixtureProvider, PipelineContext, Provider, RateBudget, SystemClock,
};
use asset_catalog::leaderboard::MetricRegistry;
use asset_catalog::query::{apply_filters, from_query_pairs, to_query_pairs};
use asset_catalog::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut pairs: Vec<(String, String)> = std::env::args()
        .skip(1)
        .filter_map(|a| {
            a.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect();
    if pairs.is_empty() {
        pairs = vec![
            ("kind".into(), "model".into()),
            ("se_task".into(), "code-generation".into()),
            ("sort".into(), "downloads".into()),
        ];
    }
    let query = match from_query_pairs(&pairs) {
        Ok(q) => q,
        Err(e) => {
            for (field, msg) in &e.field_errors {
                eprintln!("{field}: {msg}");
            }
            std::process::exit(2);
        }
    };

    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open_in_memory()?);
    store.sync_taxonomy(&Taxonomy::seed())?;
    let ctx = PipelineContext::new(
        store.clone(),
        Arc::new(Taxonomy::seed()),
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

    let canonical: Vec<String> = to_query_pairs(&query)
        .into_iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    println!("query: {}", canonical.join("&"));
    let snapshot = store.snapshot()?;
    let page = apply_filters(&query, snapshot.assets())?;
    println!("{} of {} match", page.items.len(), page.total_matching);
    for a in &page.items {
        println!(
            "  {:<42} downloads {:>8} likes {:>5}  {}",
            a.asset_id,
            a.downloads,
            a.likes,
            a.licenses.join("/")
        );
    }
    Ok(())
}
