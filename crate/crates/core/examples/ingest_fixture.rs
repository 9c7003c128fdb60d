//! Ingests the bundled registry fixture into an in-memory store and prints
//! what was catalogued, what was skipped and why.
//!
//!     cargo run --example ingest_fixture

use std::sync::Arc;

use asset_catalog::catalog::Taxonomy;
use asset_catalog::ingest::{
    run_ingestion, run_metrics_refresh, Clock, FixtureProvider, PipelineContext, Provider,
    RateBudget, SystemClock,
};
use asset_catalog::leaderboard::MetricRegistry;
use asset_catalog::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open_in_memory()?);
    let taxonomy = Taxonomy::seed();
    store.sync_taxonomy(&taxonomy)?;
    let ctx = PipelineContext::new(
        store.clone(),
        Arc::new(taxonomy),
        Arc::new(MetricRegistry::builtin()),
        clock.clone(),
    );

    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/registry");
    let client = Arc::new(FixtureProvider::new("hf", root, clock.clone()));
    let providers = vec![Provider::new(client, RateBudget::new(600, 50)?, clock)];

    let run = run_ingestion(&ctx, &providers, None)?;
    println!(
        "ingest: seen {} catalogued {} skipped {}",
        run.assets_seen, run.assets_catalogued, run.assets_skipped
    );
    for s in &run.skipped {
        println!("  skipped {:<40} {:?}", s.asset_id.as_str(), s.cause);
    }

    for a in store.snapshot()?.assets() {
        let tasks: Vec<&str> = a.se_tasks.iter().map(|t| t.task_id.as_str()).collect();
        println!(
            "{:<42} {:<8} {}",
            a.asset_id.as_str(),
            a.kind().as_str(),
            tasks.join(", ")
        );
    }

    // A second pass finds nothing new; a refresh re-reads popularity only.
    let again = run_ingestion(&ctx, &providers, None)?;
    println!("second ingest catalogued {}", again.assets_catalogued);
    let refresh = run_metrics_refresh(&ctx, &providers, None)?;
    println!("refresh touched {} assets", refresh.assets_seen);
    Ok(())
}
