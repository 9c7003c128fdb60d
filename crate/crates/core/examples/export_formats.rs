//! Exports one result set as CSV, JSON and XML. With a directory argument
//! the files are written there; otherwise the start of each is printed.
//!
//!     cargo run --example export_formats -- [out-dir]

use std::sync::Arc;

use asset_catalog::catalog::{AssetKind, Taxonomy};
use asset_catalog::ingest::{
    run_ingestion, Clock, FixtureProvider, PipelineContext, Provider, RateBudget, SystemClock,
};
use asset_catalog::leaderboard::MetricRegistry;
use asset_catalog::query::{export, ExportFormat, FilterQuery};
use asset_catalog::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from);

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

    let snapshot = store.snapshot()?;
    let query = FilterQuery::all(AssetKind::Model);
    for format in [ExportFormat::Csv, ExportFormat::Json, ExportFormat::Xml] {
        let out = export(&query, snapshot.assets(), format)?;
        match &out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("models.{}", format.extension()));
                std::fs::write(&path, &out.bytes)?;
                println!(
                    "{} ({} bytes, {})",
                    path.display(),
                    out.bytes.len(),
                    out.media_type
                );
            }
            None => {
                let text = String::from_utf8_lossy(&out.bytes);
                println!("== {} ({} bytes)", out.media_type, out.bytes.len());
                for line in text.lines().take(3) {
                    let cut: String = line.chars().take(110).collect();
                    println!("{cut}");
                }
            }
        }
    }
    Ok(())
}
