//! Ranks models on a benchmark and metric, then shows the filter values a
//! UI would offer and the score trend over model size.
//!
//!     cargo run --example leaderboard -- HumanEval pass@1 [language]

use std::sync::Arc;

use asset_catalog::catalog::Taxonomy;
use asset_catalog::ingest::{
    run_ingestion, Clock, FixtureProvider, PipelineContext, Provider, RateBudget, SystemClock,
};
use asset_catalog::leaderboard::{
    FilterDimension, LeaderboardQuery, MetricRegistry, TrendAxis, TrendX,
};
use asset_catalog::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let benchmark = args.first().map(String::as_str).unwrap_or("HumanEval");
    let metric = args.get(1).map(String::as_str).unwrap_or("pass@1");

    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open_in_memory()?);
    store.sync_taxonomy(&Taxonomy::seed())?;
    let registry = MetricRegistry::builtin();
    let ctx = PipelineContext::new(
        store.clone(),
        Arc::new(Taxonomy::seed()),
        Arc::new(registry.clone()),
        clock.clone(),
    );
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/registry");
    let providers = vec![Provider::new(
        Arc::new(FixtureProvider::new("hf", root, clock.clone())),
        RateBudget::new(600, 50)?,
        clock,
    )];
    run_ingestion(&ctx, &providers, None)?;

    let board = store.snapshot()?.leaderboard(&registry);
    let mut query = LeaderboardQuery::new(benchmark, metric);
    if let Some(lang) = args.get(2) {
        query = query.language(lang);
    }
    for dim in [FilterDimension::Implementation, FilterDimension::Language] {
        println!(
            "{:<16} {:?}",
            dim.as_str(),
            board.list_filter_values(dim, &query)
        );
    }

    let ranking = board.rank(&query)?;
    if let Some(reason) = &ranking.empty_reason {
        println!("no ranking: {reason:?}");
        return Ok(());
    }
    println!(
        "{:>4}  {:<32} {:>8} {:>12} {:>6}",
        "rank", "model", "score", "params", "likes"
    );
    for e in &ranking.entries {
        let params = e
            .parameter_count
            .map(|p| p.to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>4}  {:<32} {:>8.3} {:>12} {:>6}",
            e.rank, e.model_name, e.score, params, e.likes
        );
    }

    println!("\nscore by model size");
    for p in board.trend_series(&query, TrendAxis::ModelSize)? {
        if let TrendX::ModelSize(n) = p.x {
            println!("  {:>14}  {:.3}  {}", n, p.y, p.asset_id.as_str());
        }
    }
    Ok(())
}
