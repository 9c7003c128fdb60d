//! Serves the HTTP API over the bundled fixture on an ephemeral port and
//! issues a few requests against it. Pass `--keep-serving` to leave it up.
//!
//!     cargo run --example serve_api -- [--keep-serving]

use std::sync::Arc;

use asset_catalog::api::{router, AppState, CorsConfig};
use asset_catalog::catalog::Taxonomy;
use asset_catalog::ingest::{
    run_ingestion, Clock, FixtureProvider, PipelineContext, Provider, RateBudget, SystemClock,
};
use asset_catalog::leaderboard::MetricRegistry;
use asset_catalog::store::Store;

fn get(base: &str, path: &str) -> Result<(u16, String), ureq::Error> {
    let mut resp = ureq::get(&format!("{base}{path}"))
        .config()
        .http_status_as_error(false)
        .build()
        .call()?;
    Ok((resp.status().as_u16(), resp.body_mut().read_to_string()?))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keep = std::env::args().any(|a| a == "--keep-serving");
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open_in_memory()?);
    store.sync_taxonomy(&Taxonomy::seed())?;
    let ctx = PipelineContext::new(
        store,
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

    let app = router(
        AppState::new(ctx, providers),
        &CorsConfig {
            origins: vec!["http://localhost:5173".into()],
        },
    );
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}/api/v1", listener.local_addr()?);
    let server = rt.spawn(async move { axum::serve(listener, app).await });
    println!("serving {base}");

    for path in [
        "/health",
        "/models?se_task=code-generation&sort=likes&limit=2",
        "/leaderboard?benchmark=HumanEval&metric=pass@1&language=Python",
        "/leaderboard/filters/language?benchmark=HumanEval",
        "/datasets?size_rows=huge",
        "/assets/hf:lab/fix-t5",
    ] {
        let (status, body) = get(&base, path)?;
        let cut: String = body.chars().take(220).collect();
        println!("\nGET {path} -> {status}\n{cut}");
    }

    if keep {
        println!("\nCtrl-C to stop");
        rt.block_on(server)??;
    }
    Ok(())
}
