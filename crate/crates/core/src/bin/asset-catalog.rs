//! Catalogue service: HTTP API plus the scheduled ingest and refresh jobs.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use asset_catalog::api::{router, AppState, CorsConfig};
use asset_catalog::catalog::{load_taxonomy, Taxonomy};
use asset_catalog::ingest::{
    load_config, run_job, Clock, JobType, PipelineContext, Provider, ProviderConfig, Schedule,
    Scheduler, SystemClock,
};
use asset_catalog::leaderboard::MetricRegistry;
use asset_catalog::store::{Store, DATABASE_ENV};
use clap::Parser;

/// Registry fixture bundled with the crate, used by `--fixture-mode` when
/// no `--config` is given.
const BUNDLED_FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/registry");

#[derive(Debug, Parser)]
#[command(
    version,
    about = "Catalogue of ML models and datasets for software engineering"
)]
struct Cli {
    /// Provider config file (JSON array of providers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use file-backed registries only; live providers are refused.
    #[arg(long)]
    fixture_mode: bool,
    /// Run one job, print its JobRun as JSON and exit.
    #[arg(long, value_name = "ingest|refresh")]
    run_once: Option<JobType>,
    /// SQLite path, or `:memory:`.
    #[arg(long, env = DATABASE_ENV, default_value = "asset-catalog.db")]
    database: String,
    /// Taxonomy JSON replacing the built-in one.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Extra metric descriptors (JSON array) added to the built-in registry.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Browser origin allowed to call the API; repeatable, `*` for any.
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
    /// Run an ingest before serving instead of waiting for the first slot.
    #[arg(long)]
    ingest_on_start: bool,
}

/// Startup failure: message printed, process exits non-zero.
struct Fail(String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

fn open_store(spec: &str) -> Result<Store, Fail> {
    Ok(if spec == ":memory:" {
        Store::open_in_memory()?
    } else {
        Store::open(spec)?
    })
}

fn providers(cli: &Cli, clock: Arc<dyn Clock>) -> Result<Vec<Provider>, Fail> {
    let configs = match &cli.config {
        Some(path) => load_config(path)?,
        None if cli.fixture_mode => vec![ProviderConfig::fixture("hf", BUNDLED_FIXTURE)],
        None => return Err(Fail("either --config or --fixture-mode is required".into())),
    };
    configs
        .iter()
        .map(|c| Provider::from_config(c, clock.clone(), cli.fixture_mode).map_err(Fail::from))
        .collect()
}

fn setup(cli: &Cli) -> Result<(PipelineContext, Vec<Provider>), Fail> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let taxonomy = match &cli.taxonomy {
        Some(p) => load_taxonomy(&std::fs::read_to_string(p)?)?,
        None => Taxonomy::seed(),
    };
    let registry = match &cli.metrics {
        Some(p) => MetricRegistry::builtin_with(&std::fs::read_to_string(p)?)?,
        None => MetricRegistry::builtin(),
    };
    let store = Arc::new(open_store(&cli.database)?);
    store.sync_taxonomy(&taxonomy)?;
    let providers = providers(cli, clock.clone())?;
    let ctx = PipelineContext::new(store, Arc::new(taxonomy), Arc::new(registry), clock);
    Ok((ctx, providers))
}

/// Ticks the scheduler and runs each triggered job on its own thread.
fn spawn_scheduler(ctx: PipelineContext, providers: Vec<Provider>) {
    let scheduler = Arc::new(Mutex::new(Scheduler::new(
        Schedule::default(),
        ctx.clock.now(),
    )));
    std::thread::spawn(move || loop {
        let due = scheduler
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .tick(ctx.clock.now());
        for job in due {
            let (ctx, providers, scheduler) = (ctx.clone(), providers.clone(), scheduler.clone());
            std::thread::spawn(move || {
                run_job(&ctx, &providers, job);
                scheduler
                    .lock()
                    .unwrap_or_else(|p| p.into_inner())
                    .complete(job);
            });
        }
        std::thread::sleep(Duration::from_secs(30));
    });
}

fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(Fail(msg)) => {
            eprintln!("error: {msg}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    let (ctx, providers) = setup(&cli)?;
    if let Some(job) = cli.run_once {
        let run = match job {
            JobType::Ingest => asset_catalog::ingest::run_ingestion(&ctx, &providers, None)?,
            JobType::Refresh => asset_catalog::ingest::run_metrics_refresh(&ctx, &providers, None)?,
        };
        println!("{}", serde_json::to_string_pretty(&run)?);
        return Ok(());
    }
    if cli.ingest_on_start {
        run_job(&ctx, &providers, JobType::Ingest);
    }
    spawn_scheduler(ctx.clone(), providers.clone());

    let addr: SocketAddr = format!("{}:{}", cli.bind, cli.port).parse()?;
    let app = router(
        AppState::new(ctx, providers),
        &CorsConfig {
            origins: cli.cors_origins.clone(),
        },
    );
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "serving /api/v1");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
