//! Registry providers, rate limiting, scheduling and the ingest/refresh jobs.

pub mod clock;
pub mod config;
pub mod extract;
pub mod fixture;
pub mod hf;
pub mod job;
pub mod pipeline;
pub mod provider;
pub mod rate_limit;
pub mod scheduler;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use config::{load_config, parse_config, ConfigError, Provider, ProviderConfig};
pub use fixture::FixtureProvider;
pub use hf::HubClient;
pub use job::{JobRun, JobType, SkipCause, SkippedAsset};
pub use pipeline::{
    refresh_asset_now, run_ingestion, run_job, run_metrics_refresh, PipelineContext,
    RefreshNowError, STALE_AFTER_FAILURES,
};
pub use provider::{
    AssetRef, ListPage, ListedAsset, MemoryAsset, MemoryProvider, ProviderClient, ProviderError,
    RateLimitedProvider, RawAssetDoc, RawMetrics,
};
pub use rate_limit::{acquire_request_permit, Permit, RateBudget, TokenBucket};
pub use scheduler::{Deferral, Schedule, Scheduler};
