//! Drives a provider through a 30 requests/minute budget with a burst of 10
//! on a virtual clock, then prints how the grants spread over time.
//!
//!     cargo run --example rate_limited_provider

use std::collections::BTreeMap;
use std::sync::Arc;

use asset_catalog::catalog::AssetKind;
use asset_catalog::ingest::{
    AssetRef, Clock, MemoryAsset, MemoryProvider, ProviderClient, RateBudget, RateLimitedProvider,
    RawMetrics, VirtualClock,
};
use chrono::{TimeZone, Utc};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = Utc.with_ymd_and_hms(2025, 3, 1, 0, 0, 0).unwrap();
    let clock = Arc::new(VirtualClock::new(start));
    let mem = MemoryProvider::new("hf", clock.clone() as Arc<dyn Clock>);
    let asset = AssetRef::new("hf", AssetKind::Model, "demo/model");
    mem.insert(MemoryAsset {
        asset: asset.clone(),
        raw_metadata: json!({"id": "demo/model"}),
        card_text: Some("Code generation.".into()),
        last_modified: start,
        metrics: RawMetrics {
            downloads: 1,
            likes: 1,
            commits: 1,
            contributors: 1,
        },
    });

    let limited =
        RateLimitedProvider::new(mem, RateBudget::new(30, 10)?, clock.clone()).recording_grants();
    for _ in 0..100 {
        limited.fetch_metrics(&asset)?;
    }

    let grants = limited.grants();
    let mut per_minute: BTreeMap<i64, usize> = BTreeMap::new();
    for g in &grants {
        *per_minute.entry((*g - start).num_minutes()).or_default() += 1;
    }
    println!(
        "100 requests took {} virtual seconds",
        (clock.now() - start).num_seconds()
    );
    for (minute, n) in per_minute {
        println!("  minute {minute:>2}: {n:>3} {}", "#".repeat(n));
    }
    let worst = (0..grants.len())
        .map(|i| {
            grants[i..]
                .iter()
                .take_while(|t| **t < grants[i] + chrono::Duration::seconds(60))
                .count()
        })
        .max()
        .unwrap_or(0);
    println!("busiest 60 s window: {worst} requests (budget 30 + burst 10)");
    Ok(())
}
