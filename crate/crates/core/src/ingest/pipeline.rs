//! The ingest and metrics-refresh jobs.
//!
//! Each job gathers everything from the providers first and then applies
//! it in a single write transaction, so readers see a batch entirely or
//! not at all.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};

use super::clock::Clock;
use super::config::Provider;
use super::extract::{linked_papers, record_from_doc};
use super::job::{JobRun, JobType, SkipCause};
use super::provider::{AssetRef, ProviderClient, ProviderError, RawAssetDoc};
use crate::catalog::{
    classify_batch, duplicate_links, ActivityMetrics, AssetId, AssetKind, AssetRecord,
    BatchVerdict, OutlierConfig, PopularityMetrics, Taxonomy, DEFAULT_DEDUP_THRESHOLD,
};
use crate::leaderboard::{parse_card_evaluations, MetricRegistry};
use crate::store::{IngestMeta, Store, StoreResult};
use crate::workspace::match_alerts;

/// Consecutive refresh failures after which an asset is flagged stale.
pub const STALE_AFTER_FAILURES: u32 = 2;

#[derive(Clone)]
pub struct PipelineContext {
    pub store: Arc<Store>,
    pub taxonomy: Arc<Taxonomy>,
    pub registry: Arc<MetricRegistry>,
    pub clock: Arc<dyn Clock>,
    pub outliers: OutlierConfig,
    pub dedup_threshold: f64,
}

impl PipelineContext {
    pub fn new(
        store: Arc<Store>,
        taxonomy: Arc<Taxonomy>,
        registry: Arc<MetricRegistry>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        PipelineContext {
            store,
            taxonomy,
            registry,
            clock,
            outliers: OutlierConfig::default(),
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
        }
    }
}

/// Digest of everything an ingested record is derived from.
pub fn content_hash(doc: &RawAssetDoc, abstract_text: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(doc.raw_metadata.to_string().as_bytes());
    h.update([0]);
    h.update(doc.card_text.as_deref().unwrap_or("").as_bytes());
    h.update([0]);
    h.update(abstract_text.unwrap_or("").as_bytes());
    hex::encode(h.finalize())
}

struct Pending {
    record: AssetRecord,
    meta: IngestMeta,
    raw: serde_json::Value,
    reported_at: DateTime<Utc>,
}

/// Watermark bookkeeping for one provider and kind.
struct Cursor {
    provider_id: String,
    kind: AssetKind,
    since: DateTime<Utc>,
    oldest_failed: Option<DateTime<Utc>>,
    listing_failed: bool,
    done: Vec<DateTime<Utc>>,
}

impl Cursor {
    /// Resume point: everything up to the newest processed asset, held back
    /// below the oldest asset that failed so it is retried next time. A
    /// failed listing leaves the watermark where it was.
    fn next(&self) -> Option<DateTime<Utc>> {
        if self.listing_failed {
            return None;
        }
        self.done
            .iter()
            .copied()
            .filter(|t| self.oldest_failed.is_none_or(|l| *t < l))
            .max()
            .filter(|b| *b > self.since)
    }
}

fn fetch_abstract(
    client: &dyn ProviderClient,
    asset: &AssetRef,
    raw: &serde_json::Value,
) -> Result<Option<String>, ProviderError> {
    for paper in linked_papers(raw) {
        if let Some(text) = client.fetch_linked_abstract(asset, &paper)? {
            if !text.trim().is_empty() {
                return Ok(Some(text));
            }
        }
    }
    Ok(None)
}

/// Lists assets changed since the per-provider watermark (or `since_override`),
/// catalogues the SE-relevant ones and records the run.
pub fn run_ingestion(
    ctx: &PipelineContext,
    providers: &[Provider],
    since_override: Option<DateTime<Utc>>,
) -> StoreResult<JobRun> {
    let mut run = JobRun::started(JobType::Ingest, ctx.clock.now());
    let mut pending: Vec<Pending> = Vec::new();
    let mut cursors: Vec<Cursor> = Vec::new();

    for p in providers {
        for &kind in &p.kinds {
            let since = match since_override {
                Some(s) => s,
                None => ctx.store.watermark(p.id(), kind)?,
            };
            let mut cursor = Cursor {
                provider_id: p.id().to_string(),
                kind,
                since,
                oldest_failed: None,
                listing_failed: false,
                done: Vec::new(),
            };
            let mut page_cursor: Option<String> = None;
            loop {
                let page = match p
                    .client
                    .list_assets_since(since, kind, page_cursor.as_deref())
                {
                    Ok(page) => page,
                    Err(e) => {
                        run.errors.push(format!("{} {kind} listing: {e}", p.id()));
                        cursor.listing_failed = true;
                        break;
                    }
                };
                for listed in page.items {
                    run.assets_seen += 1;
                    let id = listed.asset.asset_id();
                    let fail =
                        |run: &mut JobRun, cursor: &mut Cursor, cause: SkipCause, msg: String| {
                            run.errors.push(msg);
                            run.skip(id.clone(), cause);
                            cursor.oldest_failed = Some(
                                cursor
                                    .oldest_failed
                                    .map_or(listed.last_modified, |t| t.min(listed.last_modified)),
                            );
                        };
                    let doc = match p.client.fetch_card(&listed.asset) {
                        Ok(d) => d,
                        Err(e) => {
                            fail(
                                &mut run,
                                &mut cursor,
                                SkipCause::FetchFailed(e.to_string()),
                                format!("{id}: {e}"),
                            );
                            continue;
                        }
                    };
                    let abstract_text =
                        match fetch_abstract(p.client.as_ref(), &listed.asset, &doc.raw_metadata) {
                            Ok(a) => a,
                            Err(e) => {
                                fail(
                                    &mut run,
                                    &mut cursor,
                                    SkipCause::FetchFailed(e.to_string()),
                                    format!("{id}: abstract: {e}"),
                                );
                                continue;
                            }
                        };
                    cursor.done.push(listed.last_modified);
                    let hash = content_hash(&doc, abstract_text.as_deref());
                    if ctx.store.content_hash(&id)?.as_deref() == Some(hash.as_str()) {
                        run.assets_unchanged += 1;
                        continue;
                    }
                    match record_from_doc(&doc, abstract_text, &p.web_base) {
                        Ok(record) => pending.push(Pending {
                            record,
                            meta: IngestMeta {
                                raw_metadata: doc.raw_metadata.to_string(),
                                content_hash: hash,
                            },
                            raw: doc.raw_metadata,
                            reported_at: doc.last_modified,
                        }),
                        Err(e) => run.skip(id, SkipCause::InvalidRecord(e)),
                    }
                }
                match page.next_cursor {
                    Some(c) => page_cursor = Some(c),
                    None => break,
                }
            }
            cursors.push(cursor);
        }
    }

    let snapshot = ctx.store.snapshot()?;
    let batch_ids: BTreeSet<&AssetId> = pending.iter().map(|p| &p.record.asset_id).collect();
    let reference: Vec<AssetRecord> = snapshot
        .assets()
        .iter()
        .filter(|a| !batch_ids.contains(&a.asset_id))
        .cloned()
        .collect();
    let mut records: Vec<AssetRecord> = pending.iter().map(|p| p.record.clone()).collect();
    let verdicts = classify_batch(&mut records, &reference, &ctx.taxonomy, ctx.outliers);

    let mut accepted: Vec<(AssetRecord, &Pending)> = Vec::new();
    for ((mut record, verdict), p) in records.into_iter().zip(verdicts).zip(&pending) {
        match verdict {
            BatchVerdict::MissingDocumentation => {
                run.skip(record.asset_id, SkipCause::MissingDocumentation)
            }
            BatchVerdict::NotSeRelevant => run.skip(record.asset_id, SkipCause::NotSeRelevant),
            BatchVerdict::Catalogued => {
                if record.kind() == AssetKind::Model {
                    match parse_card_evaluations(
                        &record.card_text,
                        Some(&p.raw),
                        &record.asset_id,
                        p.reported_at,
                        &ctx.registry,
                    ) {
                        Ok(parsed) => {
                            for s in &parsed.skipped {
                                tracing::warn!(asset = %record.asset_id, ?s, "evaluation entry skipped");
                            }
                            if let Some(m) = record.model_mut() {
                                m.eval_records = parsed.records;
                            }
                        }
                        Err(e) => run
                            .errors
                            .push(format!("{}: evaluation metadata: {e}", record.asset_id)),
                    }
                }
                accepted.push((record, p));
            }
        }
    }

    // Near-duplicate groups over the catalogue as it will be after this batch.
    let mut all: Vec<&AssetRecord> = reference.iter().collect();
    all.extend(accepted.iter().map(|(r, _)| r));
    let links = duplicate_links(&all, ctx.dedup_threshold);
    let relinks: Vec<(AssetId, Option<AssetId>)> = reference
        .iter()
        .filter_map(|r| {
            let want = links.get(&r.asset_id).cloned().flatten();
            (want != r.duplicate_of).then(|| (r.asset_id.clone(), want))
        })
        .collect();
    for (r, _) in &mut accepted {
        r.duplicate_of = links.get(&r.asset_id).cloned().flatten();
    }

    let preferences = ctx.store.all_preferences()?;
    let fresh: Vec<&AssetRecord> = accepted.iter().map(|(r, _)| r).collect();
    let alerts = match_alerts(&fresh, &preferences, &ctx.registry);

    run.finished_at = ctx.clock.now().max(run.started_at);
    let job_id = ctx.store.write(|tx| {
        tx.sync_taxonomy(&ctx.taxonomy)?;
        let mut catalogued = 0;
        for (record, p) in &accepted {
            match tx.upsert_asset(record, Some(&p.meta)) {
                Ok(_) => catalogued += 1,
                Err(e) => run.errors.push(format!("{}: {e}", record.asset_id)),
            }
        }
        run.assets_catalogued = catalogued;
        for (id, canonical) in &relinks {
            tx.set_duplicate_of(id, canonical.as_ref())?;
        }
        let at = run.finished_at;
        for m in &alerts.matches {
            tx.insert_notification(m, at)?;
        }
        for (pref, reason) in &alerts.invalid {
            tx.flag_preference(*pref, reason)?;
        }
        for c in &cursors {
            if let Some(w) = c.next() {
                tx.set_watermark(&c.provider_id, c.kind, w)?;
            }
        }
        tx.record_job_run(&run)
    })?;
    run.job_id = Some(job_id);
    Ok(run)
}

/// Re-reads the dynamic metrics of catalogued assets (all of them when
/// `only` is `None`). Static fields are never touched.
pub fn run_metrics_refresh(
    ctx: &PipelineContext,
    providers: &[Provider],
    only: Option<&[AssetId]>,
) -> StoreResult<JobRun> {
    let mut run = JobRun::started(JobType::Refresh, ctx.clock.now());
    let snapshot = ctx.store.snapshot()?;
    let by_id: BTreeMap<&str, &Provider> = providers.iter().map(|p| (p.id(), p)).collect();
    let wanted: Option<BTreeSet<&AssetId>> = only.map(|ids| ids.iter().collect());

    enum Outcome {
        Updated(PopularityMetrics, ActivityMetrics, DateTime<Utc>),
        Vanished,
    }
    let mut outcomes: Vec<(AssetId, Outcome)> = Vec::new();
    for asset in snapshot.assets() {
        if wanted
            .as_ref()
            .is_some_and(|w| !w.contains(&asset.asset_id))
        {
            continue;
        }
        let Some(p) = by_id.get(asset.provider.as_str()) else {
            continue;
        };
        run.assets_seen += 1;
        let r = AssetRef::from_asset_id(&asset.asset_id, asset.kind());
        match p.client.fetch_metrics(&r) {
            Ok(m) => {
                let activity = ActivityMetrics {
                    commits: m.commits,
                    contributors: m.contributors,
                };
                if !activity.is_consistent() {
                    run.errors.push(format!(
                        "{}: {} contributors for {} commits",
                        asset.asset_id, m.contributors, m.commits
                    ));
                    run.skip(
                        asset.asset_id.clone(),
                        SkipCause::InvalidRecord("inconsistent activity".into()),
                    );
                    continue;
                }
                let popularity = PopularityMetrics {
                    downloads: m.downloads,
                    likes: m.likes,
                };
                let at = ctx.clock.now().max(asset.created_at);
                outcomes.push((
                    asset.asset_id.clone(),
                    Outcome::Updated(popularity, activity, at),
                ));
            }
            Err(ProviderError::NotFound(_)) => {
                run.skip(
                    asset.asset_id.clone(),
                    SkipCause::FetchFailed("not found upstream".into()),
                );
                outcomes.push((asset.asset_id.clone(), Outcome::Vanished));
            }
            Err(e) => {
                run.errors.push(format!("{}: {e}", asset.asset_id));
                run.skip(
                    asset.asset_id.clone(),
                    SkipCause::FetchFailed(e.to_string()),
                );
            }
        }
    }

    run.finished_at = ctx.clock.now().max(run.started_at);
    let job_id = ctx.store.write(|tx| {
        let mut updated = 0;
        for (id, o) in &outcomes {
            match o {
                Outcome::Updated(p, a, at) => {
                    if tx.update_metrics(id, *p, *a, *at)? {
                        updated += 1;
                    }
                }
                Outcome::Vanished => {
                    tx.record_refresh_failure(id, STALE_AFTER_FAILURES)?;
                }
            }
        }
        run.assets_catalogued = updated;
        tx.record_job_run(&run)
    })?;
    run.job_id = Some(job_id);
    Ok(run)
}

/// Runs `job` and logs, rather than propagates, store failures.
pub fn run_job(ctx: &PipelineContext, providers: &[Provider], job: JobType) -> Option<JobRun> {
    let out = match job {
        JobType::Ingest => run_ingestion(ctx, providers, None),
        JobType::Refresh => run_metrics_refresh(ctx, providers, None),
    };
    match out {
        Ok(run) => {
            tracing::info!(
                job = %job,
                seen = run.assets_seen,
                catalogued = run.assets_catalogued,
                skipped = run.assets_skipped,
                unchanged = run.assets_unchanged,
                errors = run.errors.len(),
                "job finished"
            );
            Some(run)
        }
        Err(e) => {
            tracing::error!(job = %job, error = %e, "job failed");
            None
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RefreshNowError {
    #[error("unknown asset {0}")]
    UnknownAsset(AssetId),
    #[error("no provider registered for {0}")]
    NoProvider(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

/// On-demand metrics refresh of one asset. Fails fast with
/// `RateBudgetExhausted` rather than waiting for the provider budget.
pub fn refresh_asset_now(
    ctx: &PipelineContext,
    providers: &[Provider],
    id: &AssetId,
) -> Result<AssetRecord, RefreshNowError> {
    let snapshot = ctx.store.snapshot()?;
    let asset = snapshot
        .get(id)
        .ok_or_else(|| RefreshNowError::UnknownAsset(id.clone()))?;
    let p = providers
        .iter()
        .find(|p| p.id() == asset.provider)
        .ok_or_else(|| RefreshNowError::NoProvider(asset.provider.clone()))?;
    let m = p
        .client
        .fetch_metrics_now(&AssetRef::from_asset_id(id, asset.kind()))?;
    let activity = ActivityMetrics {
        commits: m.commits,
        contributors: m.contributors,
    };
    if !activity.is_consistent() {
        return Err(ProviderError::Malformed(format!(
            "{} contributors for {} commits",
            m.contributors, m.commits
        ))
        .into());
    }
    let popularity = PopularityMetrics {
        downloads: m.downloads,
        likes: m.likes,
    };
    let at = ctx.clock.now().max(asset.created_at);
    ctx.store
        .write(|tx| tx.update_metrics(id, popularity, activity, at))?;
    let snapshot = ctx.store.snapshot()?;
    snapshot
        .get(id)
        .cloned()
        .ok_or_else(|| RefreshNowError::UnknownAsset(id.clone()))
}
