//! The registry client contract and its rate-limited and in-memory forms.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::clock::Clock;
use super::rate_limit::{RateBudget, TokenBucket};
use crate::catalog::{AssetId, AssetKind};

/// A registry-side handle: `name` is the registry path without any kind
/// prefix (`org/model`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssetRef {
    pub provider_id: String,
    pub kind: AssetKind,
    pub name: String,
}

impl AssetRef {
    pub fn new(provider_id: &str, kind: AssetKind, name: &str) -> Self {
        AssetRef {
            provider_id: provider_id.to_string(),
            kind,
            name: name.to_string(),
        }
    }

    /// Datasets live under a `datasets/` path so ids never collide with models.
    pub fn asset_id(&self) -> AssetId {
        match self.kind {
            AssetKind::Model => AssetId::new(&self.provider_id, &self.name),
            AssetKind::Dataset => {
                AssetId::new(&self.provider_id, &format!("datasets/{}", self.name))
            }
        }
    }

    pub fn from_asset_id(id: &AssetId, kind: AssetKind) -> Self {
        let path = id.repo_path();
        let name = match kind {
            AssetKind::Dataset => path.strip_prefix("datasets/").unwrap_or(path),
            AssetKind::Model => path,
        };
        AssetRef::new(id.provider(), kind, name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListedAsset {
    pub asset: AssetRef,
    pub last_modified: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ListPage {
    pub items: Vec<ListedAsset>,
    pub next_cursor: Option<String>,
}

/// Metadata document and card exactly as the registry returned them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAssetDoc {
    pub asset: AssetRef,
    pub raw_metadata: Value,
    pub card_text: Option<String>,
    pub last_modified: DateTime<Utc>,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawMetrics {
    pub downloads: u64,
    pub likes: u64,
    pub commits: u64,
    pub contributors: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("{0} not found upstream")]
    NotFound(String),
    #[error("rate budget exhausted; next permit in {0:?}")]
    RateBudgetExhausted(Duration),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

pub type ProviderResult<T> = Result<T, ProviderError>;

pub trait ProviderClient: Send + Sync {
    fn provider_id(&self) -> &str;

    /// Assets of `kind` modified strictly after `since`, oldest first.
    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage>;

    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc>;

    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics>;

    /// Abstract of a paper the asset links to (e.g. an arXiv id), when
    /// the provider can resolve it.
    fn fetch_linked_abstract(
        &self,
        asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>>;
}

impl<P: ProviderClient + ?Sized> ProviderClient for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage> {
        (**self).list_assets_since(since, kind, cursor)
    }
    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc> {
        (**self).fetch_card(asset)
    }
    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        (**self).fetch_metrics(asset)
    }
    fn fetch_linked_abstract(
        &self,
        asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>> {
        (**self).fetch_linked_abstract(asset, paper_id)
    }
}

impl<P: ProviderClient + ?Sized> ProviderClient for Arc<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage> {
        (**self).list_assets_since(since, kind, cursor)
    }
    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc> {
        (**self).fetch_card(asset)
    }
    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        (**self).fetch_metrics(asset)
    }
    fn fetch_linked_abstract(
        &self,
        asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>> {
        (**self).fetch_linked_abstract(asset, paper_id)
    }
}

/// Wraps a client so that every call first takes a permit from one shared
/// token bucket, sleeping on the clock when the bucket is empty.
pub struct RateLimitedProvider<P> {
    inner: P,
    bucket: Mutex<TokenBucket>,
    clock: Arc<dyn Clock>,
    grants: Mutex<Vec<DateTime<Utc>>>,
    record_grants: bool,
}

impl<P: ProviderClient> RateLimitedProvider<P> {
    pub fn new(inner: P, budget: RateBudget, clock: Arc<dyn Clock>) -> Self {
        RateLimitedProvider {
            inner,
            bucket: Mutex::new(TokenBucket::new(budget)),
            clock,
            grants: Mutex::new(Vec::new()),
            record_grants: false,
        }
    }

    /// Keeps the time of every granted permit, for auditing in tests.
    pub fn recording_grants(mut self) -> Self {
        self.record_grants = true;
        self
    }

    pub fn grants(&self) -> Vec<DateTime<Utc>> {
        self.grants
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    fn note(&self, at: DateTime<Utc>) {
        if self.record_grants {
            self.grants
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .push(at);
        }
    }

    fn permit(&self) {
        loop {
            let now = self.clock.now();
            let outcome = self
                .bucket
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .acquire(now);
            match outcome {
                Ok(p) => return self.note(p.granted_at),
                Err(wait) => self.clock.sleep(wait),
            }
        }
    }

    /// Takes a permit only if one is available right now.
    pub fn try_permit(&self) -> ProviderResult<()> {
        let now = self.clock.now();
        let outcome = self
            .bucket
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .acquire(now);
        match outcome {
            Ok(p) => {
                self.note(p.granted_at);
                Ok(())
            }
            Err(wait) => Err(ProviderError::RateBudgetExhausted(wait)),
        }
    }

    /// Metrics fetch that fails fast instead of waiting for the budget.
    pub fn fetch_metrics_now(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        self.try_permit()?;
        self.inner.fetch_metrics(asset)
    }
}

impl<P: ProviderClient> ProviderClient for RateLimitedProvider<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage> {
        self.permit();
        self.inner.list_assets_since(since, kind, cursor)
    }

    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc> {
        self.permit();
        self.inner.fetch_card(asset)
    }

    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        self.permit();
        self.inner.fetch_metrics(asset)
    }

    fn fetch_linked_abstract(
        &self,
        asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>> {
        self.permit();
        self.inner.fetch_linked_abstract(asset, paper_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryAsset {
    pub asset: AssetRef,
    pub raw_metadata: Value,
    pub card_text: Option<String>,
    pub last_modified: DateTime<Utc>,
    pub metrics: RawMetrics,
}

#[derive(Debug, Default)]
struct MemoryState {
    assets: BTreeMap<AssetRef, MemoryAsset>,
    abstracts: BTreeMap<String, String>,
    unavailable: bool,
    missing: Vec<AssetRef>,
}

/// Mutable in-process registry for tests and examples.
#[derive(Debug)]
pub struct MemoryProvider {
    id: String,
    page_size: usize,
    state: Mutex<MemoryState>,
    calls: AtomicU64,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for dyn Clock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Clock({})", self.now())
    }
}

impl MemoryProvider {
    pub fn new(id: &str, clock: Arc<dyn Clock>) -> Self {
        MemoryProvider {
            id: id.to_string(),
            page_size: 10,
            state: Mutex::new(MemoryState::default()),
            calls: AtomicU64::new(0),
            clock,
        }
    }

    fn state(&self) -> std::sync::MutexGuard<'_, MemoryState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn insert(&self, asset: MemoryAsset) {
        self.state().assets.insert(asset.asset.clone(), asset);
    }

    pub fn insert_abstract(&self, paper_id: &str, text: &str) {
        self.state()
            .abstracts
            .insert(paper_id.to_string(), text.to_string());
    }

    pub fn set_metrics(&self, asset: &AssetRef, metrics: RawMetrics) {
        if let Some(a) = self.state().assets.get_mut(asset) {
            a.metrics = metrics;
        }
    }

    /// Makes the asset vanish upstream (fetches answer NotFound).
    pub fn remove(&self, asset: &AssetRef) {
        let mut s = self.state();
        s.assets.remove(asset);
        s.missing.push(asset.clone());
    }

    pub fn set_unavailable(&self, down: bool) {
        self.state().unavailable = down;
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn enter(&self) -> ProviderResult<std::sync::MutexGuard<'_, MemoryState>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let s = self.state();
        if s.unavailable {
            return Err(ProviderError::Unavailable(format!("{} is down", self.id)));
        }
        Ok(s)
    }
}

/// Offset-cursor pagination shared by the in-memory and fixture providers.
pub(crate) fn paginate(
    mut items: Vec<ListedAsset>,
    cursor: Option<&str>,
    page_size: usize,
) -> ProviderResult<ListPage> {
    items.sort_by(|a, b| {
        a.last_modified
            .cmp(&b.last_modified)
            .then_with(|| a.asset.cmp(&b.asset))
    });
    let offset: usize = match cursor {
        None => 0,
        Some(c) => c
            .parse()
            .map_err(|_| ProviderError::Malformed(format!("cursor `{c}`")))?,
    };
    let end = (offset + page_size).min(items.len());
    let next_cursor = (end < items.len()).then(|| end.to_string());
    Ok(ListPage {
        items: items
            .get(offset..end)
            .map(<[_]>::to_vec)
            .unwrap_or_default(),
        next_cursor,
    })
}

impl ProviderClient for MemoryProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage> {
        let s = self.enter()?;
        let items = s
            .assets
            .values()
            .filter(|a| a.asset.kind == kind && a.last_modified > since)
            .map(|a| ListedAsset {
                asset: a.asset.clone(),
                last_modified: a.last_modified,
            })
            .collect();
        paginate(items, cursor, self.page_size)
    }

    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc> {
        let s = self.enter()?;
        let a = s
            .assets
            .get(asset)
            .ok_or_else(|| ProviderError::NotFound(asset.asset_id().to_string()))?;
        Ok(RawAssetDoc {
            asset: a.asset.clone(),
            raw_metadata: a.raw_metadata.clone(),
            card_text: a.card_text.clone(),
            last_modified: a.last_modified,
            fetched_at: self.clock.now(),
        })
    }

    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        let s = self.enter()?;
        s.assets
            .get(asset)
            .map(|a| a.metrics)
            .ok_or_else(|| ProviderError::NotFound(asset.asset_id().to_string()))
    }

    fn fetch_linked_abstract(
        &self,
        _asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>> {
        let s = self.enter()?;
        Ok(s.abstracts.get(paper_id).cloned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::clock::VirtualClock;

    #[test]
    fn asset_ids_round_trip_through_refs() {
        let d = AssetRef::new("hf", AssetKind::Dataset, "bigcode/the-stack");
        assert_eq!(d.asset_id().as_str(), "hf:datasets/bigcode/the-stack");
        assert_eq!(
            AssetRef::from_asset_id(&d.asset_id(), AssetKind::Dataset),
            d
        );
        let m = AssetRef::new("hf", AssetKind::Model, "bigcode/starcoder");
        assert_eq!(AssetRef::from_asset_id(&m.asset_id(), AssetKind::Model), m);
    }

    #[test]
    fn pagination_walks_every_item_once() {
        let t0 = DateTime::<Utc>::UNIX_EPOCH;
        let items: Vec<_> = (0..23)
            .map(|i| ListedAsset {
                asset: AssetRef::new("p", AssetKind::Model, &format!("o/m{i:02}")),
                last_modified: t0 + chrono::Duration::seconds(23 - i),
            })
            .collect();
        let mut cursor = None;
        let mut seen = Vec::new();
        loop {
            let page = paginate(items.clone(), cursor.as_deref(), 10).unwrap();
            seen.extend(page.items);
            match page.next_cursor {
                Some(c) => cursor = Some(c),
                None => break,
            }
        }
        assert_eq!(seen.len(), 23);
        assert!(seen
            .windows(2)
            .all(|w| w[0].last_modified <= w[1].last_modified));
    }

    #[test]
    fn rate_limited_calls_never_exceed_the_bucket() {
        let clock = Arc::new(VirtualClock::at_epoch());
        let mem = MemoryProvider::new("p", clock.clone());
        let limited = RateLimitedProvider::new(mem, RateBudget::new(60, 5).unwrap(), clock.clone())
            .recording_grants();
        for _ in 0..8 {
            limited
                .list_assets_since(DateTime::<Utc>::UNIX_EPOCH, AssetKind::Model, None)
                .unwrap();
        }
        // five from the burst, then one per second
        assert_eq!(clock.now().timestamp(), 3);
        assert_eq!(limited.grants().len(), 8);
        assert!(matches!(
            limited.fetch_metrics_now(&AssetRef::new("p", AssetKind::Model, "x")),
            Err(ProviderError::RateBudgetExhausted(_))
        ));
    }
}
