//! File-backed registry used in fixture mode.
//!
//! Layout under the root directory:
//!
//! ```text
//! models/<org>--<name>/metadata.json   hub-style metadata document
//! models/<org>--<name>/README.md       model card (optional)
//! datasets/<org>--<name>/...           same, for datasets
//! abstracts/<paper id>.txt             linked paper abstracts
//! ```
//!
//! The directory is re-read on every call, so tests can edit a snapshot
//! between runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::clock::Clock;
use super::extract::metrics_of;
use super::provider::{
    paginate, AssetRef, ListPage, ListedAsset, ProviderClient, ProviderError, ProviderResult,
    RawAssetDoc, RawMetrics,
};
use crate::catalog::AssetKind;

const PAGE_SIZE: usize = 10;

pub struct FixtureProvider {
    id: String,
    root: PathBuf,
    clock: Arc<dyn Clock>,
}

fn kind_dir(kind: AssetKind) -> &'static str {
    match kind {
        AssetKind::Model => "models",
        AssetKind::Dataset => "datasets",
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ProviderError {
    ProviderError::Unavailable(format!("{}: {e}", path.display()))
}

impl FixtureProvider {
    pub fn new(id: &str, root: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Self {
        FixtureProvider {
            id: id.to_string(),
            root: root.into(),
            clock,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn asset_dir(&self, asset: &AssetRef) -> PathBuf {
        self.root
            .join(kind_dir(asset.kind))
            .join(asset.name.replace('/', "--"))
    }

    fn metadata(&self, asset: &AssetRef) -> ProviderResult<Value> {
        let path = self.asset_dir(asset).join("metadata.json");
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ProviderError::NotFound(asset.asset_id().to_string()),
            _ => io_err(&path, e),
        })?;
        serde_json::from_str(&text)
            .map_err(|e| ProviderError::Malformed(format!("{}: {e}", path.display())))
    }

    fn last_modified(meta: &Value) -> Option<DateTime<Utc>> {
        ["lastModified", "createdAt"].iter().find_map(|k| {
            meta.get(*k)
                .and_then(Value::as_str)
                .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
                .map(|t| t.with_timezone(&Utc))
        })
    }

    fn listed(&self, kind: AssetKind) -> ProviderResult<Vec<ListedAsset>> {
        let dir = self.root.join(kind_dir(kind));
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let entry = entry.map_err(|e| io_err(&dir, e))?;
            if !entry.path().is_dir() {
                continue;
            }
            let dir_name = entry.file_name().to_string_lossy().into_owned();
            let asset = AssetRef::new(&self.id, kind, &dir_name.replacen("--", "/", 1));
            let meta = self.metadata(&asset)?;
            let last_modified = Self::last_modified(&meta).ok_or_else(|| {
                ProviderError::Malformed(format!("{dir_name}: no lastModified or createdAt"))
            })?;
            out.push(ListedAsset {
                asset,
                last_modified,
            });
        }
        Ok(out)
    }
}

impl ProviderClient for FixtureProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage> {
        let items = self
            .listed(kind)?
            .into_iter()
            .filter(|a| a.last_modified > since)
            .collect();
        paginate(items, cursor, PAGE_SIZE)
    }

    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc> {
        let raw_metadata = self.metadata(asset)?;
        let last_modified = Self::last_modified(&raw_metadata)
            .ok_or_else(|| ProviderError::Malformed(format!("{}: no timestamps", asset.name)))?;
        let card_path = self.asset_dir(asset).join("README.md");
        let card_text = match fs::read_to_string(&card_path) {
            Ok(t) => Some(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(io_err(&card_path, e)),
        };
        Ok(RawAssetDoc {
            asset: asset.clone(),
            raw_metadata,
            card_text,
            last_modified,
            fetched_at: self.clock.now(),
        })
    }

    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        Ok(metrics_of(&self.metadata(asset)?))
    }

    fn fetch_linked_abstract(
        &self,
        _asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>> {
        if paper_id.contains(['/', '\\']) || paper_id.starts_with('.') {
            return Ok(None);
        }
        let path = self.root.join("abstracts").join(format!("{paper_id}.txt"));
        match fs::read_to_string(&path) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::clock::VirtualClock;

    fn write(root: &Path, rel: &str, body: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, body).unwrap();
    }

    #[test]
    fn reads_layout() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "models/org--a/metadata.json",
            r#"{"lastModified":"2025-01-01T00:00:00Z","likes":4}"#,
        );
        write(dir.path(), "models/org--a/README.md", "A code model.");
        write(
            dir.path(),
            "models/org--b/metadata.json",
            r#"{"createdAt":"2024-01-01T00:00:00Z"}"#,
        );
        write(dir.path(), "abstracts/2101.00001.txt", "We study code.");
        let p = FixtureProvider::new("hf", dir.path(), Arc::new(VirtualClock::at_epoch()));

        let page = p
            .list_assets_since(DateTime::<Utc>::UNIX_EPOCH, AssetKind::Model, None)
            .unwrap();
        let names: Vec<_> = page.items.iter().map(|i| i.asset.name.as_str()).collect();
        assert_eq!(names, ["org/b", "org/a"]);
        let later = "2024-06-01T00:00:00Z".parse().unwrap();
        assert_eq!(
            p.list_assets_since(later, AssetKind::Model, None)
                .unwrap()
                .items
                .len(),
            1
        );
        assert!(p
            .list_assets_since(later, AssetKind::Dataset, None)
            .unwrap()
            .items
            .is_empty());

        let a = AssetRef::new("hf", AssetKind::Model, "org/a");
        assert_eq!(
            p.fetch_card(&a).unwrap().card_text.as_deref(),
            Some("A code model.")
        );
        assert_eq!(p.fetch_metrics(&a).unwrap().likes, 4);
        let b = AssetRef::new("hf", AssetKind::Model, "org/b");
        assert_eq!(p.fetch_card(&b).unwrap().card_text, None);
        assert_eq!(
            p.fetch_linked_abstract(&a, "2101.00001")
                .unwrap()
                .as_deref(),
            Some("We study code.")
        );
        assert_eq!(p.fetch_linked_abstract(&a, "../x").unwrap(), None);
        let gone = AssetRef::new("hf", AssetKind::Model, "org/zz");
        assert!(matches!(
            p.fetch_card(&gone),
            Err(ProviderError::NotFound(_))
        ));
    }
}
