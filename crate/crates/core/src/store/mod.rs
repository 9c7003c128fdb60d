//! Embedded relational store (SQLite) with ordered migrations and cached
//! catalogue snapshots.
//!
//! All access goes through one connection guarded by a mutex. Writers run
//! inside [`Store::write`] transactions; readers take an immutable
//! [`CatalogSnapshot`] that is rebuilt only after a committed catalogue write,
//! so a reader sees either none or all of an ingestion batch.

mod assets;
mod workspace;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, NaiveDateTime, Utc};
use rusqlite::{params, Connection, ErrorCode, OptionalExtension};
use thiserror::Error;

use crate::catalog::{AssetId, AssetKind, AssetRecord, RecordError, Taxonomy};
use crate::ingest::{JobRun, JobType};
use crate::leaderboard::{Leaderboard, MetricRegistry};

pub use assets::IngestMeta;

pub const DATABASE_ENV: &str = "ASSET_CATALOG_DATABASE";

const MIGRATIONS: &[(u32, &str, &str)] = &[
    (
        1,
        "catalog",
        include_str!("../../migrations/0001_catalog.sql"),
    ),
    (
        2,
        "workspace",
        include_str!("../../migrations/0002_workspace.sql"),
    ),
];

pub const SCHEMA_VERSION: u32 = MIGRATIONS[MIGRATIONS.len() - 1].0;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error(transparent)]
    InvalidRecord(#[from] RecordError),
    #[error("schema is at version {current}; cannot migrate to {requested}")]
    MigrationConflict { current: u32, requested: u32 },
    #[error("stored data is unreadable: {0}")]
    Corrupt(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        match &e {
            rusqlite::Error::SqliteFailure(f, msg) if f.code == ErrorCode::ConstraintViolation => {
                StoreError::ConstraintViolation(msg.clone().unwrap_or_else(|| e.to_string()))
            }
            _ => StoreError::Unavailable(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for StoreError {
    fn from(e: serde_json::Error) -> Self {
        StoreError::Corrupt(e.to_string())
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.9fZ";

/// Fixed-width UTC timestamp so that text order equals time order.
pub(crate) fn ts(t: DateTime<Utc>) -> String {
    t.format(TS_FORMAT).to_string()
}

pub(crate) fn parse_ts(s: &str) -> StoreResult<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, TS_FORMAT)
        .map(|t| t.and_utc())
        .map_err(|e| StoreError::Corrupt(format!("timestamp `{s}`: {e}")))
}

/// Immutable view of every catalogued asset, ordered by asset id.
#[derive(Debug)]
pub struct CatalogSnapshot {
    generation: u64,
    assets: Vec<AssetRecord>,
    index: BTreeMap<AssetId, usize>,
}

impl CatalogSnapshot {
    pub fn new(generation: u64, mut assets: Vec<AssetRecord>) -> Self {
        assets.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
        let index = assets
            .iter()
            .enumerate()
            .map(|(i, a)| (a.asset_id.clone(), i))
            .collect();
        CatalogSnapshot {
            generation,
            assets,
            index,
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn assets(&self) -> &[AssetRecord] {
        &self.assets
    }

    pub fn get(&self, id: &AssetId) -> Option<&AssetRecord> {
        self.index.get(id).map(|&i| &self.assets[i])
    }

    pub fn of_kind(&self, kind: AssetKind) -> impl Iterator<Item = &AssetRecord> {
        self.assets.iter().filter(move |a| a.kind() == kind)
    }

    pub fn leaderboard(&self, registry: &MetricRegistry) -> Leaderboard {
        Leaderboard::from_assets(&self.assets, registry.clone())
    }
}

pub struct Store {
    conn: Mutex<Connection>,
    generation: AtomicU64,
    cache: Mutex<Option<Arc<CatalogSnapshot>>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("generation", &self.generation.load(Ordering::SeqCst))
            .finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) and migrates to the latest schema.
    pub fn open(path: impl AsRef<Path>) -> StoreResult<Self> {
        let store = Store::open_unmigrated(path)?;
        store.migrate(SCHEMA_VERSION)?;
        Ok(store)
    }

    pub fn open_in_memory() -> StoreResult<Self> {
        let store = Store::from_connection(Connection::open_in_memory()?)?;
        store.migrate(SCHEMA_VERSION)?;
        Ok(store)
    }

    /// Path taken from `ASSET_CATALOG_DATABASE`, default `asset-catalog.db`.
    pub fn open_from_env() -> StoreResult<Self> {
        let path = std::env::var(DATABASE_ENV).unwrap_or_else(|_| "asset-catalog.db".into());
        if path == ":memory:" {
            Store::open_in_memory()
        } else {
            Store::open(path)
        }
    }

    pub fn open_unmigrated(path: impl AsRef<Path>) -> StoreResult<Self> {
        Store::from_connection(Connection::open(path)?)
    }

    fn from_connection(conn: Connection) -> StoreResult<Self> {
        conn.execute_batch(
            "PRAGMA foreign_keys = ON;
             PRAGMA busy_timeout = 5000;
             CREATE TABLE IF NOT EXISTS schema_migrations (
                 version    INTEGER PRIMARY KEY,
                 name       TEXT NOT NULL,
                 applied_at TEXT NOT NULL
             );",
        )?;
        Ok(Store {
            conn: Mutex::new(conn),
            generation: AtomicU64::new(1),
            cache: Mutex::new(None),
        })
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn schema_version(&self) -> StoreResult<u32> {
        Ok(self.lock().query_row(
            "SELECT COALESCE(MAX(version), 0) FROM schema_migrations",
            [],
            |r| r.get(0),
        )?)
    }

    /// Applies pending migrations up to `target` in order. Re-running is a
    /// no-op; asking for an older version than the applied one is refused.
    pub fn migrate(&self, target: u32) -> StoreResult<u32> {
        let current = self.schema_version()?;
        if target < current || target > SCHEMA_VERSION {
            return Err(StoreError::MigrationConflict {
                current,
                requested: target,
            });
        }
        let mut conn = self.lock();
        for (version, name, sql) in MIGRATIONS
            .iter()
            .filter(|(v, _, _)| *v > current && *v <= target)
        {
            let tx = conn.transaction()?;
            tx.execute_batch(sql)?;
            tx.execute(
                "INSERT INTO schema_migrations (version, name, applied_at) VALUES (?1, ?2, ?3)",
                params![version, name, ts(Utc::now())],
            )?;
            tx.commit()?;
        }
        self.generation.fetch_add(1, Ordering::SeqCst);
        Ok(target)
    }

    /// Runs `f` in one transaction. Nothing is visible to snapshot readers
    /// until it commits; an error rolls everything back.
    pub fn write<T>(&self, f: impl FnOnce(&mut WriteTx<'_>) -> StoreResult<T>) -> StoreResult<T> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let mut w = WriteTx {
            tx,
            now: ts(Utc::now()),
            catalog_dirty: false,
        };
        let out = f(&mut w)?;
        let dirty = w.catalog_dirty;
        w.tx.commit()?;
        if dirty {
            self.generation.fetch_add(1, Ordering::SeqCst);
        }
        Ok(out)
    }

    pub(crate) fn read<T>(&self, f: impl FnOnce(&Connection) -> StoreResult<T>) -> StoreResult<T> {
        f(&self.lock())
    }

    pub fn snapshot(&self) -> StoreResult<Arc<CatalogSnapshot>> {
        let conn = self.lock();
        let generation = self.generation.load(Ordering::SeqCst);
        let mut cache = self.cache.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(s) = cache.as_ref().filter(|s| s.generation == generation) {
            return Ok(s.clone());
        }
        let snap = Arc::new(CatalogSnapshot::new(generation, assets::load_all(&conn)?));
        *cache = Some(snap.clone());
        Ok(snap)
    }

    pub fn upsert_asset(&self, record: &AssetRecord) -> StoreResult<AssetId> {
        self.write(|tx| tx.upsert_asset(record, None))
    }

    pub fn sync_taxonomy(&self, taxonomy: &Taxonomy) -> StoreResult<()> {
        self.write(|tx| tx.sync_taxonomy(taxonomy))
    }

    pub fn content_hash(&self, id: &AssetId) -> StoreResult<Option<String>> {
        self.read(|c| {
            Ok(c.query_row(
                "SELECT content_hash FROM assets WHERE asset_id = ?1",
                [id.as_str()],
                |r| r.get::<_, Option<String>>(0),
            )
            .optional()?
            .flatten())
        })
    }

    pub fn raw_metadata(&self, id: &AssetId) -> StoreResult<Option<String>> {
        self.read(|c| {
            Ok(c.query_row(
                "SELECT raw_metadata FROM assets WHERE asset_id = ?1",
                [id.as_str()],
                |r| r.get::<_, Option<String>>(0),
            )
            .optional()?
            .flatten())
        })
    }

    pub fn refresh_failures(&self, id: &AssetId) -> StoreResult<u32> {
        self.read(|c| {
            Ok(c.query_row(
                "SELECT refresh_failures FROM assets WHERE asset_id = ?1",
                [id.as_str()],
                |r| r.get(0),
            )
            .optional()?
            .unwrap_or(0))
        })
    }

    /// Resume point for incremental listing; the epoch before the first run.
    pub fn watermark(&self, provider_id: &str, kind: AssetKind) -> StoreResult<DateTime<Utc>> {
        self.read(|c| {
            let raw: Option<String> = c
                .query_row(
                    "SELECT watermark FROM provider_watermarks WHERE provider_id = ?1 AND kind = ?2",
                    params![provider_id, kind.as_str()],
                    |r| r.get(0),
                )
                .optional()?;
            raw.map(|s| parse_ts(&s))
                .unwrap_or(Ok(DateTime::<Utc>::UNIX_EPOCH))
        })
    }

    pub fn job_runs(&self) -> StoreResult<Vec<JobRun>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT job_id, job_type, started_at, finished_at, assets_seen, assets_catalogued,
                        assets_skipped, assets_unchanged, skipped, errors
                 FROM job_runs ORDER BY job_id",
            )?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, u64>(4)?,
                    r.get::<_, u64>(5)?,
                    r.get::<_, u64>(6)?,
                    r.get::<_, u64>(7)?,
                    r.get::<_, String>(8)?,
                    r.get::<_, String>(9)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (id, ty, start, end, seen, cat, skip, same, skipped, errors) = row?;
                out.push(JobRun {
                    job_id: Some(id),
                    job_type: ty.parse::<JobType>().map_err(StoreError::Corrupt)?,
                    started_at: parse_ts(&start)?,
                    finished_at: parse_ts(&end)?,
                    assets_seen: seen,
                    assets_catalogued: cat,
                    assets_skipped: skip,
                    assets_unchanged: same,
                    skipped: serde_json::from_str(&skipped)?,
                    errors: serde_json::from_str(&errors)?,
                });
            }
            Ok(out)
        })
    }

    /// Row count of every application table.
    pub fn table_counts(&self) -> StoreResult<BTreeMap<String, u64>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT name FROM sqlite_master WHERE type = 'table'
                 AND name NOT LIKE 'sqlite_%' ORDER BY name",
            )?;
            let names: Vec<String> = stmt
                .query_map([], |r| r.get(0))?
                .collect::<Result<_, _>>()?;
            let mut out = BTreeMap::new();
            for n in names {
                let count: u64 =
                    c.query_row(&format!("SELECT COUNT(*) FROM \"{n}\""), [], |r| r.get(0))?;
                out.insert(n, count);
            }
            Ok(out)
        })
    }

    /// Rows whose foreign keys point nowhere, as `table -> parent` pairs.
    pub fn foreign_key_violations(&self) -> StoreResult<Vec<(String, String)>> {
        self.read(|c| {
            let mut stmt = c.prepare("PRAGMA foreign_key_check")?;
            let rows =
                stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(2)?)))?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }
}

/// A write transaction. Catalogue-changing operations mark the snapshot
/// cache stale on commit.
pub struct WriteTx<'a> {
    tx: rusqlite::Transaction<'a>,
    now: String,
    catalog_dirty: bool,
}

impl WriteTx<'_> {
    pub(crate) fn conn(&self) -> &Connection {
        &self.tx
    }

    pub fn sync_taxonomy(&mut self, taxonomy: &Taxonomy) -> StoreResult<()> {
        for e in taxonomy.entries() {
            self.tx.execute(
                "INSERT INTO taxonomy_entries
                     (task_id, task_name, sdlc_stage, lexicon, ambiguity_terms, row_created_at, row_updated_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?6)
                 ON CONFLICT (task_id) DO UPDATE SET
                     task_name = excluded.task_name, sdlc_stage = excluded.sdlc_stage,
                     lexicon = excluded.lexicon, ambiguity_terms = excluded.ambiguity_terms,
                     row_updated_at = excluded.row_updated_at",
                params![
                    e.task_id,
                    e.task_name,
                    e.sdlc_stage.as_str(),
                    serde_json::to_string(&e.lexicon)?,
                    serde_json::to_string(&e.ambiguity_terms)?,
                    self.now,
                ],
            )?;
        }
        Ok(())
    }

    pub fn set_watermark(
        &mut self,
        provider_id: &str,
        kind: AssetKind,
        at: DateTime<Utc>,
    ) -> StoreResult<()> {
        self.tx.execute(
            "INSERT INTO provider_watermarks (provider_id, kind, watermark, row_created_at, row_updated_at)
             VALUES (?1, ?2, ?3, ?4, ?4)
             ON CONFLICT (provider_id, kind) DO UPDATE SET
                 watermark = excluded.watermark, row_updated_at = excluded.row_updated_at",
            params![provider_id, kind.as_str(), ts(at), self.now],
        )?;
        Ok(())
    }

    pub fn record_job_run(&mut self, run: &JobRun) -> StoreResult<i64> {
        self.tx.execute(
            "INSERT INTO job_runs (job_type, started_at, finished_at, assets_seen, assets_catalogued,
                 assets_skipped, assets_unchanged, skipped, errors, row_created_at, row_updated_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?10)",
            params![
                run.job_type.as_str(),
                ts(run.started_at),
                ts(run.finished_at),
                run.assets_seen,
                run.assets_catalogued,
                run.assets_skipped,
                run.assets_unchanged,
                serde_json::to_string(&run.skipped)?,
                serde_json::to_string(&run.errors)?,
                self.now,
            ],
        )?;
        Ok(self.tx.last_insert_rowid())
    }
}
