use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use rusqlite::{params, Connection, OptionalExtension};

use super::{parse_ts, ts, StoreError, StoreResult, WriteTx};
use crate::catalog::{
    ActivityMetrics, AssetExtension, AssetId, AssetRecord, DatasetExtension, ModelExtension,
    PopularityMetrics, SeTaskAssignment, SizeBucket,
};
use crate::leaderboard::EvalRecord;

/// Provenance kept next to an ingested asset so it can be reprocessed and
/// recognised when it comes back unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestMeta {
    pub raw_metadata: String,
    pub content_hash: String,
}

fn compress(text: &str) -> StoreResult<Vec<u8>> {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
    enc.write_all(text.as_bytes())
        .and_then(|_| enc.finish())
        .map_err(|e| StoreError::Corrupt(e.to_string()))
}

fn decompress(blob: &[u8]) -> StoreResult<String> {
    let mut out = String::new();
    DeflateDecoder::new(blob)
        .read_to_string(&mut out)
        .map_err(|e| StoreError::Corrupt(e.to_string()))?;
    Ok(out)
}

fn json_set(set: &BTreeSet<String>) -> StoreResult<String> {
    Ok(serde_json::to_string(set)?)
}

fn parse_set(raw: &str) -> StoreResult<BTreeSet<String>> {
    Ok(serde_json::from_str(raw)?)
}

impl WriteTx<'_> {
    /// Inserts or replaces the asset keyed by id. Extension, assignments and
    /// evaluations are replaced together with the asset row.
    pub fn upsert_asset(
        &mut self,
        r: &AssetRecord,
        meta: Option<&IngestMeta>,
    ) -> StoreResult<AssetId> {
        r.validate(None)?;
        self.catalog_dirty = true;
        let id = r.asset_id.as_str();
        let abstract_blob = r.abstract_text.as_deref().map(compress).transpose()?;
        self.tx.execute(
            "INSERT INTO assets (asset_id, kind, name, provider, repo_url, created_at, last_refreshed_at,
                 licenses, libraries, natural_languages, ml_tasks, downloads, likes, commits, contributors,
                 card_text, abstract_text, raw_metadata, content_hash, duplicate_of, stale,
                 row_created_at, row_updated_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14, ?15, ?16, ?17, ?18, ?19,
                 ?20, ?21, ?22, ?22)
             ON CONFLICT (asset_id) DO UPDATE SET
                 kind = excluded.kind, name = excluded.name, provider = excluded.provider,
                 repo_url = excluded.repo_url, created_at = excluded.created_at,
                 last_refreshed_at = excluded.last_refreshed_at, licenses = excluded.licenses,
                 libraries = excluded.libraries, natural_languages = excluded.natural_languages,
                 ml_tasks = excluded.ml_tasks, downloads = excluded.downloads, likes = excluded.likes,
                 commits = excluded.commits, contributors = excluded.contributors,
                 card_text = excluded.card_text, abstract_text = excluded.abstract_text,
                 raw_metadata = COALESCE(excluded.raw_metadata, assets.raw_metadata),
                 content_hash = COALESCE(excluded.content_hash, assets.content_hash),
                 duplicate_of = excluded.duplicate_of, stale = excluded.stale,
                 row_updated_at = excluded.row_updated_at",
            params![
                id,
                r.kind().as_str(),
                r.name,
                r.provider,
                r.repo_url,
                ts(r.created_at),
                ts(r.last_refreshed_at),
                json_set(&r.licenses)?,
                json_set(&r.libraries)?,
                json_set(&r.natural_languages)?,
                json_set(&r.ml_tasks)?,
                r.popularity.downloads,
                r.popularity.likes,
                r.activity.commits,
                r.activity.contributors,
                compress(&r.card_text)?,
                abstract_blob,
                meta.map(|m| m.raw_metadata.as_str()),
                meta.map(|m| m.content_hash.as_str()),
                r.duplicate_of.as_ref().map(AssetId::as_str),
                r.stale,
                self.now,
            ],
        )?;

        match &r.extension {
            AssetExtension::Model(m) => {
                self.tx
                    .execute("DELETE FROM dataset_extensions WHERE asset_id = ?1", [id])?;
                self.tx.execute(
                    "INSERT INTO model_extensions (asset_id, size_bytes, region, training_datasets,
                         inference_providers, parameter_count, row_created_at, row_updated_at)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?7)
                     ON CONFLICT (asset_id) DO UPDATE SET
                         size_bytes = excluded.size_bytes, region = excluded.region,
                         training_datasets = excluded.training_datasets,
                         inference_providers = excluded.inference_providers,
                         parameter_count = excluded.parameter_count,
                         row_updated_at = excluded.row_updated_at",
                    params![
                        id,
                        m.size_bytes,
                        m.region,
                        json_set(&m.training_datasets)?,
                        json_set(&m.inference_providers)?,
                        m.parameter_count,
                        self.now,
                    ],
                )?;
            }
            AssetExtension::Dataset(d) => {
                self.tx
                    .execute("DELETE FROM model_extensions WHERE asset_id = ?1", [id])?;
                self.tx.execute(
                    "INSERT INTO dataset_extensions (asset_id, size_rows_bucket, formats, modalities,
                         disciplines, row_created_at, row_updated_at)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?6)
                     ON CONFLICT (asset_id) DO UPDATE SET
                         size_rows_bucket = excluded.size_rows_bucket, formats = excluded.formats,
                         modalities = excluded.modalities, disciplines = excluded.disciplines,
                         row_updated_at = excluded.row_updated_at",
                    params![
                        id,
                        d.size_rows_bucket.map(SizeBucket::label),
                        json_set(&d.formats)?,
                        json_set(&d.modalities)?,
                        json_set(&d.disciplines)?,
                        self.now,
                    ],
                )?;
            }
        }

        self.tx
            .execute("DELETE FROM se_task_assignments WHERE asset_id = ?1", [id])?;
        for (pos, a) in r.se_tasks.iter().enumerate() {
            self.tx.execute(
                "INSERT INTO se_task_assignments (asset_id, task_id, position, confidence, rationale,
                     low_confidence, row_created_at, row_updated_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?7)",
                params![id, a.task_id, pos as i64, a.confidence, a.rationale, a.low_confidence, self.now],
            )?;
        }

        self.tx
            .execute("DELETE FROM eval_records WHERE asset_id = ?1", [id])?;
        for (pos, e) in r.eval_records().iter().enumerate() {
            if e.asset_id != r.asset_id {
                return Err(StoreError::ConstraintViolation(format!(
                    "evaluation of {} attached to {}",
                    e.asset_id, r.asset_id
                )));
            }
            self.tx.execute(
                "INSERT INTO eval_records (asset_id, benchmark, implementation, language, metric_name,
                     metric_config, position, score, reported_at, percent_scaled, unrecognized_metric,
                     row_created_at, row_updated_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?12)",
                params![
                    id,
                    e.benchmark,
                    e.implementation.as_deref().unwrap_or(""),
                    e.language.as_deref().unwrap_or(""),
                    e.metric_name,
                    e.metric_config.as_deref().unwrap_or(""),
                    pos as i64,
                    e.score,
                    ts(e.reported_at),
                    e.percent_scaled,
                    e.unrecognized_metric,
                    self.now,
                ],
            )?;
        }
        Ok(r.asset_id.clone())
    }

    pub fn set_duplicate_of(
        &mut self,
        id: &AssetId,
        canonical: Option<&AssetId>,
    ) -> StoreResult<()> {
        self.catalog_dirty = true;
        self.tx.execute(
            "UPDATE assets SET duplicate_of = ?2, row_updated_at = ?3 WHERE asset_id = ?1",
            params![id.as_str(), canonical.map(AssetId::as_str), self.now],
        )?;
        Ok(())
    }

    /// Writes the dynamic fields only. A successful refresh clears the
    /// failure count and the stale flag. Returns false for unknown ids.
    pub fn update_metrics(
        &mut self,
        id: &AssetId,
        popularity: PopularityMetrics,
        activity: ActivityMetrics,
        refreshed_at: DateTime<Utc>,
    ) -> StoreResult<bool> {
        self.catalog_dirty = true;
        let n = self.tx.execute(
            "UPDATE assets SET downloads = ?2, likes = ?3, commits = ?4, contributors = ?5,
                 last_refreshed_at = ?6, refresh_failures = 0, stale = 0, row_updated_at = ?7
             WHERE asset_id = ?1",
            params![
                id.as_str(),
                popularity.downloads,
                popularity.likes,
                activity.commits,
                activity.contributors,
                ts(refreshed_at),
                self.now,
            ],
        )?;
        Ok(n == 1)
    }

    /// Counts a failed refresh; the asset turns stale at `stale_after`
    /// consecutive failures. Returns the new failure count.
    pub fn record_refresh_failure(&mut self, id: &AssetId, stale_after: u32) -> StoreResult<u32> {
        self.catalog_dirty = true;
        self.tx.execute(
            "UPDATE assets SET refresh_failures = refresh_failures + 1,
                 stale = CASE WHEN refresh_failures + 1 >= ?2 THEN 1 ELSE stale END,
                 row_updated_at = ?3
             WHERE asset_id = ?1",
            params![id.as_str(), stale_after, self.now],
        )?;
        Ok(self
            .tx
            .query_row(
                "SELECT refresh_failures FROM assets WHERE asset_id = ?1",
                [id.as_str()],
                |r| r.get(0),
            )
            .optional()?
            .unwrap_or(0))
    }
}

pub(super) fn load_all(c: &Connection) -> StoreResult<Vec<AssetRecord>> {
    let mut models: BTreeMap<String, ModelExtension> = BTreeMap::new();
    {
        let mut stmt = c.prepare(
            "SELECT asset_id, size_bytes, region, training_datasets, inference_providers, parameter_count
             FROM model_extensions",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, u64>(1)?,
                r.get::<_, Option<String>>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, Option<u64>>(5)?,
            ))
        })?;
        for row in rows {
            let (id, size_bytes, region, td, ip, params) = row?;
            models.insert(
                id,
                ModelExtension {
                    size_bytes,
                    region,
                    training_datasets: parse_set(&td)?,
                    inference_providers: parse_set(&ip)?,
                    eval_records: Vec::new(),
                    parameter_count: params,
                },
            );
        }
    }

    let mut datasets: BTreeMap<String, DatasetExtension> = BTreeMap::new();
    {
        let mut stmt = c.prepare(
            "SELECT asset_id, size_rows_bucket, formats, modalities, disciplines FROM dataset_extensions",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, Option<String>>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
            ))
        })?;
        for row in rows {
            let (id, bucket, formats, modalities, disciplines) = row?;
            let size_rows_bucket = match bucket {
                None => None,
                Some(b) => Some(
                    SizeBucket::parse(&b)
                        .ok_or_else(|| StoreError::Corrupt(format!("size bucket `{b}`")))?,
                ),
            };
            datasets.insert(
                id,
                DatasetExtension {
                    size_rows_bucket,
                    formats: parse_set(&formats)?,
                    modalities: parse_set(&modalities)?,
                    disciplines: parse_set(&disciplines)?,
                },
            );
        }
    }

    let mut assignments: BTreeMap<String, Vec<SeTaskAssignment>> = BTreeMap::new();
    {
        let mut stmt = c.prepare(
            "SELECT asset_id, task_id, confidence, rationale, low_confidence
             FROM se_task_assignments ORDER BY asset_id, position",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                SeTaskAssignment {
                    task_id: r.get(1)?,
                    confidence: r.get(2)?,
                    rationale: r.get(3)?,
                    low_confidence: r.get(4)?,
                },
            ))
        })?;
        for row in rows {
            let (id, a) = row?;
            assignments.entry(id).or_default().push(a);
        }
    }

    {
        let mut stmt = c.prepare(
            "SELECT asset_id, benchmark, implementation, language, metric_name, metric_config, score,
                    reported_at, percent_scaled, unrecognized_metric
             FROM eval_records ORDER BY asset_id, position",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, String>(5)?,
                r.get::<_, f64>(6)?,
                r.get::<_, String>(7)?,
                r.get::<_, bool>(8)?,
                r.get::<_, bool>(9)?,
            ))
        })?;
        let blank = |s: String| Some(s).filter(|s| !s.is_empty());
        for row in rows {
            let (id, benchmark, imp, lang, metric, config, score, at, pct, unrec) = row?;
            let record = EvalRecord {
                asset_id: AssetId::from(id.as_str()),
                benchmark,
                implementation: blank(imp),
                language: blank(lang),
                metric_name: metric,
                metric_config: blank(config),
                score,
                reported_at: parse_ts(&at)?,
                percent_scaled: pct,
                unrecognized_metric: unrec,
            };
            if let Some(m) = models.get_mut(&id) {
                m.eval_records.push(record);
            }
        }
    }

    let mut stmt = c.prepare(
        "SELECT asset_id, kind, name, provider, repo_url, created_at, last_refreshed_at, licenses,
                libraries, natural_languages, ml_tasks, downloads, likes, commits, contributors,
                card_text, abstract_text, duplicate_of, stale
         FROM assets ORDER BY asset_id",
    )?;
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(r) = rows.next()? {
        let id: String = r.get(0)?;
        let kind: String = r.get(1)?;
        let extension = match kind.as_str() {
            "model" => AssetExtension::Model(models.remove(&id).unwrap_or_default()),
            "dataset" => AssetExtension::Dataset(datasets.remove(&id).unwrap_or_default()),
            other => return Err(StoreError::Corrupt(format!("asset kind `{other}`"))),
        };
        let abstract_blob: Option<Vec<u8>> = r.get(16)?;
        out.push(AssetRecord {
            asset_id: AssetId::from(id.as_str()),
            name: r.get(2)?,
            provider: r.get(3)?,
            repo_url: r.get(4)?,
            created_at: parse_ts(&r.get::<_, String>(5)?)?,
            last_refreshed_at: parse_ts(&r.get::<_, String>(6)?)?,
            licenses: parse_set(&r.get::<_, String>(7)?)?,
            libraries: parse_set(&r.get::<_, String>(8)?)?,
            natural_languages: parse_set(&r.get::<_, String>(9)?)?,
            ml_tasks: parse_set(&r.get::<_, String>(10)?)?,
            se_tasks: assignments.remove(&id).unwrap_or_default(),
            popularity: PopularityMetrics {
                downloads: r.get(11)?,
                likes: r.get(12)?,
            },
            activity: ActivityMetrics {
                commits: r.get(13)?,
                contributors: r.get(14)?,
            },
            card_text: decompress(&r.get::<_, Vec<u8>>(15)?)?,
            abstract_text: abstract_blob.as_deref().map(decompress).transpose()?,
            extension,
            duplicate_of: r
                .get::<_, Option<String>>(17)?
                .map(|s| AssetId::from(s.as_str())),
            stale: r.get(18)?,
        });
    }
    Ok(out)
}
