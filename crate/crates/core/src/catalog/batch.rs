//! Batch-level cataloguing: classification with outlier rejection against
//! the existing catalogue, and near-duplicate linking.

use std::collections::BTreeMap;

use super::classify::{classify_detailed, TaskMatch};
use super::dedup::{deduplicate, DedupInput};
use super::outliers::{detect_lexical_outliers, OutlierConfig, OutlierDecision, TaskCandidate};
use super::taxonomy::Taxonomy;
use super::text::{CorpusStats, DocumentVector};
use super::{AssetId, AssetRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchVerdict {
    Catalogued,
    MissingDocumentation,
    NotSeRelevant,
}

/// Classifies every record of `batch` in place. Records in `reference`
/// (already catalogued) contribute their accepted assignments as task
/// members, so an ambiguous newcomer is judged against the whole catalogue.
/// Idf statistics are computed over reference and batch together.
pub fn classify_batch(
    batch: &mut [AssetRecord],
    reference: &[AssetRecord],
    taxonomy: &Taxonomy,
    config: OutlierConfig,
) -> Vec<BatchVerdict> {
    let docs: Vec<String> = reference
        .iter()
        .chain(batch.iter())
        .map(AssetRecord::documentation_text)
        .collect();
    let corpus = CorpusStats::from_documents(docs.iter().map(String::as_str));
    let vectors: Vec<DocumentVector> = docs.iter().map(|d| corpus.vectorize(d)).collect();

    let mut reference_matches: Vec<Vec<TaskMatch>> = Vec::with_capacity(reference.len());
    for r in reference {
        let accepted: Vec<TaskMatch> = classify_detailed(r, taxonomy)
            .unwrap_or_default()
            .into_iter()
            .filter(|m| r.se_tasks.iter().any(|a| a.task_id == m.assignment.task_id))
            .collect();
        reference_matches.push(accepted);
    }
    let batch_matches: Vec<Option<Vec<TaskMatch>>> = batch
        .iter()
        .map(|r| classify_detailed(r, taxonomy).ok())
        .collect();

    // (batch index, match index) for every batch candidate, in candidate order.
    let mut owners: Vec<Option<(usize, usize)>> = Vec::new();
    let mut candidates: Vec<TaskCandidate<'_>> = Vec::new();
    for (i, (r, ms)) in reference.iter().zip(&reference_matches).enumerate() {
        for m in ms {
            candidates.push(TaskCandidate {
                asset_id: &r.asset_id,
                task_id: &m.assignment.task_id,
                vector: &vectors[i],
                ambiguous_only: m.ambiguous_only,
            });
            owners.push(None);
        }
    }
    for (b, (r, ms)) in batch.iter().zip(&batch_matches).enumerate() {
        for (k, m) in ms.iter().flatten().enumerate() {
            candidates.push(TaskCandidate {
                asset_id: &r.asset_id,
                task_id: &m.assignment.task_id,
                vector: &vectors[reference.len() + b],
                ambiguous_only: m.ambiguous_only,
            });
            owners.push(Some((b, k)));
        }
    }
    let partition = detect_lexical_outliers(&candidates, config);

    let mut kept: Vec<Vec<(usize, OutlierDecision)>> = vec![Vec::new(); batch.len()];
    for (owner, decision) in owners.iter().zip(&partition.decisions) {
        if let Some((b, k)) = owner {
            if decision.is_kept() {
                kept[*b].push((*k, *decision));
            }
        }
    }

    let mut verdicts = Vec::with_capacity(batch.len());
    for (b, record) in batch.iter_mut().enumerate() {
        let Some(ms) = &batch_matches[b] else {
            record.se_tasks.clear();
            verdicts.push(BatchVerdict::MissingDocumentation);
            continue;
        };
        record.se_tasks = kept[b]
            .iter()
            .map(|(k, d)| {
                let mut a = ms[*k].assignment.clone();
                a.low_confidence = *d == OutlierDecision::KeptLowConfidence;
                a
            })
            .collect();
        verdicts.push(if record.se_tasks.is_empty() {
            BatchVerdict::NotSeRelevant
        } else {
            BatchVerdict::Catalogued
        });
    }
    verdicts
}

/// The `duplicate_of` value every record should carry after grouping the
/// whole set at `threshold`: the group's canonical id, or `None` for
/// canonical members and singletons.
pub fn duplicate_links(
    records: &[&AssetRecord],
    threshold: f64,
) -> BTreeMap<AssetId, Option<AssetId>> {
    let docs: Vec<String> = records.iter().map(|r| r.documentation_text()).collect();
    let corpus = CorpusStats::from_documents(docs.iter().map(String::as_str));
    let vectors: Vec<DocumentVector> = docs.iter().map(|d| corpus.vectorize(d)).collect();
    let inputs: Vec<DedupInput<'_>> = records
        .iter()
        .zip(&vectors)
        .map(|(r, v)| DedupInput {
            asset_id: &r.asset_id,
            created_at: r.created_at,
            vector: v,
        })
        .collect();
    let mut out = BTreeMap::new();
    for g in deduplicate(&inputs, threshold) {
        for m in &g.members {
            let link = (*m != g.canonical).then(|| g.canonical.clone());
            out.insert(m.clone(), link);
        }
    }
    out
}
