use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::text::{cosine_similarity, DocumentVector};
use super::AssetId;

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct DedupInput<'a> {
    pub asset_id: &'a AssetId,
    pub created_at: DateTime<Utc>,
    pub vector: &'a DocumentVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    /// Earliest-created member; ties go to the smallest id.
    pub canonical: AssetId,
    pub members: BTreeSet<AssetId>,
}

impl DuplicateGroup {
    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups assets connected by pairwise similarity `>= threshold` (transitive
/// closure). Every input appears in exactly one group; groups are ordered by
/// canonical id.
pub fn deduplicate(assets: &[DedupInput<'_>], threshold: f64) -> Vec<DuplicateGroup> {
    let n = assets.len();
    let mut sets = DisjointSet::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if cosine_similarity(assets[i].vector, assets[j].vector) >= threshold {
                sets.union(i, j);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = sets.find(i);
        by_root.entry(r).or_default().push(i);
    }
    let mut groups: Vec<DuplicateGroup> = by_root
        .into_values()
        .map(|idx| {
            let canonical = idx
                .iter()
                .map(|&i| &assets[i])
                .min_by(|a, b| {
                    a.created_at
                        .cmp(&b.created_at)
                        .then_with(|| a.asset_id.cmp(b.asset_id))
                })
                .expect("groups are non-empty")
                .asset_id
                .clone();
            DuplicateGroup {
                canonical,
                members: idx.iter().map(|&i| assets[i].asset_id.clone()).collect(),
            }
        })
        .collect();
    groups.sort_by(|a, b| a.canonical.cmp(&b.canonical));
    groups
}
