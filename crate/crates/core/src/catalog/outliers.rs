//! Rejection of taxonomy matches that rest only on polysemous keywords.
//!
//! For every task, the unit-normalized vectors of its unambiguous matches form
//! a centroid. An ambiguous-only candidate is rejected when its similarity to
//! that centroid falls below `max(floor, median - k * MAD)` of the members'
//! own similarities to it.

use std::collections::BTreeMap;

use super::text::{cosine_similarity, DocumentVector};
use super::AssetId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierConfig {
    pub floor: f64,
    pub mad_multiplier: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            floor: 0.05,
            mad_multiplier: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TaskCandidate<'a> {
    pub asset_id: &'a AssetId,
    pub task_id: &'a str,
    pub vector: &'a DocumentVector,
    pub ambiguous_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutlierDecision {
    /// Unambiguous match, or ambiguous match close enough to the task's members.
    Kept,
    /// Ambiguous match for a task with no unambiguous members to compare against.
    KeptLowConfidence,
    Rejected {
        similarity: f64,
        threshold: f64,
    },
}

impl OutlierDecision {
    pub fn is_kept(&self) -> bool {
        !matches!(self, OutlierDecision::Rejected { .. })
    }
}

/// Decisions aligned index-for-index with the input candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierPartition {
    pub decisions: Vec<OutlierDecision>,
}

impl OutlierPartition {
    pub fn kept(&self) -> impl Iterator<Item = usize> + '_ {
        self.decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_kept())
            .map(|(i, _)| i)
    }

    pub fn rejected(&self) -> impl Iterator<Item = usize> + '_ {
        self.decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_kept())
            .map(|(i, _)| i)
    }
}

struct TaskReference {
    centroid: DocumentVector,
    threshold: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn reference_for(members: &[&DocumentVector], config: OutlierConfig) -> TaskReference {
    let centroid = DocumentVector::centroid(members.iter().copied());
    let mut sims: Vec<f64> = members
        .iter()
        .map(|v| cosine_similarity(v, &centroid))
        .collect();
    sims.sort_by(f64::total_cmp);
    let med = median(&sims);
    let mut dev: Vec<f64> = sims.iter().map(|s| (s - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = median(&dev);
    TaskReference {
        centroid,
        threshold: config.floor.max(med - config.mad_multiplier * mad),
    }
}

pub fn detect_lexical_outliers(
    candidates: &[TaskCandidate<'_>],
    config: OutlierConfig,
) -> OutlierPartition {
    let mut members: BTreeMap<&str, Vec<&DocumentVector>> = BTreeMap::new();
    for c in candidates
        .iter()
        .filter(|c| !c.ambiguous_only && !c.vector.is_empty())
    {
        members.entry(c.task_id).or_default().push(c.vector);
    }
    let references: BTreeMap<&str, TaskReference> = members
        .iter()
        .map(|(task, vs)| (*task, reference_for(vs, config)))
        .collect();

    let decisions = candidates
        .iter()
        .map(|c| {
            if !c.ambiguous_only {
                return OutlierDecision::Kept;
            }
            match references.get(c.task_id) {
                None => OutlierDecision::KeptLowConfidence,
                Some(r) => {
                    let similarity = cosine_similarity(c.vector, &r.centroid);
                    if similarity < r.threshold {
                        OutlierDecision::Rejected {
                            similarity,
                            threshold: r.threshold,
                        }
                    } else {
                        OutlierDecision::Kept
                    }
                }
            }
        })
        .collect();
    OutlierPartition { decisions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::text::CorpusStats;
    use proptest::prelude::*;

    const PROGRAMMING: [&str; 4] = [
        "Java code model trained on open source repositories. Generates Java methods, classes and unit tests from source code.",
        "A transformer for Java source code: method completion, class generation, and refactoring of object oriented code.",
        "Fine tuned on Java and Kotlin repositories to write source code, compile ready methods and classes.",
        "Source code model for Java projects; produces methods and classes and explains compiler errors in code.",
    ];
    const ISLAND: &str = "Travel diary from Java island: volcano sunrise at Bromo, rice terraces, \
        batik markets in Yogyakarta and street food. Best beaches, hotels and trains across the island.";

    fn ids(n: usize) -> Vec<AssetId> {
        (0..n)
            .map(|i| AssetId::new("t", &format!("a{i}")))
            .collect()
    }

    #[test]
    fn island_travel_blog_is_rejected() {
        let corpus = CorpusStats::from_documents(PROGRAMMING.iter().copied().chain([ISLAND]));
        let vectors: Vec<_> = PROGRAMMING
            .iter()
            .chain([&ISLAND])
            .map(|d| corpus.vectorize(d))
            .collect();
        let ids = ids(vectors.len());
        let candidates: Vec<_> = vectors
            .iter()
            .zip(&ids)
            .enumerate()
            .map(|(i, (v, id))| TaskCandidate {
                asset_id: id,
                task_id: "java-development",
                vector: v,
                ambiguous_only: i == PROGRAMMING.len(),
            })
            .collect();
        let out = detect_lexical_outliers(&candidates, OutlierConfig::default());

        // Oracle: similarity of the island card to the mean of normalized members.
        let centroid = DocumentVector::centroid(vectors[..4].iter());
        let sim = cosine_similarity(&vectors[4], &centroid);
        match out.decisions[4] {
            OutlierDecision::Rejected {
                similarity,
                threshold,
            } => {
                assert!((similarity - sim).abs() < 1e-12);
                assert!(similarity < threshold);
            }
            other => panic!("island card kept: {other:?}"),
        }
        assert!(out.decisions[..4]
            .iter()
            .all(|d| *d == OutlierDecision::Kept));
    }

    #[test]
    fn candidate_equal_to_centroid_is_kept() {
        let corpus = CorpusStats::from_documents(PROGRAMMING);
        let vectors: Vec<_> = PROGRAMMING.iter().map(|d| corpus.vectorize(d)).collect();
        let centroid = DocumentVector::centroid(vectors.iter());
        let ids = ids(5);
        let mut candidates: Vec<_> = vectors
            .iter()
            .zip(&ids)
            .map(|(v, id)| TaskCandidate {
                asset_id: id,
                task_id: "t",
                vector: v,
                ambiguous_only: false,
            })
            .collect();
        candidates.push(TaskCandidate {
            asset_id: &ids[4],
            task_id: "t",
            vector: &centroid,
            ambiguous_only: true,
        });
        let out = detect_lexical_outliers(&candidates, OutlierConfig::default());
        assert_eq!(out.decisions[4], OutlierDecision::Kept);
    }

    #[test]
    fn no_reference_members_keeps_with_flag() {
        let v = CorpusStats::from_documents([ISLAND]).vectorize(ISLAND);
        let id = AssetId::from("t:x");
        let out = detect_lexical_outliers(
            &[TaskCandidate {
                asset_id: &id,
                task_id: "lonely",
                vector: &v,
                ambiguous_only: true,
            }],
            OutlierConfig::default(),
        );
        assert_eq!(out.decisions, vec![OutlierDecision::KeptLowConfidence]);
        assert_eq!(out.kept().count(), 1);
    }

    fn doc() -> impl Strategy<Value = String> {
        proptest::collection::vec("[a-h]{1,2}", 1..10).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn raising_the_floor_never_rescues(
            docs in proptest::collection::vec((doc(), any::<bool>()), 2..10),
            lo in 0.0f64..0.5,
            bump in 0.0f64..0.5,
        ) {
            let corpus = CorpusStats::from_documents(docs.iter().map(|(d, _)| d.as_str()));
            let vectors: Vec<_> = docs.iter().map(|(d, _)| corpus.vectorize(d)).collect();
            let ids = ids(docs.len());
            let cands: Vec<_> = docs.iter().zip(&vectors).zip(&ids).map(|(((_, amb), v), id)| TaskCandidate {
                asset_id: id, task_id: "t", vector: v, ambiguous_only: *amb,
            }).collect();
            let low = detect_lexical_outliers(&cands, OutlierConfig { floor: lo, mad_multiplier: 3.0 });
            let high = detect_lexical_outliers(&cands, OutlierConfig { floor: lo + bump, mad_multiplier: 3.0 });
            for (a, b) in low.decisions.iter().zip(&high.decisions) {
                if !a.is_kept() {
                    prop_assert!(!b.is_kept());
                }
            }
            // determinism
            prop_assert_eq!(low, detect_lexical_outliers(&cands, OutlierConfig { floor: lo, mad_multiplier: 3.0 }));
        }
    }
}
