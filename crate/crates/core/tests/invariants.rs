//! Property tests for invariants that hold for every input.

mod common;

use std::collections::BTreeMap;

use asset_catalog::catalog::{cosine_similarity, tokenize, CorpusStats, SizeBucket};
use asset_catalog::ingest::{JobType, RateBudget, Schedule, Scheduler, TokenBucket};
use asset_catalog::leaderboard::{split_dataset_name, MetricRegistry};
use asset_catalog::query::{from_query_pairs, matching_assets, to_query_pairs, FilterQuery};
use chrono::Duration;
use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            "code", "repair", "sql", "tests", "bug", "java", "log", "diff",
        ]),
        0..12,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn cosine_is_bounded_and_symmetric(a in words(), b in words(), c in words()) {
        let corpus = CorpusStats::from_documents([a.as_str(), b.as_str(), c.as_str()]);
        let (va, vb) = (corpus.vectorize(&a), corpus.vectorize(&b));
        let ab = cosine_similarity(&va, &vb);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, cosine_similarity(&vb, &va));
        if !va.is_empty() {
            prop_assert!((cosine_similarity(&va, &va) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn tokens_are_lowercase_alphanumeric(text in ".{0,80}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric));
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert_eq!(tokenize(&t), vec![t.clone()]);
        }
    }

    #[test]
    fn token_bucket_never_exceeds_budget(
        rpm in 1u32..200,
        burst in 1u32..50,
        gaps in prop::collection::vec(0u64..5_000, 1..300),
    ) {
        let budget = RateBudget::new(rpm, burst).unwrap();
        let mut bucket = TokenBucket::new(budget);
        let mut now = t0();
        let mut grants = Vec::new();
        for g in gaps {
            now += Duration::milliseconds(g as i64);
            if let Ok(p) = bucket.acquire(now) {
                grants.push(p.granted_at);
            }
        }
        let limit = (rpm + burst) as usize;
        for (i, g) in grants.iter().enumerate() {
            let n = grants[i..].iter().take_while(|t| **t <= *g + Duration::seconds(60)).count();
            prop_assert!(n <= limit, "{} grants in a window, limit {}", n, limit);
        }
    }

    #[test]
    fn scheduler_never_double_starts(steps in prop::collection::vec((1i64..600, any::<bool>()), 1..400)) {
        let mut s = Scheduler::new(Schedule::default(), t0());
        let mut now = t0();
        let mut running: BTreeMap<JobType, bool> = BTreeMap::new();
        let mut starts: BTreeMap<JobType, usize> = BTreeMap::new();
        for (minutes, finish) in steps {
            now += Duration::minutes(minutes);
            for job in s.tick(now) {
                prop_assert!(!running.get(&job).copied().unwrap_or(false), "{} started twice", job);
                running.insert(job, true);
                *starts.entry(job).or_default() += 1;
            }
            if finish {
                for (job, r) in running.iter_mut() {
                    if *r {
                        s.complete(*job);
                        *r = false;
                    }
                }
            }
        }
        let elapsed = now - t0();
        for job in JobType::ALL {
            let slots = (elapsed.num_seconds() / Schedule::default().interval(job).num_seconds()) as usize;
            prop_assert!(starts.get(&job).copied().unwrap_or(0) <= slots);
        }
    }

    #[test]
    fn query_params_round_trip(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let corpus = synthetic_corpus(&mut rng, 40);
        let mut q = FilterQuery::all(corpus[seed as usize % 2].kind());
        q.licenses = Some(set(&[LICENSES[seed as usize % LICENSES.len()]]));
        q.identifier_substring = Some(NAME_WORDS[seed as usize % NAME_WORDS.len()].to_string());
        let back = from_query_pairs(&to_query_pairs(&q)).unwrap();
        prop_assert_eq!(&back, &q);
        let a: Vec<_> = matching_assets(&q, &corpus).unwrap().into_iter().map(|r| &r.asset_id).collect();
        let b: Vec<_> = matching_assets(&back, &corpus).unwrap().into_iter().map(|r| &r.asset_id).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dataset_name_grammar_never_loses_text(name in "[A-Za-z0-9 ()+,#-]{0,30}") {
        let squash = |s: &str| s.split_whitespace().collect::<String>();
        let (bench, implementation, language) = split_dataset_name(&name);
        let rebuilt = match (&implementation, &language) {
            (None, None) => {
                prop_assert_eq!(bench.as_str(), name.trim());
                bench.clone()
            }
            (Some(i), None) => format!("{bench} ({i})"),
            (Some(i), Some(l)) => format!("{bench} ({i}, {l})"),
            (None, Some(_)) => return Err(TestCaseError::fail("language without implementation")),
        };
        prop_assert_eq!(squash(&rebuilt), squash(&name));
        for part in [Some(&bench), implementation.as_ref(), language.as_ref()].into_iter().flatten() {
            prop_assert_eq!(part.trim(), part.as_str());
        }
    }

    #[test]
    fn metric_labels_normalize_idempotently(label in "[A-Za-z@ _1-9-]{1,16}") {
        let reg = MetricRegistry::builtin();
        let once = reg.normalize(&label);
        let twice = reg.normalize(&once.canonical_name);
        prop_assert_eq!(&once.canonical_name, &twice.canonical_name);
    }

    #[test]
    fn size_buckets_partition_row_counts(rows in any::<u64>()) {
        let b = SizeBucket::from_row_count(rows);
        prop_assert_eq!(SizeBucket::ALL.iter().filter(|x| **x == b).count(), 1);
        prop_assert_eq!(SizeBucket::parse(b.label()), Some(b));
    }
}
