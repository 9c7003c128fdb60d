use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::HigherIsBetter => Direction::LowerIsBetter,
            Direction::LowerIsBetter => Direction::HigherIsBetter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDescriptor {
    pub canonical_name: String,
    pub direction: Direction,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricRegistryError {
    #[error("alias `{alias}` claimed by both `{first}` and `{second}`")]
    OverlappingAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("metric descriptor with an empty canonical name")]
    EmptyName,
    #[error("invalid metric registry document: {0}")]
    Parse(String),
}

/// The outcome of resolving a raw metric label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedMetric {
    pub canonical_name: String,
    pub metric_config: Option<String>,
    pub direction: Direction,
    /// No registered alias matched; the label passed through lowercased.
    pub unrecognized: bool,
}

/// Alias table mapping the many spellings found in model cards onto
/// canonical metric names.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRegistry {
    descriptors: Vec<MetricDescriptor>,
    by_alias: HashMap<String, usize>,
}

fn alias_key(s: &str) -> String {
    s.trim().to_lowercase()
}

impl MetricRegistry {
    /// Alias sets must be pairwise disjoint; each canonical name is added to
    /// its own alias set.
    pub fn new(descriptors: Vec<MetricDescriptor>) -> Result<Self, MetricRegistryError> {
        let mut descriptors = descriptors;
        for d in descriptors.iter_mut() {
            if d.canonical_name.trim().is_empty() {
                return Err(MetricRegistryError::EmptyName);
            }
            if !d
                .aliases
                .iter()
                .any(|a| alias_key(a) == alias_key(&d.canonical_name))
            {
                d.aliases.push(d.canonical_name.clone());
            }
        }
        let mut by_alias: HashMap<String, usize> = HashMap::new();
        for (i, d) in descriptors.iter().enumerate() {
            for a in &d.aliases {
                let key = alias_key(a);
                match by_alias.get(&key) {
                    Some(&prev) if prev != i => {
                        return Err(MetricRegistryError::OverlappingAlias {
                            alias: a.clone(),
                            first: descriptors[prev].canonical_name.clone(),
                            second: d.canonical_name.clone(),
                        });
                    }
                    _ => {
                        by_alias.insert(key, i);
                    }
                }
            }
        }
        Ok(MetricRegistry {
            descriptors,
            by_alias,
        })
    }

    /// Built-in registry: the pass@k family, accuracy, BLEU, exact match and
    /// edit similarity (higher is better); perplexity and error rate (lower).
    pub fn builtin() -> Self {
        use Direction::*;
        let d = |name: &str, direction, aliases: &[&str]| MetricDescriptor {
            canonical_name: name.to_string(),
            direction,
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        };
        let mut descriptors = Vec::new();
        for k in [1, 3, 5, 10, 20, 100] {
            descriptors.push(d(
                &format!("pass@{k}"),
                HigherIsBetter,
                &[
                    &format!("pass@{k}"),
                    &format!("pass_at_{k}"),
                    &format!("pass-at-{k}"),
                    &format!("pass at {k}"),
                ],
            ));
        }
        descriptors.extend([
            d(
                "accuracy",
                HigherIsBetter,
                &["acc", "accuracy", "top-1 accuracy"],
            ),
            d(
                "bleu",
                HigherIsBetter,
                &["bleu", "bleu-4", "bleu4", "sacrebleu"],
            ),
            d(
                "exact-match",
                HigherIsBetter,
                &["exact_match", "exact match", "em", "exact-match"],
            ),
            d(
                "edit-similarity",
                HigherIsBetter,
                &[
                    "edit similarity",
                    "edit_sim",
                    "edit-sim",
                    "es",
                    "edit_similarity",
                ],
            ),
            d("perplexity", LowerIsBetter, &["ppl", "perplexity"]),
            d(
                "error-rate",
                LowerIsBetter,
                &["error rate", "error_rate", "err", "wer"],
            ),
        ]);
        MetricRegistry::new(descriptors).expect("built-in metric registry is disjoint")
    }

    /// Built-in descriptors extended with a JSON array of extra descriptors.
    pub fn builtin_with(extra_json: &str) -> Result<Self, MetricRegistryError> {
        let extra: Vec<MetricDescriptor> = serde_json::from_str(extra_json)
            .map_err(|e| MetricRegistryError::Parse(e.to_string()))?;
        let mut all = MetricRegistry::builtin().descriptors;
        all.extend(extra);
        MetricRegistry::new(all)
    }

    pub fn descriptors(&self) -> &[MetricDescriptor] {
        &self.descriptors
    }

    pub fn lookup(&self, name: &str) -> Option<&MetricDescriptor> {
        self.by_alias
            .get(&alias_key(name))
            .map(|&i| &self.descriptors[i])
    }

    /// Direction used for ranking; unregistered metrics rank higher-is-better.
    pub fn direction(&self, metric_name: &str) -> Direction {
        self.lookup(metric_name)
            .map(|d| d.direction)
            .unwrap_or(Direction::HigherIsBetter)
    }

    /// Copy with one metric's direction flipped.
    pub fn with_direction(&self, metric_name: &str, direction: Direction) -> Self {
        let mut out = self.clone();
        if let Some(&i) = out.by_alias.get(&alias_key(metric_name)) {
            out.descriptors[i].direction = direction;
        }
        out
    }

    pub fn normalize(&self, raw_label: &str) -> NormalizedMetric {
        let (label, config) = split_trailing_config(raw_label);
        match self.lookup(label) {
            Some(d) => NormalizedMetric {
                canonical_name: d.canonical_name.clone(),
                metric_config: config,
                direction: d.direction,
                unrecognized: false,
            },
            None if pass_at_k(label).is_some() => NormalizedMetric {
                canonical_name: format!("pass@{}", pass_at_k(label).unwrap_or_default()),
                metric_config: config,
                direction: Direction::HigherIsBetter,
                unrecognized: false,
            },
            None => NormalizedMetric {
                canonical_name: label.trim().to_lowercase(),
                metric_config: config,
                direction: Direction::HigherIsBetter,
                unrecognized: true,
            },
        }
    }
}

impl Default for MetricRegistry {
    fn default() -> Self {
        MetricRegistry::builtin()
    }
}

/// `k` of any `pass@k` spelling outside the registered sizes.
fn pass_at_k(label: &str) -> Option<u32> {
    let l = label.trim().to_lowercase();
    let rest = l
        .strip_prefix("pass@")
        .or_else(|| l.strip_prefix("pass_at_"))
        .or_else(|| l.strip_prefix("pass-at-"))?;
    rest.parse().ok()
}

/// Splits `label (config)` into the label and its trimmed configuration.
pub(crate) fn split_trailing_config(raw: &str) -> (&str, Option<String>) {
    let trimmed = raw.trim();
    if let Some(inner_end) = trimmed.strip_suffix(')') {
        if let Some(open) = inner_end.rfind('(') {
            let label = inner_end[..open].trim_end();
            let config = inner_end[open + 1..].trim();
            if !label.is_empty() && !config.is_empty() {
                return (label, Some(config.to_string()));
            }
        }
    }
    (trimmed, None)
}

pub fn normalize_metric(raw_label: &str, registry: &MetricRegistry) -> NormalizedMetric {
    registry.normalize(raw_label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_folding_to_registered_alias() {
        let r = MetricRegistry::builtin();
        let n = normalize_metric("Pass@1", &r);
        assert_eq!(n.canonical_name, "pass@1");
        assert_eq!(n.metric_config, None);
        assert_eq!(n.direction, Direction::HigherIsBetter);
        assert!(!n.unrecognized);
    }

    #[test]
    fn trailing_configuration_is_split() {
        let r = MetricRegistry::builtin();
        let n = normalize_metric("pass@1 (threshold 0.2)", &r);
        assert_eq!(n.canonical_name, "pass@1");
        assert_eq!(n.metric_config.as_deref(), Some("threshold 0.2"));
        assert_eq!(n.direction, Direction::HigherIsBetter);
    }

    #[test]
    fn unknown_metrics_pass_through() {
        let r = MetricRegistry::builtin();
        let n = normalize_metric("my-custom-metric", &r);
        assert_eq!(n.canonical_name, "my-custom-metric");
        assert_eq!(n.metric_config, None);
        assert_eq!(n.direction, Direction::HigherIsBetter);
        assert!(n.unrecognized);
        assert_eq!(
            normalize_metric("My-Metric", &r).canonical_name,
            "my-metric"
        );
    }

    #[test]
    fn any_pass_at_k_is_recognized() {
        let n = MetricRegistry::builtin().normalize("Pass@7");
        assert_eq!(n.canonical_name, "pass@7");
        assert!(!n.unrecognized);
    }

    #[test]
    fn lower_is_better_metrics() {
        let r = MetricRegistry::builtin();
        assert_eq!(r.normalize("PPL").canonical_name, "perplexity");
        assert_eq!(r.direction("perplexity"), Direction::LowerIsBetter);
        assert_eq!(r.direction("Error Rate"), Direction::LowerIsBetter);
    }

    #[test]
    fn aliases_are_disjoint_and_include_canonical() {
        let r = MetricRegistry::builtin();
        let mut seen = std::collections::HashSet::new();
        for d in r.descriptors() {
            assert!(d.aliases.iter().any(|a| a == &d.canonical_name));
            for a in &d.aliases {
                assert!(seen.insert(a.to_lowercase()), "alias {a} reused");
            }
        }
        let clash = vec![
            MetricDescriptor {
                canonical_name: "a".into(),
                direction: Direction::HigherIsBetter,
                aliases: vec!["x".into()],
            },
            MetricDescriptor {
                canonical_name: "b".into(),
                direction: Direction::HigherIsBetter,
                aliases: vec!["X".into()],
            },
        ];
        assert!(matches!(
            MetricRegistry::new(clash),
            Err(MetricRegistryError::OverlappingAlias { .. })
        ));
    }

    #[test]
    fn registry_extension_from_config() {
        let r = MetricRegistry::builtin_with(
            r#"[{"canonical_name": "codebertscore", "direction": "higher_is_better", "aliases": ["cbs"]}]"#,
        )
        .unwrap();
        assert_eq!(r.normalize("CBS").canonical_name, "codebertscore");
        assert!(
            MetricRegistry::builtin_with(r#"[{"canonical_name": "x", "direction": "up"}]"#)
                .is_err()
        );
    }

    #[test]
    fn config_split_edge_cases() {
        assert_eq!(split_trailing_config("(x)"), ("(x)", None));
        assert_eq!(split_trailing_config("acc ()"), ("acc ()", None));
        assert_eq!(
            split_trailing_config(" f1 (macro) "),
            ("f1", Some("macro".to_string()))
        );
    }
}
