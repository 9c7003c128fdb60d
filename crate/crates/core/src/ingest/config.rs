//! Provider configuration file and the registered provider set.
//!
//! The file is a UTF-8 JSON array:
//!
//! ```json
//! [{"provider_id": "hf", "fixture_path": "fixtures/registry",
//!   "rate_budget": {"max_requests_per_minute": 120, "burst": 20},
//!   "enabled_kinds": ["model", "dataset"]}]
//! ```
//!
//! Exactly one of `base_url` and `fixture_path` must be given. Relative
//! fixture paths resolve against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clock::Clock;
use super::fixture::FixtureProvider;
use super::hf::HubClient;
use super::provider::{ProviderClient, RateLimitedProvider};
use super::rate_limit::RateBudget;
use crate::catalog::AssetKind;

/// Environment variable holding the bearer token for live registries.
pub const TOKEN_ENV: &str = "ASSET_CATALOG_PROVIDER_TOKEN";
pub const DEFAULT_WEB_BASE: &str = "https://huggingface.co";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub provider_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
    /// Browsable root used for `repo_url`; defaults to the hub's site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub web_base: Option<String>,
    #[serde(default)]
    pub rate_budget: RateBudget,
    #[serde(default = "all_kinds")]
    pub enabled_kinds: BTreeSet<AssetKind>,
}

fn all_kinds() -> BTreeSet<AssetKind> {
    [AssetKind::Model, AssetKind::Dataset].into()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("invalid provider config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("provider `{0}`: {1}")]
    Invalid(String, String),
}

impl ProviderConfig {
    pub fn fixture(provider_id: &str, path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            provider_id: provider_id.to_string(),
            base_url: None,
            fixture_path: Some(path.into()),
            web_base: None,
            rate_budget: RateBudget::default(),
            enabled_kinds: all_kinds(),
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| {
            Err(ConfigError::Invalid(
                self.provider_id.clone(),
                m.to_string(),
            ))
        };
        if self.provider_id.trim().is_empty() || self.provider_id.contains(':') {
            return invalid("provider_id must be non-empty and contain no `:`");
        }
        if self.base_url.is_some() == self.fixture_path.is_some() {
            return invalid("exactly one of base_url and fixture_path is required");
        }
        if self.rate_budget.validate().is_err() {
            return invalid("rate budget fields must be positive");
        }
        if self.enabled_kinds.is_empty() {
            return invalid("enabled_kinds is empty");
        }
        Ok(())
    }
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<Vec<ProviderConfig>, ConfigError> {
    let mut configs: Vec<ProviderConfig> = serde_json::from_str(text)?;
    let mut seen = BTreeSet::new();
    for c in &mut configs {
        c.check()?;
        if !seen.insert(c.provider_id.clone()) {
            return Err(ConfigError::Invalid(
                c.provider_id.clone(),
                "listed twice".into(),
            ));
        }
        if let Some(p) = &c.fixture_path {
            if p.is_relative() {
                c.fixture_path = Some(base_dir.join(p));
            }
        }
    }
    Ok(configs)
}

pub fn load_config(path: &Path) -> Result<Vec<ProviderConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

pub type SharedClient = Arc<RateLimitedProvider<Arc<dyn ProviderClient>>>;

/// A registered provider: its client behind one shared rate limiter, the
/// asset kinds to crawl, and the base for browsable repository links.
#[derive(Clone)]
pub struct Provider {
    pub client: SharedClient,
    pub kinds: BTreeSet<AssetKind>,
    pub web_base: String,
}

impl Provider {
    pub fn new(client: Arc<dyn ProviderClient>, budget: RateBudget, clock: Arc<dyn Clock>) -> Self {
        Provider {
            client: Arc::new(RateLimitedProvider::new(client, budget, clock)),
            kinds: all_kinds(),
            web_base: DEFAULT_WEB_BASE.to_string(),
        }
    }

    /// Wraps an already rate-limited client (e.g. one recording its grants).
    pub fn from_limited(client: SharedClient) -> Self {
        Provider {
            client,
            kinds: all_kinds(),
            web_base: DEFAULT_WEB_BASE.to_string(),
        }
    }

    pub fn with_kinds(mut self, kinds: impl IntoIterator<Item = AssetKind>) -> Self {
        self.kinds = kinds.into_iter().collect();
        self
    }

    pub fn id(&self) -> &str {
        self.client.provider_id()
    }

    /// Builds the provider a config entry describes. With `fixture_only`,
    /// entries pointing at live registries are rejected.
    pub fn from_config(
        c: &ProviderConfig,
        clock: Arc<dyn Clock>,
        fixture_only: bool,
    ) -> Result<Self, ConfigError> {
        c.check()?;
        let inner: Arc<dyn ProviderClient> = match (&c.fixture_path, &c.base_url) {
            (Some(path), _) => Arc::new(FixtureProvider::new(&c.provider_id, path, clock.clone())),
            (None, Some(_)) if fixture_only => {
                return Err(ConfigError::Invalid(
                    c.provider_id.clone(),
                    "live base_url not allowed in fixture mode".into(),
                ))
            }
            (None, Some(url)) => {
                let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
                Arc::new(HubClient::new(&c.provider_id, url, token, clock.clone()))
            }
            (None, None) => unreachable!("checked above"),
        };
        let mut p =
            Provider::new(inner, c.rate_budget, clock).with_kinds(c.enabled_kinds.iter().copied());
        if let Some(w) = &c.web_base {
            p.web_base = w.clone();
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let text = r#"[
            {"provider_id": "hf", "fixture_path": "reg", "enabled_kinds": ["model"]},
            {"provider_id": "live", "base_url": "https://huggingface.co",
             "rate_budget": {"max_requests_per_minute": 30, "burst": 5}}
        ]"#;
        let cs = parse_config(text, Path::new("/etc/cat")).unwrap();
        assert_eq!(
            cs[0].fixture_path.as_deref(),
            Some(Path::new("/etc/cat/reg"))
        );
        assert_eq!(cs[0].rate_budget, RateBudget::default());
        assert_eq!(cs[0].enabled_kinds, [AssetKind::Model].into());
        assert_eq!(cs[1].rate_budget.burst, 5);
        assert_eq!(cs[1].enabled_kinds.len(), 2);
    }

    #[test]
    fn rejects_bad_entries() {
        let base = Path::new(".");
        for bad in [
            r#"[{"provider_id": "a"}]"#,
            r#"[{"provider_id": "a", "fixture_path": "x", "base_url": "http://h"}]"#,
            r#"[{"provider_id": "a", "fixture_path": "x", "rate_budget": {"max_requests_per_minute": 0, "burst": 1}}]"#,
            r#"[{"provider_id": "a", "fixture_path": "x"}, {"provider_id": "a", "fixture_path": "y"}]"#,
            r#"[{"provider_id": "a", "fixture_path": "x", "colour": "red"}]"#,
        ] {
            assert!(parse_config(bad, base).is_err(), "{bad}");
        }
    }
}
