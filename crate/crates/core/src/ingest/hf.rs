//! Live client for a Hugging Face style hub, plus arXiv abstract lookup.
//!
//! Listings come newest first from `/api/{models,datasets}` and follow the
//! `Link: <..>; rel="next"` header until the `since` boundary is crossed;
//! the collected window is then served oldest first through an offset
//! cursor, matching the other providers.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use quick_xml::events::Event;
use quick_xml::Reader;
use serde_json::Value;
use url::Url;

use super::clock::Clock;
use super::extract::metrics_of;
use super::provider::{
    paginate, AssetRef, ListPage, ListedAsset, ProviderClient, ProviderError, ProviderResult,
    RawAssetDoc, RawMetrics,
};
use crate::catalog::AssetKind;

pub const DEFAULT_ARXIV_BASE: &str = "https://export.arxiv.org";
const LIST_LIMIT: usize = 100;
const PAGE_SIZE: usize = 50;

type Windows = BTreeMap<(AssetKind, DateTime<Utc>), Vec<ListedAsset>>;

pub struct HubClient {
    id: String,
    base: String,
    arxiv_base: String,
    token: Option<String>,
    agent: ureq::Agent,
    clock: Arc<dyn Clock>,
    windows: Mutex<Windows>,
}

fn kind_path(kind: AssetKind) -> &'static str {
    match kind {
        AssetKind::Model => "models",
        AssetKind::Dataset => "datasets",
    }
}

fn unavailable(e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Unavailable(e.to_string())
}

/// Target of the `rel="next"` entry of a Link header.
fn next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let (target, params) = part.split_once(';')?;
        params
            .split(';')
            .any(|p| p.trim().trim_matches('"') == "rel=\"next\"" || p.trim() == "rel=\"next\"")
            .then(|| {
                target
                    .trim()
                    .trim_start_matches('<')
                    .trim_end_matches('>')
                    .to_string()
            })
    })
}

/// Text of the first `<entry><summary>` in an arXiv Atom feed.
pub fn atom_summary(xml: &str) -> Result<Option<String>, String> {
    let mut reader = Reader::from_str(xml);
    let mut in_entry = false;
    let mut in_summary = false;
    let mut text = String::new();
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(e) if e.local_name().as_ref() == b"entry" => in_entry = true,
            Event::Start(e) if in_entry && e.local_name().as_ref() == b"summary" => {
                in_summary = true
            }
            Event::Text(t) if in_summary => {
                text.push_str(&t.unescape().map_err(|e| e.to_string())?)
            }
            Event::CData(t) if in_summary => text.push_str(&String::from_utf8_lossy(&t)),
            Event::End(e) if in_summary && e.local_name().as_ref() == b"summary" => {
                let s = text.split_whitespace().collect::<Vec<_>>().join(" ");
                return Ok((!s.is_empty()).then_some(s));
            }
            Event::Eof => return Ok(None),
            _ => {}
        }
    }
}

impl HubClient {
    pub fn new(id: &str, base_url: &str, token: Option<String>, clock: Arc<dyn Clock>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        HubClient {
            id: id.to_string(),
            base: base_url.trim_end_matches('/').to_string(),
            arxiv_base: DEFAULT_ARXIV_BASE.to_string(),
            token,
            agent,
            clock,
            windows: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_arxiv_base(mut self, base: &str) -> Self {
        self.arxiv_base = base.trim_end_matches('/').to_string();
        self
    }

    /// Status, Link header and body of a GET.
    fn get(&self, url: &str) -> ProviderResult<(u16, Option<String>, String)> {
        let mut req = self.agent.get(url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.call().map_err(unavailable)?;
        let status = resp.status().as_u16();
        let link = resp
            .headers()
            .get("link")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp.body_mut().read_to_string().map_err(unavailable)?;
        match status {
            200..=299 => Ok((status, link, body)),
            404 => Err(ProviderError::NotFound(url.to_string())),
            429 => Err(ProviderError::RateBudgetExhausted(Duration::from_secs(60))),
            s => Err(ProviderError::Unavailable(format!("{url}: HTTP {s}"))),
        }
    }

    fn get_json(&self, url: &str) -> ProviderResult<Value> {
        let (_, _, body) = self.get(url)?;
        serde_json::from_str(&body).map_err(|e| ProviderError::Malformed(format!("{url}: {e}")))
    }

    fn metadata_url(&self, asset: &AssetRef) -> String {
        format!("{}/api/{}/{}", self.base, kind_path(asset.kind), asset.name)
    }

    fn card_url(&self, asset: &AssetRef) -> String {
        match asset.kind {
            AssetKind::Model => format!("{}/{}/raw/main/README.md", self.base, asset.name),
            AssetKind::Dataset => {
                format!("{}/datasets/{}/raw/main/README.md", self.base, asset.name)
            }
        }
    }

    fn window(&self, since: DateTime<Utc>, kind: AssetKind) -> ProviderResult<Vec<ListedAsset>> {
        let mut url =
            Url::parse(&format!("{}/api/{}", self.base, kind_path(kind))).map_err(unavailable)?;
        url.query_pairs_mut()
            .append_pair("sort", "lastModified")
            .append_pair("direction", "-1")
            .append_pair("limit", &LIST_LIMIT.to_string());
        let mut next = Some(url.to_string());
        let mut out = Vec::new();
        while let Some(u) = next.take() {
            let (_, link, body) = self.get(&u)?;
            let items: Vec<Value> = serde_json::from_str(&body)
                .map_err(|e| ProviderError::Malformed(format!("{u}: {e}")))?;
            let mut crossed = false;
            for item in items {
                let Some(name) = item.get("id").and_then(Value::as_str) else {
                    continue;
                };
                let Some(modified) = item
                    .get("lastModified")
                    .and_then(Value::as_str)
                    .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
                else {
                    continue;
                };
                let modified = modified.with_timezone(&Utc);
                if modified <= since {
                    crossed = true;
                    break;
                }
                out.push(ListedAsset {
                    asset: AssetRef::new(&self.id, kind, name),
                    last_modified: modified,
                });
            }
            if !crossed {
                next = link.as_deref().and_then(next_link);
            }
        }
        Ok(out)
    }
}

impl ProviderClient for HubClient {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn list_assets_since(
        &self,
        since: DateTime<Utc>,
        kind: AssetKind,
        cursor: Option<&str>,
    ) -> ProviderResult<ListPage> {
        let key = (kind, since);
        let cached = match cursor {
            // A fresh listing always re-reads the registry.
            None => None,
            Some(_) => self
                .windows
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .get(&key)
                .cloned(),
        };
        let items = match cached {
            Some(items) => items,
            None => {
                let items = self.window(since, kind)?;
                self.windows
                    .lock()
                    .unwrap_or_else(|p| p.into_inner())
                    .insert(key, items.clone());
                items
            }
        };
        paginate(items, cursor, PAGE_SIZE)
    }

    fn fetch_card(&self, asset: &AssetRef) -> ProviderResult<RawAssetDoc> {
        let raw_metadata = self.get_json(&self.metadata_url(asset))?;
        let card_text = match self.get(&self.card_url(asset)) {
            Ok((_, _, body)) => Some(body),
            Err(ProviderError::NotFound(_)) => None,
            Err(e) => return Err(e),
        };
        let last_modified = ["lastModified", "createdAt"]
            .iter()
            .find_map(|k| raw_metadata.get(*k).and_then(Value::as_str))
            .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
            .map(|t| t.with_timezone(&Utc))
            .ok_or_else(|| ProviderError::Malformed(format!("{}: no lastModified", asset.name)))?;
        Ok(RawAssetDoc {
            asset: asset.clone(),
            raw_metadata,
            card_text,
            last_modified,
            fetched_at: self.clock.now(),
        })
    }

    fn fetch_metrics(&self, asset: &AssetRef) -> ProviderResult<RawMetrics> {
        Ok(metrics_of(&self.get_json(&self.metadata_url(asset))?))
    }

    fn fetch_linked_abstract(
        &self,
        _asset: &AssetRef,
        paper_id: &str,
    ) -> ProviderResult<Option<String>> {
        let mut url = Url::parse(&format!("{}/api/query", self.arxiv_base)).map_err(unavailable)?;
        url.query_pairs_mut().append_pair("id_list", paper_id);
        let (_, _, body) = match self.get(url.as_str()) {
            Ok(r) => r,
            Err(ProviderError::NotFound(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        atom_summary(&body).map_err(ProviderError::Malformed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_header() {
        let h = r#"<https://hub/api/models?cursor=abc>; rel="next", <https://hub/x>; rel="prev""#;
        assert_eq!(
            next_link(h).as_deref(),
            Some("https://hub/api/models?cursor=abc")
        );
        assert_eq!(next_link(r#"<https://hub/x>; rel="prev""#), None);
    }

    #[test]
    fn atom_entry_summary() {
        let xml = r#"<?xml version="1.0"?>
            <feed xmlns="http://www.w3.org/2005/Atom"><title>q</title>
              <entry><id>x</id><summary>  We evaluate
                code &amp; tests.  </summary></entry></feed>"#;
        assert_eq!(
            atom_summary(xml).unwrap().as_deref(),
            Some("We evaluate code & tests.")
        );
        assert_eq!(atom_summary("<feed></feed>").unwrap(), None);
    }
}
