//! HubClient against a local mock registry.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use asset_catalog::catalog::AssetKind;
use asset_catalog::ingest::{
    AssetRef, Clock, HubClient, ProviderClient, ProviderError, VirtualClock,
};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, TimeZone, Utc};
use serde_json::{json, Value};

type Seen = Arc<Mutex<Vec<String>>>;

fn at(day: u32) -> String {
    Utc.with_ymd_and_hms(2025, 3, day, 12, 0, 0)
        .unwrap()
        .to_rfc3339()
}

async fn list_models(
    State((addr, seen)): State<(SocketAddr, Seen)>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    if let Some(auth) = headers.get("authorization") {
        seen.lock()
            .unwrap()
            .push(auth.to_str().unwrap().to_string());
    }
    let page = q.get("page").map(String::as_str).unwrap_or("1");
    match page {
        "1" => {
            let body = json!([
                {"id": "acme/newest", "lastModified": at(20)},
                {"id": "acme/no-card", "lastModified": at(18)},
                {"id": "broken-entry"},
            ]);
            let link = format!("<http://{addr}/api/models?page=2>; rel=\"next\"");
            ([("link", link)], Json(body)).into_response()
        }
        "2" => {
            let body = json!([
                {"id": "acme/older", "lastModified": at(12)},
                {"id": "acme/ancient", "lastModified": at(2)},
            ]);
            let link = format!("<http://{addr}/api/models?page=3>; rel=\"next\"");
            ([("link", link)], Json(body)).into_response()
        }
        _ => (
            StatusCode::INTERNAL_SERVER_ERROR,
            "listing read past the boundary",
        )
            .into_response(),
    }
}

async fn model_meta(Path((org, name)): Path<(String, String)>) -> Response {
    match name.as_str() {
        "newest" | "no-card" => Json(json!({
            "id": format!("{org}/{name}"),
            "lastModified": at(20),
            "createdAt": at(1),
            "downloads": 321,
            "likes": 9,
            "tags": ["arxiv:2401.00001"],
        }))
        .into_response(),
        "undated" => Json(json!({"id": "acme/undated"})).into_response(),
        "limited" => StatusCode::TOO_MANY_REQUESTS.into_response(),
        _ => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn dataset_meta(Path((org, name)): Path<(String, String)>) -> Json<Value> {
    Json(json!({"id": format!("{org}/{name}"), "lastModified": at(5)}))
}

async fn model_card(Path((_, name)): Path<(String, String)>) -> Response {
    if name == "newest" {
        "---\nlicense: mit\n---\nCode generation model.\n".into_response()
    } else {
        StatusCode::NOT_FOUND.into_response()
    }
}

async fn dataset_card(Path((_, name)): Path<(String, String)>) -> String {
    format!("dataset card for {name}")
}

async fn arxiv(Query(q): Query<HashMap<String, String>>) -> Response {
    let id = q.get("id_list").cloned().unwrap_or_default();
    if id == "missing" {
        return StatusCode::NOT_FOUND.into_response();
    }
    let summary = if id == "empty" {
        String::new()
    } else {
        format!("  An abstract\n   for {id} &amp; more. ")
    };
    let feed = format!(
        "<?xml version=\"1.0\"?><feed xmlns=\"http://www.w3.org/2005/Atom\"><title>q</title>\
         <entry><id>{id}</id><summary>{summary}</summary></entry></feed>"
    );
    ([("content-type", "application/atom+xml")], feed).into_response()
}

fn serve() -> (SocketAddr, Seen) {
    let seen: Seen = Arc::default();
    let (tx, rx) = std::sync::mpsc::channel();
    let shared = seen.clone();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let addr = listener.local_addr().unwrap();
            let app = Router::new()
                .route("/api/models", get(list_models))
                .route("/api/models/{org}/{name}", get(model_meta))
                .route("/api/datasets/{org}/{name}", get(dataset_meta))
                .route(
                    "/datasets/{org}/{name}/raw/main/README.md",
                    get(dataset_card),
                )
                .route("/{org}/{name}/raw/main/README.md", get(model_card))
                .route("/api/query", get(arxiv))
                .with_state((addr, shared));
            tx.send(addr).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (rx.recv().unwrap(), seen)
}

fn client(addr: SocketAddr, token: Option<&str>) -> HubClient {
    let clock: Arc<dyn Clock> = Arc::new(VirtualClock::new(
        Utc.with_ymd_and_hms(2025, 3, 25, 0, 0, 0).unwrap(),
    ));
    let base = format!("http://{addr}");
    HubClient::new("hf", &base, token.map(str::to_string), clock).with_arxiv_base(&base)
}

fn model(name: &str) -> AssetRef {
    AssetRef::new("hf", AssetKind::Model, name)
}

#[test]
fn listing_follows_next_links_until_the_since_boundary() {
    let (addr, seen) = serve();
    let hub = client(addr, Some("secret-token"));
    let since: DateTime<Utc> = Utc.with_ymd_and_hms(2025, 3, 10, 0, 0, 0).unwrap();
    let page = hub
        .list_assets_since(since, AssetKind::Model, None)
        .unwrap();
    let names: Vec<&str> = page.items.iter().map(|l| l.asset.name.as_str()).collect();
    assert_eq!(names, ["acme/older", "acme/no-card", "acme/newest"]);
    assert!(page.next_cursor.is_none());
    assert_eq!(page.items[2].last_modified.to_rfc3339(), at(20));
    assert!(seen
        .lock()
        .unwrap()
        .iter()
        .all(|a| a == "Bearer secret-token"));
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn card_metadata_and_metrics_are_read() {
    let (addr, _) = serve();
    let hub = client(addr, None);
    let doc = hub.fetch_card(&model("acme/newest")).unwrap();
    assert_eq!(
        doc.card_text.as_deref(),
        Some("---\nlicense: mit\n---\nCode generation model.\n")
    );
    assert_eq!(doc.last_modified.to_rfc3339(), at(20));
    assert_eq!(doc.raw_metadata["downloads"], 321);
    assert_eq!(
        doc.fetched_at,
        Utc.with_ymd_and_hms(2025, 3, 25, 0, 0, 0).unwrap()
    );

    assert_eq!(
        hub.fetch_card(&model("acme/no-card")).unwrap().card_text,
        None
    );
    let m = hub.fetch_metrics(&model("acme/newest")).unwrap();
    assert_eq!(
        (m.downloads, m.likes, m.commits, m.contributors),
        (321, 9, 0, 0)
    );

    let ds = hub
        .fetch_card(&AssetRef::new("hf", AssetKind::Dataset, "org/rows"))
        .unwrap();
    assert_eq!(ds.card_text.as_deref(), Some("dataset card for rows"));
}

#[test]
fn error_statuses_map_to_provider_errors() {
    let (addr, _) = serve();
    let hub = client(addr, None);
    assert!(matches!(
        hub.fetch_card(&model("acme/gone")),
        Err(ProviderError::NotFound(_))
    ));
    assert!(matches!(
        hub.fetch_metrics(&model("acme/limited")),
        Err(ProviderError::RateBudgetExhausted(_))
    ));
    assert!(matches!(
        hub.fetch_card(&model("acme/undated")),
        Err(ProviderError::Malformed(_))
    ));
    let down = client("127.0.0.1:9".parse().unwrap(), None);
    assert!(matches!(
        down.fetch_metrics(&model("acme/newest")),
        Err(ProviderError::Unavailable(_))
    ));
}

#[test]
fn linked_abstracts_come_from_the_atom_feed() {
    let (addr, _) = serve();
    let hub = client(addr, None);
    let a = model("acme/newest");
    assert_eq!(
        hub.fetch_linked_abstract(&a, "2401.00001")
            .unwrap()
            .as_deref(),
        Some("An abstract for 2401.00001 & more.")
    );
    assert_eq!(hub.fetch_linked_abstract(&a, "empty").unwrap(), None);
    assert_eq!(hub.fetch_linked_abstract(&a, "missing").unwrap(), None);
}
