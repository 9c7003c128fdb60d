//! HTTP/JSON surface under `/api/v1`.
//!
//! Handlers are thin: each parses its input, runs the matching library
//! operation against the current catalogue snapshot and serializes the
//! result unchanged. `GET /api/v1` lists every route.

mod error;

use std::sync::Arc;

use axum::extract::{Path, Query, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::{ApiError, ErrorCode};

use crate::catalog::{AssetId, AssetKind, Taxonomy, TaxonomyEntry};
use crate::ingest::{
    refresh_asset_now, Clock, PipelineContext, Provider, ProviderError, RefreshNowError,
};
use crate::leaderboard::{FilterDimension, LeaderboardQuery, MetricRegistry, TrendAxis};
use crate::query::export::{export, ExportFormat};
use crate::query::params::from_query_pairs;
use crate::query::{apply_filters, InvalidQuery};
use crate::store::{Store, SCHEMA_VERSION};
use crate::workspace::{PreferenceCriteria, UserAccount, Workspace};

type ApiResult<T> = Result<T, ApiError>;
type Pairs = Vec<(String, String)>;

fn query_pairs(raw: Option<String>) -> Pairs {
    url::form_urlencoded::parse(raw.unwrap_or_default().as_bytes())
        .into_owned()
        .collect()
}

fn parse_id(name: &str, raw: &str) -> ApiResult<i64> {
    raw.parse()
        .map_err(|_| ApiError::not_found(format!("{name} `{raw}`")))
}

struct Inner {
    pipeline: PipelineContext,
    workspace: Workspace,
    providers: Vec<Provider>,
}

/// Shared handler state. Cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(pipeline: PipelineContext, providers: Vec<Provider>) -> Self {
        let workspace = Workspace::new(pipeline.store.clone());
        AppState(Arc::new(Inner {
            pipeline,
            workspace,
            providers,
        }))
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.0.pipeline.store
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.0.pipeline.registry
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.0.pipeline.taxonomy
    }

    pub fn workspace(&self) -> &Workspace {
        &self.0.workspace
    }

    fn clock(&self) -> &dyn Clock {
        self.0.pipeline.clock.as_ref()
    }
}

/// Origins allowed to call the API from a browser. Empty disables CORS;
/// `*` allows any origin.
#[derive(Debug, Clone, Default)]
pub struct CorsConfig {
    pub origins: Vec<String>,
}

fn cors_layer(cfg: &CorsConfig) -> Option<CorsLayer> {
    if cfg.origins.is_empty() {
        return None;
    }
    let base = CorsLayer::new()
        .allow_methods([
            Method::GET,
            Method::POST,
            Method::PUT,
            Method::PATCH,
            Method::DELETE,
        ])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    if cfg.origins.iter().any(|o| o == "*") {
        return Some(base.allow_origin(Any));
    }
    let origins: Vec<HeaderValue> = cfg
        .origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    Some(base.allow_origin(AllowOrigin::list(origins)))
}

/// Every route: (method, path, summary).
pub const ENDPOINTS: &[(&str, &str, &str)] = &[
    ("GET", "/api/v1", "this listing"),
    ("GET", "/api/v1/health", "build and schema version"),
    (
        "GET",
        "/api/v1/taxonomy",
        "software-engineering task taxonomy",
    ),
    (
        "GET",
        "/api/v1/models",
        "filtered, sorted, paginated models",
    ),
    (
        "GET",
        "/api/v1/datasets",
        "filtered, sorted, paginated datasets",
    ),
    ("GET", "/api/v1/assets/{asset_id}", "full catalogue record"),
    (
        "POST",
        "/api/v1/assets/{asset_id}/refresh",
        "on-demand metrics refresh",
    ),
    (
        "GET",
        "/api/v1/leaderboard",
        "ranking for benchmark + metric (+ implementation, language, metric_config, name_search)",
    ),
    (
        "GET",
        "/api/v1/leaderboard/filters/{dimension}",
        "distinct values of one leaderboard filter",
    ),
    (
        "GET",
        "/api/v1/leaderboard/trends",
        "score series over time or model size (axis=time|model_size)",
    ),
    (
        "GET",
        "/api/v1/export",
        "full match set as csv, json or xml (format=...)",
    ),
    ("POST", "/api/v1/auth/register", "create an account"),
    (
        "POST",
        "/api/v1/auth/login",
        "exchange credentials for a session token",
    ),
    (
        "POST",
        "/api/v1/auth/logout",
        "revoke the current session token",
    ),
    ("GET", "/api/v1/lists", "caller's saved lists"),
    ("POST", "/api/v1/lists", "create a saved list"),
    ("GET", "/api/v1/lists/{list_id}", "one saved list"),
    ("PATCH", "/api/v1/lists/{list_id}", "rename a saved list"),
    ("DELETE", "/api/v1/lists/{list_id}", "delete a saved list"),
    (
        "POST",
        "/api/v1/lists/{list_id}/items",
        "add an asset to a list",
    ),
    (
        "DELETE",
        "/api/v1/lists/{list_id}/items/{asset_id}",
        "remove an asset from a list",
    ),
    ("GET", "/api/v1/preferences", "caller's alert preferences"),
    (
        "PUT",
        "/api/v1/preferences",
        "create or replace a named preference",
    ),
    (
        "DELETE",
        "/api/v1/preferences/{preference_id}",
        "delete a preference",
    ),
    ("GET", "/api/v1/notifications", "caller's notification feed"),
    (
        "POST",
        "/api/v1/notifications/{notification_id}/read",
        "mark a notification read",
    ),
];

pub fn router(state: AppState, cors: &CorsConfig) -> Router {
    let api = Router::new()
        .route("/", get(index))
        .route("/health", get(health))
        .route("/taxonomy", get(taxonomy))
        .route("/models", get(models))
        .route("/datasets", get(datasets))
        .route("/assets/{*rest}", get(asset).post(asset_action))
        .route("/leaderboard", get(leaderboard))
        .route("/leaderboard/filters/{dimension}", get(leaderboard_filters))
        .route("/leaderboard/trends", get(leaderboard_trends))
        .route("/export", get(export_assets))
        .route("/auth/register", post(register))
        .route("/auth/login", post(login))
        .route("/auth/logout", post(logout))
        .route("/lists", get(lists).post(create_list))
        .route(
            "/lists/{list_id}",
            get(get_list).patch(rename_list).delete(delete_list),
        )
        .route("/lists/{list_id}/items", post(add_item))
        .route(
            "/lists/{list_id}/items/{*asset_id}",
            axum::routing::delete(remove_item),
        )
        .route("/preferences", put(put_preference).get(preferences))
        .route(
            "/preferences/{preference_id}",
            axum::routing::delete(delete_preference),
        )
        .route("/notifications", get(notifications))
        .route("/notifications/{notification_id}/read", post(mark_read))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such route") })
        .with_state(state);
    let app = Router::new().nest("/api/v1", api);
    match cors_layer(cors) {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

/// Runs blocking store or hashing work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorCode::StoreUnavailable, e.to_string()))?
}

async fn index() -> Json<serde_json::Value> {
    let routes: Vec<_> = ENDPOINTS
        .iter()
        .map(|(m, p, s)| json!({"method": m, "path": p, "summary": s}))
        .collect();
    let codes: Vec<_> = ErrorCode::ALL
        .iter()
        .map(|c| json!({"code": c, "status": c.status().as_u16()}))
        .collect();
    Json(json!({"version": "v1", "endpoints": routes, "error_codes": codes}))
}

async fn health(State(s): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let store = s.store().clone();
    let schema = blocking(move || Ok(store.schema_version()?)).await?;
    Ok(Json(json!({
        "status": "ok",
        "build": env!("CARGO_PKG_VERSION"),
        "schema_version": schema,
        "latest_schema_version": SCHEMA_VERSION,
    })))
}

async fn taxonomy(State(s): State<AppState>) -> Json<Vec<TaxonomyEntry>> {
    Json(s.taxonomy().entries().to_vec())
}

async fn search(s: AppState, kind: AssetKind, mut pairs: Pairs) -> ApiResult<Response> {
    if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "kind") {
        if v.parse::<AssetKind>().ok() != Some(kind) {
            return Err(InvalidQuery::single("kind", "does not match the endpoint").into());
        }
    } else {
        pairs.push(("kind".into(), kind.as_str().into()));
    }
    let query = from_query_pairs(&pairs)?;
    let store = s.store().clone();
    let page = blocking(move || {
        let snap = store.snapshot()?;
        Ok(apply_filters(&query, snap.assets())?)
    })
    .await?;
    Ok(Json(page).into_response())
}

async fn models(State(s): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let pairs = query_pairs(raw);
    search(s, AssetKind::Model, pairs).await
}

async fn datasets(State(s): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let pairs = query_pairs(raw);
    search(s, AssetKind::Dataset, pairs).await
}

async fn asset(State(s): State<AppState>, Path(rest): Path<String>) -> ApiResult<Response> {
    let id = AssetId::from(rest.as_str());
    let store = s.store().clone();
    blocking(move || {
        let snap = store.snapshot()?;
        match snap.get(&id) {
            Some(a) => Ok(Json(a.clone()).into_response()),
            None => Err(ApiError::not_found(format!("asset {id}"))),
        }
    })
    .await
}

async fn asset_action(State(s): State<AppState>, Path(rest): Path<String>) -> ApiResult<Response> {
    let Some(id) = rest.strip_suffix("/refresh") else {
        return Err(ApiError::new(ErrorCode::NotFound, "no such route"));
    };
    let id = AssetId::from(id);
    blocking(
        move || match refresh_asset_now(&s.0.pipeline, &s.0.providers, &id) {
            Ok(a) => Ok(Json(a).into_response()),
            Err(RefreshNowError::UnknownAsset(id)) => {
                Err(ApiError::not_found(format!("asset {id}")))
            }
            Err(RefreshNowError::Provider(ProviderError::RateBudgetExhausted(wait))) => {
                let mut e = ApiError::new(
                    ErrorCode::RateLimited,
                    format!(
                        "provider budget exhausted; retry in {:.1} s",
                        wait.as_secs_f64()
                    ),
                );
                e.retry_after = Some(wait);
                Err(e)
            }
            Err(RefreshNowError::Provider(ProviderError::NotFound(what))) => {
                Err(ApiError::not_found(format!("{what} upstream")))
            }
            Err(RefreshNowError::Store(e)) => Err(e.into()),
            Err(e) => Err(ApiError::new(ErrorCode::StoreUnavailable, e.to_string())),
        },
    )
    .await
}

/// The five leaderboard filters and name search, plus any `extra` keys the
/// endpoint accepts. Unknown keys are rejected.
fn leaderboard_query(
    pairs: &Pairs,
    extra: &[&str],
) -> ApiResult<(LeaderboardQuery, Vec<(String, String)>)> {
    let mut q = LeaderboardQuery::default();
    let mut rest = Vec::new();
    let mut errors = InvalidQuery::default();
    for (k, v) in pairs {
        let v = v.trim();
        let slot = match k.as_str() {
            "benchmark" => &mut q.benchmark,
            "implementation" => &mut q.implementation,
            "language" => &mut q.language,
            "metric" => &mut q.metric_name,
            "metric_config" => &mut q.metric_config,
            "name_search" => &mut q.name_search,
            other if extra.contains(&other) => {
                rest.push((k.clone(), v.to_string()));
                continue;
            }
            other => {
                errors.add(other, "unknown parameter");
                continue;
            }
        };
        if slot.is_some() {
            errors.add(k, "given more than once");
        } else if !v.is_empty() {
            *slot = Some(v.to_string());
        }
    }
    if errors.field_errors.is_empty() {
        Ok((q, rest))
    } else {
        Err(errors.into())
    }
}

async fn leaderboard(State(s): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let (q, _) = leaderboard_query(&query_pairs(raw), &[])?;
    blocking(move || {
        let snap = s.store().snapshot()?;
        let ranking = snap.leaderboard(s.registry()).rank(&q)?;
        Ok(Json(ranking).into_response())
    })
    .await
}

async fn leaderboard_filters(
    State(s): State<AppState>,
    Path(dimension): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    let dim: FilterDimension = dimension
        .parse()
        .map_err(|e: String| ApiError::not_found(e))?;
    let (q, _) = leaderboard_query(&query_pairs(raw), &[])?;
    blocking(move || {
        let snap = s.store().snapshot()?;
        let values = snap.leaderboard(s.registry()).list_filter_values(dim, &q);
        Ok(Json(values).into_response())
    })
    .await
}

async fn leaderboard_trends(
    State(s): State<AppState>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    let (q, rest) = leaderboard_query(&query_pairs(raw), &["axis"])?;
    let axis = match rest.iter().find(|(k, _)| k == "axis") {
        None => TrendAxis::Time,
        Some((_, v)) => v
            .parse::<TrendAxis>()
            .map_err(|e| ApiError::from(InvalidQuery::single("axis", &e)))?,
    };
    blocking(move || {
        let snap = s.store().snapshot()?;
        let points = snap.leaderboard(s.registry()).trend_series(&q, axis)?;
        Ok(Json(points).into_response())
    })
    .await
}

async fn export_assets(State(s): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let mut format = None;
    let mut rest = Vec::new();
    for (k, v) in query_pairs(raw) {
        if k == "format" {
            format = Some(v);
        } else {
            rest.push((k, v));
        }
    }
    let format: ExportFormat = format
        .ok_or_else(|| {
            ApiError::from(InvalidQuery::single("format", "required: csv, json or xml"))
        })?
        .parse()?;
    let query = from_query_pairs(&rest)?;
    blocking(move || {
        let snap = s.store().snapshot()?;
        let out = export(&query, snap.assets(), format)?;
        let disposition = format!(
            "attachment; filename=\"{}s.{}\"",
            query.kind,
            format.extension()
        );
        Ok((
            [
                (header::CONTENT_TYPE, out.media_type.to_string()),
                (header::CONTENT_DISPOSITION, disposition),
            ],
            out.bytes,
        )
            .into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Credentials {
    email: String,
    secret: String,
}

fn json_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::invalid_request(format!("invalid JSON body: {e}")))
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(|t| t.trim().to_string())
}

fn authenticate(s: &AppState, headers: &HeaderMap) -> ApiResult<UserAccount> {
    let token = bearer(headers)
        .ok_or_else(|| ApiError::new(ErrorCode::Unauthenticated, "bearer token required"))?;
    Ok(s.workspace().authenticate(&token, s.clock().now())?)
}

async fn register(State(s): State<AppState>, body: axum::body::Bytes) -> ApiResult<Response> {
    let c: Credentials = json_body(&body)?;
    blocking(move || {
        let account = s
            .workspace()
            .register(&c.email, &c.secret, s.clock().now())?;
        Ok((StatusCode::CREATED, Json(account)).into_response())
    })
    .await
}

async fn login(State(s): State<AppState>, body: axum::body::Bytes) -> ApiResult<Response> {
    let c: Credentials = json_body(&body)?;
    blocking(move || {
        let session = s.workspace().login(&c.email, &c.secret, s.clock().now())?;
        Ok(Json(session).into_response())
    })
    .await
}

async fn logout(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    blocking(move || {
        authenticate(&s, &headers)?;
        let token = bearer(&headers).unwrap_or_default();
        s.workspace().logout(&token)?;
        Ok(StatusCode::NO_CONTENT.into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TitleBody {
    title: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemBody {
    asset_id: AssetId,
}

async fn lists(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        Ok(Json(s.workspace().lists(user.user_id)?).into_response())
    })
    .await
}

async fn create_list(
    State(s): State<AppState>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        let b: TitleBody = json_body(&body)?;
        let list = s.workspace().create_list(user.user_id, &b.title)?;
        Ok((StatusCode::CREATED, Json(list)).into_response())
    })
    .await
}

async fn get_list(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(list_id): Path<String>,
) -> ApiResult<Response> {
    let list_id = parse_id("list", &list_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        Ok(Json(s.workspace().get_list(user.user_id, list_id)?).into_response())
    })
    .await
}

async fn rename_list(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(list_id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    let list_id = parse_id("list", &list_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        let b: TitleBody = json_body(&body)?;
        Ok(Json(s.workspace().rename_list(user.user_id, list_id, &b.title)?).into_response())
    })
    .await
}

async fn delete_list(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(list_id): Path<String>,
) -> ApiResult<Response> {
    let list_id = parse_id("list", &list_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        s.workspace().delete_list(user.user_id, list_id)?;
        Ok(StatusCode::NO_CONTENT.into_response())
    })
    .await
}

async fn add_item(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(list_id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    let list_id = parse_id("list", &list_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        let b: ItemBody = json_body(&body)?;
        Ok(Json(s.workspace().add_item(user.user_id, list_id, &b.asset_id)?).into_response())
    })
    .await
}

async fn remove_item(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path((list_id, asset_id)): Path<(String, String)>,
) -> ApiResult<Response> {
    let list_id = parse_id("list", &list_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        let id = AssetId::from(asset_id.as_str());
        Ok(Json(s.workspace().remove_item(user.user_id, list_id, &id)?).into_response())
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreferenceBody {
    name: String,
    criteria: PreferenceCriteria,
}

async fn put_preference(
    State(s): State<AppState>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        let b: PreferenceBody = json_body(&body)?;
        Ok(Json(
            s.workspace()
                .put_preference(user.user_id, &b.name, b.criteria)?,
        )
        .into_response())
    })
    .await
}

async fn preferences(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        Ok(Json(s.workspace().preferences(user.user_id)?).into_response())
    })
    .await
}

async fn delete_preference(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(preference_id): Path<String>,
) -> ApiResult<Response> {
    let preference_id = parse_id("preference", &preference_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        s.workspace()
            .delete_preference(user.user_id, preference_id)?;
        Ok(StatusCode::NO_CONTENT.into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedParams {
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_feed_limit")]
    limit: usize,
}

fn default_feed_limit() -> usize {
    50
}

async fn notifications(
    State(s): State<AppState>,
    headers: HeaderMap,
    params: Result<Query<FeedParams>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let Query(p) =
        params.map_err(|e| ApiError::from(InvalidQuery::single("query", &e.body_text())))?;
    if p.limit == 0 || p.limit > crate::query::MAX_PAGE_LIMIT {
        return Err(InvalidQuery::single("limit", "must be between 1 and 500").into());
    }
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        Ok(Json(
            s.workspace()
                .notifications(user.user_id, p.offset, p.limit)?,
        )
        .into_response())
    })
    .await
}

async fn mark_read(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(notification_id): Path<String>,
) -> ApiResult<Response> {
    let notification_id = parse_id("notification", &notification_id)?;
    blocking(move || {
        let user = authenticate(&s, &headers)?;
        s.workspace().mark_read(user.user_id, notification_id)?;
        Ok(StatusCode::NO_CONTENT.into_response())
    })
    .await
}
