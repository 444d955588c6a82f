use std::net::{IpAddr, Ipv4Addr, SocketAddr};

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::{ConnectInfo, FromRequestParts, Multipart, Path, RawQuery, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use eod_core::params::ParamError;
use eod_core::{
    build_comparison, execute_query, markers as core_markers, parse_query_params, rank_popular,
    rank_recent, records_near_marker, validate_submission, BadParam, BoundingBox, DatasetId,
    DatasetRecord, Decision, GeoPoint, PublicRecordView, RawDraft, RawValue, Status,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{authorize_moderator, ApiError, AppState, DEFAULT_RANK_N, MAX_RANK_N};

/// Peer address of the connection, or `0.0.0.0` when the server was not
/// started with connect info (as in in-process tests).
pub struct ClientIp(pub IpAddr);

impl<S: Send + Sync> FromRequestParts<S> for ClientIp {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        Ok(ClientIp(
            parts
                .extensions
                .get::<ConnectInfo<SocketAddr>>()
                .map_or(IpAddr::V4(Ipv4Addr::UNSPECIFIED), |c| c.0.ip()),
        ))
    }
}

fn query_pairs(raw: &Option<String>) -> Vec<(String, String)> {
    raw.as_deref()
        .map(|q| form_urlencoded::parse(q.as_bytes()).into_owned().collect())
        .unwrap_or_default()
}

fn bad_param(param: &str, reason: impl Into<String>) -> ApiError {
    ApiError::BadParam(BadParam(vec![ParamError {
        param: param.to_string(),
        reason: reason.into(),
    }]))
}

/// The single value of `name`, rejecting repeats.
fn single<'a>(pairs: &'a [(String, String)], name: &str) -> Result<Option<&'a str>, ApiError> {
    let mut values = pairs
        .iter()
        .filter(|(k, _)| k == name)
        .map(|(_, v)| v.as_str());
    let first = values.next();
    if values.next().is_some() {
        return Err(bad_param(name, "given more than once"));
    }
    Ok(first.filter(|v| !v.trim().is_empty()))
}

fn parse_f64(pairs: &[(String, String)], name: &str) -> Result<f64, ApiError> {
    single(pairs, name)?
        .ok_or_else(|| bad_param(name, "required"))?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| bad_param(name, "not a number"))
}

fn views<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Vec<PublicRecordView> {
    records
        .into_iter()
        .map(PublicRecordView::from_record)
        .collect()
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

pub async fn healthz() -> &'static str {
    "ok"
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ListResponse {
    pub total: usize,
    pub page: u32,
    pub per_page: u32,
    pub items: Vec<PublicRecordView>,
}

pub async fn list_datasets(
    State(state): State<AppState>,
    RawQuery(raw): RawQuery,
) -> Result<Json<ListResponse>, ApiError> {
    let filters = parse_query_params(&query_pairs(&raw))?;
    let response = state.0.store.read(|c| {
        let page = execute_query(&filters, c.records());
        ListResponse {
            total: page.total_matches,
            page: page.page,
            per_page: page.per_page,
            items: views(page.items),
        }
    });
    Ok(Json(response))
}

fn rank_n(raw: &Option<String>) -> Result<usize, ApiError> {
    let pairs = query_pairs(raw);
    match single(&pairs, "n")? {
        None => Ok(DEFAULT_RANK_N),
        Some(v) => v
            .trim()
            .parse::<i64>()
            .map(|n| n.clamp(1, MAX_RANK_N as i64) as usize)
            .map_err(|_| bad_param("n", "not an integer")),
    }
}

pub async fn recent(
    State(state): State<AppState>,
    RawQuery(raw): RawQuery,
) -> Result<Json<serde_json::Value>, ApiError> {
    let n = rank_n(&raw)?;
    let items = state.0.store.read(|c| views(rank_recent(c.records(), n)));
    Ok(Json(json!({ "items": items })))
}

pub async fn popular(
    State(state): State<AppState>,
    RawQuery(raw): RawQuery,
) -> Result<Json<serde_json::Value>, ApiError> {
    let n = rank_n(&raw)?;
    let items = state.0.store.read(|c| views(rank_popular(c.records(), n)));
    Ok(Json(json!({ "items": items })))
}

pub async fn dataset_detail(
    State(state): State<AppState>,
    Path(slug): Path<String>,
) -> Result<Json<PublicRecordView>, ApiError> {
    let store = state.0.store.clone();
    let record = blocking(move || Ok(store.view_by_slug(&slug)?)).await?;
    Ok(Json(PublicRecordView::from_record(&record)))
}

async fn read_multipart(mut multipart: Multipart, limit: usize) -> Result<RawDraft, ApiError> {
    let too_large = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::PayloadTooLarge { limit }
        } else {
            ApiError::BadRequest(e.body_text())
        }
    };
    let mut raw = RawDraft::new();
    while let Some(field) = multipart.next_field().await.map_err(too_large)? {
        let Some(name) = field.name().map(str::to_string) else {
            continue;
        };
        let is_file = field.file_name().is_some();
        let media_type = field.content_type().map(str::to_string);
        let bytes = field.bytes().await.map_err(too_large)?.to_vec();
        let value = if is_file {
            RawValue::File {
                media_type: media_type.unwrap_or_default(),
                bytes,
            }
        } else {
            RawValue::Text(bytes)
        };
        raw.push(name, value);
    }
    Ok(raw)
}

pub async fn submit_dataset(
    State(state): State<AppState>,
    ClientIp(ip): ClientIp,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Response, ApiError> {
    let inner = &state.0;
    let now = inner.store.clock().now();
    inner
        .limiter
        .check(ip, now)
        .map_err(|retry_after_secs| ApiError::RateLimited { retry_after_secs })?;

    let multipart = multipart.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let raw = read_multipart(multipart, inner.settings.max_upload_bytes).await?;
    let draft = validate_submission(&raw, now.date_naive())?;
    let (location, flags) = inner.geocoder.resolve(&draft.location).await;

    let store = inner.store.clone();
    let submitted = blocking(move || Ok(store.submit(draft, location, flags)?)).await?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "id": submitted.id, "status": Status::Pending })),
    )
        .into_response())
}

pub async fn markers(
    State(state): State<AppState>,
    RawQuery(raw): RawQuery,
) -> Result<Json<serde_json::Value>, ApiError> {
    let pairs = query_pairs(&raw);
    let bbox = match single(&pairs, "bbox")? {
        None => None,
        Some(text) => {
            let parts: Vec<f64> = text
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad_param("bbox", "expected south,west,north,east"))?;
            let [s, w, n, e] = parts[..] else {
                return Err(bad_param("bbox", "expected south,west,north,east"));
            };
            Some(BoundingBox::new(s, w, n, e).map_err(|e| bad_param("bbox", e.to_string()))?)
        }
    };
    let markers = state
        .0
        .store
        .read(|c| core_markers(c.records(), bbox.as_ref()));
    Ok(Json(json!({ "markers": markers })))
}

pub async fn markers_at(
    State(state): State<AppState>,
    RawQuery(raw): RawQuery,
) -> Result<Json<serde_json::Value>, ApiError> {
    let pairs = query_pairs(&raw);
    let (lat, lon) = (parse_f64(&pairs, "lat"), parse_f64(&pairs, "lon"));
    let (lat, lon) = match (lat, lon) {
        (Ok(lat), Ok(lon)) => (lat, lon),
        (Err(ApiError::BadParam(mut a)), Err(ApiError::BadParam(b))) => {
            a.0.extend(b.0);
            return Err(ApiError::BadParam(a));
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let point = GeoPoint::new(lat, lon).map_err(|e| bad_param("lat", e.to_string()))?;
    let radius = state.0.settings.colocation_radius_km;
    let items = state.0.store.read(|c| {
        records_near_marker(c.records(), point, radius)
            .iter()
            .filter_map(|id| c.get(id).map(PublicRecordView::from_record))
            .collect::<Vec<_>>()
    });
    Ok(Json(json!({ "radius_km": radius, "items": items })))
}

pub async fn compare(
    State(state): State<AppState>,
    RawQuery(raw): RawQuery,
) -> Result<Response, ApiError> {
    let ids: Vec<DatasetId> = query_pairs(&raw)
        .into_iter()
        .filter(|(k, _)| k == "ids")
        .flat_map(|(_, v)| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(DatasetId::from)
                .collect::<Vec<_>>()
        })
        .collect();
    let table = state
        .0
        .store
        .read(|c| build_comparison(&ids, c.records()))?;
    Ok(Json(table).into_response())
}

pub async fn teaser(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let id = DatasetId::new(id);
    let public = state
        .0
        .store
        .read(|c| c.get(&id).is_some_and(DatasetRecord::is_public));
    if !public {
        return Err(ApiError::NotFound);
    }
    let store = state.0.store.clone();
    let (media_type, bytes) = blocking(move || store.teaser(&id).ok_or(ApiError::NotFound)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, media_type.as_str()),
            (header::CACHE_CONTROL, "public, max-age=86400"),
        ],
        bytes,
    )
        .into_response())
}

fn moderator(state: &AppState, headers: &HeaderMap) -> Result<String, ApiError> {
    let authorization = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok());
    authorize_moderator(authorization, &state.0.settings.moderators)
        .map(str::to_string)
        .ok_or(ApiError::Unauthorized)
}

pub async fn admin_list(
    State(state): State<AppState>,
    headers: HeaderMap,
    RawQuery(raw): RawQuery,
) -> Result<Json<serde_json::Value>, ApiError> {
    moderator(&state, &headers)?;
    let pairs = query_pairs(&raw);
    let wanted = match single(&pairs, "status")? {
        None | Some("pending") => Some(Status::Pending),
        Some("approved") => Some(Status::Approved),
        Some("rejected") => Some(Status::Rejected),
        Some("all") => None,
        Some(_) => {
            return Err(bad_param(
                "status",
                "expected pending, approved, rejected or all",
            ))
        }
    };
    let items: Vec<DatasetRecord> = state.0.store.read(|c| {
        let mut items: Vec<DatasetRecord> = c
            .records()
            .filter(|r| wanted.is_none_or(|s| r.status == s))
            .cloned()
            .collect();
        items.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        items
    });
    Ok(Json(json!({ "items": items })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RejectBody {
    reason: Option<String>,
}

async fn decide(
    state: AppState,
    headers: &HeaderMap,
    id: String,
    decision: Decision,
    reason: Option<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let moderator_id = moderator(&state, headers)?;
    let store = state.0.store.clone();
    let id = DatasetId::new(id);
    let status = {
        let id = id.clone();
        blocking(move || Ok(store.moderate(&id, decision, &moderator_id, reason)?)).await?
    };
    Ok(Json(json!({ "id": id, "status": status })))
}

pub async fn approve(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    decide(state, &headers, id, Decision::Approve, None).await
}

pub async fn reject(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    moderator(&state, &headers)?;
    let body: RejectBody = if body.iter().all(u8::is_ascii_whitespace) {
        RejectBody::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?
    };
    let reason = body.reason.filter(|r| !r.trim().is_empty());
    decide(state, &headers, id, Decision::Reject, reason).await
}
