#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use eod::clock::ManualClock;
use eod::store::Store;
use eod_core::{validate_submission, RawDraft, ValidatedDraft};

/// Smallest byte string that passes the PNG signature check.
pub const PNG: &[u8] = b"\x89PNG\r\n\x1a\n\0\0\0\rIHDR";

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap()
}

pub fn today() -> NaiveDate {
    t0().date_naive()
}

pub fn ticking_clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::with_tick(t0(), Duration::seconds(1)))
}

/// Form fields for a complete single-location submission.
pub fn raw_draft(name: &str, url: &str) -> RawDraft {
    let mut raw = RawDraft::new();
    raw.text("submitter_name", "Grace Submitter")
        .text("submitter_email", "grace@example.org")
        .text("name", name)
        .text("published_on", "2024-05-01")
        .text("address", "Berlin, Germany")
        .text("lat", "52.52")
        .text("lon", "13.405")
        .text("sensors", "sar")
        .text("sensors", "optical")
        .text("tasks", "semantic_segmentation")
        .text("size_value", "1.5")
        .text("size_unit", "GB")
        .text("download_url", url)
        .file("teaser", "image/png", PNG.to_vec())
        .text("description", "Synthetic test dataset.");
    raw
}

pub fn draft(name: &str, url: &str) -> ValidatedDraft {
    validate_submission(&raw_draft(name, url), today()).expect("fixture draft is valid")
}

pub fn submit(store: &Store, name: &str) -> eod::store::Submitted {
    let d = draft(
        name,
        &format!("https://data.example.org/{}", name.replace(' ', "-")),
    );
    let location = match &d.location {
        eod_core::DraftLocation::Address {
            address,
            point: Some(p),
        } => eod_core::LocationSpec::Single {
            address: address.clone(),
            point: *p,
        },
        other => panic!("unexpected location {other:?}"),
    };
    store
        .submit(d, location, Default::default())
        .expect("submit")
}

pub const TOKEN: &str = "moderator-secret";

pub fn settings() -> eod::api::Settings {
    eod::api::Settings {
        moderators: vec![eod::config::ModeratorToken {
            label: "mod-a".into(),
            token: TOKEN.into(),
        }],
        submissions_per_hour: 1000,
        max_upload_bytes: 4 * 1024 * 1024,
        colocation_radius_km: 25.0,
        cors_origins: vec![],
    }
}

pub struct TestApp {
    pub router: axum::Router,
    pub store: Arc<Store>,
    pub clock: Arc<ManualClock>,
}

impl TestApp {
    pub fn new() -> Self {
        Self::with(settings())
    }

    pub fn with(settings: eod::api::Settings) -> Self {
        let clock = ticking_clock();
        Self::on(Arc::new(Store::in_memory(clock.clone())), clock, settings)
    }

    pub fn on(store: Arc<Store>, clock: Arc<ManualClock>, settings: eod::api::Settings) -> Self {
        let geocoder = Arc::new(eod::geocode::Geocoder::new(
            eod::geocode::FixtureGeocoder::bundled(),
        ));
        let state = eod::api::AppState::new(store.clone(), geocoder, settings);
        Self {
            router: eod::api::router(state).unwrap(),
            store,
            clock,
        }
    }

    pub async fn send(&self, request: axum::http::Request<axum::body::Body>) -> Reply {
        use http_body_util::BodyExt;
        use tower::ServiceExt;
        let response = self.router.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let headers = response.headers().clone();
        let body = response
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        Reply {
            status,
            headers,
            body,
        }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(
            axum::http::Request::get(uri)
                .body(axum::body::Body::empty())
                .unwrap(),
        )
        .await
    }

    pub async fn admin(&self, method: &str, uri: &str, token: Option<&str>, body: &str) -> Reply {
        let mut req = axum::http::Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        self.send(req.body(axum::body::Body::from(body.to_string())).unwrap())
            .await
    }

    pub async fn approve(&self, id: &str) -> Reply {
        self.admin(
            "POST",
            &format!("/api/admin/datasets/{id}/approve"),
            Some(TOKEN),
            "",
        )
        .await
    }

    pub async fn submit(&self, raw: &RawDraft) -> Reply {
        self.submit_from(raw, None).await
    }

    pub async fn submit_from(&self, raw: &RawDraft, ip: Option<std::net::IpAddr>) -> Reply {
        let (content_type, body) = multipart(raw);
        let mut req = axum::http::Request::post("/api/datasets")
            .header("content-type", content_type)
            .body(axum::body::Body::from(body))
            .unwrap();
        if let Some(ip) = ip {
            req.extensions_mut()
                .insert(axum::extract::ConnectInfo(std::net::SocketAddr::new(
                    ip, 40000,
                )));
        }
        self.send(req).await
    }
}

pub struct Reply {
    pub status: axum::http::StatusCode,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

const BOUNDARY: &str = "----eod-test-boundary-7MA4YWxkTrZu0gW";

/// Encodes a draft as multipart/form-data; files get a filename so they arrive as uploads.
pub fn multipart(raw: &RawDraft) -> (String, Vec<u8>) {
    let mut body = Vec::new();
    for (name, value) in raw.entries() {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match value {
            eod_core::RawValue::Text(bytes) => {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes(),
                );
                body.extend_from_slice(bytes);
            }
            eod_core::RawValue::File { media_type, bytes } => {
                body.extend_from_slice(
                    format!(
                        "Content-Disposition: form-data; name=\"{name}\"; filename=\"upload\"\r\nContent-Type: {media_type}\r\n\r\n"
                    )
                    .as_bytes(),
                );
                body.extend_from_slice(bytes);
            }
        }
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={BOUNDARY}"), body)
}

/// Every documented failure and the status it maps to.
pub fn error_status_table() -> Vec<(eod::api::ApiError, u16)> {
    use eod::api::ApiError;
    use eod::store::StoreError;
    use eod_core::params::ParamError;
    use eod_core::CompareError;
    let id = eod_core::DatasetId::from("x");
    let validation = eod_core::ValidationErrors(vec![]);
    let bad_param = eod_core::BadParam(vec![ParamError {
        param: "near".into(),
        reason: "lat out of range".into(),
    }]);
    vec![
        (ApiError::Validation(validation), 400),
        (ApiError::BadParam(bad_param), 400),
        (ApiError::Compare(CompareError::TooFewIds), 400),
        (
            ApiError::Compare(CompareError::DuplicateId(id.clone())),
            400,
        ),
        (ApiError::Compare(CompareError::UnknownId(id.clone())), 404),
        (ApiError::Compare(CompareError::NotPublic(id.clone())), 404),
        (ApiError::BadRequest("x".into()), 400),
        (ApiError::Unauthorized, 401),
        (ApiError::NotFound, 404),
        (StoreError::UnknownId("x".into()).into(), 404),
        (StoreError::UnknownSlug("x".into()).into(), 404),
        (StoreError::NotPublic(id.clone()).into(), 404),
        (
            StoreError::InvalidTransition {
                id,
                status: eod_core::Status::Approved,
            }
            .into(),
            409,
        ),
        (StoreError::NonEmptyStore(1).into(), 409),
        (ApiError::PayloadTooLarge { limit: 1 }, 413),
        (
            ApiError::RateLimited {
                retry_after_secs: 1,
            },
            429,
        ),
        (
            StoreError::Storage(std::io::Error::other("disk")).into(),
            500,
        ),
    ]
}
