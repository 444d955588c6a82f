//! HTTP JSON API.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/healthz` | liveness |
//! | GET | `/api/datasets` | filtered, paginated search |
//! | POST | `/api/datasets` | multipart submission, answers `202` |
//! | GET | `/api/datasets/recent?n=` | newest approved records |
//! | GET | `/api/datasets/popular?n=` | most viewed approved records |
//! | GET | `/api/datasets/{slug}` | detail; counts one view |
//! | GET | `/api/markers?bbox=s,w,n,e` | map markers |
//! | GET | `/api/markers/at?lat=&lon=` | records co-located with a marker |
//! | GET | `/api/compare?ids=a,b` | comparison table |
//! | GET | `/api/teasers/{id}` | teaser image |
//! | GET | `/api/admin/datasets?status=` | moderation queue |
//! | POST | `/api/admin/datasets/{id}/approve` | |
//! | POST | `/api/admin/datasets/{id}/reject` | optional `{"reason": "..."}` |
//!
//! Admin routes need `Authorization: Bearer <token>`.

mod auth;
mod error;
mod handlers;
mod limit;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::CorsLayer;
use tracing::info;

pub use auth::authorize_moderator;
pub use error::ApiError;
pub use limit::RateLimiter;

use crate::clock::{Clock, SystemClock};
use crate::config::{ApiConfig, ConfigError, ModeratorToken};
use crate::geocode::Geocoder;
use crate::store::{Store, StoreError};

/// Bounds for `n` on the ranking endpoints.
pub const DEFAULT_RANK_N: usize = 5;
pub const MAX_RANK_N: usize = 50;

/// Runtime settings the handlers need.
#[derive(Debug, Clone)]
pub struct Settings {
    pub moderators: Vec<ModeratorToken>,
    pub submissions_per_hour: u32,
    pub max_upload_bytes: usize,
    pub colocation_radius_km: f64,
    pub cors_origins: Vec<String>,
}

impl From<&ApiConfig> for Settings {
    fn from(c: &ApiConfig) -> Self {
        Self {
            moderators: c.moderators.clone(),
            submissions_per_hour: c.submissions_per_hour,
            max_upload_bytes: c.max_upload_bytes,
            colocation_radius_km: c.colocation_radius_km,
            cors_origins: c.cors_origins.clone(),
        }
    }
}

pub(crate) struct Inner {
    pub store: Arc<Store>,
    pub geocoder: Arc<Geocoder>,
    pub settings: Settings,
    pub limiter: RateLimiter,
}

#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    pub fn new(store: Arc<Store>, geocoder: Arc<Geocoder>, settings: Settings) -> Self {
        let limiter = RateLimiter::per_hour(settings.submissions_per_hour);
        Self(Arc::new(Inner {
            store,
            geocoder,
            settings,
            limiter,
        }))
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.0.store
    }
}

fn cors(origins: &[String]) -> Result<Option<CorsLayer>, ConfigError> {
    if origins.is_empty() {
        return Ok(None);
    }
    let parsed = origins
        .iter()
        .map(|o| {
            HeaderValue::from_str(o).map_err(|_| {
                ConfigError::Invalid(format!("cors origin `{o}` is not a valid header value"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(
        CorsLayer::new()
            .allow_origin(parsed)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
    ))
}

pub fn router(state: AppState) -> Result<Router, ConfigError> {
    let cors = cors(&state.0.settings.cors_origins)?;
    let limit = state.0.settings.max_upload_bytes;
    let app = Router::new()
        .route("/healthz", get(handlers::healthz))
        .route(
            "/api/datasets",
            get(handlers::list_datasets).post(handlers::submit_dataset),
        )
        .route("/api/datasets/recent", get(handlers::recent))
        .route("/api/datasets/popular", get(handlers::popular))
        .route("/api/datasets/{slug}", get(handlers::dataset_detail))
        .route("/api/markers", get(handlers::markers))
        .route("/api/markers/at", get(handlers::markers_at))
        .route("/api/compare", get(handlers::compare))
        .route("/api/teasers/{id}", get(handlers::teaser))
        .route("/api/admin/datasets", get(handlers::admin_list))
        .route("/api/admin/datasets/{id}/approve", post(handlers::approve))
        .route("/api/admin/datasets/{id}/reject", post(handlers::reject))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    Ok(match cors {
        Some(layer) => app.layer(layer),
        None => app,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("StorageFailure: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs the server until Ctrl-C or SIGTERM, then compacts the store.
pub async fn serve(config: ApiConfig) -> Result<(), ServeError> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open(&config.data_dir, clock)?);
    let geocoder = Arc::new(config.geocoder.build()?);
    let state = AppState::new(store.clone(), geocoder, Settings::from(&config));
    let app = router(state)?;

    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    axum::serve(
        listener,
        app.into_make_service_with_connect_info::<SocketAddr>(),
    )
    .with_graceful_shutdown(shutdown_signal())
    .await?;

    info!("shutting down");
    store.compact()?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}
