use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use axum::extract::Query;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use eod::geocode::{
    FixtureGeocoder, GeocodeError, GeocodeResult, Geocoder, GeocoderClient, HttpGeocoder,
    HttpGeocoderConfig,
};
use eod_core::validate::DraftLocation;
use eod_core::{GeoPoint, LocationSpec, ReviewFlag};
use serde_json::json;

#[tokio::test]
async fn bundled_gazetteer_lookups() {
    let fixture = FixtureGeocoder::bundled();
    assert!(fixture.len() >= 200);

    let berlin = fixture.lookup("berlin, germany").await.unwrap();
    assert_eq!(berlin.point, GeoPoint::new(52.52, 13.405).unwrap());
    assert_eq!(berlin.query, "Berlin, Germany");

    let geocoder = Geocoder::new(fixture);
    let short = geocoder.geocode("  BERLIN ").await.unwrap();
    assert_eq!(short.point, berlin.point);

    // Two gazetteer entries share the short name, so it is ambiguous.
    assert!(matches!(
        geocoder.geocode("Valencia").await,
        Err(GeocodeError::NoMatch(_))
    ));
    assert!(geocoder.geocode("Valencia, Spain").await.is_ok());
    assert!(matches!(
        geocoder.geocode("Atlantis").await,
        Err(GeocodeError::NoMatch(_))
    ));
    assert_eq!(
        geocoder.geocode("   ").await,
        Err(GeocodeError::EmptyAddress)
    );
}

#[test]
fn gazetteer_parse_errors_name_the_line() {
    let err = FixtureGeocoder::parse("A\t1\t2\t0.5\nB\t95\t0\t0.5\n").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(FixtureGeocoder::parse("A\t1\t2\n").is_err());
    assert!(FixtureGeocoder::parse("A\t1\t2\t1.5\n").is_err());
    assert!(FixtureGeocoder::parse("A\t1\t2\t1\na\t3\t4\t1\n").is_err());
}

struct Counting {
    calls: AtomicUsize,
    answer: Result<GeocodeResult, GeocodeError>,
}

struct Shared(Arc<Counting>);

#[async_trait]
impl GeocoderClient for Shared {
    async fn lookup(&self, _: &str) -> Result<GeocodeResult, GeocodeError> {
        self.0.calls.fetch_add(1, Ordering::SeqCst);
        self.0.answer.clone()
    }
}

#[tokio::test]
async fn cache_keeps_answers_but_not_outages() {
    let hit = Arc::new(Counting {
        calls: AtomicUsize::new(0),
        answer: Ok(GeocodeResult {
            query: "x".into(),
            point: GeoPoint::new(1.0, 2.0).unwrap(),
            confidence: 0.9,
        }),
    });
    let geocoder = Geocoder::new(Shared(hit.clone()));
    geocoder.geocode("Some Place").await.unwrap();
    geocoder.geocode("some   place").await.unwrap();
    assert_eq!(hit.calls.load(Ordering::SeqCst), 1);
    assert_eq!(geocoder.cached_entries(), 1);

    let down = Arc::new(Counting {
        calls: AtomicUsize::new(0),
        answer: Err(GeocodeError::Unavailable("down".into())),
    });
    let geocoder = Geocoder::new(Shared(down.clone()));
    let _ = geocoder.geocode("Some Place").await;
    let _ = geocoder.geocode("Some Place").await;
    assert_eq!(down.calls.load(Ordering::SeqCst), 2);
    assert_eq!(geocoder.cached_entries(), 0);
}

#[tokio::test]
async fn resolve_turns_failures_into_flags() {
    let geocoder = Geocoder::new(FixtureGeocoder::bundled());
    let addr = |a: &str| DraftLocation::Address {
        address: a.into(),
        point: None,
    };

    let (spec, flags) = geocoder.resolve(&addr("Paris, France")).await;
    assert!(matches!(spec, LocationSpec::Single { .. }));
    assert!(flags.is_empty());

    let (spec, flags) = geocoder
        .resolve(&addr("Mid-Atlantic Ridge Survey Area"))
        .await;
    assert!(matches!(spec, LocationSpec::Single { .. }));
    assert!(flags.contains(&ReviewFlag::LowGeocodeConfidence));

    let (spec, flags) = geocoder.resolve(&addr("Nowhere In Particular")).await;
    assert_eq!(
        spec,
        LocationSpec::Unresolved {
            address: "Nowhere In Particular".into()
        }
    );
    assert!(flags.contains(&ReviewFlag::NeedsGeocoding));

    let given = GeoPoint::new(-10.0, 20.0).unwrap();
    let (spec, flags) = geocoder
        .resolve(&DraftLocation::Address {
            address: "Nowhere In Particular".into(),
            point: Some(given),
        })
        .await;
    assert_eq!(spec.point(), Some(given));
    assert!(flags.is_empty());

    let (spec, _) = geocoder.resolve(&DraftLocation::Multiple).await;
    assert_eq!(spec, LocationSpec::Multiple);
}

#[derive(serde::Deserialize)]
struct Q {
    q: String,
    key: Option<String>,
}

async fn mock(Query(q): Query<Q>) -> impl IntoResponse {
    if q.key.as_deref() != Some("k3y") {
        return (StatusCode::FORBIDDEN, Json(json!({}))).into_response();
    }
    match q.q.as_str() {
        "harbour" => Json(json!({"lat": 53.54, "lon": 9.97, "confidence": 0.8})).into_response(),
        "no confidence" => Json(json!({"lat": 1.0, "lon": 1.0})).into_response(),
        "bad point" => Json(json!({"lat": 91.0, "lon": 0.0})).into_response(),
        "garbage" => "not json".into_response(),
        "slow" => {
            tokio::time::sleep(Duration::from_secs(3)).await;
            Json(json!({"lat": 0.0, "lon": 0.0})).into_response()
        }
        _ => (StatusCode::NOT_FOUND, Json(json!({}))).into_response(),
    }
}

async fn spawn_mock() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, Router::new().route("/search", get(mock)))
            .await
            .unwrap();
    });
    format!("http://{addr}/search")
}

fn http(url: &str, key: Option<&str>, timeout: Duration, min_interval: Duration) -> HttpGeocoder {
    HttpGeocoder::new(HttpGeocoderConfig {
        url: url.to_string(),
        api_key: key.map(str::to_string),
        timeout,
        min_interval,
    })
    .unwrap()
}

#[tokio::test]
async fn http_geocoder_against_a_local_service() {
    let url = spawn_mock().await;
    let client = http(&url, Some("k3y"), Duration::from_secs(1), Duration::ZERO);

    let found = client.lookup("harbour").await.unwrap();
    assert_eq!(found.point, GeoPoint::new(53.54, 9.97).unwrap());
    assert_eq!(found.confidence, 0.8);
    assert_eq!(
        client.lookup("no confidence").await.unwrap().confidence,
        1.0
    );
    assert!(matches!(
        client.lookup("elsewhere").await,
        Err(GeocodeError::NoMatch(_))
    ));
    assert!(matches!(
        client.lookup("bad point").await,
        Err(GeocodeError::Unavailable(_))
    ));
    assert!(matches!(
        client.lookup("garbage").await,
        Err(GeocodeError::Unavailable(_))
    ));
    assert!(matches!(
        client.lookup("slow").await,
        Err(GeocodeError::Unavailable(_))
    ));

    let unauthorized = http(&url, None, Duration::from_secs(1), Duration::ZERO);
    assert!(matches!(
        unauthorized.lookup("harbour").await,
        Err(GeocodeError::Unavailable(_))
    ));

    let closed = http(
        "http://127.0.0.1:9/search",
        None,
        Duration::from_secs(1),
        Duration::ZERO,
    );
    assert!(matches!(
        closed.lookup("harbour").await,
        Err(GeocodeError::Unavailable(_))
    ));
}

#[tokio::test]
async fn http_geocoder_spaces_out_requests() {
    let url = spawn_mock().await;
    let client = Arc::new(http(
        &url,
        Some("k3y"),
        Duration::from_secs(1),
        Duration::from_millis(100),
    ));
    let start = Instant::now();
    let tasks: Vec<_> = (0..4)
        .map(|_| {
            let client = client.clone();
            tokio::spawn(async move { client.lookup("harbour").await })
        })
        .collect();
    for t in tasks {
        t.await.unwrap().unwrap();
    }
    assert!(
        start.elapsed() >= Duration::from_millis(300),
        "{:?}",
        start.elapsed()
    );
}
