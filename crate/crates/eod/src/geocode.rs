//! Address geocoding behind a pluggable client.
//!
//! [`Geocoder`] normalizes addresses, caches answers and turns a submitted
//! [`DraftLocation`] into a stored [`LocationSpec`]. Two clients ship:
//! [`FixtureGeocoder`], backed by a tab-separated gazetteer, and
//! [`HttpGeocoder`], which calls a remote gazetteer service.
//!
//! HTTP contract: `GET <url>?q=<address>[&key=<api_key>]`. A `200` answer
//! carries `{"lat": f64, "lon": f64, "confidence": f64}` (confidence
//! optional, default 1.0); `404` means no match; anything else, or a
//! transport failure, counts as the service being unavailable.

use std::collections::{BTreeSet, HashMap};
use std::sync::RwLock;
use std::time::Duration;

use async_trait::async_trait;
use eod_core::validate::DraftLocation;
use eod_core::{GeoPoint, LocationSpec, ReviewFlag};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;
use tokio::time::Instant;
use tracing::warn;

/// Offline gazetteer bundled with the binary.
pub const BUNDLED_GAZETTEER: &str = include_str!("../fixtures/gazetteer.tsv");

/// Below this confidence a geocoded submission is flagged for moderators.
pub const LOW_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeResult {
    pub query: String,
    pub point: GeoPoint,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeocodeError {
    #[error("EmptyAddress: address must not be blank")]
    EmptyAddress,
    #[error("NoMatch: no location found for `{0}`")]
    NoMatch(String),
    #[error("GeocoderUnavailable: {0}")]
    Unavailable(String),
}

#[async_trait]
pub trait GeocoderClient: Send + Sync {
    /// Resolves an already-normalized, non-empty address.
    async fn lookup(&self, address: &str) -> Result<GeocodeResult, GeocodeError>;
}

/// Trim, lowercase and collapse internal whitespace.
pub fn normalize_address(address: &str) -> String {
    address
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("gazetteer line {line}: {reason}")]
pub struct GazetteerError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
struct GazetteerEntry {
    name: String,
    point: GeoPoint,
    confidence: f64,
}

/// Deterministic offline geocoder over a `name<TAB>lat<TAB>lon<TAB>confidence` file.
///
/// Lookups match the full normalized name first, then the part before the
/// first comma when that is unambiguous (`berlin` finds `Berlin, Germany`).
#[derive(Debug, Clone, Default)]
pub struct FixtureGeocoder {
    exact: HashMap<String, GazetteerEntry>,
    short: HashMap<String, Option<GazetteerEntry>>,
}

impl FixtureGeocoder {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_GAZETTEER).expect("bundled gazetteer is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, GazetteerError> {
        let mut geocoder = FixtureGeocoder::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |reason: &str| GazetteerError {
                line,
                reason: reason.to_string(),
            };
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            let [name, lat, lon, confidence] = cols.as_slice() else {
                return Err(err("expected 4 tab-separated columns"));
            };
            let lat: f64 = lat.trim().parse().map_err(|_| err("bad latitude"))?;
            let lon: f64 = lon.trim().parse().map_err(|_| err("bad longitude"))?;
            let confidence: f64 = confidence
                .trim()
                .parse()
                .ok()
                .filter(|c| (0.0..=1.0).contains(c))
                .ok_or_else(|| err("confidence must be in [0, 1]"))?;
            let point = GeoPoint::new(lat, lon).map_err(|e| err(&e.to_string()))?;
            let key = normalize_address(name);
            if key.is_empty() {
                return Err(err("empty name"));
            }
            let entry = GazetteerEntry {
                name: name.trim().to_string(),
                point,
                confidence,
            };
            if let Some(head) = key.split(',').next().map(str::trim) {
                if head != key {
                    geocoder
                        .short
                        .entry(head.to_string())
                        .and_modify(|slot| *slot = None)
                        .or_insert_with(|| Some(entry.clone()));
                }
            }
            if geocoder.exact.insert(key, entry).is_some() {
                return Err(err("duplicate name"));
            }
        }
        Ok(geocoder)
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    fn find(&self, normalized: &str) -> Option<&GazetteerEntry> {
        self.exact
            .get(normalized)
            .or_else(|| self.short.get(normalized).and_then(Option::as_ref))
    }
}

#[async_trait]
impl GeocoderClient for FixtureGeocoder {
    async fn lookup(&self, address: &str) -> Result<GeocodeResult, GeocodeError> {
        let entry = self
            .find(&normalize_address(address))
            .ok_or_else(|| GeocodeError::NoMatch(address.to_string()))?;
        Ok(GeocodeResult {
            query: entry.name.clone(),
            point: entry.point,
            confidence: entry.confidence,
        })
    }
}

#[derive(Debug, Clone)]
pub struct HttpGeocoderConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Minimum spacing between outgoing requests, across all callers.
    pub min_interval: Duration,
}

#[derive(Deserialize)]
struct HttpAnswer {
    lat: f64,
    lon: f64,
    #[serde(default = "full_confidence")]
    confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

pub struct HttpGeocoder {
    client: reqwest::Client,
    config: HttpGeocoderConfig,
    next_slot: Mutex<Instant>,
}

impl HttpGeocoder {
    pub fn new(config: HttpGeocoderConfig) -> Result<Self, GeocodeError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GeocodeError::Unavailable(e.to_string()))?;
        Ok(Self {
            client,
            config,
            next_slot: Mutex::new(Instant::now()),
        })
    }

    /// Waits for this caller's turn under the global request-rate ceiling.
    async fn throttle(&self) {
        let wait_until = {
            let mut slot = self.next_slot.lock().await;
            let now = Instant::now();
            let at = (*slot).max(now);
            *slot = at + self.config.min_interval;
            at
        };
        tokio::time::sleep_until(wait_until).await;
    }
}

#[async_trait]
impl GeocoderClient for HttpGeocoder {
    async fn lookup(&self, address: &str) -> Result<GeocodeResult, GeocodeError> {
        self.throttle().await;
        let mut query = vec![("q", address.to_string())];
        if let Some(key) = &self.config.api_key {
            query.push(("key", key.clone()));
        }
        let response = self
            .client
            .get(&self.config.url)
            .query(&query)
            .send()
            .await
            .map_err(|e| GeocodeError::Unavailable(e.to_string()))?;
        match response.status() {
            reqwest::StatusCode::OK => {}
            reqwest::StatusCode::NOT_FOUND => {
                return Err(GeocodeError::NoMatch(address.to_string()))
            }
            other => {
                return Err(GeocodeError::Unavailable(format!(
                    "geocoder answered {other}"
                )))
            }
        }
        let answer: HttpAnswer = response
            .json()
            .await
            .map_err(|e| GeocodeError::Unavailable(format!("malformed geocoder answer: {e}")))?;
        let point = GeoPoint::new(answer.lat, answer.lon)
            .map_err(|e| GeocodeError::Unavailable(format!("geocoder returned {e}")))?;
        if !(0.0..=1.0).contains(&answer.confidence) {
            return Err(GeocodeError::Unavailable(format!(
                "geocoder returned confidence {}",
                answer.confidence
            )));
        }
        Ok(GeocodeResult {
            query: address.to_string(),
            point,
            confidence: answer.confidence,
        })
    }
}

/// Caching front for a [`GeocoderClient`]. Hits and misses are cached;
/// unavailability is not, so a later retry can still succeed.
pub struct Geocoder {
    client: Box<dyn GeocoderClient>,
    cache: RwLock<HashMap<String, Result<GeocodeResult, GeocodeError>>>,
}

impl Geocoder {
    pub fn new(client: impl GeocoderClient + 'static) -> Self {
        Self {
            client: Box::new(client),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub async fn geocode(&self, address: &str) -> Result<GeocodeResult, GeocodeError> {
        let key = normalize_address(address);
        if key.is_empty() {
            return Err(GeocodeError::EmptyAddress);
        }
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return hit.clone();
        }
        let answer = self.client.lookup(&key).await;
        if !matches!(answer, Err(GeocodeError::Unavailable(_))) {
            self.cache.write().unwrap().insert(key, answer.clone());
        }
        answer
    }

    /// Turns a submitted location into a stored one plus any moderator flags.
    ///
    /// Failed lookups never reject a submission: the address is kept
    /// unresolved and flagged so a moderator can follow up.
    pub async fn resolve(&self, location: &DraftLocation) -> (LocationSpec, BTreeSet<ReviewFlag>) {
        let mut flags = BTreeSet::new();
        let spec = match location {
            DraftLocation::Multiple => LocationSpec::Multiple,
            DraftLocation::Address {
                address,
                point: Some(point),
            } => LocationSpec::Single {
                address: address.clone(),
                point: *point,
            },
            DraftLocation::Address {
                address,
                point: None,
            } => match self.geocode(address).await {
                Ok(found) => {
                    if found.confidence < LOW_CONFIDENCE {
                        flags.insert(ReviewFlag::LowGeocodeConfidence);
                    }
                    LocationSpec::Single {
                        address: address.clone(),
                        point: found.point,
                    }
                }
                Err(e) => {
                    warn!(%address, error = %e, "could not geocode submitted address");
                    flags.insert(ReviewFlag::NeedsGeocoding);
                    LocationSpec::Unresolved {
                        address: address.clone(),
                    }
                }
            },
        };
        (spec, flags)
    }
}
