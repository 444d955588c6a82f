//! Spherical geodesy, viewport boxes and map markers.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DatasetId, DatasetRecord, LocationSpec, Status};
use crate::query::recency_order;

/// Mean Earth radius (IUGG) in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default radius within which records count as "at" a clicked marker.
pub const DEFAULT_COLOCATION_RADIUS_KM: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("bounding box south {south} is north of north {north}")]
    InvertedBox { south: f64, north: f64 },
}

/// A WGS84 position in decimal degrees; longitude is kept in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

fn check_lat(lat: f64) -> Result<f64, GeoError> {
    if (-90.0..=90.0).contains(&lat) {
        Ok(lat)
    } else {
        Err(GeoError::Latitude(lat))
    }
}

fn check_lon(lon: f64) -> Result<f64, GeoError> {
    if (-180.0..=180.0).contains(&lon) {
        Ok(lon)
    } else {
        Err(GeoError::Longitude(lon))
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let lat = check_lat(lat)?;
        let lon = check_lon(lon)?;
        let lon = if lon == 180.0 { -180.0 } else { lon };
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    // abs() keeps the result bit-identical when the arguments are swapped.
    let half_dlat = ((a.lat - b.lat).abs().to_radians()) / 2.0;
    let half_dlon = ((a.lon - b.lon).abs().to_radians()) / 2.0;

    let sin_dlat = libm::sin(half_dlat);
    let sin_dlon = libm::sin(half_dlon);
    let h = sin_dlat * sin_dlat + libm::cos(lat_a) * libm::cos(lat_b) * sin_dlon * sin_dlon;
    let h = h.clamp(0.0, 1.0);

    2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(h))
}

/// A map viewport. `west > east` means the box wraps across the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    south: f64,
    west: f64,
    north: f64,
    east: f64,
}

impl BoundingBox {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self, GeoError> {
        let south = check_lat(south)?;
        let north = check_lat(north)?;
        let west = check_lon(west)?;
        let east = check_lon(east)?;
        if south > north {
            return Err(GeoError::InvertedBox { south, north });
        }
        Ok(Self {
            south,
            west,
            north,
            east,
        })
    }

    pub fn crosses_antimeridian(&self) -> bool {
        self.west > self.east
    }

    pub fn contains(&self, point: GeoPoint) -> bool {
        if point.lat < self.south || point.lat > self.north {
            return false;
        }
        let lon = point.lon;
        // A stored lon of -180 is the same meridian as +180.
        let alt = if lon == -180.0 { 180.0 } else { lon };
        let within = |l: f64| {
            if self.crosses_antimeridian() {
                l >= self.west || l <= self.east
            } else {
                l >= self.west && l <= self.east
            }
        };
        within(lon) || within(alt)
    }
}

/// A map pin for a single-location dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub record_id: DatasetId,
    pub point: GeoPoint,
    pub label: String,
}

fn public_point(record: &DatasetRecord) -> Option<GeoPoint> {
    match (&record.status, &record.location) {
        (Status::Approved, LocationSpec::Single { point, .. }) => Some(*point),
        _ => None,
    }
}

/// One marker per approved single-location record inside `viewport`, ordered by id.
pub fn markers<'a, I>(corpus: I, viewport: Option<&BoundingBox>) -> Vec<Marker>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    let mut out: Vec<Marker> = corpus
        .into_iter()
        .filter_map(|record| {
            let point = public_point(record)?;
            if viewport.is_some_and(|bbox| !bbox.contains(point)) {
                return None;
            }
            Some(Marker {
                record_id: record.id.clone(),
                point,
                label: record.name.clone(),
            })
        })
        .collect();
    out.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    out
}

/// Ids of approved single-location records within `radius_km` of `point`, newest first.
pub fn records_near_marker<'a, I>(corpus: I, point: GeoPoint, radius_km: f64) -> Vec<DatasetId>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    let mut hits: Vec<&DatasetRecord> = corpus
        .into_iter()
        .filter(|record| public_point(record).is_some_and(|p| haversine_km(p, point) <= radius_km))
        .collect();
    hits.sort_by(|a, b| recency_order(a, b));
    hits.into_iter().map(|r| r.id.clone()).collect()
}
