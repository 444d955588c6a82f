#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use eod_core::{
    query::{NameNeedle, PerPage, RadiusKm},
    DatasetId, DatasetRecord, FacetMode, GeoPoint, LocationFilter, LocationSpec, MediaType,
    PrivateInfo, QueryFilters, SensorModality, Status, TaskType, TeaserRef,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance via the 3D chord between unit vectors. Deliberately a
/// different formula from the haversine used by the library.
pub fn chord_distance_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let v = |(lat, lon): (f64, f64)| {
        let (lat, lon) = (lat.to_radians(), lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (p, q) = (v(a), v(b));
    let chord = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * EARTH_RADIUS_KM * (chord / 2.0).min(1.0).asin()
}

pub const CITIES: &[(&str, f64, f64)] = &[
    ("Berlin, Germany", 52.52, 13.405),
    ("Paris, France", 48.8566, 2.3522),
    ("London, United Kingdom", 51.5074, -0.1278),
    ("Munich, Germany", 48.1351, 11.582),
    ("Wuhan, China", 30.5928, 114.3055),
    ("Houston, USA", 29.7604, -95.3698),
    ("Potsdam, Germany", 52.3906, 13.0645),
    ("Suva, Fiji", -18.1248, 178.4501),
    ("Nairobi, Kenya", -1.2921, 36.8219),
];

pub fn sensors_universe() -> Vec<SensorModality> {
    let mut v = SensorModality::FIXED.to_vec();
    v.push(SensorModality::other("sonar").unwrap());
    v
}

pub fn tasks_universe() -> Vec<TaskType> {
    let mut v = TaskType::FIXED.to_vec();
    v.push(TaskType::other("super resolution").unwrap());
    v
}

fn subset<T: Clone + Ord, R: Rng>(rng: &mut R, universe: &[T], min: usize) -> BTreeSet<T> {
    loop {
        let set: BTreeSet<T> = universe
            .iter()
            .filter(|_| rng.random_bool(0.3))
            .cloned()
            .collect();
        if set.len() >= min {
            return set;
        }
    }
}

pub fn ts(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_650_000_000 + secs, 0).unwrap()
}

pub fn record(id: &str, status: Status, location: LocationSpec) -> DatasetRecord {
    DatasetRecord {
        id: DatasetId::new(id),
        slug: id.to_lowercase(),
        name: format!("Dataset {id}"),
        published_on: NaiveDate::from_ymd_opt(2021, 5, 4).unwrap(),
        location,
        sensors: [SensorModality::Optical].into_iter().collect(),
        tasks: [TaskType::SemanticSegmentation].into_iter().collect(),
        size_bytes: 1_000_000,
        download_url: format!("https://example.org/{id}"),
        teaser_image: TeaserRef {
            media_type: MediaType::Png,
            byte_length: 64,
        },
        description: "A synthetic record.".into(),
        status,
        view_count: 0,
        created_at: ts(0),
        private: PrivateInfo {
            submitter_name: "Ada Submitter".into(),
            submitter_email: "ada.submitter@example.org".into(),
            review_flags: BTreeSet::new(),
        },
    }
}

pub fn single(address: &str, lat: f64, lon: f64) -> LocationSpec {
    LocationSpec::Single {
        address: address.into(),
        point: GeoPoint::new(lat, lon).unwrap(),
    }
}

pub fn random_location<R: Rng>(rng: &mut R) -> LocationSpec {
    match rng.random_range(0..10) {
        0..=2 => LocationSpec::Multiple,
        3 => LocationSpec::Unresolved {
            address: "Somewhere unresolved".into(),
        },
        4..=6 => {
            let (name, lat, lon) = *CITIES.choose(rng).unwrap();
            single(name, lat, lon)
        }
        _ => single(
            "Random site",
            rng.random_range(-90.0..=90.0),
            rng.random_range(-180.0..180.0),
        ),
    }
}

pub fn random_record<R: Rng>(rng: &mut R, idx: usize) -> DatasetRecord {
    let status = match rng.random_range(0..10) {
        0..=5 => Status::Approved,
        6..=7 => Status::Pending,
        _ => Status::Rejected,
    };
    let mut r = record(&format!("r{idx:05}"), status, random_location(rng));
    r.sensors = subset(rng, &sensors_universe(), 1);
    r.tasks = subset(rng, &tasks_universe(), 1);
    // Narrow range so created_at ties are common.
    r.created_at = ts(rng.random_range(0..50));
    r.view_count = rng.random_range(0..20);
    r
}

pub fn random_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<DatasetRecord> {
    let mut corpus: Vec<DatasetRecord> = (0..n).map(|i| random_record(rng, i)).collect();
    // Arrival order must not matter.
    use rand::seq::SliceRandom;
    corpus.shuffle(rng);
    corpus
}

fn random_mode<R: Rng>(rng: &mut R) -> FacetMode {
    if rng.random_bool(0.5) {
        FacetMode::All
    } else {
        FacetMode::Any
    }
}

pub fn random_location_filter<R: Rng>(rng: &mut R) -> LocationFilter {
    match rng.random_range(0..8) {
        0..=3 => LocationFilter::None,
        4 => LocationFilter::MultiLocationOnly,
        5 | 6 => {
            let (_, lat, lon) = *CITIES.choose(rng).unwrap();
            LocationFilter::Near {
                center: GeoPoint::new(lat + rng.random_range(-1.0..1.0), lon).unwrap(),
                radius: RadiusKm::new(rng.random_range(1.0..3000.0)).unwrap(),
            }
        }
        _ => {
            let needle = *["berlin", "GERMANY", "an", "fiji", "site", "zzz"]
                .choose(rng)
                .unwrap();
            LocationFilter::NameContains(NameNeedle::new(needle).unwrap())
        }
    }
}

pub fn random_filters<R: Rng>(rng: &mut R) -> QueryFilters {
    QueryFilters {
        sensors: subset(rng, &sensors_universe(), 0),
        sensors_mode: random_mode(rng),
        tasks: subset(rng, &tasks_universe(), 0),
        tasks_mode: random_mode(rng),
        location: random_location_filter(rng),
        page: std::num::NonZeroU32::new(rng.random_range(1..4)).unwrap(),
        per_page: PerPage::new(rng.random_range(1..=100)).unwrap(),
    }
}

/// Independent one-pass predicate for the query semantics.
pub fn oracle_matches(filters: &QueryFilters, r: &DatasetRecord) -> bool {
    if r.status != Status::Approved {
        return false;
    }
    let facet_ok = |selected: Vec<String>, have: Vec<String>, mode: FacetMode| {
        if selected.is_empty() {
            return true;
        }
        let hits = selected.iter().filter(|s| have.contains(s)).count();
        match mode {
            FacetMode::All => hits == selected.len(),
            FacetMode::Any => hits > 0,
        }
    };
    let sensors_ok = facet_ok(
        filters.sensors.iter().map(|s| s.wire_name()).collect(),
        r.sensors.iter().map(|s| s.wire_name()).collect(),
        filters.sensors_mode,
    );
    let tasks_ok = facet_ok(
        filters.tasks.iter().map(|s| s.wire_name()).collect(),
        r.tasks.iter().map(|s| s.wire_name()).collect(),
        filters.tasks_mode,
    );
    let location_ok = match (&filters.location, &r.location) {
        (LocationFilter::None, _) => true,
        (LocationFilter::MultiLocationOnly, LocationSpec::Multiple) => true,
        (LocationFilter::Near { center, radius }, LocationSpec::Single { point, .. }) => {
            chord_distance_km((point.lat(), point.lon()), (center.lat(), center.lon()))
                <= radius.km()
        }
        (LocationFilter::NameContains(needle), LocationSpec::Single { address, .. }) => address
            .to_lowercase()
            .contains(&needle.as_str().to_lowercase()),
        _ => false,
    };
    sensors_ok && tasks_ok && location_ok
}
