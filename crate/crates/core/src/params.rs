//! Wire grammar for catalogue queries.
//!
//! Operates on already percent-decoded key/value pairs:
//!
//! | key              | value                                             |
//! |------------------|---------------------------------------------------|
//! | `sensors`        | taxonomy names, repeated or comma-separated        |
//! | `tasks`          | taxonomy names, repeated or comma-separated        |
//! | `sensors_mode`   | `and` (default) or `or`                            |
//! | `tasks_mode`     | `and` (default) or `or`                            |
//! | `location`       | substring of the address                           |
//! | `near`           | `<lat>,<lon>,<km>`                                 |
//! | `multi_location` | `true` or `false`                                  |
//! | `page`           | positive integer, default 1                        |
//! | `per_page`       | 1..=100, default 20                                |
//!
//! `location`, `near` and `multi_location=true` are mutually exclusive.
//! Unknown keys are ignored; empty values count as absent.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU32;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::query::{FacetMode, LocationFilter, NameNeedle, PerPage, QueryFilters, RadiusKm};
use crate::taxonomy::TaxonomyError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamError {
    pub param: String,
    pub reason: String,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.param, self.reason)
    }
}

/// Every problem found in a query string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("BadParam: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct BadParam(pub Vec<ParamError>);

struct Errors(Vec<ParamError>);

impl Errors {
    fn push(&mut self, param: &str, reason: impl Into<String>) {
        self.0.push(ParamError {
            param: param.to_string(),
            reason: reason.into(),
        });
    }
}

fn values<'a, K, V>(pairs: &'a [(K, V)], key: &'a str) -> impl Iterator<Item = &'a str> + 'a
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    pairs
        .iter()
        .filter(move |(k, _)| k.as_ref() == key)
        .map(|(_, v)| v.as_ref())
        .filter(|v| !v.trim().is_empty())
}

fn single<'a, K, V>(pairs: &'a [(K, V)], key: &'a str, errors: &mut Errors) -> Option<&'a str>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut it = values(pairs, key);
    let first = it.next()?;
    if it.next().is_some() {
        errors.push(key, "given more than once");
        return None;
    }
    Some(first)
}

fn taxonomy_set<T, K, V>(pairs: &[(K, V)], key: &str, errors: &mut Errors) -> BTreeSet<T>
where
    T: FromStr<Err = TaxonomyError> + Ord,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut set = BTreeSet::new();
    for value in values(pairs, key) {
        for piece in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match piece.parse::<T>() {
                Ok(v) => {
                    set.insert(v);
                }
                Err(e) => errors.push(key, e.to_string()),
            }
        }
    }
    set
}

fn mode(raw: Option<&str>, key: &str, errors: &mut Errors) -> FacetMode {
    match raw.map(|r| r.trim().to_ascii_lowercase()) {
        None => FacetMode::All,
        Some(v) if v == "and" => FacetMode::All,
        Some(v) if v == "or" => FacetMode::Any,
        Some(v) => {
            errors.push(key, format!("expected `and` or `or`, got `{v}`"));
            FacetMode::All
        }
    }
}

fn parse_near(raw: &str) -> Result<LocationFilter, String> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let [lat, lon, km] = parts.as_slice() else {
        return Err(String::from("expected `<lat>,<lon>,<km>`"));
    };
    let num = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| format!("{what} `{s}` is not a number"))
    };
    let (lat, lon, km) = (num(lat, "lat")?, num(lon, "lon")?, num(km, "radius")?);
    let center = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
    let radius = RadiusKm::new(km).map_err(|e| e.to_string())?;
    Ok(LocationFilter::Near { center, radius })
}

/// Parses decoded query pairs into filters, collecting every error.
pub fn parse_query_params<K, V>(pairs: &[(K, V)]) -> Result<QueryFilters, BadParam>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut errors = Errors(Vec::new());

    let sensors = taxonomy_set(pairs, "sensors", &mut errors);
    let tasks = taxonomy_set(pairs, "tasks", &mut errors);
    let sensors_mode = mode(
        single(pairs, "sensors_mode", &mut errors),
        "sensors_mode",
        &mut errors,
    );
    let tasks_mode = mode(
        single(pairs, "tasks_mode", &mut errors),
        "tasks_mode",
        &mut errors,
    );

    let mut candidates: Vec<(&str, LocationFilter)> = Vec::new();
    if let Some(text) = single(pairs, "location", &mut errors) {
        match NameNeedle::new(text) {
            Ok(n) => candidates.push(("location", LocationFilter::NameContains(n))),
            Err(e) => errors.push("location", e.to_string()),
        }
    }
    if let Some(raw) = single(pairs, "near", &mut errors) {
        match parse_near(raw) {
            Ok(f) => candidates.push(("near", f)),
            Err(e) => errors.push("near", e),
        }
    }
    if let Some(raw) = single(pairs, "multi_location", &mut errors) {
        match raw.trim().to_ascii_lowercase().as_str() {
            "true" => candidates.push(("multi_location", LocationFilter::MultiLocationOnly)),
            "false" => {}
            other => errors.push(
                "multi_location",
                format!("expected `true` or `false`, got `{other}`"),
            ),
        }
    }
    let location = match candidates.len() {
        0 => LocationFilter::None,
        1 => candidates.pop().map(|(_, f)| f).unwrap_or_default(),
        _ => {
            let names: Vec<&str> = candidates.iter().map(|(k, _)| *k).collect();
            errors.push(
                "location",
                format!("conflicting location parameters: {}", names.join(", ")),
            );
            LocationFilter::None
        }
    };

    let page = match single(pairs, "page", &mut errors) {
        None => NonZeroU32::MIN,
        Some(raw) => match raw.trim().parse::<NonZeroU32>() {
            Ok(p) => p,
            Err(_) => {
                errors.push("page", "must be a positive integer");
                NonZeroU32::MIN
            }
        },
    };
    let per_page = match single(pairs, "per_page", &mut errors) {
        None => PerPage::default(),
        Some(raw) => match raw
            .trim()
            .parse::<u32>()
            .ok()
            .and_then(|n| PerPage::new(n).ok())
        {
            Some(p) => p,
            None => {
                errors.push("per_page", "must be an integer in 1..=100");
                PerPage::default()
            }
        },
    };

    if !errors.0.is_empty() {
        return Err(BadParam(errors.0));
    }
    Ok(QueryFilters {
        sensors,
        sensors_mode,
        tasks,
        tasks_mode,
        location,
        page,
        per_page,
    })
}

/// Prints filters as decoded key/value pairs; [`parse_query_params`] inverts it.
/// Defaults are omitted.
pub fn to_query_pairs(filters: &QueryFilters) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    if !filters.sensors.is_empty() {
        let names: Vec<String> = filters.sensors.iter().map(|s| s.wire_name()).collect();
        push("sensors", names.join(","));
    }
    if filters.sensors_mode == FacetMode::Any {
        push("sensors_mode", String::from("or"));
    }
    if !filters.tasks.is_empty() {
        let names: Vec<String> = filters.tasks.iter().map(|t| t.wire_name()).collect();
        push("tasks", names.join(","));
    }
    if filters.tasks_mode == FacetMode::Any {
        push("tasks_mode", String::from("or"));
    }
    match &filters.location {
        LocationFilter::None => {}
        LocationFilter::MultiLocationOnly => push("multi_location", String::from("true")),
        LocationFilter::Near { center, radius } => push(
            "near",
            format!("{},{},{}", center.lat(), center.lon(), radius.km()),
        ),
        LocationFilter::NameContains(needle) => push("location", needle.as_str().to_string()),
    }
    if filters.page.get() != 1 {
        push("page", format!("{}", filters.page));
    }
    if filters.per_page != PerPage::default() {
        push("per_page", format!("{}", filters.per_page.get()));
    }
    out
}
