//! Faceted query semantics, rankings and side-by-side comparison.
//!
//! Within a facet the selected values combine by [`FacetMode`]; across
//! facets (sensors, tasks, location) filters always combine conjunctively.
//! All functions here are pure over a borrowed corpus and only ever return
//! approved records.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::num::NonZeroU32;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_km, GeoPoint};
use crate::model::{DatasetId, DatasetRecord, LocationSpec};
use crate::taxonomy::{SensorModality, TaskType};
use crate::view::format_size;

/// Half the Earth's circumference; the largest meaningful search radius.
pub const MAX_RADIUS_KM: f64 = 20037.5;
pub const MAX_NAME_FILTER_CHARS: usize = 100;
pub const MAX_PER_PAGE: u32 = 100;
pub const DEFAULT_PER_PAGE: u32 = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetMode {
    /// Every selected value must be present (logical AND).
    #[default]
    All,
    /// At least one selected value must be present (logical OR).
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("radius must be in (0, {MAX_RADIUS_KM}] km, got {0}")]
    Radius(String),
    #[error("location text must be 1..={MAX_NAME_FILTER_CHARS} characters")]
    NameLength,
    #[error("per_page must be in 1..={MAX_PER_PAGE}, got {0}")]
    PerPage(u32),
    #[error("page must be at least 1")]
    Page,
}

/// Search radius in kilometres, within `(0, 20037.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusKm(f64);

impl RadiusKm {
    pub fn new(km: f64) -> Result<Self, FilterError> {
        if km > 0.0 && km <= MAX_RADIUS_KM {
            Ok(Self(km))
        } else {
            Err(FilterError::Radius(format!("{km}")))
        }
    }

    pub fn km(&self) -> f64 {
        self.0
    }
}

/// Case-insensitive substring to look for in a record's address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameNeedle {
    text: String,
    folded: String,
}

impl NameNeedle {
    pub fn new(text: &str) -> Result<Self, FilterError> {
        let n = text.chars().count();
        if n == 0 || n > MAX_NAME_FILTER_CHARS || text.trim().is_empty() {
            return Err(FilterError::NameLength);
        }
        Ok(Self {
            text: text.to_string(),
            folded: text.to_lowercase(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, haystack: &str) -> bool {
        haystack.to_lowercase().contains(&self.folded)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum LocationFilter {
    #[default]
    None,
    MultiLocationOnly,
    Near {
        center: GeoPoint,
        radius: RadiusKm,
    },
    NameContains(NameNeedle),
}

/// Results per page, within `1..=100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PerPage(u32);

impl PerPage {
    pub fn new(n: u32) -> Result<Self, FilterError> {
        if (1..=MAX_PER_PAGE).contains(&n) {
            Ok(Self(n))
        } else {
            Err(FilterError::PerPage(n))
        }
    }

    pub fn get(&self) -> u32 {
        self.0
    }
}

impl Default for PerPage {
    fn default() -> Self {
        Self(DEFAULT_PER_PAGE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFilters {
    pub sensors: BTreeSet<SensorModality>,
    pub sensors_mode: FacetMode,
    pub tasks: BTreeSet<TaskType>,
    pub tasks_mode: FacetMode,
    pub location: LocationFilter,
    pub page: NonZeroU32,
    pub per_page: PerPage,
}

impl Default for QueryFilters {
    fn default() -> Self {
        Self {
            sensors: BTreeSet::new(),
            sensors_mode: FacetMode::All,
            tasks: BTreeSet::new(),
            tasks_mode: FacetMode::All,
            location: LocationFilter::None,
            page: NonZeroU32::MIN,
            per_page: PerPage::default(),
        }
    }
}

impl QueryFilters {
    /// Whether `record` satisfies every facet; ignores status and pagination.
    pub fn matches(&self, record: &DatasetRecord) -> bool {
        match_facet(&record.sensors, &self.sensors, self.sensors_mode)
            && match_facet(&record.tasks, &self.tasks, self.tasks_mode)
            && match_location(&record.location, &self.location)
    }
}

/// An empty selection leaves the facet unconstrained.
pub fn match_facet<T: Ord>(
    record_values: &BTreeSet<T>,
    selected: &BTreeSet<T>,
    mode: FacetMode,
) -> bool {
    if selected.is_empty() {
        return true;
    }
    match mode {
        FacetMode::All => selected.is_subset(record_values),
        FacetMode::Any => !selected.is_disjoint(record_values),
    }
}

pub fn match_location(loc: &LocationSpec, filter: &LocationFilter) -> bool {
    match filter {
        LocationFilter::None => true,
        LocationFilter::MultiLocationOnly => matches!(loc, LocationSpec::Multiple),
        LocationFilter::Near { center, radius } => match loc {
            LocationSpec::Single { point, .. } => haversine_km(*point, *center) <= radius.km(),
            _ => false,
        },
        LocationFilter::NameContains(needle) => match loc {
            LocationSpec::Single { address, .. } => needle.matches(address),
            _ => false,
        },
    }
}

/// Newest first, then id ascending. A total order over distinct ids.
pub fn recency_order(a: &DatasetRecord, b: &DatasetRecord) -> Ordering {
    b.created_at
        .cmp(&a.created_at)
        .then_with(|| a.id.cmp(&b.id))
}

fn popularity_order(a: &DatasetRecord, b: &DatasetRecord) -> Ordering {
    b.view_count
        .cmp(&a.view_count)
        .then_with(|| recency_order(a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultPage<'a> {
    /// Matches before pagination.
    pub total_matches: usize,
    pub page: u32,
    pub per_page: u32,
    pub items: Vec<&'a DatasetRecord>,
}

/// Approved records matching `filters`, newest first, sliced to the requested page.
///
/// A page past the end is not an error: it comes back empty with the total intact.
pub fn execute_query<'a, I>(filters: &QueryFilters, corpus: I) -> ResultPage<'a>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    let mut hits: Vec<&DatasetRecord> = corpus
        .into_iter()
        .filter(|r| r.is_public() && filters.matches(r))
        .collect();
    hits.sort_by(|a, b| recency_order(a, b));

    let total_matches = hits.len();
    let per_page = filters.per_page.get() as usize;
    let start = (filters.page.get() as usize - 1).saturating_mul(per_page);
    let items = hits.into_iter().skip(start).take(per_page).collect();

    ResultPage {
        total_matches,
        page: filters.page.get(),
        per_page: filters.per_page.get(),
        items,
    }
}

fn top_n<'a, I>(
    corpus: I,
    n: usize,
    order: fn(&DatasetRecord, &DatasetRecord) -> Ordering,
) -> Vec<&'a DatasetRecord>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    let mut approved: Vec<&DatasetRecord> = corpus.into_iter().filter(|r| r.is_public()).collect();
    approved.sort_by(|a, b| order(a, b));
    approved.truncate(n);
    approved
}

/// The `n` most recently added approved records.
pub fn rank_recent<'a, I>(corpus: I, n: usize) -> Vec<&'a DatasetRecord>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    top_n(corpus, n, recency_order)
}

/// The `n` most viewed approved records; ties fall back to recency.
pub fn rank_popular<'a, I>(corpus: I, n: usize) -> Vec<&'a DatasetRecord>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    top_n(corpus, n, popularity_order)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("TooFewIds: comparison needs at least two datasets")]
    TooFewIds,
    #[error("DuplicateId: {0} requested more than once")]
    DuplicateId(DatasetId),
    #[error("UnknownId: {0}")]
    UnknownId(DatasetId),
    #[error("NotPublic: {0}")]
    NotPublic(DatasetId),
}

/// Row labels of a comparison table, in display order.
pub const COMPARISON_ROWS: [&str; 7] = [
    "location",
    "sensors",
    "tasks",
    "size",
    "url",
    "views",
    "description",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<DatasetId>,
    /// Dataset names, parallel to `columns`.
    pub names: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

fn comparison_cell(label: &str, record: &DatasetRecord) -> String {
    let join = |names: Vec<&str>| names.join(", ");
    match label {
        "location" => record.location.display().to_string(),
        "sensors" => join(record.sensors.iter().map(|s| s.display_name()).collect()),
        "tasks" => join(record.tasks.iter().map(|t| t.display_name()).collect()),
        "size" => format_size(record.size_bytes),
        "url" => record.download_url.clone(),
        "views" => format!("{}", record.view_count),
        "description" => record.description.clone(),
        _ => String::new(),
    }
}

/// Side-by-side view of two or more approved records, columns in request order.
pub fn build_comparison<'a, I>(
    ids: &[DatasetId],
    corpus: I,
) -> Result<ComparisonTable, CompareError>
where
    I: IntoIterator<Item = &'a DatasetRecord>,
{
    if ids.len() < 2 {
        return Err(CompareError::TooFewIds);
    }
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CompareError::DuplicateId(id.clone()));
        }
    }
    let wanted: BTreeMap<&DatasetId, &DatasetRecord> = corpus
        .into_iter()
        .filter(|r| seen.contains(&r.id))
        .map(|r| (&r.id, r))
        .collect();

    let mut columns = Vec::with_capacity(ids.len());
    for id in ids {
        let record = *wanted
            .get(id)
            .ok_or_else(|| CompareError::UnknownId(id.clone()))?;
        if !record.is_public() {
            return Err(CompareError::NotPublic(id.clone()));
        }
        columns.push(record);
    }

    let rows = COMPARISON_ROWS
        .iter()
        .map(|label| ComparisonRow {
            label: (*label).to_string(),
            values: columns.iter().map(|r| comparison_cell(label, r)).collect(),
        })
        .collect();

    Ok(ComparisonTable {
        columns: columns.iter().map(|r| r.id.clone()).collect(),
        names: columns.iter().map(|r| r.name.clone()).collect(),
        rows,
    })
}
