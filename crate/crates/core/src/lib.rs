//! Core of an Earth-observation dataset catalogue.
//!
//! Everything in this crate is pure and allocation-only: controlled
//! taxonomies, submission validation, spherical geodesy and map markers,
//! faceted query semantics, rankings and the query-string grammar. IO,
//! persistence and HTTP live in the `eod` crate.

#![no_std]

extern crate alloc;

pub mod geo;
pub mod model;
pub mod params;
pub mod query;
pub mod slug;
pub mod taxonomy;
pub mod validate;
pub mod view;

pub use geo::{
    haversine_km, markers, records_near_marker, BoundingBox, GeoError, GeoPoint, Marker,
};
pub use model::{
    DatasetId, DatasetRecord, Decision, LocationSpec, MediaType, ModerationEvent, PrivateInfo,
    ReviewFlag, Status, Teaser, TeaserRef,
};
pub use params::{parse_query_params, to_query_pairs, BadParam, ParamError};
pub use query::{
    build_comparison, execute_query, match_facet, match_location, rank_popular, rank_recent,
    CompareError, ComparisonTable, FacetMode, LocationFilter, QueryFilters, ResultPage,
};
pub use slug::canonical_slug;
pub use taxonomy::{SensorModality, TaskType};
pub use validate::{
    parse_publication_date, parse_size, validate_submission, DraftLocation, ErrorCode, FieldError,
    RawDraft, RawValue, ValidatedDraft, ValidationErrors,
};
pub use view::PublicRecordView;
