//! Catalogue service for Earth-observation datasets: embedded store,
//! geocoding, HTTP API and operator CLI on top of [`eod_core`].

pub mod api;
pub mod cli;
pub mod clock;
pub mod config;
pub mod geocode;
pub mod snapshot;
pub mod store;

pub use eod_core as core;
