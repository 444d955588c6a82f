//! Server configuration: a TOML file plus environment overrides.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! data_dir = "./data"
//! submissions_per_hour = 10
//!
//! [[moderators]]
//! label = "alice"
//! token = "..."
//!
//! [geocoder]
//! kind = "http"
//! url = "https://geocoder.example.org/search"
//! ```
//!
//! Environment variables win over the file: `EOD_BIND`, `EOD_DATA_DIR`,
//! `EOD_MODERATOR_TOKENS` (`label:token,label:token`) and `EOD_GEOCODER_URL`
//! (which also switches the geocoder to `http`).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::geocode::{FixtureGeocoder, Geocoder, HttpGeocoder, HttpGeocoderConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("ConfigError: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("ConfigError: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("ConfigError: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeratorToken {
    pub label: String,
    pub token: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeocoderKind {
    #[default]
    Fixture,
    Http,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeocoderConfig {
    pub kind: GeocoderKind,
    /// Gazetteer file for the fixture geocoder; the bundled one when absent.
    pub gazetteer: Option<PathBuf>,
    pub url: Option<String>,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub min_interval_ms: u64,
}

impl Default for GeocoderConfig {
    fn default() -> Self {
        Self {
            kind: GeocoderKind::Fixture,
            gazetteer: None,
            url: None,
            api_key: None,
            timeout_secs: 5,
            min_interval_ms: 1000,
        }
    }
}

impl GeocoderConfig {
    pub fn build(&self) -> Result<Geocoder, ConfigError> {
        match self.kind {
            GeocoderKind::Fixture => {
                let client = match &self.gazetteer {
                    None => FixtureGeocoder::bundled(),
                    Some(path) => {
                        let text =
                            std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                                path: path.clone(),
                                source,
                            })?;
                        FixtureGeocoder::parse(&text).map_err(|e| invalid(e.to_string()))?
                    }
                };
                Ok(Geocoder::new(client))
            }
            GeocoderKind::Http => {
                let url = self
                    .url
                    .clone()
                    .ok_or_else(|| invalid("geocoder.url is required for the http geocoder"))?;
                let client = HttpGeocoder::new(HttpGeocoderConfig {
                    url,
                    api_key: self.api_key.clone(),
                    timeout: Duration::from_secs(self.timeout_secs),
                    min_interval: Duration::from_millis(self.min_interval_ms),
                })
                .map_err(|e| invalid(e.to_string()))?;
                Ok(Geocoder::new(client))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Allows running without moderator tokens.
    pub dev_mode: bool,
    pub moderators: Vec<ModeratorToken>,
    pub submissions_per_hour: u32,
    pub max_upload_bytes: usize,
    pub colocation_radius_km: f64,
    pub cors_origins: Vec<String>,
    pub geocoder: GeocoderConfig,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            dev_mode: false,
            moderators: Vec::new(),
            submissions_per_hour: 10,
            max_upload_bytes: 4 * 1024 * 1024,
            colocation_radius_km: eod_core::geo::DEFAULT_COLOCATION_RADIUS_KM,
            cors_origins: Vec::new(),
            geocoder: GeocoderConfig::default(),
        }
    }
}

impl ApiConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        if let Some(bind) = lookup("EOD_BIND") {
            self.bind = bind
                .parse()
                .map_err(|_| invalid(format!("EOD_BIND `{bind}` is not a socket address")))?;
        }
        if let Some(dir) = lookup("EOD_DATA_DIR") {
            self.data_dir = PathBuf::from(dir);
        }
        if let Some(tokens) = lookup("EOD_MODERATOR_TOKENS") {
            self.moderators = parse_tokens(&tokens)?;
        }
        if let Some(url) = lookup("EOD_GEOCODER_URL") {
            self.geocoder.kind = GeocoderKind::Http;
            self.geocoder.url = Some(url);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.moderators.is_empty() && !self.dev_mode {
            return Err(invalid(
                "at least one moderator token is required outside dev_mode",
            ));
        }
        for m in &self.moderators {
            if m.label.trim().is_empty() || m.token.is_empty() {
                return Err(invalid("moderator label and token must be non-empty"));
            }
        }
        if self.submissions_per_hour == 0 {
            return Err(invalid("submissions_per_hour must be positive"));
        }
        if self.max_upload_bytes == 0 {
            return Err(invalid("max_upload_bytes must be positive"));
        }
        if !(self.colocation_radius_km.is_finite() && self.colocation_radius_km > 0.0) {
            return Err(invalid("colocation_radius_km must be positive"));
        }
        if self.geocoder.timeout_secs == 0 {
            return Err(invalid("geocoder.timeout_secs must be positive"));
        }
        if self.geocoder.kind == GeocoderKind::Http && self.geocoder.url.is_none() {
            return Err(invalid("geocoder.url is required for the http geocoder"));
        }
        Ok(())
    }

    /// Reads `path` (or defaults), applies the process environment and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }
}

/// Parses `label:token,label:token`.
pub fn parse_tokens(text: &str) -> Result<Vec<ModeratorToken>, ConfigError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (label, token) = pair
                .split_once(':')
                .ok_or_else(|| invalid("EOD_MODERATOR_TOKENS entries must be label:token"))?;
            let (label, token) = (label.trim(), token.trim());
            if label.is_empty() || token.is_empty() {
                return Err(invalid("EOD_MODERATOR_TOKENS entries must be label:token"));
            }
            Ok(ModeratorToken {
                label: label.to_string(),
                token: token.to_string(),
            })
        })
        .collect()
}
