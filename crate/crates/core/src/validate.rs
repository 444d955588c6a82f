//! Validation of submitted dataset metadata.
//!
//! [`validate_submission`] consumes a flat list of raw form fields (text or
//! uploaded file) and either produces a fully typed [`ValidatedDraft`] or a
//! list holding one error per offending field. It never stops at the first
//! problem so a form can highlight every bad input at once.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::model::{MediaType, Teaser};
use crate::taxonomy::{SensorModality, TaskType};

/// Form field names accepted by [`validate_submission`].
pub mod fields {
    pub const SUBMITTER_NAME: &str = "submitter_name";
    pub const SUBMITTER_EMAIL: &str = "submitter_email";
    pub const NAME: &str = "name";
    pub const PUBLISHED_ON: &str = "published_on";
    pub const MULTIPLE_LOCATIONS: &str = "multiple_locations";
    pub const ADDRESS: &str = "address";
    pub const LAT: &str = "lat";
    pub const LON: &str = "lon";
    pub const SENSORS: &str = "sensors";
    pub const TASKS: &str = "tasks";
    pub const SIZE_VALUE: &str = "size_value";
    pub const SIZE_UNIT: &str = "size_unit";
    pub const DOWNLOAD_URL: &str = "download_url";
    pub const TEASER: &str = "teaser";
    pub const DESCRIPTION: &str = "description";
}

pub const MAX_NAME_CHARS: usize = 120;
pub const MAX_SUBMITTER_NAME_CHARS: usize = 80;
pub const MAX_ADDRESS_CHARS: usize = 200;
pub const MAX_DESCRIPTION_CHARS: usize = 2000;
pub const MAX_URL_CHARS: usize = 2048;
pub const MAX_EMAIL_CHARS: usize = 254;
/// 2 MiB.
pub const MAX_TEASER_BYTES: usize = 2 * 1024 * 1024;

const MB: u64 = 1_000_000;
const GB: u64 = 1_000_000_000;
const MAX_SIZE_BYTES: u64 = 1_000_000 * GB;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawValue {
    /// Form text; may hold arbitrary bytes until validated.
    Text(Vec<u8>),
    File {
        media_type: String,
        bytes: Vec<u8>,
    },
}

/// Raw submission as received from a form, in arrival order. Field names may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawDraft {
    entries: Vec<(String, RawValue)>,
}

impl RawDraft {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: RawValue) -> &mut Self {
        self.entries.push((name.into(), value));
        self
    }

    pub fn text(&mut self, name: impl Into<String>, value: impl AsRef<str>) -> &mut Self {
        self.push(name, RawValue::Text(value.as_ref().as_bytes().to_vec()))
    }

    pub fn file(
        &mut self,
        name: impl Into<String>,
        media_type: impl Into<String>,
        bytes: Vec<u8>,
    ) -> &mut Self {
        self.push(
            name,
            RawValue::File {
                media_type: media_type.into(),
                bytes,
            },
        )
    }

    /// Drops every entry named `name`.
    pub fn remove(&mut self, name: &str) -> &mut Self {
        self.entries.retain(|(n, _)| n != name);
        self
    }

    pub fn entries(&self) -> &[(String, RawValue)] {
        &self.entries
    }

    fn values<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RawValue> + 'a {
        self.entries
            .iter()
            .filter(move |(n, _)| n == name)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    MissingField,
    DuplicateField,
    BadEncoding,
    BadLength,
    BadValue,
    BadDate,
    BadEmail,
    BadUrl,
    BadSize,
    EmptyTaxonomy,
    BadTaxonomy,
    OversizeTeaser,
    BadTeaser,
    BadLatLon,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub code: ErrorCode,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.field, self.code, self.message)
    }
}

/// Non-empty list of field errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("submission has {} invalid field(s)", .0.len())]
pub struct ValidationErrors(pub Vec<FieldError>);

impl ValidationErrors {
    pub fn codes(&self) -> impl Iterator<Item = (&str, ErrorCode)> {
        self.0.iter().map(|e| (e.field.as_str(), e.code))
    }
}

/// Location as entered on the form: either the multiple-locations marker or
/// an address, optionally with coordinates the submitter already knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DraftLocation {
    Multiple,
    Address {
        address: String,
        point: Option<GeoPoint>,
    },
}

/// A submission that passed validation; everything but the store-assigned fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedDraft {
    pub name: String,
    pub published_on: NaiveDate,
    pub location: DraftLocation,
    pub sensors: BTreeSet<SensorModality>,
    pub tasks: BTreeSet<TaskType>,
    pub size_bytes: u64,
    pub download_url: String,
    pub teaser: Teaser,
    pub description: String,
    pub submitter_name: String,
    pub submitter_email: String,
}

impl ValidatedDraft {
    /// Prints the draft back into form fields that validate to an equal draft.
    pub fn to_raw(&self) -> RawDraft {
        let mut raw = RawDraft::new();
        raw.text(fields::SUBMITTER_NAME, &self.submitter_name)
            .text(fields::SUBMITTER_EMAIL, &self.submitter_email)
            .text(fields::NAME, &self.name)
            .text(
                fields::PUBLISHED_ON,
                self.published_on.format("%Y-%m-%d").to_string(),
            );
        match &self.location {
            DraftLocation::Multiple => {
                raw.text(fields::MULTIPLE_LOCATIONS, "true");
            }
            DraftLocation::Address { address, point } => {
                raw.text(fields::ADDRESS, address);
                if let Some(p) = point {
                    raw.text(fields::LAT, format!("{}", p.lat()))
                        .text(fields::LON, format!("{}", p.lon()));
                }
            }
        }
        for s in &self.sensors {
            raw.text(fields::SENSORS, s.wire_name());
        }
        for t in &self.tasks {
            raw.text(fields::TASKS, t.wire_name());
        }
        let hundredths = self.size_bytes / (MB / 100);
        raw.text(
            fields::SIZE_VALUE,
            format!("{}.{:02}", hundredths / 100, hundredths % 100),
        )
        .text(fields::SIZE_UNIT, "MB")
        .text(fields::DOWNLOAD_URL, &self.download_url)
        .file(
            fields::TEASER,
            self.teaser.media_type.as_str(),
            self.teaser.bytes.clone(),
        )
        .text(fields::DESCRIPTION, &self.description);
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DateError {
    #[error("expected MM/DD/YYYY or YYYY-MM-DD")]
    Unparseable,
    #[error("publication date lies in the future")]
    Future,
}

/// Accepts `MM/DD/YYYY` or ISO `YYYY-MM-DD`; dates after `today` are rejected.
pub fn parse_publication_date(text: &str, today: NaiveDate) -> Result<NaiveDate, DateError> {
    let text = text.trim();
    let well_formed = |sep: char, widths: [usize; 3]| {
        let parts: Vec<&str> = text.split(sep).collect();
        parts.len() == 3
            && parts.iter().zip(widths).all(|(p, w)| {
                !p.is_empty() && p.len() <= w && p.bytes().all(|b| b.is_ascii_digit())
            })
    };
    let date = if well_formed('/', [2, 2, 4]) && text.len() >= 8 {
        NaiveDate::parse_from_str(text, "%m/%d/%Y").map_err(|_| DateError::Unparseable)?
    } else if well_formed('-', [4, 2, 2]) && text.len() == 10 {
        NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| DateError::Unparseable)?
    } else {
        return Err(DateError::Unparseable);
    };
    if date > today {
        return Err(DateError::Future);
    }
    Ok(date)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeUnit {
    Mb,
    Gb,
}

impl SizeUnit {
    pub fn bytes(&self) -> u64 {
        match self {
            SizeUnit::Mb => MB,
            SizeUnit::Gb => GB,
        }
    }
}

impl FromStr for SizeUnit {
    type Err = SizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            u if u.eq_ignore_ascii_case("mb") => Ok(SizeUnit::Mb),
            u if u.eq_ignore_ascii_case("gb") => Ok(SizeUnit::Gb),
            _ => Err(SizeError::Unit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SizeError {
    #[error("size must be a positive decimal with at most two fraction digits")]
    NotANumber,
    #[error("size must be positive")]
    NotPositive,
    #[error("size exceeds 1000000 GB")]
    TooLarge,
    #[error("unit must be MB or GB")]
    Unit,
}

/// Converts a decimal size in MB or GB (10^6 / 10^9 bytes) to bytes.
pub fn parse_size(value: &str, unit: SizeUnit) -> Result<u64, SizeError> {
    let value = value.trim();
    let (int_part, frac_part) = match value.split_once('.') {
        Some((i, f)) => (i, f),
        None => (value, ""),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int_part.is_empty() || !digits(int_part) || frac_part.len() > 2 || !digits(frac_part) {
        return Err(SizeError::NotANumber);
    }
    if value.ends_with('.') {
        return Err(SizeError::NotANumber);
    }
    let whole: u64 = int_part
        .trim_start_matches('0')
        .parse::<u64>()
        .or_else(|e| {
            if int_part.bytes().all(|b| b == b'0') {
                Ok(0)
            } else {
                Err(e)
            }
        })
        .map_err(|_| SizeError::TooLarge)?;
    let mut hundredths: u64 = 0;
    for (i, b) in frac_part.bytes().enumerate() {
        let scale = if i == 0 { 10 } else { 1 };
        hundredths += u64::from(b - b'0') * scale;
    }
    let per_unit = unit.bytes();
    let bytes = whole
        .checked_mul(per_unit)
        .and_then(|w| w.checked_add(hundredths * (per_unit / 100)))
        .ok_or(SizeError::TooLarge)?;
    if bytes == 0 {
        return Err(SizeError::NotPositive);
    }
    if bytes > MAX_SIZE_BYTES {
        return Err(SizeError::TooLarge);
    }
    Ok(bytes)
}

/// Pragmatic address check: one `@`, a dotted domain of letter/digit/hyphen labels.
pub fn is_valid_email(email: &str) -> bool {
    if email.len() > MAX_EMAIL_CHARS {
        return false;
    }
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    if local.is_empty() || local.len() > 64 || domain.contains('@') {
        return false;
    }
    let local_ok = local
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || b"!#$%&'*+-/=?^_`{|}~.".contains(&b))
        && !local.starts_with('.')
        && !local.ends_with('.')
        && !local.contains("..");
    if !local_ok {
        return false;
    }
    let labels: Vec<&str> = domain.split('.').collect();
    if labels.len() < 2 {
        return false;
    }
    let labels_ok = labels.iter().all(|l| {
        !l.is_empty()
            && l.len() <= 63
            && l.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
            && !l.starts_with('-')
            && !l.ends_with('-')
    });
    let tld = labels[labels.len() - 1];
    labels_ok && tld.len() >= 2 && tld.bytes().all(|b| b.is_ascii_alphabetic())
}

/// Absolute `http`/`https` URL with a non-empty host and optional port.
pub fn is_valid_download_url(url: &str) -> bool {
    if url.is_empty() || url.len() > MAX_URL_CHARS {
        return false;
    }
    if url.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return false;
    }
    let rest = match url.find("://") {
        Some(idx) => {
            let scheme = &url[..idx];
            if !(scheme.eq_ignore_ascii_case("http") || scheme.eq_ignore_ascii_case("https")) {
                return false;
            }
            &url[idx + 3..]
        }
        None => return false,
    };
    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let authority = &rest[..authority_end];
    let host_port = match authority.rsplit_once('@') {
        Some((_, hp)) => hp,
        None => authority,
    };
    let (host, port) = if let Some(stripped) = host_port.strip_prefix('[') {
        match stripped.split_once(']') {
            Some((h, tail)) => {
                if h.is_empty()
                    || !h
                        .bytes()
                        .all(|b| b.is_ascii_hexdigit() || b == b':' || b == b'.')
                {
                    return false;
                }
                match tail {
                    "" => (h, None),
                    t => match t.strip_prefix(':') {
                        Some(p) => (h, Some(p)),
                        None => return false,
                    },
                }
            }
            None => return false,
        }
    } else {
        match host_port.rsplit_once(':') {
            Some((h, p)) => (h, Some(p)),
            None => (host_port, None),
        }
    };
    if let Some(port) = port {
        if port.is_empty() || port.len() > 5 || port.parse::<u16>().is_err() {
            return false;
        }
    }
    if host.is_empty() || host.starts_with('.') || host.ends_with("..") || host.contains("..") {
        return false;
    }
    host.bytes()
        .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'.' || b == b':')
}

struct Collector<'a> {
    draft: &'a RawDraft,
    errors: Vec<FieldError>,
}

impl<'a> Collector<'a> {
    fn push(&mut self, field: &str, code: ErrorCode, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.to_string(),
            code,
            message: message.into(),
        });
    }

    /// The single trimmed text value of `field`; `None` when absent, blank or invalid.
    fn optional_text(&mut self, field: &str) -> Option<String> {
        let mut values = self.draft.values(field);
        let first = values.next()?;
        if values.next().is_some() {
            self.push(
                field,
                ErrorCode::DuplicateField,
                "field given more than once",
            );
            return None;
        }
        match first {
            RawValue::Text(bytes) => match core::str::from_utf8(bytes) {
                Ok(s) => {
                    let t = s.trim();
                    (!t.is_empty()).then(|| t.to_string())
                }
                Err(_) => {
                    self.push(field, ErrorCode::BadEncoding, "text is not valid UTF-8");
                    None
                }
            },
            RawValue::File { .. } => {
                self.push(
                    field,
                    ErrorCode::BadValue,
                    "expected a text value, got a file",
                );
                None
            }
        }
    }

    fn has_error(&self, field: &str) -> bool {
        self.errors.iter().any(|e| e.field == field)
    }

    fn required_text(&mut self, field: &str, max_chars: usize) -> Option<String> {
        let value = self.optional_text(field);
        match value {
            None => {
                if !self.has_error(field) {
                    self.push(field, ErrorCode::MissingField, "required field is missing");
                }
                None
            }
            Some(v) if v.chars().count() > max_chars => {
                self.push(
                    field,
                    ErrorCode::BadLength,
                    format!("must be at most {max_chars} characters"),
                );
                None
            }
            Some(v) => Some(v),
        }
    }

    fn taxonomy<T: FromStr<Err = crate::taxonomy::TaxonomyError> + Ord>(
        &mut self,
        field: &str,
    ) -> Option<BTreeSet<T>> {
        let mut set = BTreeSet::new();
        let mut bad = Vec::new();
        for value in self.draft.values(field) {
            let text = match value {
                RawValue::Text(bytes) => match core::str::from_utf8(bytes) {
                    Ok(s) => s,
                    Err(_) => {
                        bad.push(String::from("<invalid UTF-8>"));
                        continue;
                    }
                },
                RawValue::File { .. } => {
                    bad.push(String::from("<file>"));
                    continue;
                }
            };
            for piece in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                match piece.parse::<T>() {
                    Ok(v) => {
                        set.insert(v);
                    }
                    Err(e) => bad.push(format!("{piece}: {e}")),
                }
            }
        }
        if !bad.is_empty() {
            self.push(field, ErrorCode::BadTaxonomy, bad.join("; "));
            return None;
        }
        if set.is_empty() {
            self.push(field, ErrorCode::EmptyTaxonomy, "select at least one value");
            return None;
        }
        Some(set)
    }

    fn coordinate(
        &mut self,
        field: &str,
        text: &str,
        range: core::ops::RangeInclusive<f64>,
    ) -> Option<f64> {
        let parsed = text.parse::<f64>().ok().filter(|v| range.contains(v));
        if parsed.is_none() {
            self.push(
                field,
                ErrorCode::BadLatLon,
                "coordinate malformed or out of range",
            );
        }
        parsed
    }

    fn location(&mut self) -> Option<DraftLocation> {
        let multiple = match self.optional_text(fields::MULTIPLE_LOCATIONS) {
            None => false,
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "on" | "yes" | "1" => true,
                "false" | "off" | "no" | "0" => false,
                _ => {
                    self.push(
                        fields::MULTIPLE_LOCATIONS,
                        ErrorCode::BadValue,
                        "expected true or false",
                    );
                    return None;
                }
            },
        };
        if multiple {
            return Some(DraftLocation::Multiple);
        }
        let address = self.required_text(fields::ADDRESS, MAX_ADDRESS_CHARS);
        let lat_text = self.optional_text(fields::LAT);
        let lon_text = self.optional_text(fields::LON);
        let point = match (lat_text, lon_text) {
            (None, None) => None,
            (Some(lat), Some(lon)) => {
                let lat = self.coordinate(fields::LAT, &lat, -90.0..=90.0);
                let lon = self.coordinate(fields::LON, &lon, -180.0..=180.0);
                Some(GeoPoint::new(lat?, lon?).ok()?)
            }
            (Some(_), None) => {
                if !self.has_error(fields::LON) {
                    self.push(fields::LON, ErrorCode::BadLatLon, "lon required with lat");
                }
                return None;
            }
            (None, Some(_)) => {
                if !self.has_error(fields::LAT) {
                    self.push(fields::LAT, ErrorCode::BadLatLon, "lat required with lon");
                }
                return None;
            }
        };
        Some(DraftLocation::Address {
            address: address?,
            point,
        })
    }

    fn teaser(&mut self) -> Option<Teaser> {
        let mut values = self.draft.values(fields::TEASER);
        let Some(first) = values.next() else {
            self.push(
                fields::TEASER,
                ErrorCode::MissingField,
                "a teaser image is required",
            );
            return None;
        };
        if values.next().is_some() {
            self.push(
                fields::TEASER,
                ErrorCode::DuplicateField,
                "only one teaser image allowed",
            );
            return None;
        }
        let RawValue::File { media_type, bytes } = first else {
            self.push(
                fields::TEASER,
                ErrorCode::BadTeaser,
                "teaser must be an uploaded file",
            );
            return None;
        };
        if bytes.len() > MAX_TEASER_BYTES {
            self.push(
                fields::TEASER,
                ErrorCode::OversizeTeaser,
                format!("teaser exceeds {MAX_TEASER_BYTES} bytes"),
            );
            return None;
        }
        let Some(media_type) = MediaType::parse(media_type) else {
            self.push(
                fields::TEASER,
                ErrorCode::BadTeaser,
                "teaser must be image/png or image/jpeg",
            );
            return None;
        };
        if !media_type.sniff(bytes) {
            self.push(
                fields::TEASER,
                ErrorCode::BadTeaser,
                format!("content is not a valid {}", media_type.as_str()),
            );
            return None;
        }
        Some(Teaser {
            media_type,
            bytes: bytes.clone(),
        })
    }
}

/// Validates a raw submission; dates after `today` are rejected.
pub fn validate_submission(
    draft: &RawDraft,
    today: NaiveDate,
) -> Result<ValidatedDraft, ValidationErrors> {
    let mut c = Collector {
        draft,
        errors: Vec::new(),
    };

    let submitter_name = c.required_text(fields::SUBMITTER_NAME, MAX_SUBMITTER_NAME_CHARS);
    let submitter_email = c
        .required_text(fields::SUBMITTER_EMAIL, MAX_EMAIL_CHARS)
        .and_then(|email| {
            if is_valid_email(&email) {
                Some(email)
            } else {
                c.push(
                    fields::SUBMITTER_EMAIL,
                    ErrorCode::BadEmail,
                    "not a valid email address",
                );
                None
            }
        });
    let name = c.required_text(fields::NAME, MAX_NAME_CHARS);
    let published_on = c.required_text(fields::PUBLISHED_ON, 32).and_then(|text| {
        parse_publication_date(&text, today)
            .map_err(|e| c.push(fields::PUBLISHED_ON, ErrorCode::BadDate, e.to_string()))
            .ok()
    });
    let location = c.location();
    let sensors = c.taxonomy::<SensorModality>(fields::SENSORS);
    let tasks = c.taxonomy::<TaskType>(fields::TASKS);

    let size_value = c.required_text(fields::SIZE_VALUE, 32);
    let size_unit = c.required_text(fields::SIZE_UNIT, 8).and_then(|u| {
        u.parse::<SizeUnit>()
            .map_err(|e| c.push(fields::SIZE_UNIT, ErrorCode::BadSize, e.to_string()))
            .ok()
    });
    let size_bytes = match (size_value, size_unit) {
        (Some(v), Some(u)) => parse_size(&v, u)
            .map_err(|e| c.push(fields::SIZE_VALUE, ErrorCode::BadSize, e.to_string()))
            .ok(),
        _ => None,
    };

    let download_url = c
        .required_text(fields::DOWNLOAD_URL, MAX_URL_CHARS)
        .and_then(|url| {
            if is_valid_download_url(&url) {
                Some(url)
            } else {
                c.push(
                    fields::DOWNLOAD_URL,
                    ErrorCode::BadUrl,
                    "must be an absolute http(s) URL",
                );
                None
            }
        });
    let teaser = c.teaser();
    let description = c.required_text(fields::DESCRIPTION, MAX_DESCRIPTION_CHARS);

    if !c.errors.is_empty() {
        return Err(ValidationErrors(c.errors));
    }
    match (
        submitter_name,
        submitter_email,
        name,
        published_on,
        location,
        sensors,
        tasks,
        size_bytes,
        download_url,
        teaser,
        description,
    ) {
        (
            Some(submitter_name),
            Some(submitter_email),
            Some(name),
            Some(published_on),
            Some(location),
            Some(sensors),
            Some(tasks),
            Some(size_bytes),
            Some(download_url),
            Some(teaser),
            Some(description),
        ) => Ok(ValidatedDraft {
            name,
            published_on,
            location,
            sensors,
            tasks,
            size_bytes,
            download_url,
            teaser,
            description,
            submitter_name,
            submitter_email,
        }),
        // Every None above pushed an error, so this arm is unreachable in practice.
        _ => Err(ValidationErrors(alloc::vec![FieldError {
            field: String::from("*"),
            code: ErrorCode::BadValue,
            message: String::from("submission incomplete"),
        }])),
    }
}
