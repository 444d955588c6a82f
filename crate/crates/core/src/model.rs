//! Catalogue records and the types they are built from.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::taxonomy::{SensorModality, TaskType};

/// Opaque, sortable record identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetId(String);

impl DatasetId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DatasetId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Approved,
    Rejected,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pending => "pending",
            Status::Approved => "approved",
            Status::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a stored dataset was acquired.
///
/// `Unresolved` only arises when a submitted address could not be geocoded
/// because the geocoder was unreachable; it never matches location filters
/// and never produces a marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocationSpec {
    Multiple,
    Single { address: String, point: GeoPoint },
    Unresolved { address: String },
}

impl LocationSpec {
    pub fn address(&self) -> Option<&str> {
        match self {
            LocationSpec::Multiple => None,
            LocationSpec::Single { address, .. } | LocationSpec::Unresolved { address } => {
                Some(address)
            }
        }
    }

    pub fn point(&self) -> Option<GeoPoint> {
        match self {
            LocationSpec::Single { point, .. } => Some(*point),
            _ => None,
        }
    }

    /// Text shown in public views: the address, or `multiple`.
    pub fn display(&self) -> &str {
        self.address().unwrap_or("multiple")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MediaType {
    #[serde(rename = "image/png")]
    Png,
    #[serde(rename = "image/jpeg")]
    Jpeg,
}

impl MediaType {
    pub fn parse(raw: &str) -> Option<Self> {
        let essence = raw.split(';').next().unwrap_or("").trim();
        if essence.eq_ignore_ascii_case("image/png") {
            Some(MediaType::Png)
        } else if essence.eq_ignore_ascii_case("image/jpeg")
            || essence.eq_ignore_ascii_case("image/jpg")
        {
            Some(MediaType::Jpeg)
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    /// Whether `bytes` begin with this format's signature.
    pub fn sniff(&self, bytes: &[u8]) -> bool {
        match self {
            MediaType::Png => bytes.starts_with(b"\x89PNG\r\n\x1a\n"),
            MediaType::Jpeg => bytes.starts_with(&[0xFF, 0xD8, 0xFF]),
        }
    }
}

/// Reference to a stored teaser image; the bytes live outside the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeaserRef {
    pub media_type: MediaType,
    pub byte_length: u64,
}

/// Teaser image content as submitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Teaser {
    pub media_type: MediaType,
    pub bytes: Vec<u8>,
}

impl Teaser {
    pub fn reference(&self) -> TeaserRef {
        TeaserRef {
            media_type: self.media_type,
            byte_length: self.bytes.len() as u64,
        }
    }
}

/// Moderator-facing notes attached to a record at submission time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewFlag {
    /// Same name and download URL as an existing record.
    DuplicateSuspect,
    /// The geocoder was unreachable; the address still needs coordinates.
    NeedsGeocoding,
    /// The geocoder answered with confidence below 0.5.
    LowGeocodeConfidence,
}

/// Fields that are never published.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateInfo {
    pub submitter_name: String,
    pub submitter_email: String,
    #[serde(default)]
    pub review_flags: BTreeSet<ReviewFlag>,
}

/// One catalogued dataset.
///
/// The serde form is the canonical record document: snake_case fields,
/// ISO dates, sets as sorted arrays and submitter details under `private`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: DatasetId,
    pub slug: String,
    pub name: String,
    pub published_on: NaiveDate,
    pub location: LocationSpec,
    pub sensors: BTreeSet<SensorModality>,
    pub tasks: BTreeSet<TaskType>,
    pub size_bytes: u64,
    pub download_url: String,
    pub teaser_image: TeaserRef,
    pub description: String,
    pub status: Status,
    pub view_count: u64,
    pub created_at: DateTime<Utc>,
    pub private: PrivateInfo,
}

impl DatasetRecord {
    pub fn is_public(&self) -> bool {
        self.status == Status::Approved
    }

    /// Builds a fresh pending record from a validated draft.
    pub fn from_draft(
        id: DatasetId,
        slug: String,
        draft: crate::validate::ValidatedDraft,
        location: LocationSpec,
        created_at: DateTime<Utc>,
    ) -> Self {
        DatasetRecord {
            id,
            slug,
            name: draft.name,
            published_on: draft.published_on,
            location,
            sensors: draft.sensors,
            tasks: draft.tasks,
            size_bytes: draft.size_bytes,
            download_url: draft.download_url,
            teaser_image: draft.teaser.reference(),
            description: draft.description,
            status: Status::Pending,
            view_count: 0,
            created_at,
            private: PrivateInfo {
                submitter_name: draft.submitter_name,
                submitter_email: draft.submitter_email,
                review_flags: BTreeSet::new(),
            },
        }
    }

    /// Structural checks applied to records arriving from outside (snapshots).
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if self.sensors.is_empty() {
            return Err("sensors must not be empty");
        }
        if self.tasks.is_empty() {
            return Err("tasks must not be empty");
        }
        if self.size_bytes == 0 {
            return Err("size_bytes must be positive");
        }
        if self.slug.is_empty()
            || !self
                .slug
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        {
            return Err("slug is not URL-safe");
        }
        if self.id.as_str().is_empty() {
            return Err("id must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Approve,
    Reject,
}

impl Decision {
    pub fn resulting_status(&self) -> Status {
        match self {
            Decision::Approve => Status::Approved,
            Decision::Reject => Status::Rejected,
        }
    }
}

/// Audit entry for a moderation decision. Append-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModerationEvent {
    pub record_id: DatasetId,
    pub decision: Decision,
    pub moderator_id: String,
    pub reason: Option<String>,
    pub at: DateTime<Utc>,
}
