//! Public projections of records. Nothing here can carry submitter details.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{DatasetId, DatasetRecord};
use crate::taxonomy::{SensorModality, TaskType};

/// The detail fields shown to anonymous visitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicRecordView {
    pub id: DatasetId,
    pub slug: String,
    pub name: String,
    pub published_on: NaiveDate,
    /// Address text, or `multiple`.
    pub location: String,
    pub sensors: BTreeSet<SensorModality>,
    pub tasks: BTreeSet<TaskType>,
    pub size_bytes: u64,
    pub size: String,
    pub download_url: String,
    pub view_count: u64,
    pub teaser_url: String,
    pub description: String,
}

impl PublicRecordView {
    pub fn from_record(record: &DatasetRecord) -> Self {
        Self {
            id: record.id.clone(),
            slug: record.slug.clone(),
            name: record.name.clone(),
            published_on: record.published_on,
            location: record.location.display().to_string(),
            sensors: record.sensors.clone(),
            tasks: record.tasks.clone(),
            size_bytes: record.size_bytes,
            size: format_size(record.size_bytes),
            download_url: record.download_url.clone(),
            view_count: record.view_count,
            teaser_url: format!("/api/teasers/{}", record.id),
            description: record.description.clone(),
        }
    }
}

impl From<&DatasetRecord> for PublicRecordView {
    fn from(record: &DatasetRecord) -> Self {
        Self::from_record(record)
    }
}

/// Decimal size with at most two fraction digits, in GB from 1 GB upward, else MB.
pub fn format_size(bytes: u64) -> String {
    let (unit, name) = if bytes >= 1_000_000_000 {
        (1_000_000_000u64, "GB")
    } else {
        (1_000_000u64, "MB")
    };
    let step = unit / 100;
    let hundredths = (bytes + step / 2) / step;
    let whole = hundredths / 100;
    let frac = hundredths % 100;
    match frac {
        0 => format!("{whole} {name}"),
        f if f % 10 == 0 => format!("{whole}.{} {name}", f / 10),
        f => format!("{whole}.{f:02} {name}"),
    }
}
