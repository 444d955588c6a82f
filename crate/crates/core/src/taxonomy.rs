//! Controlled vocabularies for sensor modalities and tasks.
//!
//! Both taxonomies share one wire grammar: a fixed snake_case name per
//! variant (`sar`, `semantic_segmentation`, ...) or `other:<label>` for the
//! free-text escape hatch. Matching is case-insensitive and treats `-` and
//! spaces like `_`, so `Laser Scanning` and `laser-scanning` both parse.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Maximum length, in characters, of an `Other` label.
pub const MAX_OTHER_LABEL_CHARS: usize = 40;

const OTHER_PREFIX: &str = "other:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("unknown taxonomy value `{0}`")]
    Unknown(String),
    #[error("`other` label must not be empty")]
    EmptyLabel,
    #[error("`other` label exceeds {MAX_OTHER_LABEL_CHARS} characters")]
    LabelTooLong,
    #[error("`other` label contains a forbidden character")]
    LabelBadChar,
}

/// A free-text taxonomy label: trimmed, lowercased, at most 40 characters.
///
/// Commas and control characters are rejected so labels survive the
/// comma-separated query grammar unchanged.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OtherLabel(String);

impl OtherLabel {
    pub fn new(raw: &str) -> Result<Self, TaxonomyError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(TaxonomyError::EmptyLabel);
        }
        if trimmed.chars().count() > MAX_OTHER_LABEL_CHARS {
            return Err(TaxonomyError::LabelTooLong);
        }
        if trimmed.chars().any(|c| c == ',' || c.is_control()) {
            return Err(TaxonomyError::LabelBadChar);
        }
        Ok(Self(trimmed.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Lowercases and folds `-` and ASCII spaces into `_`.
fn fold_name(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            '-' | ' ' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

macro_rules! taxonomy {
    (
        $(#[$meta:meta])*
        pub enum $name:ident {
            $( $variant:ident => ($wire:literal, $display:literal), )+
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $( $variant, )+
            Other(OtherLabel),
        }

        impl $name {
            /// Every fixed (non-`Other`) variant, in declaration order.
            pub const FIXED: &'static [$name] = &[$( $name::$variant, )+];

            /// The canonical wire name, e.g. `sar` or `other:hyperspectral lidar`.
            pub fn wire_name(&self) -> String {
                match self {
                    $( $name::$variant => $wire.to_string(), )+
                    $name::Other(label) => alloc::format!("{OTHER_PREFIX}{}", label.as_str()),
                }
            }

            /// Human-readable name for list and comparison views.
            pub fn display_name(&self) -> &str {
                match self {
                    $( $name::$variant => $display, )+
                    $name::Other(label) => label.as_str(),
                }
            }

            pub fn other(label: &str) -> Result<Self, TaxonomyError> {
                OtherLabel::new(label).map($name::Other)
            }
        }

        impl FromStr for $name {
            type Err = TaxonomyError;

            fn from_str(raw: &str) -> Result<Self, Self::Err> {
                let trimmed = raw.trim();
                let prefix_len = OTHER_PREFIX.len();
                if trimmed.len() >= prefix_len
                    && trimmed.is_char_boundary(prefix_len)
                    && trimmed[..prefix_len].eq_ignore_ascii_case(OTHER_PREFIX)
                {
                    return $name::other(&trimmed[prefix_len..]);
                }
                match fold_name(trimmed).as_str() {
                    $( $wire => Ok($name::$variant), )+
                    _ => Err(TaxonomyError::Unknown(trimmed.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.display_name())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.wire_name())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

taxonomy! {
    /// Imaging technology behind a dataset.
    pub enum SensorModality {
        Optical => ("optical", "Optical"),
        Multispectral => ("multispectral", "Multispectral"),
        Hyperspectral => ("hyperspectral", "Hyperspectral"),
        Sar => ("sar", "SAR"),
        LaserScanning => ("laser_scanning", "Laser scanning"),
        Thermal => ("thermal", "Thermal"),
    }
}

taxonomy! {
    /// Task or application a dataset is annotated for.
    pub enum TaskType {
        ObjectDetection => ("object_detection", "Object detection"),
        SemanticSegmentation => ("semantic_segmentation", "Semantic segmentation"),
        InstanceSegmentation => ("instance_segmentation", "Instance segmentation"),
        SceneClassification => ("scene_classification", "Scene classification"),
        Regression => ("regression", "Regression"),
        ChangeDetection => ("change_detection", "Change detection"),
    }
}
