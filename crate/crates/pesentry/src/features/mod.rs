//! The 2,381-dimension static feature vector and the grayscale transform.

pub mod bytes;
pub mod grayscale;
pub mod hashing;
pub mod parsed;

pub use grayscale::{extract_grayscale, GrayscaleError, GrayscaleImage};

use crate::pe::{parse_pe, RawBinary};

pub const FEATURE_DIM: usize = 2381;
pub const SCHEMA_VERSION: u16 = 1;

/// One named block of the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureGroup {
    pub name: &'static str,
    pub offset: usize,
    pub width: usize,
}

impl FeatureGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.width
    }
}

/// Canonical group layout; widths sum to exactly 2,381.
pub const FEATURE_LAYOUT: [FeatureGroup; 9] = [
    FeatureGroup { name: "byte_histogram", offset: 0, width: 256 },
    FeatureGroup { name: "byte_entropy", offset: 256, width: 256 },
    FeatureGroup { name: "strings", offset: 512, width: 104 },
    FeatureGroup { name: "general", offset: 616, width: 10 },
    FeatureGroup { name: "header", offset: 626, width: 62 },
    FeatureGroup { name: "section", offset: 688, width: 255 },
    FeatureGroup { name: "imports", offset: 943, width: 1280 },
    FeatureGroup { name: "exports", offset: 2223, width: 128 },
    FeatureGroup { name: "data_directories", offset: 2351, width: 30 },
];

pub fn group(name: &str) -> FeatureGroup {
    *FEATURE_LAYOUT
        .iter()
        .find(|g| g.name == name)
        .unwrap_or_else(|| panic!("unknown feature group {name}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_version: u16,
}

impl FeatureVector {
    pub fn group_slice(&self, name: &str) -> &[f64] {
        &self.values[group(name).range()]
    }
}

/// Full Table-3-style extraction: parse, then concatenate the nine group
/// extractors in layout order. Total for any input, including malformed
/// files, which contribute byte-level groups only.
pub fn extract_feature_vector(raw: &RawBinary) -> FeatureVector {
    let outcome = parse_pe(raw);
    let pe = outcome.parsed();
    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.extend(bytes::extract_byte_histogram(raw));
    values.extend(bytes::extract_byte_entropy_histogram(raw));
    values.extend(bytes::extract_string_features(raw));
    values.extend(parsed::extract_general_info(pe, raw));
    values.extend(parsed::extract_header_info(pe));
    values.extend(parsed::extract_section_features(pe));
    values.extend(parsed::extract_import_features(pe));
    values.extend(parsed::extract_export_features(pe));
    values.extend(parsed::extract_data_directories(pe));
    debug_assert_eq!(values.len(), FEATURE_DIM);
    FeatureVector {
        values,
        schema_version: SCHEMA_VERSION,
    }
}
