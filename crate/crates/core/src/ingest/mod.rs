//! Spill boundary ingestion: ESRI shapefiles, the canonical spill JSON
//! document, and degree-minute-second coordinate strings.

mod dms;
mod shapefile;
mod spill_json;
pub mod time;

pub use dms::dms_to_decimal;
pub use shapefile::{
    parse_shapefile, polygons_from_record, write_shapefile, ShapefileRecord, SHAPE_NULL,
    SHAPE_POLYGON,
};
pub use spill_json::{parse_manifest, parse_spill_json, write_spill_json, SPILL_SCHEMA_VERSION};

use crate::geo::{self, GeoError, GeoPolygon};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("bad shapefile magic {0} (expected 9994)")]
    BadMagic(i32),
    #[error("unsupported shape type {0} (only polygons are read)")]
    UnsupportedShape(i32),
    #[error("truncated file: header declares {declared} bytes, {actual} available")]
    TruncatedFile { declared: usize, actual: usize },
    #[error("malformed shapefile: {0}")]
    Malformed(String),
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("geometry error: {0}")]
    Geometry(#[from] GeoError),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// One dated boundary snapshot of a spill.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpillObservation {
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub boundary: GeoPolygon,
    pub source_tag: String,
    pub spill_id: String,
}

/// Builds one observation per shapefile, taking the largest polygon component
/// of each file and its date from the manifest.
pub fn observations_from_shapefiles(
    spill_id: &str,
    files: &[(String, Vec<u8>)],
    manifest: &std::collections::BTreeMap<String, i64>,
) -> Result<Vec<SpillObservation>> {
    let mut out = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let timestamp = *manifest.get(name).ok_or_else(|| IngestError::Schema {
            pointer: format!("/{}", name.replace('~', "~0").replace('/', "~1")),
            message: "file has no timestamp in the manifest".into(),
        })?;
        let mut components = Vec::new();
        for record in parse_shapefile(bytes)? {
            components.extend(polygons_from_record(&record)?);
        }
        let boundary = geo::largest_component(&components)?.clone();
        out.push(SpillObservation {
            timestamp,
            boundary,
            source_tag: name.clone(),
            spill_id: spill_id.to_string(),
        });
    }
    out.sort_by_key(|o| o.timestamp);
    for pair in out.windows(2) {
        if pair[0].timestamp == pair[1].timestamp {
            return Err(IngestError::Schema {
                pointer: format!("/{}", pair[1].source_tag),
                message: "duplicate timestamp within spill".into(),
            });
        }
    }
    Ok(out)
}
