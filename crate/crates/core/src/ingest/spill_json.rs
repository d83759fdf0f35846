//! Canonical spill document:
//!
//! ```json
//! {"schema_version": "1.0", "spill_id": "dwh",
//!  "observations": [{"timestamp_utc": "2010-04-24T00:00:00Z",
//!                    "exterior": [[lon, lat], ...], "holes": [[[lon, lat], ...]]}]}
//! ```

use super::time::{format_iso8601, parse_iso8601};
use super::{IngestError, Result, SpillObservation};
use crate::geo::{GeoPolygon, LonLat};
use serde_json::{json, Value};
use std::collections::BTreeMap;

pub const SPILL_SCHEMA_VERSION: &str = "1.0";

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Rejects documents whose `schema_version` has a major version other than 1.
pub(crate) fn check_schema_version(doc: &Value) -> Result<()> {
    match doc.get("schema_version") {
        None => Ok(()),
        Some(Value::String(v)) if v.split('.').next() == Some("1") => Ok(()),
        Some(other) => Err(schema("/schema_version", format!("unsupported schema version {other}"))),
    }
}

fn parse_ring(value: &Value, pointer: &str) -> Result<Vec<LonLat>> {
    let items = value
        .as_array()
        .ok_or_else(|| schema(pointer, "expected an array of [lon, lat] pairs"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let p = format!("{pointer}/{i}");
            match pair.as_array().map(|a| a.as_slice()) {
                Some([lon, lat]) => match (lon.as_f64(), lat.as_f64()) {
                    (Some(lon), Some(lat)) => Ok(LonLat::new(lon, lat)),
                    _ => Err(schema(p, "coordinates must be numbers")),
                },
                _ => Err(schema(p, "expected [lon, lat]")),
            }
        })
        .collect()
}

pub fn parse_spill_json(text: &str) -> Result<Vec<SpillObservation>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
    check_schema_version(&doc)?;
    let spill_id = doc
        .get("spill_id")
        .and_then(Value::as_str)
        .ok_or_else(|| schema("/spill_id", "missing string field"))?;
    let observations = doc
        .get("observations")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("/observations", "missing array field"))?;

    let mut out = Vec::with_capacity(observations.len());
    for (i, obs) in observations.iter().enumerate() {
        let base = format!("/observations/{i}");
        let ts_text = obs
            .get("timestamp_utc")
            .and_then(Value::as_str)
            .ok_or_else(|| schema(format!("{base}/timestamp_utc"), "missing string field"))?;
        let timestamp = parse_iso8601(ts_text)
            .ok_or_else(|| schema(format!("{base}/timestamp_utc"), format!("not ISO-8601: {ts_text:?}")))?;
        let exterior = parse_ring(
            obs.get("exterior")
                .ok_or_else(|| schema(format!("{base}/exterior"), "missing field"))?,
            &format!("{base}/exterior"),
        )?;
        let holes = match obs.get("holes") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(hs)) => hs
                .iter()
                .enumerate()
                .map(|(j, h)| parse_ring(h, &format!("{base}/holes/{j}")))
                .collect::<Result<_>>()?,
            Some(_) => return Err(schema(format!("{base}/holes"), "expected an array of rings")),
        };
        let boundary = GeoPolygon::new(exterior, holes)?;
        let source_tag = obs
            .get("source_tag")
            .and_then(Value::as_str)
            .unwrap_or("json")
            .to_string();
        out.push((i, SpillObservation {
            timestamp,
            boundary,
            source_tag,
            spill_id: spill_id.to_string(),
        }));
    }
    out.sort_by_key(|(_, o)| o.timestamp);
    for pair in out.windows(2) {
        if pair[0].1.timestamp == pair[1].1.timestamp {
            return Err(schema(
                format!("/observations/{}/timestamp_utc", pair[1].0.max(pair[0].0)),
                "duplicate timestamp within spill",
            ));
        }
    }
    Ok(out.into_iter().map(|(_, o)| o).collect())
}

pub fn write_spill_json(spill_id: &str, observations: &[SpillObservation]) -> String {
    let ring = |r: &[LonLat]| r.iter().map(|p| json!([p.lon, p.lat])).collect::<Vec<_>>();
    let obs: Vec<Value> = observations
        .iter()
        .map(|o| {
            json!({
                "timestamp_utc": format_iso8601(o.timestamp),
                "source_tag": o.source_tag,
                "exterior": ring(o.boundary.exterior()),
                "holes": o.boundary.holes().iter().map(|h| ring(h)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = json!({
        "schema_version": SPILL_SCHEMA_VERSION,
        "spill_id": spill_id,
        "observations": obs,
    });
    serde_json::to_string_pretty(&doc).expect("spill document serializes")
}

/// Manifest mapping shapefile names to ISO-8601 timestamps.
pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, i64>> {
    let doc: BTreeMap<String, String> =
        serde_json::from_str(text).map_err(|e| schema("", format!("manifest must map names to strings: {e}")))?;
    doc.into_iter()
        .map(|(name, ts)| {
            let t = parse_iso8601(&ts).ok_or_else(|| {
                schema(format!("/{}", name.replace('~', "~0").replace('/', "~1")), format!("not ISO-8601: {ts:?}"))
            })?;
            Ok((name, t))
        })
        .collect()
}
