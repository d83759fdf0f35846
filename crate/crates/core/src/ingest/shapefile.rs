//! Minimal ESRI `.shp` reader and writer for polygon (type 5) files.
//!
//! Layout: a 100-byte header (file code and length big-endian, version and
//! shape type little-endian), then records made of an 8-byte big-endian
//! header followed by a little-endian shape payload. Lengths are counted in
//! 16-bit words.

use super::{IngestError, Result};
use crate::geo::{point_in_ring, GeoPolygon, LonLat, Point};

pub const SHAPE_NULL: i32 = 0;
pub const SHAPE_POLYGON: i32 = 5;

const FILE_CODE: i32 = 9994;
const VERSION: i32 = 1000;
const HEADER_LEN: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct ShapefileRecord {
    pub record_number: i32,
    pub shape_type: i32,
    /// Index of the first point of each ring.
    pub parts: Vec<usize>,
    /// `(x, y)` = `(lon, lat)`; rings are explicitly closed.
    pub points: Vec<[f64; 2]>,
    /// `(xmin, ymin, xmax, ymax)`
    pub bbox: [f64; 4],
}

impl ShapefileRecord {
    /// Encodes a polygon using the ESRI ring convention: exterior clockwise,
    /// holes counter-clockwise, every ring closed.
    pub fn from_polygon(record_number: i32, polygon: &GeoPolygon) -> Self {
        let mut parts = Vec::new();
        let mut points = Vec::new();
        // GeoPolygon stores the exterior CCW and holes CW; flip both.
        let rings = std::iter::once(polygon.exterior()).chain(polygon.holes().iter().map(Vec::as_slice));
        for ring in rings {
            parts.push(points.len());
            points.push([ring[0].lon, ring[0].lat]);
            points.extend(ring[1..].iter().rev().map(|p| [p.lon, p.lat]));
            points.push([ring[0].lon, ring[0].lat]);
        }
        let bbox = bbox_of(&points);
        Self {
            record_number,
            shape_type: SHAPE_POLYGON,
            parts,
            points,
            bbox,
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &[[f64; 2]]> {
        let ends = self.parts.iter().skip(1).copied().chain(std::iter::once(self.points.len()));
        self.parts
            .iter()
            .zip(ends)
            .map(move |(&start, end)| &self.points[start..end])
    }
}

fn bbox_of(points: &[[f64; 2]]) -> [f64; 4] {
    points.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
    )
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            IngestError::Malformed(format!("record overruns the declared file length at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn i32_be(&mut self) -> Result<i32> {
        Ok(i32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32_le(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64_le(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes every polygon record of a `.shp` file. Null records are skipped.
pub fn parse_shapefile(bytes: &[u8]) -> Result<Vec<ShapefileRecord>> {
    if bytes.len() < 4 {
        return Err(IngestError::TruncatedFile {
            declared: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let magic = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != FILE_CODE {
        return Err(IngestError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(IngestError::TruncatedFile {
            declared: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let words = i32::from_be_bytes(bytes[24..28].try_into().unwrap());
    let declared = usize::try_from(words)
        .ok()
        .and_then(|w| w.checked_mul(2))
        .ok_or_else(|| IngestError::Malformed(format!("negative file length {words}")))?;
    if declared > bytes.len() {
        return Err(IngestError::TruncatedFile {
            declared,
            actual: bytes.len(),
        });
    }
    if declared < HEADER_LEN {
        return Err(IngestError::Malformed(format!(
            "declared length {declared} is shorter than the header"
        )));
    }
    let version = i32::from_le_bytes(bytes[28..32].try_into().unwrap());
    if version != VERSION {
        return Err(IngestError::Malformed(format!("unsupported version {version}")));
    }
    let file_type = i32::from_le_bytes(bytes[32..36].try_into().unwrap());
    if file_type != SHAPE_POLYGON && file_type != SHAPE_NULL {
        return Err(IngestError::UnsupportedShape(file_type));
    }

    // never look past the declared length
    let mut cur = Cursor {
        bytes: &bytes[..declared],
        pos: HEADER_LEN,
    };
    let mut records = Vec::new();
    while cur.pos < declared {
        let record_number = cur.i32_be()?;
        let content_words = cur.i32_be()?;
        let content_len = usize::try_from(content_words)
            .map(|w| w * 2)
            .map_err(|_| IngestError::Malformed(format!("negative content length in record {record_number}")))?;
        let content = cur.take(content_len)?;
        if let Some(record) = parse_record(record_number, content)? {
            records.push(record);
        }
    }
    Ok(records)
}

fn parse_record(record_number: i32, content: &[u8]) -> Result<Option<ShapefileRecord>> {
    let mut cur = Cursor { bytes: content, pos: 0 };
    let shape_type = cur.i32_le()?;
    match shape_type {
        SHAPE_NULL => return Ok(None),
        SHAPE_POLYGON => {}
        other => return Err(IngestError::UnsupportedShape(other)),
    }
    if record_number <= 0 {
        return Err(IngestError::Malformed(format!("record number {record_number} is not positive")));
    }
    let bbox = [cur.f64_le()?, cur.f64_le()?, cur.f64_le()?, cur.f64_le()?];
    let num_parts = cur.i32_le()?;
    let num_points = cur.i32_le()?;
    if num_parts <= 0 || num_points <= 0 {
        return Err(IngestError::Malformed(format!(
            "record {record_number}: {num_parts} parts, {num_points} points"
        )));
    }
    let (num_parts, num_points) = (num_parts as usize, num_points as usize);
    // bound the allocation by what the record can actually hold
    if num_parts * 4 + num_points * 16 > content.len() - cur.pos {
        return Err(IngestError::Malformed(format!(
            "record {record_number}: counts exceed the record length"
        )));
    }
    let mut parts = Vec::with_capacity(num_parts);
    for _ in 0..num_parts {
        let p = cur.i32_le()?;
        let p = usize::try_from(p)
            .ok()
            .filter(|&p| p < num_points)
            .ok_or_else(|| IngestError::Malformed(format!("record {record_number}: part offset {p} out of range")))?;
        if parts.last().is_some_and(|&last| p <= last) {
            return Err(IngestError::Malformed(format!(
                "record {record_number}: part offsets not strictly increasing"
            )));
        }
        parts.push(p);
    }
    if parts[0] != 0 {
        return Err(IngestError::Malformed(format!("record {record_number}: first part must start at 0")));
    }
    let mut points = Vec::with_capacity(num_points);
    for _ in 0..num_points {
        points.push([cur.f64_le()?, cur.f64_le()?]);
    }
    Ok(Some(ShapefileRecord {
        record_number,
        shape_type,
        parts,
        points,
        bbox,
    }))
}

/// Encodes polygon records as a complete `.shp` file.
pub fn write_shapefile(records: &[ShapefileRecord]) -> Vec<u8> {
    let mut body = Vec::new();
    for r in records {
        let content_len = 4 + 32 + 8 + 4 * r.parts.len() + 16 * r.points.len();
        body.extend_from_slice(&r.record_number.to_be_bytes());
        body.extend_from_slice(&((content_len / 2) as i32).to_be_bytes());
        body.extend_from_slice(&r.shape_type.to_le_bytes());
        for v in r.bbox {
            body.extend_from_slice(&v.to_le_bytes());
        }
        body.extend_from_slice(&(r.parts.len() as i32).to_le_bytes());
        body.extend_from_slice(&(r.points.len() as i32).to_le_bytes());
        for &p in &r.parts {
            body.extend_from_slice(&(p as i32).to_le_bytes());
        }
        for p in &r.points {
            body.extend_from_slice(&p[0].to_le_bytes());
            body.extend_from_slice(&p[1].to_le_bytes());
        }
    }
    let total = HEADER_LEN + body.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&FILE_CODE.to_be_bytes());
    out.extend_from_slice(&[0u8; 20]);
    out.extend_from_slice(&((total / 2) as i32).to_be_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&SHAPE_POLYGON.to_le_bytes());
    let all: Vec<[f64; 2]> = records.iter().flat_map(|r| r.points.iter().copied()).collect();
    let bbox = if all.is_empty() { [0.0; 4] } else { bbox_of(&all) };
    for v in bbox {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&[0u8; 32]);
    out.extend_from_slice(&body);
    out
}

fn ring_signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Splits a record into polygons. Ring 0 is an exterior; later rings wound
/// like ring 0 start new components, rings wound the other way are holes of
/// the component that contains them.
pub fn polygons_from_record(record: &ShapefileRecord) -> Result<Vec<GeoPolygon>> {
    let mut components: Vec<(Vec<LonLat>, Vec<Vec<LonLat>>)> = Vec::new();
    let mut reference = 0.0;
    for (i, ring) in record.rings().enumerate() {
        let sign = ring_signed_area(ring).signum();
        let pts: Vec<LonLat> = ring.iter().map(|&p| LonLat::from(p)).collect();
        if i == 0 {
            reference = sign;
        }
        if i == 0 || sign == reference {
            components.push((pts, Vec::new()));
        } else {
            let probe = Point::new(pts[0].lon, pts[0].lat);
            let owner = components
                .iter()
                .rposition(|(ext, _)| {
                    let ext: Vec<Point> = ext.iter().map(|p| Point::new(p.lon, p.lat)).collect();
                    point_in_ring(probe, &ext)
                })
                .unwrap_or(components.len() - 1);
            components[owner].1.push(pts);
        }
    }
    components
        .into_iter()
        .map(|(ext, holes)| GeoPolygon::new(ext, holes).map_err(IngestError::from))
        .collect()
}
