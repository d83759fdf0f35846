//! Polygon geometry on WGS84 longitude/latitude coordinates.
//!
//! Areas and shape descriptors are computed on a local equirectangular
//! projection centred on the polygon's bounding box; perimeters use great
//! circle (haversine) distances. Spill extents are small (a few degrees at
//! most), which keeps the projection error well below one percent.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("shape has no spread along its minor axis (collinear vertices)")]
    ZeroVarianceShape,
    #[error("empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, GeoError>;

/// A WGS84 coordinate in degrees. Serialized as `[lon, lat]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }
}

impl From<[f64; 2]> for LonLat {
    fn from(v: [f64; 2]) -> Self {
        Self { lon: v[0], lat: v[1] }
    }
}

impl From<LonLat> for [f64; 2] {
    fn from(p: LonLat) -> Self {
        [p.lon, p.lat]
    }
}

/// A point on a local tangent plane, in kilometres east / north.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: LonLat, b: LonLat) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// A simple polygon with optional holes.
///
/// Construction validates the rings and normalizes winding: the exterior is
/// counter-clockwise and every hole clockwise (in the lon/lat plane). An
/// explicit closing vertex equal to the first one is dropped.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeoPolygon {
    exterior: Vec<LonLat>,
    holes: Vec<Vec<LonLat>>,
}

impl GeoPolygon {
    pub fn new(exterior: Vec<LonLat>, holes: Vec<Vec<LonLat>>) -> Result<Self> {
        let mut exterior = prepare_ring(exterior, "exterior")?;
        if signed_area_deg(&exterior) < 0.0 {
            reverse_ring(&mut exterior);
        }
        let mut normalized = Vec::with_capacity(holes.len());
        for (i, hole) in holes.into_iter().enumerate() {
            let mut hole = prepare_ring(hole, &format!("hole {i}"))?;
            if !point_in_ring_deg(hole[0], &exterior) {
                return Err(GeoError::InvalidGeometry(format!(
                    "hole {i} lies outside the exterior ring"
                )));
            }
            if signed_area_deg(&hole) > 0.0 {
                reverse_ring(&mut hole);
            }
            normalized.push(hole);
        }
        Ok(Self {
            exterior,
            holes: normalized,
        })
    }

    pub fn from_exterior(exterior: Vec<LonLat>) -> Result<Self> {
        Self::new(exterior, Vec::new())
    }

    pub fn exterior(&self) -> &[LonLat] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<LonLat>] {
        &self.holes
    }

    /// (min lon, min lat, max lon, max lat) of the exterior ring.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        bbox_of(self.exterior.iter().copied())
    }
}

fn bbox_of(points: impl Iterator<Item = LonLat>) -> (f64, f64, f64, f64) {
    points.fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(x0, y0, x1, y1), p| (x0.min(p.lon), y0.min(p.lat), x1.max(p.lon), y1.max(p.lat)),
    )
}

// Reverses orientation while keeping the first vertex in place, so that
// reversing twice restores the original vertex order exactly.
fn reverse_ring<T>(ring: &mut [T]) {
    if ring.len() > 1 {
        ring[1..].reverse();
    }
}

fn prepare_ring(mut ring: Vec<LonLat>, what: &str) -> Result<Vec<LonLat>> {
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    for p in &ring {
        if !p.lon.is_finite() || !p.lat.is_finite() {
            return Err(GeoError::InvalidGeometry(format!("{what}: non-finite coordinate")));
        }
        if !(-180.0..=180.0).contains(&p.lon) || !(-90.0..=90.0).contains(&p.lat) {
            return Err(GeoError::InvalidGeometry(format!(
                "{what}: coordinate ({}, {}) out of range",
                p.lon, p.lat
            )));
        }
    }
    let mut distinct: Vec<LonLat> = Vec::new();
    for p in &ring {
        if !distinct.contains(p) {
            distinct.push(*p);
            if distinct.len() >= 3 {
                break;
            }
        }
    }
    if distinct.len() < 3 {
        return Err(GeoError::InvalidGeometry(format!(
            "{what}: needs at least 3 distinct vertices"
        )));
    }
    if signed_area_deg(&ring) == 0.0 {
        return Err(GeoError::InvalidGeometry(format!("{what}: zero area")));
    }
    if ring_self_intersects(&ring) {
        return Err(GeoError::InvalidGeometry(format!("{what}: ring self-intersects")));
    }
    Ok(ring)
}

fn signed_area_deg(ring: &[LonLat]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.lon * b.lat - b.lon * a.lat
        })
        .sum::<f64>()
        / 2.0
}

fn orient(a: LonLat, b: LonLat, c: LonLat) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn on_segment(a: LonLat, b: LonLat, p: LonLat) -> bool {
    p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

fn segments_intersect(p1: LonLat, p2: LonLat, q1: LonLat, q2: LonLat) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn ring_self_intersects(ring: &[LonLat]) -> bool {
    // zero-length edges from repeated vertices are ignored
    let mut pts: Vec<LonLat> = Vec::with_capacity(ring.len());
    for p in ring {
        if pts.last() != Some(p) {
            pts.push(*p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let n = pts.len();
    for i in 0..n {
        let (a1, a2) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (pts[j], pts[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

fn point_in_ring_deg(p: LonLat, ring: &[LonLat]) -> bool {
    let pts: Vec<Point> = ring.iter().map(|q| Point::new(q.lon, q.lat)).collect();
    point_in_ring(Point::new(p.lon, p.lat), &pts)
}

/// Even-odd point-in-ring test on the plane.
pub fn point_in_ring(p: Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Equirectangular projection about a fixed origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: LonLat,
    cos_lat0: f64,
}

impl LocalFrame {
    pub fn new(origin: LonLat) -> Self {
        Self {
            origin,
            cos_lat0: origin.lat.to_radians().cos(),
        }
    }

    /// Frame centred on the polygon's bounding box.
    pub fn centered_on(polygon: &GeoPolygon) -> Self {
        let (x0, y0, x1, y1) = polygon.bbox();
        Self::new(LonLat::new((x0 + x1) / 2.0, (y0 + y1) / 2.0))
    }

    pub fn to_local(&self, p: LonLat) -> Point {
        let k = EARTH_RADIUS_KM * PI / 180.0;
        Point::new(
            k * (p.lon - self.origin.lon) * self.cos_lat0,
            k * (p.lat - self.origin.lat),
        )
    }

    pub fn to_geo(&self, p: Point) -> LonLat {
        let k = EARTH_RADIUS_KM * PI / 180.0;
        LonLat::new(
            self.origin.lon + p.x / (k * self.cos_lat0),
            self.origin.lat + p.y / k,
        )
    }

    pub fn project(&self, polygon: &GeoPolygon) -> PlanarPolygon {
        PlanarPolygon {
            exterior: polygon.exterior.iter().map(|&p| self.to_local(p)).collect(),
            holes: polygon
                .holes
                .iter()
                .map(|h| h.iter().map(|&p| self.to_local(p)).collect())
                .collect(),
        }
    }

    pub fn unproject(&self, polygon: &PlanarPolygon) -> Result<GeoPolygon> {
        GeoPolygon::new(
            polygon.exterior.iter().map(|&p| self.to_geo(p)).collect(),
            polygon
                .holes
                .iter()
                .map(|h| h.iter().map(|&p| self.to_geo(p)).collect())
                .collect(),
        )
    }
}

/// A polygon on the local plane (km).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarPolygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl PlanarPolygon {
    pub fn from_exterior(exterior: Vec<Point>) -> Self {
        Self {
            exterior,
            holes: Vec::new(),
        }
    }

    pub fn area(&self) -> f64 {
        ring_signed_area(&self.exterior).abs()
            - self.holes.iter().map(|h| ring_signed_area(h).abs()).sum::<f64>()
    }

    /// Length of the exterior ring.
    pub fn perimeter(&self) -> f64 {
        ring_length(&self.exterior)
    }

    /// Area centroid, holes subtracted.
    pub fn centroid(&self) -> Point {
        let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
        let rings = std::iter::once((&self.exterior, 1.0)).chain(self.holes.iter().map(|h| (h, -1.0)));
        for (ring, sign) in rings {
            let a = ring_signed_area(ring);
            let (rx, ry) = ring_moments(ring);
            area += sign * a.abs();
            mx += sign * rx * a.signum();
            my += sign * ry * a.signum();
        }
        Point::new(mx / area, my / area)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        self.map(|p| Point::new(p.x + dx, p.y + dy))
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        Self {
            exterior: self.exterior.iter().map(|&p| f(p)).collect(),
            holes: self
                .holes
                .iter()
                .map(|h| h.iter().map(|&p| f(p)).collect())
                .collect(),
        }
    }
}

fn ring_signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

// First moments (Σ (xi + xj) cross / 6) of a ring, such that centroid = moment / area.
fn ring_moments(ring: &[Point]) -> (f64, f64) {
    let n = ring.len();
    let mut mx = 0.0;
    let mut my = 0.0;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let cross = a.x * b.y - b.x * a.y;
        mx += (a.x + b.x) * cross;
        my += (a.y + b.y) * cross;
    }
    (mx / 6.0, my / 6.0)
}

pub fn ring_length(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].dist(ring[(i + 1) % n])).sum()
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shape descriptors on the local plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarShape {
    pub area: f64,
    pub perimeter: f64,
    pub centroid: Point,
    pub compactness: f64,
    pub convexity: f64,
    pub aspect_ratio: f64,
    pub orientation_sin2t: f64,
    pub orientation_cos2t: f64,
}

pub fn planar_shape(polygon: &PlanarPolygon) -> Result<PlanarShape> {
    if polygon.exterior.len() < 3 {
        return Err(GeoError::InvalidGeometry("fewer than 3 vertices".into()));
    }
    let area = polygon.area();
    let perimeter = polygon.perimeter();
    if !(area > 0.0) || !(perimeter > 0.0) {
        return Err(GeoError::InvalidGeometry("degenerate planar polygon".into()));
    }
    let hull_area = ring_signed_area(&convex_hull(&polygon.exterior)).abs();

    // principal axes of the vertex covariance
    let n = polygon.exterior.len() as f64;
    let (mx, my) = polygon
        .exterior
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x / n, sy + p.y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in &polygon.exterior {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx / n;
        syy += dy * dy / n;
        sxy += dx * dy / n;
    }
    let half_trace = (sxx + syy) / 2.0;
    let disc = (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    let (l1, l2) = (half_trace + disc, half_trace - disc);
    if l2 < 1e-12 {
        return Err(GeoError::ZeroVarianceShape);
    }
    // 2θ of the major axis; an isotropic shape gets θ = 0
    let r = (sxx - syy).hypot(2.0 * sxy);
    let (sin2t, cos2t) = if r > 1e-15 * half_trace.max(f64::MIN_POSITIVE) {
        (2.0 * sxy / r, (sxx - syy) / r)
    } else {
        (0.0, 1.0)
    };

    Ok(PlanarShape {
        area,
        perimeter,
        centroid: polygon.centroid(),
        compactness: 4.0 * PI * area / (perimeter * perimeter),
        convexity: area / hull_area,
        aspect_ratio: l1 / l2,
        orientation_sin2t: sin2t,
        orientation_cos2t: cos2t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    pub area_km2: f64,
    pub perimeter_km: f64,
    pub centroid: LonLat,
    pub compactness: f64,
    pub convexity: f64,
    pub aspect_ratio: f64,
    pub orientation_sin2t: f64,
    pub orientation_cos2t: f64,
}

/// Projects the polygon onto the plane tangent at its bounding-box centre.
pub fn project_local(polygon: &GeoPolygon) -> PlanarPolygon {
    LocalFrame::centered_on(polygon).project(polygon)
}

pub fn area_km2(polygon: &GeoPolygon) -> f64 {
    project_local(polygon).area()
}

/// Sum of haversine lengths of the exterior edges.
pub fn perimeter_km(polygon: &GeoPolygon) -> f64 {
    let ring = polygon.exterior();
    let n = ring.len();
    (0..n).map(|i| haversine_km(ring[i], ring[(i + 1) % n])).sum()
}

pub fn descriptors(polygon: &GeoPolygon) -> Result<ShapeDescriptors> {
    let frame = LocalFrame::centered_on(polygon);
    let shape = planar_shape(&frame.project(polygon))?;
    Ok(ShapeDescriptors {
        area_km2: shape.area,
        perimeter_km: perimeter_km(polygon),
        centroid: frame.to_geo(shape.centroid),
        compactness: shape.compactness,
        convexity: shape.convexity,
        aspect_ratio: shape.aspect_ratio,
        orientation_sin2t: shape.orientation_sin2t,
        orientation_cos2t: shape.orientation_cos2t,
    })
}

/// The component with the largest area; ties go to the earliest.
pub fn largest_component(polygons: &[GeoPolygon]) -> Result<&GeoPolygon> {
    let mut best: Option<(&GeoPolygon, f64)> = None;
    for p in polygons {
        let a = area_km2(p);
        if best.map_or(true, |(_, b)| a > b) {
            best = Some((p, a));
        }
    }
    best.map(|(p, _)| p).ok_or(GeoError::EmptyInput)
}

/// Planar ellipse ring with `n` vertices, rescaled so its polygon area is `area`.
///
/// `axis_ratio` is major/minor semi-axis; `theta` is the major-axis angle from east.
pub fn ellipse_ring(center: Point, area: f64, axis_ratio: f64, theta: f64, n: usize) -> Vec<Point> {
    let a = (area * axis_ratio / PI).sqrt();
    let b = (area / (axis_ratio * PI)).sqrt();
    let (s, c) = theta.sin_cos();
    let raw: Vec<Point> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let (ex, ey) = (a * t.cos(), b * t.sin());
            Point::new(ex * c - ey * s, ex * s + ey * c)
        })
        .collect();
    let k = (area / ring_signed_area(&raw).abs()).sqrt();
    raw.into_iter()
        .map(|p| Point::new(center.x + k * p.x, center.y + k * p.y))
        .collect()
}

/// An ellipse around `center` expressed in WGS84.
pub fn ellipse_polygon(
    center: LonLat,
    area_km2: f64,
    axis_ratio: f64,
    theta: f64,
    n: usize,
) -> Result<GeoPolygon> {
    let frame = LocalFrame::new(center);
    let ring = ellipse_ring(Point::default(), area_km2, axis_ratio, theta, n);
    GeoPolygon::from_exterior(ring.into_iter().map(|p| frame.to_geo(p)).collect())
}
