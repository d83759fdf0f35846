//! Perimeter slot assignment.

use super::{CoordError, Result};
use crate::geo::{GeoError, PlanarPolygon, Point};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Maximum distance between consecutive waypoints, km.
    pub waypoint_spacing_km: f64,
    /// Overlap between adjacent arcs as a fraction of the perimeter.
    pub overlap_fraction: f64,
    /// Candidate slot phases per vehicle.
    pub phases_per_vehicle: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            waypoint_spacing_km: 0.5,
            overlap_fraction: 0.02,
            phases_per_vehicle: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    pub slot: usize,
    /// Arc-length position of the start point, measured from the first ring vertex.
    pub start_s: f64,
    /// Arc length covered, overlap included.
    pub length: f64,
    pub start: Point,
    pub waypoints: Vec<Point>,
    pub overlap_margin: f64,
    /// Straight-line distance from the vehicle to `start`.
    pub transit_km: f64,
}

/// Arc-length parametrization of a closed ring.
#[derive(Clone, Debug)]
pub struct Perimeter {
    pts: Vec<Point>,
    cum: Vec<f64>,
}

impl Perimeter {
    pub fn new(ring: &[Point]) -> Result<Self> {
        if ring.len() < 3 {
            return Err(GeoError::InvalidGeometry("ring needs 3 vertices".into()).into());
        }
        let mut cum = vec![0.0];
        for i in 0..ring.len() {
            let d = ring[i].dist(ring[(i + 1) % ring.len()]);
            cum.push(cum[i] + d);
        }
        if !(cum[ring.len()] > 0.0) || !cum[ring.len()].is_finite() {
            return Err(GeoError::InvalidGeometry("ring has no length".into()).into());
        }
        Ok(Self { pts: ring.to_vec(), cum })
    }

    pub fn total(&self) -> f64 {
        self.cum[self.pts.len()]
    }

    /// Point at arc length `s`, wrapping around.
    pub fn at(&self, s: f64) -> Point {
        let s = s.rem_euclid(self.total());
        let i = self.cum.partition_point(|&c| c <= s).saturating_sub(1).min(self.pts.len() - 1);
        let seg = self.cum[i + 1] - self.cum[i];
        let t = if seg > 0.0 { (s - self.cum[i]) / seg } else { 0.0 };
        self.pts[i].lerp(self.pts[(i + 1) % self.pts.len()], t)
    }

    /// Waypoints along `[s0, s0 + len]` through every ring vertex inside,
    /// subdivided so no gap exceeds `spacing`.
    pub fn arc(&self, s0: f64, len: f64, spacing: f64) -> Vec<Point> {
        let total = self.total();
        let mut stops = vec![s0];
        let laps = (len / total).ceil() as i64 + 1;
        let base = (s0 / total).floor() as i64;
        for lap in base..=base + laps {
            for &c in &self.cum[..self.pts.len()] {
                let s = c + lap as f64 * total;
                if s > s0 && s < s0 + len {
                    stops.push(s);
                }
            }
        }
        stops.sort_by(f64::total_cmp);
        stops.push(s0 + len);
        let mut out = vec![self.at(s0)];
        for w in stops.windows(2) {
            let pieces = ((w[1] - w[0]) / spacing).ceil().max(1.0) as usize;
            for k in 1..=pieces {
                out.push(self.at(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64));
            }
        }
        out
    }
}

/// Minimum-cost perfect matching of a square cost matrix; returns the column
/// assigned to each row and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // potentials over 1-based rows/columns, column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}

/// Splits the exterior perimeter into one equal slot per vehicle, picks the
/// slot phase and vehicle-to-slot matching with the least total transit, and
/// discretizes each slot (plus the overlap margin) into waypoints.
/// `plans[i]` belongs to `positions[i]`.
pub fn assign_paths(boundary: &PlanarPolygon, positions: &[Point], config: &PlanConfig) -> Result<Vec<PathPlan>> {
    let n = positions.len();
    if n == 0 {
        return Err(CoordError::EmptyFleet);
    }
    let per = Perimeter::new(&boundary.exterior)?;
    let total = per.total();
    let slot_len = total / n as f64;
    let candidates = n * config.phases_per_vehicle.max(1);
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for k in 0..candidates {
        let phase = k as f64 * total / candidates as f64;
        let cost: Vec<Vec<f64>> = positions
            .iter()
            .map(|p| (0..n).map(|j| p.dist(per.at(phase + j as f64 * slot_len))).collect())
            .collect();
        let (assign, c) = hungarian(&cost);
        if best.as_ref().is_none_or(|(b, _, _)| c < *b - 1e-12) {
            best = Some((c, phase, assign));
        }
    }
    let (_, phase, assign) = best.expect("at least one candidate phase");
    let margin = config.overlap_fraction * total;
    Ok(assign
        .iter()
        .enumerate()
        .map(|(i, &slot)| {
            let start_s = (phase + slot as f64 * slot_len).rem_euclid(total);
            let start = per.at(start_s);
            PathPlan {
                slot,
                start_s,
                length: slot_len + margin,
                start,
                waypoints: per.arc(start_s, slot_len + margin, config.waypoint_spacing_km),
                overlap_margin: margin,
                transit_km: positions[i].dist(start),
            }
        })
        .collect())
}

/// Fraction of a perimeter of length `total` covered by the union of the arcs.
pub fn covered_fraction(plans: &[PathPlan], total: f64) -> f64 {
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for p in plans {
        if p.length >= total {
            return 1.0;
        }
        let (a, b) = (p.start_s.rem_euclid(total), p.start_s.rem_euclid(total) + p.length);
        if b <= total {
            spans.push((a, b));
        } else {
            spans.push((a, total));
            spans.push((0.0, b - total));
        }
    }
    spans.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut covered, mut end) = (0.0, f64::NEG_INFINITY);
    for (a, b) in spans {
        if a > end {
            covered += b - a;
            end = b;
        } else if b > end {
            covered += b - end;
            end = b;
        }
    }
    (covered / total).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize) -> PlanarPolygon {
        PlanarPolygon::from_exterior(
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    Point::new(r * t.cos(), r * t.sin())
                })
                .collect(),
        )
    }

    #[test]
    fn compass_points_stay_put() {
        let c = circle(2.0, 64);
        let pos = [Point::new(0.0, 2.0), Point::new(2.0, 0.0), Point::new(0.0, -2.0), Point::new(-2.0, 0.0)];
        let plans = assign_paths(&c, &pos, &PlanConfig::default()).unwrap();
        let total: f64 = plans.iter().map(|p| p.transit_km).sum();
        assert!(total < 1e-9, "{total}");
        for (p, v) in plans.iter().zip(&pos) {
            assert!(p.start.dist(*v) < 1e-9);
        }
    }

    #[test]
    fn single_vehicle_full_perimeter() {
        let c = circle(1.0, 32);
        let plans = assign_paths(&c, &[Point::new(5.0, 5.0)], &PlanConfig::default()).unwrap();
        assert_eq!(plans.len(), 1);
        assert!(plans[0].length >= c.perimeter());
        assert_eq!(covered_fraction(&plans, c.perimeter()), 1.0);
        assert!(matches!(assign_paths(&c, &[], &PlanConfig::default()), Err(CoordError::EmptyFleet)));
    }

    #[test]
    fn waypoint_spacing_and_overlap() {
        let c = circle(3.0, 12);
        let pos: Vec<Point> = (0..3).map(|i| Point::new(i as f64, -4.0)).collect();
        let plans = assign_paths(&c, &pos, &PlanConfig::default()).unwrap();
        for p in &plans {
            for w in p.waypoints.windows(2) {
                assert!(w[0].dist(w[1]) <= 0.5 + 1e-9);
            }
            assert!((p.overlap_margin - 0.02 * c.perimeter()).abs() < 1e-12);
        }
        assert_eq!(covered_fraction(&plans, c.perimeter()), 1.0);
        let mut slots: Vec<usize> = plans.iter().map(|p| p.slot).collect();
        slots.sort();
        assert_eq!(slots, vec![0, 1, 2]);
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let (a, c) = hungarian(&cost);
        assert_eq!(c, 5.0);
        assert_eq!(a, vec![1, 0, 2]);
    }
}
