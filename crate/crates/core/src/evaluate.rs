//! Forecast metrics and the paired statistics used to compare solvers.

use crate::features::{idx, Normalizer, FEATURE_DIM};
use crate::geo::{self, GeoError, GeoPolygon, LocalFrame, LonLat, Point};
use crate::ingest::time::format_iso8601;
use crate::ingest::SpillObservation;
use crate::model::PredictionSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Geometry(#[from] GeoError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("mean is zero")]
    ZeroMean,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("{0} nonzero difference(s); at least 5 are needed")]
    TooFewNonzero(usize),
    #[error("alignment error: {0}")]
    Alignment(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

pub const DEFAULT_CELLS: usize = 512;
pub const DEFAULT_RESAMPLES: usize = 10_000;
/// Largest number of nonzero differences for which the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_MAX: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    pub range: f64,
    pub count: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Mean, population std, extremes and range.
pub fn summary_stats(series: &[f64]) -> Result<SummaryStats> {
    if series.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SummaryStats {
        mean: mean(series),
        std: population_variance(series).sqrt(),
        max,
        min,
        range: max - min,
        count: series.len(),
    })
}

/// `100·std/mean` with the population std.
pub fn coefficient_of_variation(series: &[f64]) -> Result<f64> {
    let s = summary_stats(series)?;
    if s.mean == 0.0 {
        return Err(EvalError::ZeroMean);
    }
    Ok(100.0 * s.std / s.mean)
}

/// Centroid speeds in km/h between consecutive `(position, unix seconds)` points.
pub fn centroid_speeds(track: &[(LonLat, i64)]) -> Result<Vec<f64>> {
    track
        .windows(2)
        .map(|w| {
            let dt = (w[1].1 - w[0].1) as f64 / 3600.0;
            if dt <= 0.0 {
                return Err(EvalError::InsufficientData("timestamps must increase strictly".into()));
            }
            Ok(geo::haversine_km(w[0].0, w[1].0) / dt)
        })
        .collect()
}

/// Population variance of centroid speeds, (km/h)².
pub fn temporal_consistency(track: &[(LonLat, i64)]) -> Result<f64> {
    if track.len() < 3 {
        return Err(EvalError::InsufficientData(format!("{} centroid(s); 3 are needed", track.len())));
    }
    Ok(population_variance(&centroid_speeds(track)?))
}

/// Cells of an `n × n` grid over `bbox` (planar, x0 y0 x1 y1) whose centers fall
/// inside the rings under the even-odd rule.
fn raster(rings: &[Vec<Point>], bbox: (f64, f64, f64, f64), n: usize) -> Vec<bool> {
    let (x0, y0, x1, y1) = bbox;
    let (cw, ch) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let mut mask = vec![false; n * n];
    let mut xs = Vec::new();
    for row in 0..n {
        let y = y0 + (row as f64 + 0.5) * ch;
        xs.clear();
        for ring in rings {
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            // cells with center in [span[0], span[1])
            let first = ((span[0] - x0) / cw - 0.5).ceil().max(0.0) as usize;
            let last = ((span[1] - x0) / cw - 0.5).ceil().min(n as f64) as usize;
            for cell in first..last.max(first) {
                mask[row * n + cell] = true;
            }
        }
    }
    mask
}

fn planar_rings(frame: &LocalFrame, p: &GeoPolygon) -> Vec<Vec<Point>> {
    std::iter::once(p.exterior())
        .chain(p.holes().iter().map(Vec::as_slice))
        .map(|r| r.iter().map(|&q| frame.to_local(q)).collect())
        .collect()
}

/// Intersection over union of two polygons, by cell counting on their joint
/// bounding box.
pub fn overlap_ratio(pred: &GeoPolygon, obs: &GeoPolygon, cells_per_axis: usize) -> Result<f64> {
    if cells_per_axis == 0 {
        return Err(EvalError::InsufficientData("zero raster cells".into()));
    }
    let (a, b) = (pred.bbox(), obs.bbox());
    let joint = (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3));
    let frame = LocalFrame::new(LonLat::new((joint.0 + joint.2) / 2.0, (joint.1 + joint.3) / 2.0));
    let (rp, ro) = (planar_rings(&frame, pred), planar_rings(&frame, obs));
    let all = rp.iter().chain(&ro).flatten();
    let mut bbox = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in all {
        bbox = (bbox.0.min(p.x), bbox.1.min(p.y), bbox.2.max(p.x), bbox.3.max(p.y));
    }
    if !(bbox.2 > bbox.0 && bbox.3 > bbox.1) {
        return Err(GeoError::InvalidGeometry("degenerate joint bounding box".into()).into());
    }
    let (mp, mo) = (raster(&rp, bbox, cells_per_axis), raster(&ro, bbox, cells_per_axis));
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, o) in mp.iter().zip(&mo) {
        inter += (*p && *o) as usize;
        union += (*p || *o) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(EvalError::InsufficientData(format!("{} sample(s); 2 are needed", samples.len())));
    }
    if !(0.0 < level && level < 1.0) || resamples == 0 {
        return Err(EvalError::InsufficientData("level must lie in (0, 1) with at least one resample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-tailed paired t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::InsufficientData(format!("{n} pair(s); 2 are needed")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let df = (n - 1) as f64;
    let t = m / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// `min(W⁺, W⁻)`.
    pub w: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_eff: usize,
    pub p: f64,
    pub exact: bool,
}

/// Midranks of `|d|` (1-based) and the tie group sizes.
fn midranks(abs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0.0; abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Wilcoxon signed-rank test; zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n < 5 {
        return Err(EvalError::TooFewNonzero(n));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);
    let (p, exact) = if n <= WILCOXON_EXACT_MAX {
        let mut hits = 0u64;
        for mask in 0u32..(1 << n) {
            let wp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if wp.min(total - wp) <= w + 1e-9 {
                hits += 1;
            }
        }
        (hits as f64 / (1u64 << n) as f64, true)
    } else {
        let nf = n as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let z = (w - total / 2.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * normal.cdf(z), false)
    };
    Ok(Wilcoxon {
        w,
        w_plus,
        w_minus,
        n_eff: n,
        p: p.min(1.0),
        exact,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub wilcoxon_w: f64,
    pub wilcoxon_p: f64,
}

/// Mean of `a − b` with its 95% bootstrap interval and both paired tests.
pub fn compare_paired(a: &[f64], b: &[f64], seed: u64) -> Result<StatResult> {
    let t = paired_t_test(a, b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (ci_low, ci_high) = bootstrap_ci(&d, 0.95, DEFAULT_RESAMPLES, seed)?;
    let w = wilcoxon_signed_rank(a, b)?;
    Ok(StatResult {
        mean: mean(&d),
        ci_low,
        ci_high,
        t_stat: t.t,
        df: t.df,
        p_value: t.p,
        wilcoxon_w: w.w,
        wilcoxon_p: w.p,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub area_mae: f64,
    pub centroid_disp_km: f64,
    /// Mean overlap ratio; also reported as spatial accuracy.
    pub overlap_ratio: f64,
    pub temporal_consistency: f64,
    pub cv_percent: f64,
    pub drift_velocity: Vec<f64>,
}

impl MetricReport {
    pub fn spatial_accuracy(&self) -> f64 {
        self.overlap_ratio
    }
}

/// Predicted feature values and the ellipse rebuilt from them.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedShape {
    pub area_km2: f64,
    pub centroid: LonLat,
    pub boundary: GeoPolygon,
}

/// Ellipse with the area, centroid, aspect ratio and orientation of a
/// denormalized feature vector.
pub fn reconstruct_boundary(features: &[f64]) -> Result<PredictedShape> {
    let area = features[idx::AREA_KM2];
    if !(area > 0.0) {
        return Err(GeoError::InvalidGeometry(format!("predicted area {area} is not positive")).into());
    }
    let axis_ratio = features[idx::ASPECT_RATIO].max(1.0).sqrt();
    let theta = features[idx::ORIENT_SIN2T].atan2(features[idx::ORIENT_COS2T]) / 2.0;
    let centroid = LonLat::new(features[idx::CENTROID_LON], features[idx::CENTROID_LAT]);
    Ok(PredictedShape {
        area_km2: area,
        centroid,
        boundary: geo::ellipse_polygon(centroid, area, axis_ratio, theta, 64)?,
    })
}

/// A prediction set issued at `issued_at` (unix seconds).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub issued_at: i64,
    pub prediction: PredictionSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub valid_time: i64,
    pub horizon: u32,
    pub area_pred: f64,
    pub area_true: f64,
    pub centroid_disp_km: f64,
    pub overlap: f64,
    #[serde(skip)]
    pub predicted: GeoPolygon,
    #[serde(skip)]
    pub observed: GeoPolygon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRun {
    pub report: MetricReport,
    pub steps: Vec<StepRecord>,
}

impl EvalRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("valid_time,horizon,area_pred,area_true,centroid_disp_km,overlap\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                format_iso8601(s.valid_time),
                s.horizon,
                s.area_pred,
                s.area_true,
                s.centroid_disp_km,
                s.overlap
            ));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "metrics": self.report,
            "spatial_accuracy": self.report.spatial_accuracy(),
            "steps": self.steps.len(),
        }))
        .expect("report serializes")
    }

    /// Observed and reconstructed predicted boundaries as a FeatureCollection.
    pub fn to_geojson(&self) -> String {
        let ring = |p: &GeoPolygon| {
            let mut r: Vec<[f64; 2]> = p.exterior().iter().map(|q| [q.lon, q.lat]).collect();
            r.push(r[0]);
            r
        };
        let features: Vec<serde_json::Value> = self
            .steps
            .iter()
            .flat_map(|s| {
                [("observed", &s.observed), ("predicted", &s.predicted)].map(|(kind, poly)| {
                    json!({
                        "type": "Feature",
                        "properties": {
                            "kind": kind,
                            "valid_time": format_iso8601(s.valid_time),
                            "horizon": s.horizon,
                        },
                        "geometry": {"type": "Polygon", "coordinates": [ring(poly)]},
                    })
                })
            })
            .collect();
        serde_json::to_string(&json!({"type": "FeatureCollection", "features": features})).expect("geojson serializes")
    }
}

/// Scores prediction sets against observations at each horizon's valid time.
/// Drift velocity, temporal consistency and the area CV use the predictions of
/// the shortest horizon, ordered by valid time.
pub fn evaluate_run(points: &[EvalPoint], truth: &[SpillObservation], normalizer: &Normalizer) -> Result<EvalRun> {
    if points.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if normalizer.dim() < FEATURE_DIM {
        return Err(EvalError::Alignment(format!("normalizer has {} components", normalizer.dim())));
    }
    let by_time: BTreeMap<i64, &SpillObservation> = truth.iter().map(|o| (o.timestamp, o)).collect();
    let mut steps = Vec::new();
    let mut shortest: BTreeMap<i64, (LonLat, f64)> = BTreeMap::new();
    for point in points {
        let min_h = point.prediction.horizons.iter().map(|h| h.horizon).min();
        for h in &point.prediction.horizons {
            let valid = point.issued_at + i64::from(h.horizon) * 3600;
            let obs = by_time.get(&valid).ok_or_else(|| {
                EvalError::Alignment(format!(
                    "no observation at {} for horizon {} h",
                    format_iso8601(valid),
                    h.horizon
                ))
            })?;
            if h.mean.len() < FEATURE_DIM {
                return Err(EvalError::Alignment(format!("prediction has {} components", h.mean.len())));
            }
            let feats = normalizer.denormalize(&h.mean[..FEATURE_DIM]);
            let shape = reconstruct_boundary(&feats)?;
            let planar = geo::project_local(&obs.boundary);
            let true_centroid = LocalFrame::centered_on(&obs.boundary).to_geo(planar.centroid());
            let step = StepRecord {
                valid_time: valid,
                horizon: h.horizon,
                area_pred: shape.area_km2,
                area_true: geo::area_km2(&obs.boundary),
                centroid_disp_km: geo::haversine_km(shape.centroid, true_centroid),
                overlap: overlap_ratio(&shape.boundary, &obs.boundary, DEFAULT_CELLS)?,
                predicted: shape.boundary,
                observed: obs.boundary.clone(),
            };
            if Some(h.horizon) == min_h {
                shortest.insert(valid, (shape.centroid, shape.area_km2));
            }
            steps.push(step);
        }
    }
    if steps.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = steps.len() as f64;
    let track: Vec<(LonLat, i64)> = shortest.iter().map(|(t, (c, _))| (*c, *t)).collect();
    let areas: Vec<f64> = shortest.values().map(|(_, a)| *a).collect();
    let drift_velocity = centroid_speeds(&track)?;
    let temporal = if track.len() >= 3 { population_variance(&drift_velocity) } else { 0.0 };
    let report = MetricReport {
        area_mae: steps.iter().map(|s| (s.area_pred - s.area_true).abs()).sum::<f64>() / n,
        centroid_disp_km: steps.iter().map(|s| s.centroid_disp_km).sum::<f64>() / n,
        overlap_ratio: steps.iter().map(|s| s.overlap).sum::<f64>() / n,
        temporal_consistency: temporal,
        cv_percent: coefficient_of_variation(&areas)?,
        drift_velocity,
    };
    Ok(EvalRun { report, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64) -> GeoPolygon {
        GeoPolygon::from_exterior(vec![
            LonLat::new(x0, y0),
            LonLat::new(x0 + side, y0),
            LonLat::new(x0 + side, y0 + side),
            LonLat::new(x0, y0 + side),
        ])
        .unwrap()
    }

    #[test]
    fn summary_examples() {
        let s = summary_stats(&[524.1, 782.3]).unwrap();
        assert!((s.range - 258.2).abs() < 1e-9);
        assert!((s.mean - 653.2).abs() < 1e-9);
        let c = summary_stats(&[4.0; 5]).unwrap();
        assert_eq!((c.std, c.range, c.count), (0.0, 0.0, 5));
        assert_eq!(summary_stats(&[]), Err(EvalError::EmptyInput));
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[100.0, 100.0, 100.0]).unwrap(), 0.0);
        // population std of {100 − s, 100 + s} is s
        let cv = coefficient_of_variation(&[93.2, 106.8]).unwrap();
        assert!((cv - 6.8).abs() < 1e-9);
        assert_eq!(coefficient_of_variation(&[-1.0, 1.0]), Err(EvalError::ZeroMean));
    }

    #[test]
    fn overlap_examples() {
        let a = square(-88.4, 28.7, 0.05);
        assert_eq!(overlap_ratio(&a, &a, 128).unwrap(), 1.0);
        let far = square(-88.2, 28.7, 0.05);
        assert_eq!(overlap_ratio(&a, &far, 128).unwrap(), 0.0);
        let half = square(-88.375, 28.7, 0.05);
        let r = overlap_ratio(&a, &half, DEFAULT_CELLS).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn temporal_consistency_examples() {
        let track: Vec<(LonLat, i64)> = (0..5).map(|i| (LonLat::new(-88.0, 28.0 + 0.01 * i as f64), i * 3600)).collect();
        assert!(temporal_consistency(&track).unwrap() < 1e-9);
        assert!(matches!(temporal_consistency(&track[..2]), Err(EvalError::InsufficientData(_))));
    }

    #[test]
    fn t_test_examples() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0, 2.0]), Err(EvalError::ZeroVariance));
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0]), Err(EvalError::LengthMismatch(2, 1)));
    }

    #[test]
    fn wilcoxon_examples() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!(r.w, 0.0);
        assert!((r.p - 0.0625).abs() < 1e-15);
        assert_eq!(wilcoxon_signed_rank(&[1.0; 6], &[1.0; 6]), Err(EvalError::TooFewNonzero(0)));
        let r = wilcoxon_signed_rank(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0], &[0.0; 6]).unwrap();
        assert_eq!((r.w_plus, r.w_minus, r.w), (10.5, 10.5, 10.5));
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn bootstrap_examples() {
        let (lo, hi) = bootstrap_ci(&[2.5; 10], 0.95, 500, 1).unwrap();
        assert_eq!((lo, hi), (2.5, 2.5));
        let xs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        assert_eq!(bootstrap_ci(&xs, 0.95, 500, 9).unwrap(), bootstrap_ci(&xs, 0.95, 500, 9).unwrap());
        assert!(bootstrap_ci(&[1.0], 0.95, 10, 0).is_err());
    }
}
