//! 25-dimensional feature vectors, normalization, windowing and the synthetic
//! scenario generator.

mod scenario;
mod sequence;

pub use scenario::{generate_scenario, Scenario, ScenarioConfig, ScenarioParams, WELLHEAD, WINDAGE};
pub use sequence::{
    build_sequences, interpolate_at, FeatureSequence, HorizonTarget, ScaleClass, AUX_DIM, HORIZONS,
    TARGET_DIM, WINDOW_LEN,
};

use crate::geo::{self, GeoError};
use crate::ingest::time::{format_iso8601, parse_iso8601};
use crate::ingest::SpillObservation;
use chrono::{DateTime, Datelike, Timelike};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const FEATURE_DIM: usize = 25;

/// Index map of [`FeatureVector`] components.
pub mod idx {
    pub const AREA_KM2: usize = 0;
    pub const PERIMETER_KM: usize = 1;
    pub const COMPACTNESS: usize = 2;
    pub const CONVEXITY: usize = 3;
    pub const ASPECT_RATIO: usize = 4;
    pub const ORIENT_SIN2T: usize = 5;
    pub const ORIENT_COS2T: usize = 6;
    pub const VERTEX_COUNT: usize = 7;
    pub const CENTROID_LON: usize = 8;
    pub const CENTROID_LAT: usize = 9;
    pub const BBOX_WIDTH_KM: usize = 10;
    pub const BBOX_HEIGHT_KM: usize = 11;
    pub const HOURS_SINCE_START: usize = 12;
    pub const HOUR_SIN: usize = 13;
    pub const HOUR_COS: usize = 14;
    pub const DAY_SIN: usize = 15;
    pub const DAY_COS: usize = 16;
    pub const WIND_U: usize = 17;
    pub const WIND_V: usize = 18;
    pub const WIND_SPEED: usize = 19;
    pub const CURRENT_U: usize = 20;
    pub const CURRENT_V: usize = 21;
    pub const CURRENT_SPEED: usize = 22;
    pub const SST: usize = 23;
    pub const WAVE_HEIGHT: usize = 24;
}

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "area_km2",
    "perimeter_km",
    "compactness",
    "convexity",
    "aspect_ratio",
    "orientation_sin2t",
    "orientation_cos2t",
    "vertex_count",
    "centroid_lon",
    "centroid_lat",
    "bbox_width_km",
    "bbox_height_km",
    "hours_since_start",
    "hour_sin",
    "hour_cos",
    "day_sin",
    "day_cos",
    "wind_u_mps",
    "wind_v_mps",
    "wind_speed_mps",
    "current_u_mps",
    "current_v_mps",
    "current_speed_mps",
    "sst_celsius",
    "wave_height_m",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Geometry(#[from] GeoError),
    #[error("empty input")]
    EmptyInput,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown scenario kind {0} (expected 1..5)")]
    UnknownScenario(u32),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Rewrites the cyclic time encodings for absolute time `t` and the two
    /// speed magnitudes from their components.
    pub fn refresh_derived(&mut self, t: i64) {
        let (hs, hc, ds, dc) = cyclic_encoding(t);
        self.0[idx::HOUR_SIN] = hs;
        self.0[idx::HOUR_COS] = hc;
        self.0[idx::DAY_SIN] = ds;
        self.0[idx::DAY_COS] = dc;
        self.0[idx::WIND_SPEED] = self.0[idx::WIND_U].hypot(self.0[idx::WIND_V]);
        self.0[idx::CURRENT_SPEED] = self.0[idx::CURRENT_U].hypot(self.0[idx::CURRENT_V]);
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// (hour sin, hour cos, day sin, day cos) for UTC seconds `t`.
pub fn cyclic_encoding(t: i64) -> (f64, f64, f64, f64) {
    let dt = DateTime::from_timestamp(t, 0).unwrap_or_default();
    let secs = f64::from(dt.num_seconds_from_midnight());
    let hour_angle = 2.0 * PI * (secs / 3600.0) / 24.0;
    let day = f64::from(dt.ordinal0()) + secs / 86_400.0;
    let day_angle = 2.0 * PI * day / 365.25;
    (hour_angle.sin(), hour_angle.cos(), day_angle.sin(), day_angle.cos())
}

/// Environmental forcing at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvSample {
    pub wind_u: f64,
    pub wind_v: f64,
    pub current_u: f64,
    pub current_v: f64,
    pub sst: f64,
    pub wave_height: f64,
    /// UTC seconds.
    pub valid_time: i64,
}

impl EnvSample {
    fn lerp(&self, other: &EnvSample, w: f64, t: i64) -> EnvSample {
        let l = |a: f64, b: f64| a + (b - a) * w;
        EnvSample {
            wind_u: l(self.wind_u, other.wind_u),
            wind_v: l(self.wind_v, other.wind_v),
            current_u: l(self.current_u, other.current_u),
            current_v: l(self.current_v, other.current_v),
            sst: l(self.sst, other.sst),
            wave_height: l(self.wave_height, other.wave_height),
            valid_time: t,
        }
    }
}

/// Time-ordered environmental samples, linearly interpolated and held
/// constant beyond either end.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSeries {
    samples: Vec<EnvSample>,
}

#[derive(Serialize, Deserialize)]
struct EnvRecord {
    valid_time: String,
    wind_u: f64,
    wind_v: f64,
    current_u: f64,
    current_v: f64,
    sst: f64,
    wave_height: f64,
}

impl EnvSeries {
    pub fn new(mut samples: Vec<EnvSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(FeatureError::EmptyInput);
        }
        if let Some(s) = samples.iter().find(|s| s.wave_height < 0.0) {
            return Err(FeatureError::InvalidInput(format!(
                "negative wave height at {}",
                format_iso8601(s.valid_time)
            )));
        }
        samples.sort_by_key(|s| s.valid_time);
        Ok(Self { samples })
    }

    /// Parses the override file: a JSON array of
    /// `{"valid_time": ISO-8601, "wind_u", "wind_v", "current_u", "current_v", "sst", "wave_height"}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<EnvRecord> =
            serde_json::from_str(text).map_err(|e| FeatureError::InvalidInput(e.to_string()))?;
        let samples = records
            .into_iter()
            .map(|r| {
                let valid_time = parse_iso8601(&r.valid_time)
                    .ok_or_else(|| FeatureError::InvalidInput(format!("not ISO-8601: {:?}", r.valid_time)))?;
                Ok(EnvSample {
                    wind_u: r.wind_u,
                    wind_v: r.wind_v,
                    current_u: r.current_u,
                    current_v: r.current_v,
                    sst: r.sst,
                    wave_height: r.wave_height,
                    valid_time,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<EnvRecord> = self
            .samples
            .iter()
            .map(|s| EnvRecord {
                valid_time: format_iso8601(s.valid_time),
                wind_u: s.wind_u,
                wind_v: s.wind_v,
                current_u: s.current_u,
                current_v: s.current_v,
                sst: s.sst,
                wave_height: s.wave_height,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("env records serialize")
    }

    pub fn samples(&self) -> &[EnvSample] {
        &self.samples
    }

    pub fn at(&self, t: i64) -> EnvSample {
        let s = &self.samples;
        let i = s.partition_point(|x| x.valid_time <= t);
        if i == 0 {
            return EnvSample { valid_time: t, ..s[0] };
        }
        if i == s.len() {
            return EnvSample { valid_time: t, ..s[i - 1] };
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let w = (t - a.valid_time) as f64 / (b.valid_time - a.valid_time) as f64;
        a.lerp(b, w, t)
    }
}

/// Builds the feature vector of `obs` under forcing `env`, with `t0` the spill start.
pub fn extract_features(obs: &SpillObservation, env: &EnvSample, t0: i64) -> Result<FeatureVector> {
    if obs.timestamp < t0 {
        return Err(FeatureError::InvalidInput(format!(
            "observation at {} precedes start {}",
            format_iso8601(obs.timestamp),
            format_iso8601(t0)
        )));
    }
    let d = geo::descriptors(&obs.boundary)?;
    let planar = geo::project_local(&obs.boundary);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &planar.exterior {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let mut v = [0.0; FEATURE_DIM];
    v[idx::AREA_KM2] = d.area_km2;
    v[idx::PERIMETER_KM] = d.perimeter_km;
    v[idx::COMPACTNESS] = d.compactness;
    v[idx::CONVEXITY] = d.convexity;
    v[idx::ASPECT_RATIO] = d.aspect_ratio;
    v[idx::ORIENT_SIN2T] = d.orientation_sin2t;
    v[idx::ORIENT_COS2T] = d.orientation_cos2t;
    v[idx::VERTEX_COUNT] = obs.boundary.exterior().len() as f64;
    v[idx::CENTROID_LON] = d.centroid.lon;
    v[idx::CENTROID_LAT] = d.centroid.lat;
    v[idx::BBOX_WIDTH_KM] = x1 - x0;
    v[idx::BBOX_HEIGHT_KM] = y1 - y0;
    v[idx::HOURS_SINCE_START] = (obs.timestamp - t0) as f64 / 3600.0;
    v[idx::WIND_U] = env.wind_u;
    v[idx::WIND_V] = env.wind_v;
    v[idx::CURRENT_U] = env.current_u;
    v[idx::CURRENT_V] = env.current_v;
    v[idx::SST] = env.sst;
    v[idx::WAVE_HEIGHT] = env.wave_height;
    let mut fv = FeatureVector(v);
    fv.refresh_derived(obs.timestamp);
    Ok(fv)
}

/// Features for a whole observation series, timed from its first observation.
pub fn extract_series(
    observations: &[SpillObservation],
    env: impl Fn(i64) -> EnvSample,
) -> Result<Vec<(i64, FeatureVector)>> {
    let t0 = observations.first().ok_or(FeatureError::EmptyInput)?.timestamp;
    observations
        .iter()
        .map(|o| Ok((o.timestamp, extract_features(o, &env(o.timestamp), t0)?)))
        .collect()
}

/// Per-component z-score parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub const CLIP: f64 = 3.0;

impl Normalizer {
    /// Mean and population standard deviation per component; components with
    /// variance below 1e-12 get unit sigma.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut rows_vec: Vec<&[f64]> = Vec::new();
        for r in rows {
            if sum.is_empty() {
                sum = vec![0.0; r.len()];
            } else if r.len() != sum.len() {
                return Err(FeatureError::InvalidInput(format!(
                    "row length {} differs from {}",
                    r.len(),
                    sum.len()
                )));
            }
            sum.iter_mut().zip(r).for_each(|(s, v)| *s += v);
            rows_vec.push(r);
            n += 1;
        }
        if n == 0 {
            return Err(FeatureError::EmptyInput);
        }
        let mu: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; mu.len()];
        for r in &rows_vec {
            for (j, v) in r.iter().enumerate() {
                var[j] += (v - mu[j]).powi(2);
            }
        }
        let sigma = var
            .iter()
            .map(|v| {
                let v = v / n as f64;
                if v < 1e-12 {
                    1.0
                } else {
                    v.sqrt()
                }
            })
            .collect();
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `clamp((x − μ)/σ, −3, 3)` componentwise.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| ((v - m) / s).clamp(-CLIP, CLIP))
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

pub fn fit_normalizer(train: &[FeatureVector]) -> Result<Normalizer> {
    Normalizer::fit(train.iter().map(FeatureVector::as_slice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPolygon, LonLat};

    const JAN1_2010: i64 = 1_262_304_000;

    fn square_obs(t: i64) -> SpillObservation {
        SpillObservation {
            timestamp: t,
            boundary: GeoPolygon::from_exterior(vec![
                LonLat::new(0.0, 0.0),
                LonLat::new(0.1, 0.0),
                LonLat::new(0.1, 0.1),
                LonLat::new(0.0, 0.1),
            ])
            .unwrap(),
            source_tag: "test".into(),
            spill_id: "s".into(),
        }
    }

    #[test]
    fn midnight_new_year() {
        let f = extract_features(&square_obs(JAN1_2010), &EnvSample::default(), JAN1_2010).unwrap();
        assert_eq!(f[idx::HOURS_SINCE_START], 0.0);
        assert_eq!(f[idx::HOUR_SIN], 0.0);
        assert_eq!(f[idx::HOUR_COS], 1.0);
        assert_eq!(f[idx::DAY_SIN], 0.0);
        assert_eq!(f[idx::WIND_U], 0.0);
        assert_eq!(f[idx::WIND_V], 0.0);
        assert_eq!(f[idx::WIND_SPEED], 0.0);
        assert_eq!(f[idx::VERTEX_COUNT], 4.0);
        // 6 hours in → a quarter turn of the daily cycle
        let f = extract_features(&square_obs(JAN1_2010 + 6 * 3600), &EnvSample::default(), JAN1_2010).unwrap();
        assert!((f[idx::HOUR_SIN] - 1.0).abs() < 1e-12);
        assert_eq!(f[idx::HOURS_SINCE_START], 6.0);
    }

    #[test]
    fn before_start_rejected() {
        assert!(extract_features(&square_obs(JAN1_2010), &EnvSample::default(), JAN1_2010 + 1).is_err());
    }

    #[test]
    fn normalizer_examples() {
        let same = vec![FeatureVector([2.5; FEATURE_DIM]); 3];
        let n = fit_normalizer(&same).unwrap();
        assert!(n.sigma.iter().all(|&s| s == 1.0));
        let n = Normalizer::fit([&[0.0][..], &[2.0][..]]).unwrap();
        assert_eq!((n.mu[0], n.sigma[0]), (1.0, 1.0));
        assert_eq!(n.normalize(&[1.0]), vec![0.0]);
        assert_eq!(n.normalize(&[2.0]), vec![1.0]);
        assert_eq!(n.normalize(&[6.0]), vec![3.0]);
        assert_eq!(n.normalize(&[-9.0]), vec![-3.0]);
        assert_eq!(fit_normalizer(&[]), Err(FeatureError::EmptyInput));
    }

    #[test]
    fn env_series_interpolates() {
        let a = EnvSample {
            wind_u: 0.0,
            sst: 20.0,
            valid_time: 0,
            ..Default::default()
        };
        let b = EnvSample {
            wind_u: 4.0,
            sst: 30.0,
            valid_time: 100,
            ..Default::default()
        };
        let s = EnvSeries::new(vec![b, a]).unwrap();
        assert_eq!(s.at(25).wind_u, 1.0);
        assert_eq!(s.at(-5).sst, 20.0);
        assert_eq!(s.at(500).sst, 30.0);
        let again = EnvSeries::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
        let bad = EnvSample {
            wave_height: -1.0,
            ..a
        };
        assert!(EnvSeries::new(vec![bad]).is_err());
    }
}
