use super::{idx, FeatureError, FeatureVector, Result, FEATURE_DIM};
use crate::geo::EARTH_RADIUS_KM;
use serde::{Deserialize, Serialize};

pub const WINDOW_LEN: usize = 16;
/// Forecast horizons, in grid steps (hours for Short, days for Medium).
pub const HORIZONS: [u32; 4] = [3, 7, 11, 15];
/// Area rate (km²/h), centroid velocity east and north (km/h).
pub const AUX_DIM: usize = 3;
pub const TARGET_DIM: usize = FEATURE_DIM + AUX_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScaleClass {
    Short,
    Medium,
}

impl ScaleClass {
    pub fn step_secs(self) -> i64 {
        match self {
            ScaleClass::Short => 3600,
            ScaleClass::Medium => 86_400,
        }
    }

    /// Grid steps after the first observation that are sampled.
    pub fn span_steps(self) -> i64 {
        match self {
            ScaleClass::Short => 48,
            ScaleClass::Medium => 7,
        }
    }

    pub fn step_hours(self) -> f64 {
        self.step_secs() as f64 / 3600.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonTarget {
    pub horizon_hours: u32,
    /// 28 components, absent when the horizon falls outside the observed span.
    pub target: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub window: Vec<FeatureVector>,
    pub times: Vec<i64>,
    pub horizon_targets: Vec<HorizonTarget>,
    pub scale_class: ScaleClass,
    /// Leading steps produced by trend extrapolation.
    pub padded: usize,
}

impl FeatureSequence {
    pub fn targets_complete(&self) -> bool {
        self.horizon_targets.iter().all(|h| h.target.is_some())
    }

    pub fn end_time(&self) -> i64 {
        *self.times.last().expect("windows are never empty")
    }
}

/// Linear interpolation of all components at `t`, with the cyclic encodings
/// and speeds recomputed. `None` outside the series span.
pub fn interpolate_at(series: &[(i64, FeatureVector)], t: i64) -> Option<FeatureVector> {
    let (first, last) = (series.first()?.0, series.last()?.0);
    if t < first || t > last {
        return None;
    }
    let i = series.partition_point(|(ts, _)| *ts <= t);
    let mut v = if i == series.len() {
        series[i - 1].1
    } else {
        let ((ta, a), (tb, b)) = (&series[i - 1], &series[i]);
        let w = (t - ta) as f64 / (tb - ta) as f64;
        let mut out = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            out[j] = a.0[j] + (b.0[j] - a.0[j]) * w;
        }
        FeatureVector(out)
    };
    v.refresh_derived(t);
    Some(v)
}

/// Central-difference auxiliary targets at `t` with half-width `delta`
/// seconds, one-sided at the ends of the series.
fn aux_at(series: &[(i64, FeatureVector)], t: i64, delta: i64) -> Option<[f64; AUX_DIM]> {
    let (first, last) = (series.first()?.0, series.last()?.0);
    let lo = (t - delta).max(first);
    let hi = (t + delta).min(last);
    if hi <= lo {
        return None;
    }
    let (a, b) = (interpolate_at(series, lo)?, interpolate_at(series, hi)?);
    let hours = (hi - lo) as f64 / 3600.0;
    let km_per_deg = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let lat = 0.5 * (a[idx::CENTROID_LAT] + b[idx::CENTROID_LAT]);
    Some([
        (b[idx::AREA_KM2] - a[idx::AREA_KM2]) / hours,
        (b[idx::CENTROID_LON] - a[idx::CENTROID_LON]) * km_per_deg * lat.to_radians().cos() / hours,
        (b[idx::CENTROID_LAT] - a[idx::CENTROID_LAT]) * km_per_deg / hours,
    ])
}

fn target_at(series: &[(i64, FeatureVector)], t: i64, delta: i64) -> Option<Vec<f64>> {
    let f = interpolate_at(series, t)?;
    let aux = aux_at(series, t, delta)?;
    let mut v = f.0.to_vec();
    v.extend_from_slice(&aux);
    Some(v)
}

/// Resamples `series` onto the scale's grid and cuts stride-1 windows of
/// [`WINDOW_LEN`] steps, each with targets at the [`HORIZONS`].
pub fn build_sequences(series: &[(i64, FeatureVector)], scale: ScaleClass) -> Result<Vec<FeatureSequence>> {
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(FeatureError::InvalidInput("timestamps must be strictly increasing".into()));
    }
    let step = scale.step_secs();
    let Some(&(t_first, _)) = series.first() else {
        return Err(FeatureError::InsufficientData("empty series".into()));
    };
    let t_last = series[series.len() - 1].0;
    let grid_times: Vec<i64> = (0..=scale.span_steps())
        .map(|k| t_first + k * step)
        .take_while(|&t| t <= t_last)
        .collect();
    if grid_times.len() < 2 {
        return Err(FeatureError::InsufficientData(format!(
            "{} grid point(s); at least 2 are needed",
            grid_times.len()
        )));
    }
    let mut times = grid_times.clone();
    let mut grid: Vec<FeatureVector> = grid_times
        .iter()
        .map(|&t| interpolate_at(series, t).expect("grid lies inside the span"))
        .collect();

    let pad = WINDOW_LEN.saturating_sub(grid.len());
    if pad > 0 {
        let (v0, v1) = (grid[0], grid[1]);
        let mut front = Vec::with_capacity(pad);
        let mut front_t = Vec::with_capacity(pad);
        for k in (1..=pad as i64).rev() {
            let mut v = [0.0; FEATURE_DIM];
            for j in 0..FEATURE_DIM {
                v[j] = v0.0[j] - k as f64 * (v1.0[j] - v0.0[j]);
            }
            let t = t_first - k * step;
            let mut fv = FeatureVector(v);
            fv.refresh_derived(t);
            front.push(fv);
            front_t.push(t);
        }
        front.extend(grid);
        front_t.extend(times);
        grid = front;
        times = front_t;
    }

    let mut out = Vec::with_capacity(grid.len() + 1 - WINDOW_LEN);
    for end in WINDOW_LEN - 1..grid.len() {
        let start = end + 1 - WINDOW_LEN;
        let t_end = times[end];
        let horizon_targets = HORIZONS
            .iter()
            .map(|&h| HorizonTarget {
                horizon_hours: (h as f64 * scale.step_hours()) as u32,
                target: target_at(series, t_end + h as i64 * step, step),
            })
            .collect();
        out.push(FeatureSequence {
            window: grid[start..=end].to_vec(),
            times: times[start..=end].to_vec(),
            horizon_targets,
            scale_class: scale,
            padded: pad.saturating_sub(start),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly(n: usize) -> Vec<(i64, FeatureVector)> {
        (0..n)
            .map(|k| {
                let mut v = [0.0; FEATURE_DIM];
                v[idx::AREA_KM2] = 100.0 + 5.0 * k as f64;
                v[idx::CENTROID_LAT] = 28.0 + 0.01 * k as f64;
                v[idx::WIND_U] = 3.0;
                v[idx::WIND_V] = 4.0;
                let t = 1_000_000_000 + 3600 * k as i64;
                let mut f = FeatureVector(v);
                f.refresh_derived(t);
                (t, f)
            })
            .collect()
    }

    #[test]
    fn twenty_points_give_five_windows() {
        let s = build_sequences(&hourly(20), ScaleClass::Short).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|w| w.window.len() == WINDOW_LEN && w.padded == 0));
        // the first window's +3 target lies inside the span, its +7 does not
        assert!(s[0].horizon_targets[0].target.is_some());
        assert!(s[4].horizon_targets[0].target.is_none());
    }

    #[test]
    fn short_series_padded_by_trend() {
        let s = build_sequences(&hourly(10), ScaleClass::Short).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].padded, 6);
        let areas: Vec<f64> = s[0].window.iter().map(|v| v[idx::AREA_KM2]).collect();
        for w in areas.windows(2) {
            assert!((w[1] - w[0] - 5.0).abs() < 1e-9);
        }
        assert!((areas[0] - (100.0 - 30.0)).abs() < 1e-9);
        assert!((s[0].window[0][idx::WIND_SPEED] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_insufficient() {
        assert!(matches!(
            build_sequences(&hourly(1), ScaleClass::Short),
            Err(FeatureError::InsufficientData(_))
        ));
    }

    #[test]
    fn short_grid_stops_at_48_hours() {
        let s = build_sequences(&hourly(80), ScaleClass::Short).unwrap();
        assert_eq!(s.len(), 49 - WINDOW_LEN + 1);
        // targets come from the whole series, so late horizons still resolve
        assert!(s.last().unwrap().targets_complete());
    }

    #[test]
    fn aux_targets_from_central_differences() {
        let series = hourly(40);
        let s = build_sequences(&series, ScaleClass::Short).unwrap();
        let t = s[0].horizon_targets[1].target.as_ref().unwrap();
        assert!((t[FEATURE_DIM] - 5.0).abs() < 1e-9);
        assert!(t[FEATURE_DIM + 1].abs() < 1e-12);
        let km_per_deg = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        assert!((t[FEATURE_DIM + 2] - 0.01 * km_per_deg).abs() < 1e-9);
    }

    #[test]
    fn medium_scale_uses_days() {
        let series: Vec<_> = hourly(24 * 30)
            .into_iter()
            .collect();
        let s = build_sequences(&series, ScaleClass::Medium).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].padded, WINDOW_LEN - 8);
        assert_eq!(s[0].horizon_targets[0].horizon_hours, 72);
        assert_eq!(s[0].times[15] - s[0].times[14], 86_400);
    }
}
