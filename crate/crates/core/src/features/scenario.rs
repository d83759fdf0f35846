use super::{EnvSample, FeatureError, Result};
use crate::geo::{ellipse_ring, GeoPolygon, LocalFrame, LonLat, Point};
use crate::ingest::SpillObservation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI, TAU};

/// 28°44'12" N, 88°23'14" W.
pub const WELLHEAD: LonLat = LonLat::new(-88.387_222, 28.736_667);
/// Fraction of the wind velocity added to the surface current to drift oil.
pub const WINDAGE: f64 = 0.03;
const VERTICES: usize = 64;
/// 2010-04-22T00:00:00Z.
const START: i64 = 1_271_894_400;
const MPS_TO_KMH: f64 = 3.6;
const TIDAL_PERIOD_H: f64 = 12.42;

/// Optional overrides of the seeded scenario parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub a0_km2: Option<f64>,
    /// Relative growth per hour (kind 1) or km² per hour (kinds 2–4).
    pub growth: Option<f64>,
    pub half_life_h: Option<f64>,
    /// Oil drift velocity (east, north) in m/s.
    pub drift_mps: Option<[f64; 2]>,
    pub start_utc: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: u32,
    pub seed: u64,
    pub duration_h: u32,
    pub step_h: u32,
    #[serde(flatten)]
    pub params: ScenarioParams,
}

#[derive(Clone, Debug, PartialEq)]
struct Lobes {
    offset_km: f64,
    speed_kmh: f64,
    second_a0: f64,
    second_growth: f64,
}

/// A parametric spill whose boundary and forcing can be sampled at any time.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    kind: u32,
    start: i64,
    frame: LocalFrame,
    a0: f64,
    growth: f64,
    decay: f64,
    axis_ratio: f64,
    theta: f64,
    wind: [f64; 2],
    current: [f64; 2],
    wind_amp: f64,
    wind_phase: f64,
    current_amp: f64,
    sst0: f64,
    lobes: Option<Lobes>,
}

fn polar(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 2] {
    let speed = rng.random_range(lo..hi);
    let dir = rng.random_range(0.0..TAU);
    [speed * dir.cos(), speed * dir.sin()]
}

impl Scenario {
    pub fn new(kind: u32, seed: u64, params: &ScenarioParams) -> Result<Self> {
        if !(1..=5).contains(&kind) {
            return Err(FeatureError::UnknownScenario(kind));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = LonLat::new(
            WELLHEAD.lon + rng.random_range(-0.05..0.05),
            WELLHEAD.lat + rng.random_range(-0.05..0.05),
        );
        let wind = polar(&mut rng, 3.0, 7.0);
        let mut s = Scenario {
            kind,
            start: params.start_utc.unwrap_or(START),
            frame: LocalFrame::new(origin),
            a0: 0.0,
            growth: 0.0,
            decay: 0.0,
            axis_ratio: 1.0,
            theta: rng.random_range(0.0..PI),
            wind,
            current: [0.0; 2],
            wind_amp: 0.0,
            wind_phase: 0.0,
            current_amp: 0.0,
            sst0: rng.random_range(26.0..29.0),
            lobes: None,
        };
        let drift = match kind {
            1 => {
                s.a0 = rng.random_range(2.0..6.0);
                s.growth = rng.random_range(0.15..0.3);
                s.axis_ratio = rng.random_range(1.0..1.15);
                polar(&mut rng, 0.05, 0.15)
            }
            2 => {
                s.a0 = rng.random_range(20.0..40.0);
                s.growth = rng.random_range(1.5..3.0);
                s.axis_ratio = rng.random_range(1.3..1.8);
                polar(&mut rng, 0.1, 0.25)
            }
            3 => {
                s.a0 = rng.random_range(20.0..40.0);
                s.growth = rng.random_range(0.8..1.6);
                s.wind = polar(&mut rng, 8.0, 12.0);
                s.wind_amp = rng.random_range(2.0..5.0);
                s.wind_phase = rng.random_range(0.0..TAU);
                s.current_amp = rng.random_range(0.05..0.2);
                let base = polar(&mut rng, 0.2, 0.4);
                s.theta = (base[1] + WINDAGE * s.wind[1]).atan2(base[0] + WINDAGE * s.wind[0]);
                [base[0] + WINDAGE * s.wind[0], base[1] + WINDAGE * s.wind[1]]
            }
            4 => {
                s.a0 = rng.random_range(15.0..25.0);
                s.growth = rng.random_range(0.5..1.0);
                s.axis_ratio = 1.8;
                s.lobes = Some(Lobes {
                    offset_km: 1.0,
                    speed_kmh: rng.random_range(0.05..0.15),
                    second_a0: rng.random_range(10.0..20.0),
                    second_growth: rng.random_range(0.3..0.8),
                });
                polar(&mut rng, 0.05, 0.15)
            }
            _ => {
                s.a0 = 780.0;
                s.decay = LN_2 / 240.0;
                s.axis_ratio = rng.random_range(1.2..1.6);
                polar(&mut rng, 0.02, 0.08)
            }
        };
        if let Some(a0) = params.a0_km2 {
            s.a0 = a0;
        }
        if let Some(g) = params.growth {
            s.growth = g;
        }
        if let Some(h) = params.half_life_h {
            if kind != 5 || h <= 0.0 {
                return Err(FeatureError::InvalidInput("half_life_h applies to kind 5 and must be positive".into()));
            }
            s.decay = LN_2 / h;
        }
        if s.a0 <= 0.0 {
            return Err(FeatureError::InvalidInput("a0_km2 must be positive".into()));
        }
        let drift = params.drift_mps.unwrap_or(drift);
        // the mean current is whatever makes current + windage·wind equal the drift
        s.current = [drift[0] - WINDAGE * s.wind[0], drift[1] - WINDAGE * s.wind[1]];
        Ok(s)
    }

    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        Self::new(config.kind, config.seed, &config.params)
    }

    pub fn kind(&self) -> u32 {
        self.kind
    }

    pub fn start_time(&self) -> i64 {
        self.start
    }

    pub fn frame(&self) -> LocalFrame {
        self.frame
    }

    /// Target area (km²) of the main body at `t` hours.
    pub fn area_at(&self, t: f64) -> f64 {
        match self.kind {
            1 => self.a0 * (1.0 + self.growth * t),
            5 => self.a0 * (-self.decay * t).exp(),
            _ => self.a0 + self.growth * t,
        }
    }

    pub fn wind_at(&self, t: f64) -> [f64; 2] {
        let a = TAU / 24.0 * t + self.wind_phase;
        [self.wind[0] + self.wind_amp * a.cos(), self.wind[1] + self.wind_amp * a.sin()]
    }

    pub fn current_at(&self, t: f64) -> [f64; 2] {
        let a = TAU / TIDAL_PERIOD_H * t;
        [self.current[0] + self.current_amp * a.cos(), self.current[1] + self.current_amp * a.sin()]
    }

    /// Oil drift velocity in m/s.
    pub fn drift_at(&self, t: f64) -> [f64; 2] {
        let (w, c) = (self.wind_at(t), self.current_at(t));
        [c[0] + WINDAGE * w[0], c[1] + WINDAGE * w[1]]
    }

    /// Centre of the spill in the scenario frame (km), the exact integral of the drift.
    pub fn center_at(&self, t: f64) -> Point {
        // ∫₀ᵗ (cos, sin)(ωs + φ) ds
        let osc = |omega: f64, phase: f64| {
            let a = omega * t + phase;
            [(a.sin() - phase.sin()) / omega, (phase.cos() - a.cos()) / omega]
        };
        let w = osc(TAU / 24.0, self.wind_phase);
        let c = osc(TAU / TIDAL_PERIOD_H, 0.0);
        let mean = [
            self.current[0] + WINDAGE * self.wind[0],
            self.current[1] + WINDAGE * self.wind[1],
        ];
        let disp = |i: usize| mean[i] * t + self.current_amp * c[i] + WINDAGE * self.wind_amp * w[i];
        Point::new(MPS_TO_KMH * disp(0), MPS_TO_KMH * disp(1))
    }

    pub fn env_at(&self, t: f64) -> EnvSample {
        let (w, c) = (self.wind_at(t), self.current_at(t));
        let speed = w[0].hypot(w[1]);
        EnvSample {
            wind_u: w[0],
            wind_v: w[1],
            current_u: c[0],
            current_v: c[1],
            sst: self.sst0 + 0.4 * (TAU / 24.0 * t).sin(),
            wave_height: 0.2 + 0.0248 * speed * speed,
            valid_time: self.start + (t * 3600.0).round() as i64,
        }
    }

    fn axis_ratio_at(&self, t: f64) -> f64 {
        if self.kind == 3 {
            (1.2 + 0.03 * t).min(4.0)
        } else {
            self.axis_ratio
        }
    }

    /// Planar boundary ring in the scenario frame (km).
    pub fn ring_at(&self, t: f64) -> Vec<Point> {
        let center = self.center_at(t);
        let Some(lobes) = &self.lobes else {
            return ellipse_ring(center, self.area_at(t), self.axis_ratio_at(t), self.theta, VERTICES);
        };
        // two ellipses sharing a major axis, sampled radially from the midpoint
        let second = lobes.second_a0 + lobes.second_growth * t;
        let r = self.axis_ratio;
        let semi = |area: f64| ((area * r / PI).sqrt(), (area / (r * PI)).sqrt());
        let (a1, b1) = semi(self.area_at(t));
        let (a2, b2) = semi(second);
        let half = (lobes.offset_km + lobes.speed_kmh * t).min(0.6 * a1.min(a2));
        let (s, c) = self.theta.sin_cos();
        let ellipses = [(-half, a1, b1), (half, a2, b2)];
        (0..VERTICES)
            .map(|k| {
                let phi = TAU * k as f64 / VERTICES as f64;
                // direction in the ellipse-aligned frame
                let (ux, uy) = ((phi - self.theta).cos(), (phi - self.theta).sin());
                let reach = ellipses
                    .iter()
                    .map(|&(off, a, b)| {
                        let (px, py) = (-off / a, 0.0);
                        let (qx, qy) = (ux / a, uy / b);
                        let qq = qx * qx + qy * qy;
                        let pq = px * qx + py * qy;
                        let pp = px * px + py * py;
                        (-pq + (pq * pq - qq * (pp - 1.0)).sqrt()) / qq
                    })
                    .fold(0.0, f64::max);
                let (lx, ly) = (reach * ux, reach * uy);
                Point::new(center.x + lx * c - ly * s, center.y + lx * s + ly * c)
            })
            .collect()
    }

    pub fn boundary_at(&self, t: f64) -> Result<GeoPolygon> {
        let ring = self.ring_at(t).into_iter().map(|p| self.frame.to_geo(p)).collect();
        Ok(GeoPolygon::from_exterior(ring)?)
    }

    /// Observations every `step_h` hours from 0 to `duration_h` inclusive.
    pub fn generate(&self, duration_h: u32, step_h: u32) -> Result<Vec<(SpillObservation, EnvSample)>> {
        if duration_h < 48 {
            return Err(FeatureError::InvalidInput(format!("duration_h = {duration_h} < 48")));
        }
        if step_h == 0 {
            return Err(FeatureError::InvalidInput("step_h must be positive".into()));
        }
        (0..=duration_h / step_h)
            .map(|k| {
                let t = f64::from(k * step_h);
                let env = self.env_at(t);
                let obs = SpillObservation {
                    timestamp: env.valid_time,
                    boundary: self.boundary_at(t)?,
                    source_tag: format!("scenario-{}", self.kind),
                    spill_id: format!("scenario-{}", self.kind),
                };
                Ok((obs, env))
            })
            .collect()
    }
}

pub fn generate_scenario(kind: u32, seed: u64, duration_h: u32, step_h: u32) -> Result<Vec<(SpillObservation, EnvSample)>> {
    Scenario::new(kind, seed, &ScenarioParams::default())?.generate(duration_h, step_h)
}
