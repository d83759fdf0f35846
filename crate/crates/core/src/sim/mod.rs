//! Closed-loop containment simulator in deterministic lockstep.

pub mod channel;

pub use channel::{channel_deliver, Channel, Envelope};

use crate::coord::plan::{covered_fraction, Perimeter};
use crate::coord::{
    fsm_step, keys, BoundaryUpdate, Bus, Mode, Phase, Shoreside, ShoresideConfig, ShoresideEvent, VehicleConfig,
    VehicleState, SHORESIDE,
};
use crate::evaluate::reconstruct_boundary;
use crate::features::{extract_features, Scenario, ScenarioParams, FEATURE_DIM, WINDOW_LEN};
use crate::geo::{self, GeoPolygon, LocalFrame, LonLat, Point};
use crate::ingest::SpillObservation;
use crate::model::Checkpoint;
use crate::model::predict;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("prediction failed: {0}")]
    Prediction(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

const INGRESS: &str = "ingress";
const PERIMETER_SAMPLES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthSource {
    Scenario { kind: u32, seed: u64 },
    /// A fixed circle around the wellhead.
    Circle { radius_km: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictorSpec {
    /// Ground truth `lead_h` hours ahead.
    Oracle { lead_h: f64 },
    /// First-horizon forecast of a trained model.
    Checkpoint { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub tick: u64,
    pub vehicle: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub truth: TruthSource,
    pub predictor: PredictorSpec,
    pub fleet_size: usize,
    pub speed_kmh: f64,
    /// Largest heading change per tick, radians.
    pub max_turn_rad: f64,
    pub tick_s: f64,
    pub duration_h: f64,
    pub replan_h: f64,
    pub p_loss: f64,
    pub delay_ticks: u64,
    pub faults: Vec<Fault>,
    pub seed: u64,
    pub sensing_radius_km: f64,
    pub heartbeat_ticks: Option<u64>,
    pub watchdog_ticks: Option<u64>,
    pub vehicle_timeout_ticks: Option<u64>,
    /// Distance of the staging line south of the first boundary.
    pub staging_offset_km: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            truth: TruthSource::Scenario { kind: 1, seed: 0 },
            predictor: PredictorSpec::Oracle { lead_h: 0.0 },
            fleet_size: 4,
            speed_kmh: 10.0,
            max_turn_rad: 0.35,
            tick_s: 10.0,
            duration_h: 6.0,
            replan_h: 3.0,
            p_loss: 0.0,
            delay_ticks: 0,
            faults: Vec::new(),
            seed: 0,
            sensing_radius_km: 0.5,
            heartbeat_ticks: Some(30),
            watchdog_ticks: Some(60),
            vehicle_timeout_ticks: Some(360),
            staging_offset_km: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.fleet_size == 0 {
            return bad("fleet_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.p_loss) {
            return bad(format!("p_loss {} outside [0, 1)", self.p_loss));
        }
        for (name, v) in [
            ("speed_kmh", self.speed_kmh),
            ("max_turn_rad", self.max_turn_rad),
            ("tick_s", self.tick_s),
            ("duration_h", self.duration_h),
            ("replan_h", self.replan_h),
            ("sensing_radius_km", self.sensing_radius_km),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(f) = self.faults.iter().find(|f| f.vehicle >= self.fleet_size) {
            return bad(format!("fault names vehicle {} of {}", f.vehicle, self.fleet_size));
        }
        if let TruthSource::Circle { radius_km } = self.truth {
            if !(radius_km > 0.0) {
                return bad("circle radius must be positive".into());
            }
        }
        if [self.heartbeat_ticks, self.watchdog_ticks, self.vehicle_timeout_ticks].contains(&Some(0)) {
            return bad("timeouts must be positive".into());
        }
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        (self.duration_h * 3600.0 / self.tick_s).round() as u64
    }

    fn replan_ticks(&self) -> u64 {
        ((self.replan_h * 3600.0 / self.tick_s).round() as u64).max(1)
    }
}

/// Turns toward `target` by at most `max_turn`, then advances `speed·dt`,
/// never past the target. A target inside the turning circle cannot be
/// reached at full speed, so the vehicle slows while it still faces away.
pub fn vehicle_kinematics(position: Point, heading: f64, target: Point, speed_kmh: f64, max_turn: f64, dt_s: f64) -> (Point, f64) {
    let bearing = (target.y - position.y).atan2(target.x - position.x);
    let diff = wrap_angle(bearing - heading);
    let turn = diff.clamp(-max_turn, max_turn);
    let full = speed_kmh * dt_s / 3600.0;
    let dist = position.dist(target);
    let mut step = full.min(dist);
    if turn != 0.0 && turn.abs() < PI {
        let radius = full / (2.0 * (turn.abs() / 2.0).sin());
        let side = heading + turn.signum() * PI / 2.0;
        let centre = Point::new(position.x + radius * side.cos(), position.y + radius * side.sin());
        if centre.dist(target) < radius {
            step *= (diff - turn).cos().max(0.0);
        }
    }
    let heading = wrap_angle(heading + turn);
    (Point::new(position.x + step * heading.cos(), position.y + step * heading.sin()), heading)
}

/// Angle in (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub agent: String,
    pub kind: String,
    pub payload: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn push(&mut self, tick: u64, agent: &str, kind: &str, payload: impl Into<String>) {
        self.records.push(EventRecord {
            tick,
            agent: agent.into(),
            kind: kind.into(),
            payload: payload.into(),
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.records.iter().filter(move |r| r.kind == kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanCoverage {
    pub cycle: u64,
    pub tick: u64,
    pub vehicles: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRecovery {
    pub fault_tick: u64,
    pub vehicle: usize,
    /// Ticks until every surviving vehicle was back on a path of a later cycle.
    pub latency_ticks: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub ticks: u64,
    /// First tick at which every participating vehicle followed its path.
    pub time_to_containment_ticks: Option<u64>,
    /// (cycle, tick) of each containment.
    pub containments: Vec<(u64, u64)>,
    /// Per tick: share of the current perimeter within sensing range of a
    /// vehicle on its path.
    pub coverage: Vec<f64>,
    pub max_coverage: f64,
    /// Per tick: share of the current perimeter swept by on-path vehicles
    /// since the cycle began.
    pub swept: Vec<f64>,
    pub max_swept: f64,
    pub plan_coverage: Vec<PlanCoverage>,
    pub recoveries: Vec<FaultRecovery>,
    pub safety_violations: u64,
    pub messages_sent: u64,
    pub messages_dropped: u64,
    /// Largest displacement of any vehicle in one tick, km.
    pub max_step_km: f64,
    pub critical: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub log: EventLog,
    pub metrics: SimMetrics,
    /// Per vehicle, its position at every tick in the local frame.
    pub tracks: Vec<Vec<Point>>,
    pub frame: LocalFrame,
}

impl SimOutput {
    /// Vehicle tracks as LineStrings, every `stride` ticks.
    pub fn tracks_geojson(&self, stride: usize) -> String {
        let features: Vec<serde_json::Value> = self
            .tracks
            .iter()
            .enumerate()
            .map(|(i, track)| {
                let coords: Vec<[f64; 2]> = track
                    .iter()
                    .step_by(stride.max(1))
                    .map(|p| {
                        let g = self.frame.to_geo(*p);
                        [g.lon, g.lat]
                    })
                    .collect();
                json!({
                    "type": "Feature",
                    "properties": {"vehicle": format!("v{i}")},
                    "geometry": {"type": "LineString", "coordinates": coords},
                })
            })
            .collect();
        serde_json::to_string(&json!({"type": "FeatureCollection", "features": features})).expect("geojson serializes")
    }
}

enum Truth {
    Scenario(Box<Scenario>),
    Circle { center: LonLat, radius_km: f64 },
}

impl Truth {
    fn frame(&self) -> LocalFrame {
        match self {
            Truth::Scenario(s) => s.frame(),
            Truth::Circle { center, .. } => LocalFrame::new(*center),
        }
    }

    fn start(&self) -> i64 {
        match self {
            Truth::Scenario(s) => s.start_time(),
            Truth::Circle { .. } => 1_271_894_400,
        }
    }

    fn boundary_at(&self, t_h: f64) -> Result<GeoPolygon> {
        match self {
            Truth::Scenario(s) => s.boundary_at(t_h).map_err(|e| SimError::Prediction(e.to_string())),
            Truth::Circle { center, radius_km } => {
                let frame = LocalFrame::new(*center);
                let ring = (0..64)
                    .map(|i| {
                        let a = 2.0 * PI * i as f64 / 64.0;
                        frame.to_geo(Point::new(radius_km * a.cos(), radius_km * a.sin()))
                    })
                    .collect();
                GeoPolygon::from_exterior(ring).map_err(|e| SimError::Config(e.to_string()))
            }
        }
    }
}

enum Predictor {
    Oracle(f64),
    Model(Box<Checkpoint>),
    Feed(Vec<GeoPolygon>),
}

impl Predictor {
    /// The boundary for the `k`-th update, issued at `t_h`.
    fn boundary(&self, truth: &Truth, k: usize, t_h: f64) -> Result<Option<GeoPolygon>> {
        match self {
            Predictor::Feed(updates) => Ok(updates.get(k).cloned()),
            _ => self.compute(truth, t_h).map(Some),
        }
    }

    fn compute(&self, truth: &Truth, t_h: f64) -> Result<GeoPolygon> {
        match self {
            Predictor::Feed(_) => unreachable!("feeds are read directly"),
            Predictor::Oracle(lead) => truth.boundary_at(t_h + lead),
            Predictor::Model(ck) => {
                let Truth::Scenario(s) = truth else {
                    return Err(SimError::Config("a model predictor needs a scenario truth source".into()));
                };
                let start = s.start_time();
                let rows = (0..WINDOW_LEN)
                    .map(|k| {
                        let th = (t_h - (WINDOW_LEN - 1 - k) as f64).max(0.0);
                        let env = s.env_at(th);
                        let obs = SpillObservation {
                            timestamp: env.valid_time,
                            boundary: s.boundary_at(th).map_err(|e| SimError::Prediction(e.to_string()))?,
                            source_tag: "sim".into(),
                            spill_id: "sim".into(),
                        };
                        let f = extract_features(&obs, &env, start).map_err(|e| SimError::Prediction(e.to_string()))?;
                        Ok(ck.feature_normalizer.normalize(f.as_slice()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let window = Tensor::from_rows(&rows).map_err(|e| SimError::Prediction(e.to_string()))?;
                let pred = predict(&window, &ck.params, &ck.config).map_err(|e| SimError::Prediction(e.to_string()))?;
                let first = &pred.horizons[0];
                let feats = ck.feature_normalizer.denormalize(&first.mean[..FEATURE_DIM]);
                Ok(reconstruct_boundary(&feats).map_err(|e| SimError::Prediction(e.to_string()))?.boundary)
            }
        }
    }
}

/// Runs the closed loop for `config.duration_h` hours.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutput> {
    run(config, None)
}

/// Like [`run_simulation`], but the `k`-th replan publishes `updates[k]`
/// instead of a prediction; once the feed runs out no further updates are sent.
pub fn run_simulation_with_feed(config: &SimConfig, updates: Vec<BoundaryUpdate>) -> Result<SimOutput> {
    run(config, Some(updates.into_iter().map(|u| u.boundary).collect()))
}

fn run(config: &SimConfig, feed: Option<Vec<GeoPolygon>>) -> Result<SimOutput> {
    config.validate()?;
    let truth = match config.truth {
        TruthSource::Scenario { kind, seed } => Truth::Scenario(Box::new(
            Scenario::new(kind, seed, &ScenarioParams::default()).map_err(|e| SimError::Config(e.to_string()))?,
        )),
        TruthSource::Circle { radius_km } => Truth::Circle {
            center: crate::features::WELLHEAD,
            radius_km,
        },
    };
    let predictor = match (feed, &config.predictor) {
        (Some(f), _) => Predictor::Feed(f),
        (None, PredictorSpec::Oracle { lead_h }) => Predictor::Oracle(*lead_h),
        (None, PredictorSpec::Checkpoint { path }) => Predictor::Model(Box::new(
            Checkpoint::load(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?,
        )),
    };
    let frame = truth.frame();
    let ids: Vec<String> = (0..config.fleet_size).map(|i| format!("v{i}")).collect();

    // staging line south of the first boundary
    let first = frame.project(&match &predictor {
        Predictor::Feed(u) if !u.is_empty() => u[0].clone(),
        _ => truth.boundary_at(0.0)?,
    });
    let (mut x0, mut x1, mut y0) = (f64::MAX, f64::MIN, f64::MAX);
    for p in &first.exterior {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
    }
    let cx = (x0 + x1) / 2.0;
    let mut vehicles: Vec<VehicleState> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let home = Point::new(cx + (i as f64 - (config.fleet_size - 1) as f64 / 2.0) * 0.3, y0 - config.staging_offset_km);
            VehicleState::new(id.clone(), home, PI / 2.0)
        })
        .collect();
    let vcfg = VehicleConfig {
        shoreside_timeout_ticks: config.vehicle_timeout_ticks,
        ..VehicleConfig::default()
    };
    let mut shore = Shoreside::new(
        ids.clone(),
        frame,
        ShoresideConfig {
            heartbeat_ticks: config.heartbeat_ticks,
            watchdog_ticks: config.watchdog_ticks,
            ..ShoresideConfig::default()
        },
        0,
    );

    let mut bus = Bus::new();
    bus.register(INGRESS).expect("fresh bus");
    bus.register(SHORESIDE).expect("fresh bus");
    for pattern in shore.subscriptions() {
        bus.subscribe(SHORESIDE, &pattern).expect("registered");
    }
    for v in &vehicles {
        bus.register(&v.id).expect("unique ids");
        for k in v.subscriptions() {
            bus.subscribe(&v.id, &k).expect("registered");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut channel = Channel::new(config.p_loss, config.delay_ticks);
    let mut log = EventLog::default();
    let mut metrics = SimMetrics::default();
    let mut alive = vec![true; config.fleet_size];
    let mut tracks: Vec<Vec<Point>> = vehicles.iter().map(|v| vec![v.position]).collect();
    let mut reached_sent: BTreeSet<(usize, u64)> = BTreeSet::new();
    let mut coverage_cycle = 0u64;
    let mut swept: Vec<bool> = Vec::new();
    let mut samples: Vec<Point> = Vec::new();
    let mut planned_cycles: BTreeSet<u64> = BTreeSet::new();
    let mut contained_cycles: BTreeSet<u64> = BTreeSet::new();
    let mut open_faults: Vec<(usize, u64, u64)> = Vec::new();
    let replan = config.replan_ticks();
    let dt_h = config.tick_s / 3600.0;

    for tick in 0..=config.ticks() {
        bus.set_tick(tick);
        for f in config.faults.iter().filter(|f| f.tick == tick) {
            if alive[f.vehicle] {
                alive[f.vehicle] = false;
                log.push(tick, &ids[f.vehicle], "fault", "vehicle dropped out");
                metrics.recoveries.push(FaultRecovery {
                    fault_tick: tick,
                    vehicle: f.vehicle,
                    latency_ticks: None,
                });
                open_faults.push((metrics.recoveries.len() - 1, tick, shore.cycle()));
            }
        }
        for m in channel.release(tick) {
            bus.publish(&m.publisher, &m.key, &m.value).expect("registered publisher");
        }
        if tick % replan == 0 {
            let t_h = tick as f64 * dt_h;
            if let Some(boundary) = predictor.boundary(&truth, (tick / replan) as usize, t_h)? {
                let update = BoundaryUpdate {
                    spill_id: "sim".into(),
                    boundary,
                    timestamp: truth.start() + (t_h * 3600.0).round() as i64,
                };
                log.push(tick, INGRESS, "boundary", format!("area_km2={:.4}", geo::area_km2(&update.boundary)));
                bus.publish(INGRESS, keys::BOUNDARY_UPDATE, &update.to_json()).expect("registered");
            }
        }

        let inbox = bus.fetch(SHORESIDE).expect("registered");
        let out = shore.step(&inbox, tick);
        for e in &out.events {
            let kind = match e {
                ShoresideEvent::Critical { .. } => {
                    metrics.critical = true;
                    "critical"
                }
                ShoresideEvent::Lost { .. } => "lost",
                _ => "shoreside",
            };
            log.push(tick, SHORESIDE, kind, serde_json::to_string(e).expect("event serializes"));
        }
        send(&mut channel, &mut bus, &mut log, &mut rng, SHORESIDE, out.outbox, tick);

        for i in 0..vehicles.len() {
            if !alive[i] {
                continue;
            }
            let inbox = bus.fetch(&ids[i]).expect("registered");
            let step = fsm_step(&vehicles[i], &inbox, vehicles[i].position, tick, &vcfg);
            if let Some((from, to)) = step.transition {
                log.push(tick, &ids[i], "mode", format!("{}->{};cycle={}", from.name(), to.name(), step.state.cycle));
            }
            for e in &step.malformed {
                log.push(tick, &ids[i], "malformed", e.to_string());
            }
            vehicles[i] = step.state;
            if step.outbox.iter().any(|(k, _)| k.starts_with("REACHED")) {
                reached_sent.insert((i, vehicles[i].cycle));
            }
            send(&mut channel, &mut bus, &mut log, &mut rng, &ids[i], step.outbox, tick);
            if let Some(target) = vehicles[i].steer_target(&vcfg) {
                let v = &mut vehicles[i];
                let before = v.position;
                let (p, h) = vehicle_kinematics(v.position, v.heading, target, config.speed_kmh, config.max_turn_rad, config.tick_s);
                v.position = p;
                v.heading = h;
                metrics.max_step_km = metrics.max_step_km.max(before.dist(p));
            }
        }
        for (i, v) in vehicles.iter().enumerate() {
            tracks[i].push(v.position);
        }

        // safety: on a path only once every member of that cycle announced arrival
        for (i, v) in vehicles.iter().enumerate() {
            if alive[i] && v.mode == Mode::OilPath {
                let ok = shore
                    .members(v.cycle)
                    .iter()
                    .all(|m| ids.iter().position(|x| x == m).is_some_and(|j| reached_sent.contains(&(j, v.cycle))));
                if !ok {
                    metrics.safety_violations += 1;
                    log.push(tick, &ids[i], "violation", format!("on path in cycle {} early", v.cycle));
                }
            }
        }

        let cycle = shore.cycle();
        if !shore.plans().is_empty() && planned_cycles.insert(cycle) {
            let total = shore.boundary().map(|b| b.perimeter()).unwrap_or(0.0);
            let plans: Vec<_> = shore.plans().values().cloned().collect();
            metrics.plan_coverage.push(PlanCoverage {
                cycle,
                tick,
                vehicles: plans.len(),
                fraction: covered_fraction(&plans, total),
            });
        }
        let members = shore.members(cycle);
        let contained = shore.phase() == Phase::Containing
            && !members.is_empty()
            && members.iter().all(|m| {
                let j = ids.iter().position(|x| x == m).expect("member id");
                vehicles[j].mode == Mode::OilPath && vehicles[j].cycle == cycle
            });
        if contained && contained_cycles.insert(cycle) {
            metrics.containments.push((cycle, tick));
            metrics.time_to_containment_ticks.get_or_insert(tick);
            log.push(tick, SHORESIDE, "contained", format!("cycle={cycle}"));
            open_faults.retain(|&(slot, fault_tick, fault_cycle)| {
                if cycle > fault_cycle {
                    metrics.recoveries[slot].latency_ticks = Some(tick - fault_tick);
                    false
                } else {
                    true
                }
            });
        }

        // cumulative sweep of the current perimeter
        if cycle != coverage_cycle {
            coverage_cycle = cycle;
            samples = match shore.boundary() {
                Some(b) => match Perimeter::new(&b.exterior) {
                    Ok(per) => (0..PERIMETER_SAMPLES)
                        .map(|k| per.at(per.total() * k as f64 / PERIMETER_SAMPLES as f64))
                        .collect(),
                    Err(_) => Vec::new(),
                },
                None => Vec::new(),
            };
            swept = vec![false; samples.len()];
        }
        let mut seen = vec![false; samples.len()];
        for (i, v) in vehicles.iter().enumerate() {
            if alive[i] && v.mode == Mode::OilPath && v.cycle == cycle {
                for (s, hit) in samples.iter().zip(seen.iter_mut()) {
                    *hit |= s.dist(v.position) <= config.sensing_radius_km;
                }
            }
        }
        for (w, s) in swept.iter_mut().zip(&seen) {
            *w |= *s;
        }
        let share = |hits: &[bool]| {
            if hits.is_empty() {
                0.0
            } else {
                hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64
            }
        };
        let (now, total) = (share(&seen), share(&swept));
        metrics.coverage.push(now);
        metrics.max_coverage = metrics.max_coverage.max(now);
        metrics.swept.push(total);
        metrics.max_swept = metrics.max_swept.max(total);
    }
    metrics.ticks = config.ticks();
    metrics.messages_sent = channel.sent;
    metrics.messages_dropped = channel.dropped;
    let summary: BTreeMap<&str, String> = vehicles
        .iter()
        .zip(&alive)
        .map(|(v, a)| (v.id.as_str(), if *a { v.mode.name().to_string() } else { "down".to_string() }))
        .collect();
    log.push(metrics.ticks, SHORESIDE, "end", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(SimOutput {
        log,
        metrics,
        tracks,
        frame,
    })
}

fn send(
    channel: &mut Channel,
    bus: &mut Bus,
    log: &mut EventLog,
    rng: &mut ChaCha8Rng,
    agent: &str,
    outbox: Vec<(String, String)>,
    tick: u64,
) {
    let envelopes: Vec<Envelope> = outbox
        .into_iter()
        .map(|(key, value)| Envelope {
            publisher: agent.into(),
            key,
            value,
        })
        .collect();
    for e in &envelopes {
        if !e.key.starts_with("NAV_") {
            log.push(tick, agent, "publish", format!("{}={}", e.key, e.value));
        }
    }
    for e in channel.submit(envelopes, tick, rng) {
        if !e.key.starts_with("NAV_") {
            log.push(tick, agent, "drop", e.key);
        }
    }
    for m in channel.release(tick) {
        bus.publish(&m.publisher, &m.key, &m.value).expect("registered publisher");
    }
}
