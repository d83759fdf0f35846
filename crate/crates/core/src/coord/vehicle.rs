//! Per-vehicle behavior modes.

use super::{keys, parse_points, CoordError, FleetMessage, Value};
use crate::geo::Point;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    StationKeeping,
    StartingPosition,
    OilPath,
    Returning,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::StationKeeping => "station_keeping",
            Mode::StartingPosition => "starting_position",
            Mode::OilPath => "oil_path",
            Mode::Returning => "returning",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleConfig {
    pub capture_radius_km: f64,
    pub station_radius_km: f64,
    /// Silence from the shoreside after which the vehicle heads home.
    pub shoreside_timeout_ticks: Option<u64>,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            capture_radius_km: 0.05,
            station_radius_km: 0.1,
            shoreside_timeout_ticks: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: String,
    pub mode: Mode,
    pub position: Point,
    /// Radians counter-clockwise from east.
    pub heading: f64,
    /// Station point, starting goal, containment loop or home, by mode.
    pub waypoints: Vec<Point>,
    pub next: usize,
    pub loop_flag: bool,
    /// Arrival reported, waiting for the path.
    pub awaiting: bool,
    /// Boundary cycle the current orders belong to.
    pub cycle: u64,
    pub home: Point,
    pub last_contact: Option<u64>,
}

impl VehicleState {
    /// Station keeping at `home`.
    pub fn new(id: impl Into<String>, home: Point, heading: f64) -> Self {
        Self {
            id: id.into(),
            mode: Mode::StationKeeping,
            position: home,
            heading,
            waypoints: vec![home],
            next: 0,
            loop_flag: false,
            awaiting: false,
            cycle: 0,
            home,
            last_contact: None,
        }
    }

    /// Keys this vehicle listens to.
    pub fn subscriptions(&self) -> Vec<String> {
        vec![
            keys::STATION_KEEP_ALL.to_string(),
            keys::starting_position(&self.id),
            keys::oil_path(&self.id),
            keys::ret(&self.id),
        ]
    }

    /// Point to steer toward, or `None` to hold position.
    pub fn steer_target(&self, config: &VehicleConfig) -> Option<Point> {
        let target = *self.waypoints.get(self.next)?;
        let d = self.position.dist(target);
        match self.mode {
            Mode::StationKeeping if d <= config.station_radius_km => None,
            Mode::StartingPosition | Mode::Returning if d <= config.capture_radius_km => None,
            _ => Some(target),
        }
    }

    fn enter(&mut self, mode: Mode, waypoints: Vec<Point>) {
        self.mode = mode;
        self.waypoints = waypoints;
        self.next = 0;
        self.loop_flag = mode == Mode::OilPath;
        self.awaiting = false;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleStep {
    pub state: VehicleState,
    /// (key, value) pairs to publish.
    pub outbox: Vec<(String, String)>,
    pub malformed: Vec<CoordError>,
    /// Mode before the step, when it changed.
    pub transition: Option<(Mode, Mode)>,
}

fn malformed(m: &FleetMessage, reason: impl Into<String>) -> CoordError {
    CoordError::MalformedMessage {
        key: m.key.clone(),
        value: m.value.clone(),
        reason: reason.into(),
    }
}

/// One behavior update: applies the inbox, checks arrival, advances the
/// containment loop and reports the navigation fix.
pub fn fsm_step(state: &VehicleState, inbox: &[FleetMessage], nav: Point, tick: u64, config: &VehicleConfig) -> VehicleStep {
    let mut s = state.clone();
    s.position = nav;
    let before = s.mode;
    let mut outbox = Vec::new();
    let mut errors = Vec::new();
    let (k_start, k_path, k_ret) = (keys::starting_position(&s.id), keys::oil_path(&s.id), keys::ret(&s.id));

    for m in inbox {
        let is_command = m.key == keys::STATION_KEEP_ALL || m.key == k_start || m.key == k_path || m.key == k_ret;
        if !is_command {
            continue;
        }
        s.last_contact = Some(tick);
        let v = match Value::parse(&m.value) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{}: skipping {}: {e}", s.id, m.key);
                errors.push(malformed(m, e));
                continue;
            }
        };
        if m.key == k_ret {
            if v.payload == "true" && s.mode != Mode::Returning {
                let home = s.home;
                s.enter(Mode::Returning, vec![home]);
            }
            continue;
        }
        let cycle: u64 = match v.attr("cycle") {
            Ok(c) => c,
            Err(e) => {
                errors.push(malformed(m, e));
                continue;
            }
        };
        if m.key == keys::STATION_KEEP_ALL {
            if v.payload != "true" && v.payload != "false" {
                errors.push(malformed(m, "payload must be true or false"));
            } else if v.payload == "true" && cycle > s.cycle {
                s.cycle = cycle;
                s.enter(Mode::StationKeeping, vec![nav]);
            }
            continue;
        }
        let points = match parse_points(&v.payload) {
            Ok(p) => p,
            Err(e) => {
                errors.push(malformed(m, e));
                continue;
            }
        };
        if m.key == k_start {
            if points.len() != 1 {
                errors.push(malformed(m, "starting position needs exactly one point"));
            } else if cycle > s.cycle || (cycle == s.cycle && s.mode == Mode::StationKeeping) {
                s.cycle = cycle;
                s.enter(Mode::StartingPosition, points);
            } else if cycle == s.cycle && s.mode == Mode::StartingPosition && s.awaiting {
                // the shoreside has not seen the arrival yet
                outbox.push((keys::reached(&s.id), Value::new("true").with("cycle", cycle).to_string()));
            }
        } else if cycle == s.cycle && s.mode == Mode::StartingPosition && s.awaiting {
            s.enter(Mode::OilPath, points);
        }
    }

    if let (Some(timeout), Some(last)) = (config.shoreside_timeout_ticks, s.last_contact) {
        if tick.saturating_sub(last) >= timeout && s.mode != Mode::Returning {
            log::warn!("{}: shoreside silent for {} ticks, returning", s.id, tick - last);
            let home = s.home;
            s.enter(Mode::Returning, vec![home]);
        }
    }

    match s.mode {
        Mode::StartingPosition if !s.awaiting => {
            if s.waypoints.first().is_some_and(|g| nav.dist(*g) <= config.capture_radius_km) {
                s.awaiting = true;
                outbox.push((keys::reached(&s.id), Value::new("true").with("cycle", s.cycle).to_string()));
            }
        }
        Mode::OilPath if !s.waypoints.is_empty() => {
            if nav.dist(s.waypoints[s.next]) <= config.capture_radius_km {
                s.next += 1;
                if s.next == s.waypoints.len() {
                    s.next = if s.loop_flag { 0 } else { s.next - 1 };
                }
            }
        }
        _ => {}
    }

    let tag = |payload: f64| Value::new(payload.to_string()).with("cycle", s.cycle).with("mode", s.mode.name()).to_string();
    outbox.push((keys::nav_x(&s.id), tag(nav.x)));
    outbox.push((keys::nav_y(&s.id), tag(nav.y)));
    let transition = (s.mode != before).then_some((before, s.mode));
    VehicleStep {
        state: s,
        outbox,
        malformed: errors,
        transition,
    }
}
