//! Shoreside planner: boundary intake, position collection, path dispatch.

use super::plan::{assign_paths, PathPlan, PlanConfig};
use super::{format_points, keys, BoundaryUpdate, CoordError, FleetMessage, Mode, Value, SHORESIDE};
use crate::geo::{LocalFrame, PlanarPolygon, Point};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Collecting,
    Positioning,
    Containing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShoresideConfig {
    /// Re-publication interval for the current phase's commands.
    pub heartbeat_ticks: Option<u64>,
    /// Silence after which a vehicle is declared lost.
    pub watchdog_ticks: Option<u64>,
    pub plan: PlanConfig,
}

impl Default for ShoresideConfig {
    fn default() -> Self {
        Self {
            heartbeat_ticks: Some(30),
            watchdog_ticks: Some(60),
            plan: PlanConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ShoresideEvent {
    Boundary { cycle: u64, spill_id: String, timestamp: i64 },
    Phase { cycle: u64, from: Phase, to: Phase },
    Plan { cycle: u64, vehicles: Vec<String>, total_transit_km: f64 },
    Lost { vehicle: String, silent_ticks: u64 },
    Critical { message: String },
    Malformed { message: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
struct NavReport {
    x: Option<(f64, u64)>,
    y: Option<(f64, u64)>,
    mode: Option<Mode>,
}

impl NavReport {
    fn position_for(&self, cycle: u64) -> Option<Point> {
        match (self.x, self.y) {
            (Some((x, cx)), Some((y, cy))) if cx >= cycle && cy >= cycle => Some(Point::new(x, y)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShoresideStep {
    pub outbox: Vec<(String, String)>,
    pub events: Vec<ShoresideEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shoreside {
    config: ShoresideConfig,
    frame: LocalFrame,
    fleet: Vec<String>,
    active: BTreeSet<String>,
    phase: Phase,
    cycle: u64,
    boundary: Option<PlanarPolygon>,
    nav: BTreeMap<String, NavReport>,
    reached: BTreeSet<String>,
    plans: BTreeMap<String, PathPlan>,
    members: BTreeMap<u64, Vec<String>>,
    last_heard: BTreeMap<String, u64>,
    last_broadcast: u64,
}

impl Shoreside {
    /// Planner for `fleet`, with boundaries projected into `frame`. Watchdog
    /// clocks start at `tick`.
    pub fn new(fleet: Vec<String>, frame: LocalFrame, config: ShoresideConfig, tick: u64) -> Self {
        Self {
            active: fleet.iter().cloned().collect(),
            last_heard: fleet.iter().map(|id| (id.clone(), tick)).collect(),
            fleet,
            config,
            frame,
            phase: Phase::Idle,
            cycle: 0,
            boundary: None,
            nav: BTreeMap::new(),
            reached: BTreeSet::new(),
            plans: BTreeMap::new(),
            members: BTreeMap::new(),
            last_broadcast: tick,
        }
    }

    pub fn subscriptions(&self) -> Vec<String> {
        vec![
            keys::BOUNDARY_UPDATE.into(),
            "NAV_X_*".into(),
            "NAV_Y_*".into(),
            "REACHED_STARTING_POSITION_*".into(),
        ]
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn fleet(&self) -> &[String] {
        &self.fleet
    }

    pub fn active(&self) -> &BTreeSet<String> {
        &self.active
    }

    pub fn boundary(&self) -> Option<&PlanarPolygon> {
        self.boundary.as_ref()
    }

    pub fn plans(&self) -> &BTreeMap<String, PathPlan> {
        &self.plans
    }

    /// Vehicles taking part in `cycle`.
    pub fn members(&self, cycle: u64) -> &[String] {
        self.members.get(&cycle).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn reached(&self) -> &BTreeSet<String> {
        &self.reached
    }

    fn vehicle_of<'k>(&self, key: &'k str, prefix: &str) -> Option<&'k str> {
        key.strip_prefix(prefix).filter(|id| self.active.contains(*id))
    }

    fn set_phase(&mut self, to: Phase, events: &mut Vec<ShoresideEvent>) {
        if self.phase != to {
            events.push(ShoresideEvent::Phase {
                cycle: self.cycle,
                from: self.phase,
                to,
            });
            self.phase = to;
        }
    }

    fn start_cycle(&mut self, tick: u64, out: &mut ShoresideStep) {
        if self.active.is_empty() {
            out.events.push(ShoresideEvent::Critical {
                message: "no vehicles left; holding".into(),
            });
            log::error!("CRITICAL: all vehicles lost");
            self.set_phase(Phase::Idle, &mut out.events);
            return;
        }
        self.cycle += 1;
        self.reached.clear();
        self.plans.clear();
        self.members.insert(self.cycle, self.active.iter().cloned().collect());
        self.phase = Phase::Idle;
        self.set_phase(Phase::Collecting, &mut out.events);
        self.broadcast(tick, &mut out.outbox);
    }

    /// Current phase's commands to every active vehicle.
    fn broadcast(&mut self, tick: u64, outbox: &mut Vec<(String, String)>) {
        self.last_broadcast = tick;
        let c = self.cycle;
        match self.phase {
            Phase::Idle => {}
            Phase::Collecting => {
                outbox.push((keys::STATION_KEEP_ALL.into(), Value::new("true").with("cycle", c).to_string()));
            }
            Phase::Positioning => {
                for (id, p) in &self.plans {
                    let v = Value::new(format_points(&[p.start])).with("cycle", c);
                    outbox.push((keys::starting_position(id), v.to_string()));
                }
            }
            Phase::Containing => {
                for (id, p) in &self.plans {
                    let v = Value::new(format_points(&p.waypoints)).with("cycle", c);
                    outbox.push((keys::oil_path(id), v.to_string()));
                }
            }
        }
    }

    fn read(&mut self, m: &FleetMessage, tick: u64, out: &mut ShoresideStep) -> Result<(), CoordError> {
        let bad = |reason: String| CoordError::MalformedMessage {
            key: m.key.clone(),
            value: m.value.clone(),
            reason,
        };
        if m.key == keys::BOUNDARY_UPDATE {
            let u = BoundaryUpdate::from_json(&m.value).map_err(bad)?;
            self.boundary = Some(self.frame.project(&u.boundary));
            out.events.push(ShoresideEvent::Boundary {
                cycle: self.cycle + 1,
                spill_id: u.spill_id,
                timestamp: u.timestamp,
            });
            self.start_cycle(tick, out);
            return Ok(());
        }
        let nav_x = self.vehicle_of(&m.key, "NAV_X_").map(|s| (s.to_string(), true));
        let nav_y = self.vehicle_of(&m.key, "NAV_Y_").map(|s| (s.to_string(), false));
        if let Some((id, is_x)) = nav_x.or(nav_y) {
            self.last_heard.insert(id.clone(), tick);
            let v = Value::parse(&m.value).map_err(&bad)?;
            let coord: f64 = v.payload.parse().map_err(|_| bad(format!("bad coordinate {:?}", v.payload)))?;
            let cycle: u64 = v.attr("cycle").map_err(&bad)?;
            let mode: Option<Mode> = v
                .attrs
                .get("mode")
                .and_then(|s| serde_json::from_value(serde_json::Value::String(s.clone())).ok());
            let r = self.nav.entry(id).or_default();
            if is_x {
                r.x = Some((coord, cycle));
            } else {
                r.y = Some((coord, cycle));
            }
            r.mode = mode.or(r.mode);
            return Ok(());
        }
        if let Some(id) = self.vehicle_of(&m.key, "REACHED_STARTING_POSITION_").map(str::to_string) {
            self.last_heard.insert(id.clone(), tick);
            let v = Value::parse(&m.value).map_err(&bad)?;
            let cycle: u64 = v.attr("cycle").map_err(&bad)?;
            if v.payload == "true" && cycle == self.cycle && self.phase == Phase::Positioning {
                self.reached.insert(id);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, inbox: &[FleetMessage], tick: u64) -> ShoresideStep {
        let mut out = ShoresideStep {
            outbox: Vec::new(),
            events: Vec::new(),
        };
        for m in inbox {
            if m.publisher == SHORESIDE {
                continue;
            }
            if let Err(e) = self.read(m, tick, &mut out) {
                log::warn!("shoreside: {e}");
                out.events.push(ShoresideEvent::Malformed { message: e.to_string() });
            }
        }

        if let Some(limit) = self.config.watchdog_ticks {
            let silent: Vec<(String, u64)> = self
                .active
                .iter()
                .map(|id| (id.clone(), tick.saturating_sub(self.last_heard[id])))
                .filter(|(_, s)| *s >= limit)
                .collect();
            if !silent.is_empty() {
                for (id, s) in silent {
                    self.active.remove(&id);
                    out.outbox.push((keys::ret(&id), "true".into()));
                    out.events.push(ShoresideEvent::Lost {
                        vehicle: id,
                        silent_ticks: s,
                    });
                }
                if self.boundary.is_some() && self.phase != Phase::Idle {
                    self.start_cycle(tick, &mut out);
                } else if self.active.is_empty() {
                    self.start_cycle(tick, &mut out);
                }
            }
        }

        if self.phase == Phase::Collecting {
            let positions: Option<Vec<Point>> = self
                .active
                .iter()
                .map(|id| self.nav.get(id).and_then(|r| r.position_for(self.cycle)))
                .collect();
            if let (Some(positions), Some(boundary)) = (positions, self.boundary.as_ref()) {
                match assign_paths(boundary, &positions, &self.config.plan) {
                    Ok(plans) => {
                        out.events.push(ShoresideEvent::Plan {
                            cycle: self.cycle,
                            vehicles: self.active.iter().cloned().collect(),
                            total_transit_km: plans.iter().map(|p| p.transit_km).sum(),
                        });
                        self.plans = self.active.iter().cloned().zip(plans).collect();
                        self.set_phase(Phase::Positioning, &mut out.events);
                        self.broadcast(tick, &mut out.outbox);
                    }
                    Err(e) => {
                        out.events.push(ShoresideEvent::Critical {
                            message: format!("planning failed: {e}"),
                        });
                        self.set_phase(Phase::Idle, &mut out.events);
                    }
                }
            }
        }

        if self.phase == Phase::Positioning && self.active.iter().all(|id| self.reached.contains(id)) {
            self.set_phase(Phase::Containing, &mut out.events);
            self.broadcast(tick, &mut out.outbox);
        }

        if let Some(h) = self.config.heartbeat_ticks {
            if tick.saturating_sub(self.last_broadcast) >= h {
                self.broadcast(tick, &mut out.outbox);
            }
        }
        out
    }
}
