//! Breadth-first exploration of agent interleavings for small fleets.
//!
//! Each transition lets one agent consume its pending messages, lets one
//! vehicle in transit arrive at its goal, or injects a further boundary
//! update. Delivery is lossless; a vehicle's newer navigation report replaces
//! an unread older one, as a latest-value database would.

use super::shoreside::{Shoreside, ShoresideConfig};
use super::{keys, fsm_step, BoundaryUpdate, FleetMessage, Mode, VehicleConfig, VehicleState, SHORESIDE};
use crate::geo::{ellipse_polygon, LocalFrame, LonLat, Point};
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashSet, VecDeque};
use std::hash::{Hash, Hasher};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckConfig {
    pub vehicles: usize,
    pub depth: usize,
    /// Further boundary updates that may arrive at any point.
    pub extra_boundaries: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            vehicles: 3,
            depth: 50,
            extra_boundaries: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub states: usize,
    pub depth_reached: usize,
    pub violations: Vec<String>,
    /// Some explored state had every vehicle on its containment path.
    pub containment_reached: bool,
}

#[derive(Clone)]
struct World {
    shore: Shoreside,
    vehicles: Vec<VehicleState>,
    shore_queue: VecDeque<FleetMessage>,
    vehicle_queues: Vec<VecDeque<FleetMessage>>,
    reached_sent: BTreeSet<(usize, u64)>,
    boundaries_left: usize,
}

fn message(publisher: &str, key: String, value: String) -> FleetMessage {
    FleetMessage {
        key,
        value,
        publisher: publisher.into(),
        tick: 0,
        seq: 0,
    }
}

impl World {
    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        (self.shore.phase(), self.shore.cycle(), self.shore.reached()).hash(&mut h);
        for v in &self.vehicles {
            (v.mode, v.cycle, v.awaiting, v.next, v.position.x.to_bits(), v.position.y.to_bits()).hash(&mut h);
        }
        for m in self.shore_queue.iter().chain(self.vehicle_queues.iter().flatten()) {
            (&m.key, &m.value).hash(&mut h);
        }
        for q in &self.vehicle_queues {
            q.len().hash(&mut h);
        }
        (&self.reached_sent, self.boundaries_left).hash(&mut h);
        h.finish()
    }

    fn route_to_vehicles(&mut self, outbox: Vec<(String, String)>) {
        for (k, v) in outbox {
            for (i, veh) in self.vehicles.iter().enumerate() {
                if veh.subscriptions().contains(&k) {
                    self.vehicle_queues[i].push_back(message(SHORESIDE, k.clone(), v.clone()));
                }
            }
        }
    }

    fn step_shore(&mut self) {
        let inbox: Vec<FleetMessage> = self.shore_queue.drain(..).collect();
        let out = self.shore.step(&inbox, 0);
        self.route_to_vehicles(out.outbox);
    }

    fn step_vehicle(&mut self, i: usize, config: &VehicleConfig) {
        let inbox: Vec<FleetMessage> = self.vehicle_queues[i].drain(..).collect();
        let v = &self.vehicles[i];
        let step = fsm_step(v, &inbox, v.position, 0, config);
        self.vehicles[i] = step.state;
        let id = self.vehicles[i].id.clone();
        for (k, val) in step.outbox {
            if k.starts_with("REACHED") {
                self.reached_sent.insert((i, self.vehicles[i].cycle));
            }
            if k.starts_with("NAV") {
                self.shore_queue.retain(|m| m.key != k);
            }
            self.shore_queue.push_back(message(&id, k, val));
        }
    }

    fn violation(&self) -> Option<String> {
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.mode != Mode::OilPath {
                continue;
            }
            for member in self.shore.members(v.cycle) {
                let j = self.vehicles.iter().position(|w| &w.id == member).expect("member is a vehicle");
                if !self.reached_sent.contains(&(j, v.cycle)) {
                    return Some(format!(
                        "{} on its path in cycle {} before {} reported arrival",
                        self.vehicles[i].id, v.cycle, member
                    ));
                }
            }
        }
        None
    }
}

/// Explores every interleaving up to `config.depth` transitions.
pub fn model_check(config: &CheckConfig) -> CheckReport {
    let origin = LonLat::new(-88.387222, 28.736667);
    let frame = LocalFrame::new(origin);
    let ids: Vec<String> = (0..config.vehicles).map(|i| format!("v{i}")).collect();
    let quiet = ShoresideConfig {
        heartbeat_ticks: None,
        watchdog_ticks: None,
        ..Default::default()
    };
    let boundary = |k: usize| BoundaryUpdate {
        spill_id: "check".into(),
        boundary: ellipse_polygon(origin, 2.0 + k as f64, 1.5, 0.3 * k as f64, 16).expect("valid ellipse"),
        timestamp: k as i64 * 3600,
    };
    let vehicle_config = VehicleConfig::default();
    let mut initial = World {
        shore: Shoreside::new(ids.clone(), frame, quiet, 0),
        vehicles: ids
            .iter()
            .enumerate()
            .map(|(i, id)| VehicleState::new(id.clone(), Point::new(-2.0 + i as f64, -3.0), 0.0))
            .collect(),
        shore_queue: VecDeque::new(),
        vehicle_queues: vec![VecDeque::new(); config.vehicles],
        reached_sent: BTreeSet::new(),
        boundaries_left: config.extra_boundaries,
    };
    initial
        .shore_queue
        .push_back(message("ingress", keys::BOUNDARY_UPDATE.into(), boundary(0).to_json()));

    let mut report = CheckReport::default();
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(initial.fingerprint());
    let mut frontier = vec![initial];
    for depth in 0..=config.depth {
        report.states += frontier.len();
        let mut next = Vec::new();
        for w in &frontier {
            if let Some(v) = w.violation() {
                if report.violations.len() < 10 {
                    report.violations.push(v);
                }
            }
            if w.vehicles.iter().all(|v| v.mode == Mode::OilPath && v.cycle == w.shore.cycle()) {
                report.containment_reached = true;
            }
            if depth == config.depth {
                continue;
            }
            report.depth_reached = depth + 1;
            let mut succ = Vec::new();
            if !w.shore_queue.is_empty() {
                let mut s = w.clone();
                s.step_shore();
                succ.push(s);
            }
            for i in 0..w.vehicles.len() {
                let v = &w.vehicles[i];
                let in_transit = v.mode == Mode::StartingPosition && !v.awaiting;
                let at_goal = in_transit && v.position == v.waypoints[0];
                if !w.vehicle_queues[i].is_empty() || at_goal {
                    let mut s = w.clone();
                    s.step_vehicle(i, &vehicle_config);
                    succ.push(s);
                }
                if in_transit && !at_goal {
                    let mut s = w.clone();
                    s.vehicles[i].position = s.vehicles[i].waypoints[0];
                    succ.push(s);
                }
            }
            if w.boundaries_left > 0 {
                let mut s = w.clone();
                let k = config.extra_boundaries - w.boundaries_left + 1;
                s.boundaries_left -= 1;
                s.shore_queue
                    .push_back(message("ingress", keys::BOUNDARY_UPDATE.into(), boundary(k).to_json()));
                succ.push(s);
            }
            for s in succ {
                if seen.insert(s.fingerprint()) {
                    next.push(s);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    report
}
