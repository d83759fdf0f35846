//! Publish-subscribe fleet bus, shoreside planning and vehicle behaviors.

pub mod check;
pub mod ingress;
pub mod plan;
pub mod shoreside;
pub mod vehicle;

pub use ingress::{read_boundary_updates, spawn_listener, BoundaryUpdate, IngressError};
pub use plan::{assign_paths, covered_fraction, hungarian, PathPlan};
pub use shoreside::{Phase, Shoreside, ShoresideConfig, ShoresideEvent};
pub use vehicle::{fsm_step, Mode, VehicleConfig, VehicleState, VehicleStep};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordError {
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("agent {0:?} is already registered")]
    DuplicateAgent(String),
    #[error("malformed message {key}={value:?}: {reason}")]
    MalformedMessage { key: String, value: String, reason: String },
    #[error("no vehicles to plan for")]
    EmptyFleet,
    #[error(transparent)]
    Geometry(#[from] crate::geo::GeoError),
}

pub type Result<T> = std::result::Result<T, CoordError>;

pub const SHORESIDE: &str = "shoreside";

pub mod keys {
    pub const STATION_KEEP_ALL: &str = "STATION_KEEP_ALL";
    pub const BOUNDARY_UPDATE: &str = "BOUNDARY_UPDATE";

    pub fn nav_x(id: &str) -> String {
        format!("NAV_X_{id}")
    }
    pub fn nav_y(id: &str) -> String {
        format!("NAV_Y_{id}")
    }
    pub fn starting_position(id: &str) -> String {
        format!("STARTING_POSITION_UPDATES_{id}")
    }
    pub fn reached(id: &str) -> String {
        format!("REACHED_STARTING_POSITION_{id}")
    }
    pub fn oil_path(id: &str) -> String {
        format!("OIL_PATH_UPDATES_{id}")
    }
    pub fn ret(id: &str) -> String {
        format!("RETURN_{id}")
    }

    const PREFIXES: [&str; 6] = [
        "NAV_X_",
        "NAV_Y_",
        "STARTING_POSITION_UPDATES_",
        "REACHED_STARTING_POSITION_",
        "OIL_PATH_UPDATES_",
        "RETURN_",
    ];

    /// Whether `key` belongs to the fleet vocabulary.
    pub fn is_known(key: &str) -> bool {
        key == STATION_KEEP_ALL
            || key == BOUNDARY_UPDATE
            || PREFIXES.iter().any(|p| key.strip_prefix(p).is_some_and(|id| !id.is_empty()))
    }
}

/// Message body of the form `payload;key=value;key=value`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Value {
    pub payload: String,
    pub attrs: BTreeMap<String, String>,
}

impl Value {
    pub fn new(payload: impl Into<String>) -> Self {
        Self {
            payload: payload.into(),
            attrs: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.attrs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut parts = text.split(';');
        let payload = parts.next().unwrap_or_default().to_string();
        let mut attrs = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| format!("attribute {p:?} lacks '='"))?;
            if k.is_empty() {
                return Err(format!("empty attribute name in {p:?}"));
            }
            attrs.insert(k.to_string(), v.to_string());
        }
        Ok(Self { payload, attrs })
    }

    pub fn attr<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        let raw = self.attrs.get(key).ok_or_else(|| format!("missing attribute {key:?}"))?;
        raw.parse().map_err(|_| format!("bad {key} {raw:?}"))
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.payload)?;
        for (k, v) in &self.attrs {
            write!(f, ";{k}={v}")?;
        }
        Ok(())
    }
}

/// `x,y:x,y:...` in kilometres.
pub fn format_points(points: &[crate::geo::Point]) -> String {
    points.iter().map(|p| format!("{},{}", p.x, p.y)).collect::<Vec<_>>().join(":")
}

pub fn parse_points(text: &str) -> std::result::Result<Vec<crate::geo::Point>, String> {
    text.split(':')
        .map(|pair| {
            let (x, y) = pair.split_once(',').ok_or_else(|| format!("point {pair:?} lacks ','"))?;
            let x: f64 = x.trim().parse().map_err(|_| format!("bad x in {pair:?}"))?;
            let y: f64 = y.trim().parse().map_err(|_| format!("bad y in {pair:?}"))?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(format!("non-finite point {pair:?}"));
            }
            Ok(crate::geo::Point::new(x, y))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetMessage {
    pub key: String,
    pub value: String,
    pub publisher: String,
    pub tick: u64,
    /// Position in the global publication order.
    pub seq: u64,
}

#[derive(Clone, Debug, Default)]
struct AgentSlot {
    patterns: Vec<String>,
    cursor: usize,
}

fn matches(pattern: &str, key: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => key.starts_with(prefix),
        None => pattern == key,
    }
}

/// Centralized message database with a single publication order.
#[derive(Clone, Debug, Default)]
pub struct Bus {
    tick: u64,
    log: Vec<FleetMessage>,
    agents: BTreeMap<String, AgentSlot>,
    latest: BTreeMap<String, usize>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn set_tick(&mut self, tick: u64) {
        self.tick = tick;
    }

    pub fn register(&mut self, agent: &str) -> Result<()> {
        if self.agents.contains_key(agent) {
            return Err(CoordError::DuplicateAgent(agent.into()));
        }
        // new agents see only messages published after they join
        self.agents.insert(
            agent.into(),
            AgentSlot {
                patterns: Vec::new(),
                cursor: self.log.len(),
            },
        );
        Ok(())
    }

    pub fn is_registered(&self, agent: &str) -> bool {
        self.agents.contains_key(agent)
    }

    /// Subscribes to an exact key, or to every key with a prefix when the
    /// pattern ends in `*`.
    pub fn subscribe(&mut self, agent: &str, pattern: &str) -> Result<()> {
        let slot = self.agents.get_mut(agent).ok_or_else(|| CoordError::UnknownAgent(agent.into()))?;
        if !slot.patterns.iter().any(|p| p == pattern) {
            slot.patterns.push(pattern.into());
        }
        Ok(())
    }

    pub fn publish(&mut self, agent: &str, key: &str, value: &str) -> Result<u64> {
        if !self.agents.contains_key(agent) {
            return Err(CoordError::UnknownAgent(agent.into()));
        }
        let seq = self.log.len() as u64;
        self.latest.insert(key.to_string(), self.log.len());
        self.log.push(FleetMessage {
            key: key.into(),
            value: value.into(),
            publisher: agent.into(),
            tick: self.tick,
            seq,
        });
        Ok(seq)
    }

    /// Messages on subscribed keys published since this agent's previous fetch.
    pub fn fetch(&mut self, agent: &str) -> Result<Vec<FleetMessage>> {
        let slot = self.agents.get_mut(agent).ok_or_else(|| CoordError::UnknownAgent(agent.into()))?;
        let out = self.log[slot.cursor..]
            .iter()
            .filter(|m| slot.patterns.iter().any(|p| matches(p, &m.key)))
            .cloned()
            .collect();
        slot.cursor = self.log.len();
        Ok(out)
    }

    pub fn latest(&self, key: &str) -> Option<&FleetMessage> {
        self.latest.get(key).map(|&i| &self.log[i])
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn messages(&self) -> &[FleetMessage] {
        &self.log
    }
}

/// A bus shared between threads; every operation holds the lock, so the
/// publication order stays total.
#[derive(Clone, Debug, Default)]
pub struct SharedBus(Arc<Mutex<Bus>>);

impl SharedBus {
    pub fn new(bus: Bus) -> Self {
        Self(Arc::new(Mutex::new(bus)))
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut Bus) -> R) -> R {
        let mut guard = self.0.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    }

    pub fn publish(&self, agent: &str, key: &str, value: &str) -> Result<u64> {
        self.with(|b| b.publish(agent, key, value))
    }

    pub fn fetch(&self, agent: &str) -> Result<Vec<FleetMessage>> {
        self.with(|b| b.fetch(agent))
    }
}
