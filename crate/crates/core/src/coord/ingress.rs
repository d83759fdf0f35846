//! Newline-delimited JSON boundary updates, from a file or a TCP stream.

use crate::geo::{GeoPolygon, LonLat};
use crate::ingest::time::{format_iso8601, parse_iso8601};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader};
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver};
use std::thread::JoinHandle;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngressError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Wire {
    #[serde(rename = "type")]
    kind: String,
    spill_id: String,
    exterior: Vec<[f64; 2]>,
    timestamp_utc: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryUpdate {
    pub spill_id: String,
    pub boundary: GeoPolygon,
    pub timestamp: i64,
}

impl BoundaryUpdate {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let w: Wire = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if w.kind != "BOUNDARY_UPDATE" {
            return Err(format!("unexpected message type {:?}", w.kind));
        }
        let timestamp = match &w.timestamp_utc {
            serde_json::Value::String(s) => parse_iso8601(s).ok_or_else(|| format!("bad timestamp {s:?}"))?,
            serde_json::Value::Number(n) => n.as_i64().ok_or_else(|| format!("bad timestamp {n}"))?,
            other => return Err(format!("bad timestamp {other}")),
        };
        let ring = w.exterior.iter().map(|p| LonLat::new(p[0], p[1])).collect();
        let boundary = GeoPolygon::from_exterior(ring).map_err(|e| e.to_string())?;
        Ok(Self {
            spill_id: w.spill_id,
            boundary,
            timestamp,
        })
    }

    /// One line of the wire format, without the trailing newline.
    pub fn to_json(&self) -> String {
        let mut exterior: Vec<[f64; 2]> = self.boundary.exterior().iter().map(|p| [p.lon, p.lat]).collect();
        exterior.push(exterior[0]);
        serde_json::to_string(&Wire {
            kind: "BOUNDARY_UPDATE".into(),
            spill_id: self.spill_id.clone(),
            exterior,
            timestamp_utc: serde_json::Value::String(format_iso8601(self.timestamp)),
        })
        .expect("update serializes")
    }
}

/// Parses every non-blank line; the first bad line aborts with its number.
pub fn read_boundary_updates(reader: impl BufRead) -> Result<Vec<BoundaryUpdate>, IngressError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(BoundaryUpdate::from_json(&line).map_err(|message| IngressError::Parse { line: i + 1, message })?);
    }
    Ok(out)
}

/// Accepts connections one after another and forwards every well-formed
/// update; malformed lines are logged and skipped. The thread ends after
/// `max_connections` streams have closed.
pub fn spawn_listener(
    addr: impl ToSocketAddrs,
    max_connections: usize,
) -> std::io::Result<(SocketAddr, Receiver<BoundaryUpdate>, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let (tx, rx) = mpsc::channel();
    let handle = std::thread::spawn(move || {
        for stream in listener.incoming().take(max_connections) {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("boundary feed: accept failed: {e}");
                    continue;
                }
            };
            for (i, line) in BufReader::new(stream).lines().enumerate() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                match BoundaryUpdate::from_json(&line) {
                    Ok(u) => {
                        if tx.send(u).is_err() {
                            return;
                        }
                    }
                    Err(e) => log::warn!("boundary feed: line {}: {e}", i + 1),
                }
            }
        }
    });
    Ok((local, rx, handle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const LINE: &str = r#"{"type":"BOUNDARY_UPDATE","spill_id":"dwh","exterior":[[-88.4,28.7],[-88.3,28.7],[-88.3,28.8],[-88.4,28.7]],"timestamp_utc":"2010-04-22T03:00:00Z"}"#;

    #[test]
    fn parse_and_round_trip() {
        let u = BoundaryUpdate::from_json(LINE).unwrap();
        assert_eq!(u.timestamp, 1271894400 + 3 * 3600);
        assert_eq!(u.boundary.exterior().len(), 3);
        assert_eq!(BoundaryUpdate::from_json(&u.to_json()).unwrap(), u);
        assert!(BoundaryUpdate::from_json(&LINE.replace("BOUNDARY_UPDATE", "NAV")).is_err());
    }

    #[test]
    fn file_reader_reports_line() {
        let text = format!("{LINE}\n\n{{\"type\":1}}\n");
        match read_boundary_updates(text.as_bytes()) {
            Err(IngressError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tcp_feed() {
        let (addr, rx, handle) = spawn_listener("127.0.0.1:0", 1).unwrap();
        let mut s = std::net::TcpStream::connect(addr).unwrap();
        writeln!(s, "{LINE}\nnot json\n{LINE}").unwrap();
        drop(s);
        handle.join().unwrap();
        assert_eq!(rx.try_iter().count(), 2);
    }
}
