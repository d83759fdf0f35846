//! Streams boundary updates over TCP into a containment run.

use spillnet::coord::{spawn_listener, BoundaryUpdate};
use spillnet::features::WELLHEAD;
use spillnet::geo::ellipse_polygon;
use spillnet::sim::{run_simulation_with_feed, SimConfig, TruthSource};
use std::io::Write;
use std::net::TcpStream;

fn main() {
    let (addr, rx, handle) = spawn_listener("127.0.0.1:0", 1).unwrap();
    let mut stream = TcpStream::connect(addr).unwrap();
    for (k, area) in [3.0, 4.5, 6.0].iter().enumerate() {
        let update = BoundaryUpdate {
            spill_id: "feed".into(),
            boundary: ellipse_polygon(WELLHEAD, *area, 1.4, 0.2 * k as f64, 48).unwrap(),
            timestamp: 1_271_894_400 + 3600 * k as i64,
        };
        writeln!(stream, "{}", update.to_json()).unwrap();
    }
    writeln!(stream, "not an update").unwrap();
    drop(stream);
    handle.join().unwrap();
    let updates: Vec<BoundaryUpdate> = rx.try_iter().collect();
    println!("received {} updates from {addr}", updates.len());

    let config = SimConfig {
        truth: TruthSource::Circle { radius_km: 1.0 },
        replan_h: 1.0,
        duration_h: 3.0,
        ..SimConfig::default()
    };
    let out = run_simulation_with_feed(&config, updates).unwrap();
    println!("{:?}", out.metrics.containments);
    for r in out.log.of_kind("boundary") {
        println!("  tick {:>5}: {}", r.tick, r.payload);
    }
}
