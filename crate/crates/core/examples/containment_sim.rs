//! A five-vehicle containment run with a vehicle failure and a lossy link.

use spillnet::sim::{run_simulation, Fault, SimConfig, TruthSource};

fn main() {
    let config = SimConfig {
        truth: TruthSource::Scenario { kind: 1, seed: 3 },
        fleet_size: 5,
        duration_h: 4.0,
        p_loss: 0.1,
        faults: vec![Fault { tick: 400, vehicle: 1 }],
        seed: 11,
        ..SimConfig::default()
    };
    let out = run_simulation(&config).unwrap();
    let m = &out.metrics;
    println!("time to containment: {:?} ticks", m.time_to_containment_ticks);
    println!("containments (cycle, tick): {:?}", m.containments);
    for p in &m.plan_coverage {
        println!("  cycle {} at tick {}: {} vehicles, arcs cover {:.3}", p.cycle, p.tick, p.vehicles, p.fraction);
    }
    println!("recoveries: {:?}", m.recoveries);
    println!("coverage now/max {:.3}, swept max {:.3}", m.max_coverage, m.max_swept);
    println!("messages {} sent, {} lost; safety violations {}", m.messages_sent, m.messages_dropped, m.safety_violations);
    for r in out.log.records.iter().filter(|r| r.kind != "publish" && r.kind != "drop").take(25) {
        println!("  [{:>5}] {:<10} {:<9} {}", r.tick, r.agent, r.kind, r.payload);
    }
}
