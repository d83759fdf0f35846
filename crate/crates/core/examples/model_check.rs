//! Exhaustive interleaving check of the command protocol for small fleets.

use spillnet::coord::check::{model_check, CheckConfig};

fn main() {
    for vehicles in 1..=3 {
        let report = model_check(&CheckConfig {
            vehicles,
            depth: 50,
            extra_boundaries: 1,
        });
        println!(
            "{vehicles} vehicle(s): {} states to depth {}, containment reached: {}, violations: {}",
            report.states,
            report.depth_reached,
            report.containment_reached,
            report.violations.len()
        );
    }
}
