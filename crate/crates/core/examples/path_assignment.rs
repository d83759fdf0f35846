//! Splits a spill perimeter into arcs and assigns them to vehicles.

use spillnet::coord::plan::{assign_paths, covered_fraction, PlanConfig};
use spillnet::geo::{ellipse_ring, PlanarPolygon, Point};

fn main() {
    let boundary = PlanarPolygon::from_exterior(ellipse_ring(Point::new(0.0, 0.0), 30.0, 2.0, 0.4, 96));
    let vehicles = [Point::new(-6.0, -5.0), Point::new(0.0, -6.0), Point::new(5.0, -4.0), Point::new(7.0, 3.0)];
    let plans = assign_paths(&boundary, &vehicles, &PlanConfig::default()).unwrap();
    let total = boundary.perimeter();
    for (v, p) in plans.iter().enumerate() {
        println!(
            "vehicle {v}: slot {} from s = {:.2} km, arc {:.2} km, {} waypoints, transit {:.2} km",
            p.slot,
            p.start_s,
            p.length,
            p.waypoints.len(),
            p.transit_km
        );
    }
    println!("perimeter {total:.2} km, covered fraction {:.4}", covered_fraction(&plans, total));
    println!("total transit {:.2} km", plans.iter().map(|p| p.transit_km).sum::<f64>());
}
