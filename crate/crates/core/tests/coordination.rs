//! Planner optimality, protocol safety and simulator invariants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillnet::coord::check::{model_check, CheckConfig};
use spillnet::coord::plan::{assign_paths, covered_fraction, Perimeter, PlanConfig};
use spillnet::coord::hungarian;
use spillnet::geo::{ellipse_ring, PlanarPolygon, Point};
use spillnet::sim::{channel_deliver, run_simulation, vehicle_kinematics, Envelope, EventLog, Fault, SimConfig, TruthSource};
use std::collections::{BTreeMap, BTreeSet};

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_boundary(rng: &mut ChaCha8Rng) -> PlanarPolygon {
    let area = rng.random_range(2.0..60.0);
    let ratio = rng.random_range(1.0..3.0);
    let theta = rng.random_range(0.0..3.14);
    PlanarPolygon::from_exterior(ellipse_ring(Point::new(0.0, 0.0), area, ratio, theta, 64))
}

#[test]
fn hungarian_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=6 {
        let perms = permutations(n);
        for _ in 0..50 {
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
            let brute = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let (assign, total) = hungarian(&cost);
            let recomputed: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            assert!((total - brute).abs() < 1e-9 && (recomputed - brute).abs() < 1e-9);
        }
    }
}

#[test]
fn assignment_is_optimal_and_covers() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = PlanConfig::default();
    for n in 1..=6 {
        let perms = permutations(n);
        for _ in 0..50 {
            let boundary = random_boundary(&mut rng);
            let fleet: Vec<Point> = (0..n)
                .map(|_| Point::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
                .collect();
            let plans = assign_paths(&boundary, &fleet, &config).unwrap();

            // every candidate phase, every vehicle-to-slot permutation
            let per = Perimeter::new(&boundary.exterior).unwrap();
            let total = per.total();
            let slot = total / n as f64;
            let candidates = n * config.phases_per_vehicle;
            let mut brute = f64::INFINITY;
            for k in 0..candidates {
                let phase = k as f64 * total / candidates as f64;
                for p in &perms {
                    let c: f64 = (0..n).map(|i| fleet[i].dist(per.at(phase + p[i] as f64 * slot))).sum();
                    brute = brute.min(c);
                }
            }
            let transit: f64 = plans.iter().map(|p| p.transit_km).sum();
            assert!((transit - brute).abs() < 1e-9, "n = {n}: {transit} vs {brute}");

            assert_eq!(covered_fraction(&plans, total), 1.0);
            // sampled perimeter points each lie on some arc
            for k in 0..500 {
                let s = k as f64 * total / 500.0;
                let on = plans.iter().any(|p| (s - p.start_s).rem_euclid(total) <= p.length + 1e-9);
                assert!(on, "n = {n}: s = {s} uncovered");
            }
            let slots: BTreeSet<usize> = plans.iter().map(|p| p.slot).collect();
            assert_eq!(slots.len(), n);
        }
    }
}

#[test]
fn small_fleets_are_safe_under_every_interleaving() {
    for vehicles in 1..=3 {
        let r = model_check(&CheckConfig {
            vehicles,
            depth: 50,
            extra_boundaries: 1,
        });
        assert!(r.violations.is_empty(), "{vehicles}: {:?}", r.violations);
        assert!(r.containment_reached, "{vehicles} vehicle(s) never contained");
    }
}

/// Replays a log and reports any vehicle that entered its path before every
/// member of that cycle's plan had published its arrival.
fn early_paths(log: &EventLog) -> Vec<String> {
    let mut members: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    let mut reached: BTreeSet<(String, u64)> = BTreeSet::new();
    let mut bad = Vec::new();
    let cycle_of = |payload: &str| -> u64 { payload.rsplit("cycle=").next().unwrap().parse().unwrap() };
    for r in &log.records {
        match r.kind.as_str() {
            "shoreside" => {
                let v: serde_json::Value = serde_json::from_str(&r.payload).unwrap();
                if v["event"] == "plan" {
                    let ids = v["vehicles"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
                    members.insert(v["cycle"].as_u64().unwrap(), ids);
                }
            }
            "publish" if r.payload.starts_with("REACHED_STARTING_POSITION_") => {
                reached.insert((r.agent.clone(), cycle_of(&r.payload)));
            }
            "mode" if r.payload.contains("->oil_path") => {
                let c = cycle_of(&r.payload);
                let m = members.get(&c).cloned().unwrap_or_default();
                if m.is_empty() || m.iter().any(|id| !reached.contains(&(id.clone(), c))) {
                    bad.push(format!("tick {} {} cycle {c}", r.tick, r.agent));
                }
            }
            _ => {}
        }
    }
    bad
}

#[test]
fn lossy_channel_never_breaks_phase_ordering() {
    for seed in 0..100u64 {
        let config = SimConfig {
            truth: TruthSource::Circle { radius_km: 0.8 + 0.01 * seed as f64 },
            fleet_size: 2 + (seed % 3) as usize,
            duration_h: 1.0,
            replan_h: 0.5,
            p_loss: [0.1, 0.3, 0.6, 0.9][(seed % 4) as usize],
            delay_ticks: seed % 3,
            seed,
            ..SimConfig::default()
        };
        let out = run_simulation(&config).unwrap();
        assert_eq!(out.metrics.safety_violations, 0, "seed {seed}");
        let bad = early_paths(&out.log);
        assert!(bad.is_empty(), "seed {seed}: {bad:?}");
        let bound = config.speed_kmh * config.tick_s / 3600.0 + 1e-12;
        for track in &out.tracks {
            for w in track.windows(2) {
                assert!(w[0].dist(w[1]) <= bound, "seed {seed}");
            }
        }
    }
}

#[test]
fn lossless_runs_reach_containment() {
    for (seed, radius) in [(0u64, 0.5), (1, 1.0), (2, 2.0), (3, 3.0)] {
        let config = SimConfig {
            truth: TruthSource::Circle { radius_km: radius },
            duration_h: 3.0,
            replan_h: 3.0,
            seed,
            ..SimConfig::default()
        };
        let out = run_simulation(&config).unwrap();
        assert!(out.metrics.time_to_containment_ticks.is_some(), "radius {radius}");
    }
}

#[test]
fn any_single_fault_is_replanned_over_survivors() {
    for (tick, vehicle) in [(5u64, 0usize), (120, 1), (300, 4), (700, 2)] {
        let config = SimConfig {
            truth: TruthSource::Circle { radius_km: 1.5 },
            fleet_size: 5,
            duration_h: 3.0,
            faults: vec![Fault { tick, vehicle }],
            ..SimConfig::default()
        };
        let out = run_simulation(&config).unwrap();
        let last = out.metrics.plan_coverage.last().unwrap();
        assert_eq!(last.vehicles, 4, "fault {tick}/{vehicle}");
        assert_eq!(last.fraction, 1.0, "fault {tick}/{vehicle}");
        assert_eq!(out.metrics.safety_violations, 0);
    }
}

#[test]
fn channel_drop_rate_concentrates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let msgs: Vec<Envelope> = (0..10_000)
        .map(|i| Envelope {
            publisher: "x".into(),
            key: "K".into(),
            value: i.to_string(),
        })
        .collect();
    let (kept, dropped) = channel_deliver(msgs.clone(), 0.3, 4, 10, &mut rng);
    let frac = kept.len() as f64 / 1e4;
    assert!((frac - 0.70).abs() <= 0.02, "{frac}");
    assert_eq!(kept.len() + dropped, 10_000);
    assert!(kept.iter().all(|(t, _)| *t == 14));
    let order: Vec<usize> = kept.iter().map(|(_, m)| m.value.parse().unwrap()).collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn turn_limited_curvature() {
    let (speed, turn, dt) = (10.0, 0.1, 10.0);
    let step = speed * dt / 3600.0;
    let mut pos = Point::new(0.0, 0.0);
    let mut heading = 0.0;
    let target = Point::new(0.0, 50.0);
    let mut prev = heading;
    for _ in 0..1000 {
        let (p, h) = vehicle_kinematics(pos, heading, target, speed, turn, dt);
        let d = pos.dist(p);
        assert!(d <= step + 1e-12);
        let dh = (h - prev + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        assert!(dh.abs() <= turn + 1e-12);
        if d > 1e-9 {
            assert!(dh.abs() / d <= turn / step + 1e-9);
        }
        pos = p;
        prev = h;
        heading = h;
    }
}
