//! Randomized invariants across geometry, features, networks and statistics.

use proptest::prelude::*;
use spillnet::evaluate::{bootstrap_ci, overlap_ratio, paired_t_test, wilcoxon_signed_rank};
use spillnet::features::{build_sequences, extract_series, generate_scenario, Normalizer, ScaleClass, Scenario, ScenarioParams, WINDOW_LEN};
use spillnet::geo::{planar_shape, GeoPolygon, LonLat, PlanarPolygon, Point};
use spillnet::lstm::{lstm_cell, LstmLayer};
use spillnet::ltc::{effective_tau, step_fused, LtcParams};
use spillnet::model::{attention, Core, CoreKind, ModelConfig, ModelParams};
use spillnet::tensor::{Tape, Tensor};
use spillnet::train::{loss_parts, loss_total, prepare, train_model, AdamW, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Star-shaped ring around the origin: sorted angles, positive radii.
fn star_ring() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..1.0f64, 0.3..3.0f64), 3..24).prop_map(|mut pts| {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
        pts.iter()
            .map(|(a, r)| {
                let t = a * std::f64::consts::TAU;
                Point::new(r * t.cos(), r * t.sin())
            })
            .collect()
    })
}

fn regular(n: usize, r: f64, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = phase + k as f64 * std::f64::consts::TAU / n as f64;
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compactness_is_scale_invariant(ring in star_ring(), k in 0.01..100.0f64) {
        prop_assume!(ring.len() >= 3);
        let poly = PlanarPolygon::from_exterior(ring);
        let Ok(a) = planar_shape(&poly) else { return Ok(()) };
        let b = planar_shape(&poly.map(|p| Point::new(p.x * k, p.y * k))).unwrap();
        prop_assert!((a.compactness - b.compactness).abs() < 1e-9);
        prop_assert!((b.area / (a.area * k * k) - 1.0).abs() < 1e-9);
        prop_assert!((b.perimeter / (a.perimeter * k) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orientation_survives_half_turn(ring in star_ring(), cx in -5.0..5.0f64, cy in -5.0..5.0f64) {
        prop_assume!(ring.len() >= 3);
        let poly = PlanarPolygon::from_exterior(ring).translate(cx, cy);
        let Ok(a) = planar_shape(&poly) else { return Ok(()) };
        let c = a.centroid;
        let b = planar_shape(&poly.map(|p| Point::new(2.0 * c.x - p.x, 2.0 * c.y - p.y))).unwrap();
        prop_assert!((a.orientation_sin2t - b.orientation_sin2t).abs() < 1e-9);
        prop_assert!((a.orientation_cos2t - b.orientation_cos2t).abs() < 1e-9);
    }

    #[test]
    fn hole_area_is_subtracted(r in 1.0..10.0f64, h in 0.05..0.9f64, phase in 0.0..1.0f64) {
        let outer = regular(16, r, phase);
        let hole = regular(7, r * h * 0.5, 0.3);
        let with = PlanarPolygon { exterior: outer.clone(), holes: vec![hole.clone()] };
        let expect = PlanarPolygon::from_exterior(outer).area() - PlanarPolygon::from_exterior(hole).area();
        prop_assert!((with.area() - expect).abs() < 1e-9);
    }

    #[test]
    fn overlap_is_symmetric(dx in -0.05..0.05f64, dy in -0.05..0.05f64, s in 0.02..0.2f64) {
        let sq = |x: f64, y: f64, s: f64| GeoPolygon::from_exterior(vec![
            LonLat::new(x, y), LonLat::new(x + s, y), LonLat::new(x + s, y + s), LonLat::new(x, y + s),
        ]).unwrap();
        let a = sq(0.0, 0.0, 0.1);
        let b = sq(dx, dy, s);
        let cells = 256;
        let ab = overlap_ratio(&a, &b, cells).unwrap();
        let ba = overlap_ratio(&b, &a, cells).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        // one cell row or column of either grid
        prop_assert!((ab - ba).abs() <= 2.0 * 4.0 / cells as f64, "{ab} vs {ba}");
    }

    #[test]
    fn normalizer_round_trips(rows in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 4), 3..30), pick in 0usize..30) {
        let n = Normalizer::fit(rows.iter().map(Vec::as_slice)).unwrap();
        let x = &rows[pick % rows.len()];
        let inside = x.iter().zip(n.mu.iter().zip(&n.sigma)).all(|(v, (m, s))| (v - m).abs() <= 3.0 * s);
        prop_assume!(inside);
        let back = n.denormalize(&n.normalize(x));
        for (a, b) in back.iter().zip(x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn paired_t_is_antisymmetric(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (Ok(ab), Ok(ba)) = (paired_t_test(&a, &b), paired_t_test(&b, &a)) else { return Ok(()) };
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn fused_step_never_divides_by_zero(
        x in prop::collection::vec(-20.0..20.0f64, 3),
        u in prop::collection::vec(-20.0..20.0f64, 2),
        seed in 0u64..1000,
        tau in 0.05..=1.0f64,
        dt in 0.01..100.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LtcParams::init(2, 3, &mut rng);
        p.log_tau = Tensor::filled(&[1, 3], tau.ln());
        let out = step_fused(&x, &u, &p, dt).unwrap();
        prop_assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lstm_cell_is_bounded(
        x in prop::collection::vec(-5.0..5.0f64, 3),
        h in prop::collection::vec(-1.0..1.0f64, 4),
        c in prop::collection::vec(-10.0..10.0f64, 4),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = LstmLayer::init(3, 4, &mut rng);
        let (h1, c1) = lstm_cell(&x, &h, &c, &layer).unwrap();
        for i in 0..4 {
            prop_assert!(c1[i].abs() <= c[i].abs() + 1.0 + 1e-12);
            prop_assert!(h1[i].abs() < 1.0);
        }
    }

    #[test]
    fn loss_is_non_negative(
        vals in prop::collection::vec(-3.0..3.0f64, 2 * 2 * 28 * 2),
        alpha in 0.0..2.0f64,
        beta in 0.0..2.0f64,
    ) {
        let tape = Tape::new();
        let mk = |k: usize| tape.constant(Tensor::matrix(2, 28, vals[k * 56..(k + 1) * 56].to_vec()).unwrap());
        let pred = [mk(0), mk(1)];
        let target = [mk(2), mk(3)];
        prop_assert!(loss_total(&pred, &target, alpha, beta).unwrap().item() >= 0.0);
    }

    #[test]
    fn softplus_is_finite_and_non_negative(x in -1e4..1e4f64) {
        let tape = Tape::new();
        let y = tape.scalar(x).softplus().item();
        prop_assert!(y.is_finite() && y >= 0.0);
    }
}

#[test]
fn regular_polygons_are_convex() {
    for n in 3..=12 {
        let s = planar_shape(&PlanarPolygon::from_exterior(regular(n, 2.0, 0.1))).unwrap();
        assert!((s.convexity - 1.0).abs() < 1e-12, "n = {n}: {}", s.convexity);
    }
}

#[test]
fn effective_tau_at_zero_preactivation() {
    let p = LtcParams::zeros(2, 3, 2.5);
    let tau = effective_tau(&[0.0; 3], &[0.0; 2], &p).unwrap();
    assert_eq!(tau, vec![2.5; 3]);
}

#[test]
fn feature_vectors_satisfy_trig_and_hypot() {
    for kind in 1..=5 {
        let data = generate_scenario(kind, 11, 48, 1).unwrap();
        let obs: Vec<_> = data.iter().map(|(o, _)| o.clone()).collect();
        let series = extract_series(&obs, |t| data.iter().find(|(_, e)| e.valid_time == t).unwrap().1).unwrap();
        for (_, f) in &series {
            let v = f.as_slice();
            assert!((v[13].hypot(v[14]) - 1.0).abs() < 1e-12);
            assert!((v[15].hypot(v[16]) - 1.0).abs() < 1e-12);
            assert!((v[17].hypot(v[18]) - v[19]).abs() < 1e-12);
            assert!((v[20].hypot(v[21]) - v[22]).abs() < 1e-12);
            assert!(v[24] >= 0.0);
        }
    }
}

#[test]
fn window_count_without_padding() {
    let data = generate_scenario(1, 0, 72, 1).unwrap();
    let obs: Vec<_> = data.iter().map(|(o, _)| o.clone()).collect();
    let series = extract_series(&obs, |t| data.iter().find(|(_, e)| e.valid_time == t).unwrap().1).unwrap();
    let seqs = build_sequences(&series, ScaleClass::Short).unwrap();
    let gridpoints = ScaleClass::Short.span_steps() as usize + 1;
    assert!(series.len() >= gridpoints);
    assert_eq!(seqs.len(), gridpoints - WINDOW_LEN + 1);
}

#[test]
fn scenario_three_centroid_follows_drift() {
    let s = Scenario::new(3, 5, &ScenarioParams::default()).unwrap();
    let (t0, t1) = (0.0, 24.0);
    let steps = 24_000;
    let h = (t1 - t0) / steps as f64;
    // Simpson's rule on the drift velocity, m/s to km/h
    let kmh = 3.6;
    let mut integral = [0.0; 2];
    for k in 0..=steps {
        let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let d = s.drift_at(t0 + k as f64 * h);
        integral[0] += w * kmh * d[0] * h / 3.0;
        integral[1] += w * kmh * d[1] * h / 3.0;
    }
    let (a, b) = (s.center_at(t0), s.center_at(t1));
    let moved = [b.x - a.x, b.y - a.y];
    let err = (moved[0] - integral[0]).hypot(moved[1] - integral[1]);
    assert!(err <= 0.01 * integral[0].hypot(integral[1]), "moved {moved:?} vs integral {integral:?}");
}

#[test]
fn layer_norm_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let data: Vec<f64> = (0..5 * 17).map(|_| rng.random_range(-100.0..100.0)).collect();
        let tape = Tape::new();
        let y = tape.constant(Tensor::matrix(5, 17, data).unwrap()).layer_norm().unwrap().value();
        for r in 0..5 {
            let row = y.row_slice(r);
            let mean = row.iter().sum::<f64>() / 17.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 17.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }
}

#[test]
fn bootstrap_interval_narrows_with_more_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let (a0, a1) = bootstrap_ci(&draws[..100], 0.95, 2000, 7).unwrap();
    let (b0, b1) = bootstrap_ci(&draws, 0.95, 2000, 7).unwrap();
    assert!(b1 - b0 < a1 - a0);
}

#[test]
fn smoothness_depends_on_order_not_direction() {
    let tape = Tape::new();
    let rows: Vec<Tensor> = [0.0, 1.0, 3.0].iter().map(|v| Tensor::filled(&[2, 28], *v)).collect();
    let vars: Vec<_> = rows.iter().map(|t| tape.constant(t.clone())).collect();
    let target = vec![tape.constant(Tensor::zeros(&[2, 28])); 3];
    let forward = loss_parts(&vars, &target).unwrap().smooth.item();
    let rev: Vec<_> = vars.iter().rev().copied().collect();
    let swapped = vec![vars[1], vars[0], vars[2]];
    assert_eq!(loss_parts(&rev, &target).unwrap().smooth.item(), forward);
    assert_ne!(loss_parts(&swapped, &target).unwrap().smooth.item(), forward);
    let flat = vec![vars[1]; 3];
    assert_eq!(loss_parts(&flat, &target).unwrap().smooth.item(), 0.0);
}

#[test]
fn zero_learning_rate_leaves_params_alone() {
    let config = ModelConfig::miniature(CoreKind::Rk4);
    let mut params = ModelParams::init(&config, 1).unwrap();
    let before = params.clone();
    let grads: Vec<(String, Tensor)> = params
        .named(&config)
        .into_iter()
        .map(|(n, t)| (n, t.map(|v| v + 1.0)))
        .collect();
    let mut opt = AdamW::new(0.0, 0.01);
    opt.step(params.named_mut(&config), &grads);
    assert_eq!(params, before);
}

fn tiny_data() -> spillnet::train::PreparedData {
    let data = generate_scenario(2, 3, 48, 1).unwrap();
    let obs: Vec<_> = data.iter().map(|(o, _)| o.clone()).collect();
    let series = extract_series(&obs, |t| data.iter().find(|(_, e)| e.valid_time == t).unwrap().1).unwrap();
    let seqs = build_sequences(&series, ScaleClass::Short).unwrap();
    prepare(&seqs, 0.8).unwrap()
}

#[test]
fn early_stopping_returns_the_best_epoch() {
    let data = tiny_data();
    for core in CoreKind::ALL {
        let model = ModelConfig::miniature(core);
        let tc = TrainConfig {
            max_epochs: 25,
            patience: 3,
            batch_size: 4,
            ..TrainConfig::for_core(core)
        };
        let out = train_model(&data, &model, &tc).unwrap();
        let best = out.best().val_loss;
        let min = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert!(best <= min + spillnet::train::MIN_DELTA, "{core:?}");
        let (again, _) = spillnet::train::evaluate_loss(&out.params, &model, &tc, &data.val).unwrap();
        assert!((again - best).abs() <= 1e-12 * best.abs().max(1.0), "{core:?}: {again} vs {best}");
    }
}

#[test]
fn attention_rows_stay_stochastic_through_training() {
    let data = tiny_data();
    let model = ModelConfig::miniature(CoreKind::Euler);
    for epochs in [1, 3, 6] {
        let tc = TrainConfig {
            max_epochs: epochs,
            batch_size: 4,
            ..TrainConfig::for_core(CoreKind::Euler)
        };
        let out = train_model(&data, &model, &tc).unwrap();
        let Core::Ltc { attention: att, .. } = &out.params.core else { unreachable!() };
        let states = Tensor::matrix(5, 8, (0..40).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let (_, weights) = attention(&states, att, model.heads, model.head_dim).unwrap();
        for w in weights {
            for r in 0..w.rows() {
                let s: f64 = w.row_slice(r).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(w.row_slice(r).iter().all(|v| *v >= 0.0));
            }
        }
    }
}

#[test]
fn wilcoxon_is_symmetric_in_its_arguments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let a: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let (x, y) = (wilcoxon_signed_rank(&a, &b).unwrap(), wilcoxon_signed_rank(&b, &a).unwrap());
        assert_eq!(x.p, y.p);
        assert_eq!(x.w_plus, y.w_minus);
    }
}
