//! Trains a forecaster on synthetic spills and redraws its first forecast.
//!
//! `cargo run --release --example train_and_predict -- [solver] [epochs]`

use spillnet::evaluate::reconstruct_boundary;
use spillnet::model::{CoreKind, ModelConfig};
use spillnet::pipeline::{forecast, scenario_dataset, train_checkpoint};
use spillnet::train::TrainConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let core: CoreKind = args.next().map(|s| s.parse().unwrap()).unwrap_or(CoreKind::FusedExplicit);
    let epochs: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(30);

    let mut data = scenario_dataset(2, &[0, 1, 2, 3, 4, 5, 6], 72).unwrap();
    data.limit_windows(200);
    let config = TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::for_core(core)
    };
    let (checkpoint, outcome) = train_checkpoint(&data, &ModelConfig::with_core(core), &config, 0.8).unwrap();
    for r in outcome.history.iter().step_by(5) {
        println!("epoch {:>3} train {:.4} val {:.4} (mse {:.4})", r.epoch, r.train_loss, r.val_loss, r.val_mse);
    }
    println!("best epoch {} val mse {:.4}", outcome.best_epoch, outcome.best().val_mse);

    let held_out = scenario_dataset(2, &[99], 72).unwrap();
    let points = forecast(&checkpoint, &held_out.spills[0]).unwrap();
    let first = &points[0];
    for h in &first.prediction.horizons {
        let feats = checkpoint.feature_normalizer.denormalize(&h.mean[..25]);
        let shape = reconstruct_boundary(&feats).unwrap();
        println!(
            "+{:>2} h: area {:.2} km2 at {:.4}, {:.4}",
            h.horizon, shape.area_km2, shape.centroid.lon, shape.centroid.lat
        );
    }
}
