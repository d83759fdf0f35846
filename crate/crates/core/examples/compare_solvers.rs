//! Trains all four cores on the same spills and prints both comparison tables.
//!
//! `cargo run --release --example compare_solvers -- [seed] [max_epochs]`

use spillnet::pipeline::{compare_solvers, comparison_data, CompareConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);
    let config = CompareConfig {
        max_epochs: args.next().map(|s| s.parse().unwrap()),
        ..CompareConfig::default()
    };
    let (train, test) = comparison_data(&config, seed).unwrap();
    println!("{} training windows, {} test spills", train.complete_windows(), test.spills.len());
    let report = compare_solvers(&train, &test, &config, seed).unwrap();
    for r in &report.rows {
        println!(
            "{:>12}: best epoch {:>3} of {:>3}, val mse {:.4} -> {:.4}, {:.1} s",
            r.label, r.best_epoch, r.epochs_run, r.epoch0_val_mse, r.best_val_mse, r.train_seconds
        );
    }
    println!("\n{}", report.area_table_csv());
    println!("{}", report.metric_table_csv());
}
