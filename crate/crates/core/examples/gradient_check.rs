//! Tape gradients of the miniature forecaster against finite differences.

use spillnet::model::{CoreKind, ModelConfig, ModelGraph, ModelParams};
use spillnet::tensor::gradcheck::{check, DEFAULT_STEP};
use spillnet::tensor::Tensor;

fn main() {
    let window = Tensor::matrix(3, 25, (0..75).map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0).collect()).unwrap();
    for core in CoreKind::ALL {
        let config = ModelConfig::miniature(core);
        let params = ModelParams::init(&config, 3).unwrap();
        let tensors = params.tensors(&config);
        let report = check(&tensors, DEFAULT_STEP, |tape, vars| {
            let graph = ModelGraph::from_vars(&config, vars).unwrap();
            let out = graph.forward(tape, &[&window], None).unwrap();
            out.iter().fold(tape.scalar(0.0), |acc, h| acc.add(h.mean.square().mean()).unwrap())
        });
        println!("{:>12}: {} entries, max relative error {:.2e}", core.label(), report.checked, report.max_rel_error);
    }
}
