//! Tape gradients against central finite differences for every network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillnet::lstm::{LstmParams, LstmVars};
use spillnet::ltc::{LtcParams, LtcVars, SolverKind};
use spillnet::model::{CoreKind, ModelConfig, ModelGraph, ModelParams};
use spillnet::tensor::gradcheck::{check, DEFAULT_STEP};
use spillnet::tensor::{Tensor, Var};

const TOL: f64 = 1e-4;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, s: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-s..s)).collect()).unwrap()
}

fn ltc_params(seed: u64) -> (Vec<Tensor>, Vec<Tensor>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = LtcParams::init(3, 4, &mut rng);
    let mut tensors: Vec<Tensor> = p.named("ltc").into_iter().map(|(_, t)| t.clone()).collect();
    tensors[2] = random(&mut rng, 1, 4, 0.5);
    tensors[4] = random(&mut rng, 1, 4, 1.0).map(|v| v + 1.0);
    let inputs = (0..4).map(|_| random(&mut rng, 2, 3, 1.5)).collect();
    (tensors, inputs)
}

#[test]
fn ltc_gradients_match_for_every_solver() {
    for solver in SolverKind::ALL {
        for seed in SEEDS {
            let (params, inputs) = ltc_params(seed);
            let report = check(&params, DEFAULT_STEP, |tape, v| {
                let ltc = LtcVars::from_vars(v);
                let xs: Vec<Var> = inputs.iter().map(|u| tape.constant(u.clone())).collect();
                let states = ltc.forward(&xs, solver, 0.8).unwrap();
                let target = tape.constant(Tensor::filled(&[2, 4], 0.3));
                states.iter().fold(tape.scalar(0.0), |acc, s| {
                    acc.add(s.sub(target).unwrap().square().mean()).unwrap()
                })
            });
            assert!(report.max_rel_error < TOL, "{solver:?} seed {seed}: {report:?}");
        }
    }
}

#[test]
fn lstm_gradients_match() {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LstmParams::init(3, &[3, 3], &mut rng);
        let params: Vec<Tensor> = p.named("lstm").into_iter().map(|(_, t)| t.clone()).collect();
        let inputs: Vec<Tensor> = (0..2).map(|_| random(&mut rng, 2, 3, 1.5)).collect();
        for dropout in [None, Some(seed)] {
            let report = check(&params, DEFAULT_STEP, |tape, v| {
                let lstm = LstmVars::from_vars(v, 0.1).unwrap();
                let xs: Vec<Var> = inputs.iter().map(|u| tape.constant(u.clone())).collect();
                let out = lstm.forward(tape, &xs, dropout).unwrap();
                out[1].square().sum().add(out[0].sum()).unwrap()
            });
            assert!(report.max_rel_error < TOL, "seed {seed}: {report:?}");
        }
    }
}

#[test]
fn full_model_gradients_match() {
    for core in CoreKind::ALL {
        for seed in SEEDS {
            let config = ModelConfig::miniature(core);
            let params = ModelParams::init(&config, seed).unwrap().tensors(&config);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let windows: Vec<Tensor> = (0..2).map(|_| random(&mut rng, 4, 25, 2.0)).collect();
            let targets: Vec<Tensor> = (0..2).map(|_| random(&mut rng, 2, 28, 1.0)).collect();
            let report = check(&params, DEFAULT_STEP, |tape, v| {
                let graph = ModelGraph::from_vars(&config, v).unwrap();
                let refs: Vec<&Tensor> = windows.iter().collect();
                let out = graph.forward(tape, &refs, None).unwrap();
                out.iter().zip(&targets).fold(tape.scalar(0.0), |acc, (o, t)| {
                    let err = o.mean.sub(tape.constant(t.clone())).unwrap().square().mean();
                    acc.add(err).unwrap().add(o.uncertainty.mean()).unwrap()
                })
            });
            assert!(report.max_rel_error < TOL, "{core:?} seed {seed}: {report:?}");
        }
    }
}
