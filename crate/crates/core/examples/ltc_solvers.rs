//! The three LTC integrators on a decaying unit and on a stiff step.

use spillnet::ltc::{step, LtcParams, SolverKind};

/// One unit with no input drive: dx/dt = -x/tau.
fn decay_error(solver: SolverKind, dt: f64) -> f64 {
    let p = LtcParams::zeros(1, 1, 1.0);
    let mut x = vec![1.0];
    let steps = (1.0 / dt).round() as usize;
    for _ in 0..steps {
        x = step(&x, &[0.0], &p, solver, dt).unwrap();
    }
    (x[0] - (-1.0f64).exp()).abs()
}

fn main() {
    let dts = [0.2, 0.1, 0.05, 0.025];
    for solver in SolverKind::ALL {
        let errs: Vec<f64> = dts.iter().map(|&dt| decay_error(solver, dt)).collect();
        let shown: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
        if solver == SolverKind::FusedExplicit {
            // the adaptive step shrinks dt by 1 + |x|, so it tracks a slower clock
            println!("{:>15}: errors {shown:?} (state-scaled step)", solver.name());
            continue;
        }
        let orders: Vec<String> = errs.windows(2).map(|w| format!("{:.2}", (w[0] / w[1]).log2())).collect();
        println!("{:>15}: errors {shown:?} observed order {}", solver.name(), orders.join(" "));
    }

    // large steps: the fused update stays bounded where Euler blows up
    let mut p = LtcParams::zeros(1, 1, 1.0);
    p.b.data_mut()[0] = 1.0;
    for (solver, dt) in [(SolverKind::FusedExplicit, 10.0), (SolverKind::Euler, 2.5)] {
        let mut x = vec![0.5];
        for _ in 0..1000 {
            x = match step(&x, &[0.0], &p, solver, dt) {
                Ok(v) => v,
                Err(e) => {
                    println!("{:>15} dt={dt}: {e}", solver.name());
                    break;
                }
            };
            if !x[0].is_finite() || x[0].abs() > 1e12 {
                break;
            }
        }
        println!("{:>15} dt={dt}: state after 1000 steps {:.4e}", solver.name(), x[0]);
    }
}
