//! Paired tests and bootstrap intervals on two sets of per-event scores.

use spillnet::evaluate::{bootstrap_ci, compare_paired, paired_t_test, wilcoxon_signed_rank};

fn main() {
    let t = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
    println!("d = 1,2,3: t = {:.4}, df = {}, p = {:.4}", t.t, t.df, t.p);

    let ltc = [0.91, 0.88, 0.93, 0.95, 0.90, 0.87, 0.94, 0.92, 0.89, 0.96];
    let lstm = [0.80, 0.79, 0.85, 0.88, 0.77, 0.82, 0.90, 0.81, 0.86, 0.84];
    let w = wilcoxon_signed_rank(&ltc, &lstm).unwrap();
    println!("Wilcoxon: W = {}, n = {}, p = {:.5} ({})", w.w, w.n_eff, w.p, if w.exact { "exact" } else { "normal approx." });

    let (lo, hi) = bootstrap_ci(&ltc, 0.95, 10_000, 1).unwrap();
    println!("bootstrap 95% CI of the mean score: [{lo:.4}, {hi:.4}]");

    let r = compare_paired(&ltc, &lstm, 1).unwrap();
    println!(
        "difference {:.4} [{:.4}, {:.4}], t = {:.3} (p = {:.2e}), Wilcoxon p = {:.2e}",
        r.mean, r.ci_low, r.ci_high, r.t_stat, r.p_value, r.wilcoxon_p
    );
}
