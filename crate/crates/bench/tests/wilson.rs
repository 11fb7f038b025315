//! Wilson intervals against a parametric bootstrap of the binomial.

use afsim::stats::{wilson, Z95};
use afsim_core::signal::RngStream;

fn bootstrap_interval(errors: usize, trials: usize, draws: usize, rng: &mut RngStream) -> (f64, f64) {
    let p = errors as f64 / trials as f64;
    let mut est: Vec<f64> = (0..draws)
        .map(|_| (0..trials).filter(|_| rng.uniform() < p).count() as f64 / trials as f64)
        .collect();
    est.sort_by(f64::total_cmp);
    (est[draws * 25 / 1000], est[draws * 975 / 1000])
}

#[test]
fn wilson_matches_bootstrap_where_counts_are_moderate() {
    let mut rng = RngStream::new(21);
    for case in 0..20 {
        let trials = 400 + 80 * case;
        let errors = 20 + 7 * case;
        let (lo, hi) = bootstrap_interval(errors, trials, 2000, &mut rng);
        let (c, h) = wilson(errors, trials, Z95);
        let tol = 0.2 * (hi - lo);
        assert!((c - h - lo).abs() < tol, "case {case}: lower {} vs {lo}", c - h);
        assert!((c + h - hi).abs() < tol, "case {case}: upper {} vs {hi}", c + h);
    }
}
