//! Binomial confidence intervals and curve interpolation.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes in `trials`, as
/// `(center, half_width)`.
pub fn wilson(errors: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.5, 0.5);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center, half)
}

pub fn wilson_halfwidth(errors: usize, trials: usize) -> f64 {
    wilson(errors, trials, Z95).1
}

/// Linear interpolation of `log10(ber)` against power, over the points with
/// nonzero BER. `None` outside the covered power range.
pub fn ber_at_power(curve: &[(f64, f64)], power_db: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve.iter().copied().filter(|&(_, b)| b > 0.0).collect();
    for w in pts.windows(2) {
        let ((p0, b0), (p1, b1)) = (w[0], w[1]);
        if (p0..=p1).contains(&power_db) {
            if p1 == p0 {
                return Some(b0);
            }
            let t = (power_db - p0) / (p1 - p0);
            return Some(10f64.powf(b0.log10() + t * (b1.log10() - b0.log10())));
        }
    }
    match pts.as_slice() {
        [(p, b)] if *p == power_db => Some(*b),
        _ => None,
    }
}

/// Power at which the curve first falls to `ber`, interpolating
/// `log10(ber)` linearly between neighboring points.
pub fn power_at_ber(curve: &[(f64, f64)], ber: f64) -> Option<f64> {
    if !(ber > 0.0) {
        return None;
    }
    let target = ber.log10();
    let pts: Vec<(f64, f64)> = curve.iter().copied().filter(|&(_, b)| b > 0.0).collect();
    for w in pts.windows(2) {
        let ((p0, b0), (p1, b1)) = (w[0], w[1]);
        let (l0, l1) = (b0.log10(), b1.log10());
        if l0 >= target && l1 <= target {
            if l0 == l1 {
                return Some(p0);
            }
            return Some(p0 + (p1 - p0) * (l0 - target) / (l0 - l1));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // 5 of 100 at 95%: [0.0215, 0.1118] from the closed form
        let (c, h) = wilson(5, 100, Z95);
        assert!((c - h - 0.02154).abs() < 1e-4);
        assert!((c + h - 0.11175).abs() < 1e-4);
        let (c0, h0) = wilson(0, 1000, Z95);
        assert!(c0 - h0 >= -1e-15 && c0 > 0.0);
        assert_eq!(wilson(0, 0, Z95), (0.5, 0.5));
    }

    #[test]
    fn interpolation_round_trip() {
        let curve = [(0.0, 1e-1), (2.0, 1e-2), (4.0, 1e-3), (6.0, 0.0)];
        assert!((ber_at_power(&curve, 3.0).unwrap() - 10f64.powf(-2.5)).abs() < 1e-12);
        assert!((power_at_ber(&curve, 10f64.powf(-2.5)).unwrap() - 3.0).abs() < 1e-12);
        assert!(ber_at_power(&curve, 5.0).is_none());
        assert!(power_at_ber(&curve, 1e-4).is_none());
        assert_eq!(power_at_ber(&curve, 1e-2), Some(2.0));
    }
}
