use statrs::function::gamma::gamma_lr;

pub fn chi_square_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(dof as f64 / 2.0, x / 2.0)
}

/// Inverse CDF by bisection, accurate to 1e-12 in the argument.
pub fn chi_square_quantile(dof: usize, p: f64) -> f64 {
    assert!(dof > 0, "chi-square needs at least one degree of freedom");
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    let mut hi = (dof as f64).max(1.0);
    while chi_square_cdf(dof, hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(dof, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// CDF by composite Simpson integration of the density. For one degree
    /// of freedom the density has an integrable singularity at zero, which
    /// the substitution x = s² removes.
    fn simpson_cdf(dof: usize, x: f64) -> f64 {
        let k = dof as f64 / 2.0;
        let norm = 2f64.powf(k) * statrs::function::gamma::gamma(k);
        let n = 20_000;
        let smax = x.sqrt();
        let h = smax / n as f64;
        let f = |s: f64| {
            let t = s * s;
            if t == 0.0 {
                if dof == 1 { 2.0 } else { 0.0 }
            } else {
                2.0 * s * t.powf(k - 1.0) * (-t / 2.0).exp()
            }
        };
        let mut acc = f(0.0) + f(smax);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 / norm
    }

    #[test]
    fn quantiles_match_integrated_density() {
        let q = chi_square_quantile(2, 0.95);
        assert_abs_diff_eq!(q, 5.9915, epsilon = 1e-4);
        assert_abs_diff_eq!(simpson_cdf(2, q), 0.95, epsilon = 1e-9);
        let q = chi_square_quantile(1, 0.5);
        assert_abs_diff_eq!(q, 0.4549, epsilon = 1e-4);
        assert_abs_diff_eq!(simpson_cdf(1, q), 0.5, epsilon = 1e-9);
        for dof in 1..6 {
            assert_abs_diff_eq!(simpson_cdf(dof, chi_square_quantile(dof, 0.9)), 0.9, epsilon = 1e-9);
        }
    }

    #[test]
    fn small_probability_gives_small_quantile() {
        assert!(chi_square_quantile(3, 1e-12) < 1e-6);
    }
}
