//! Kolmogorov-Smirnov distances: exact two-sample sup over pooled order
//! statistics, one-sample sup over a reference quantile grid, and the
//! asymptotic two-sample critical value.

/// Empirical CDF at t (proportion <= t) of an ascending-sorted slice.
pub fn ecdf(sorted: &[f64], t: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    sorted.partition_point(|v| *v <= t) as f64 / sorted.len() as f64
}

/// Exact two-sample KS distance with its attaining threshold. Both inputs
/// must be ascending-sorted and nonempty. The sup of the difference of two
/// right-continuous step functions is attained at a jump point, so the
/// pooled values are the only candidates.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> (f64, f64) {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    let mut best_t = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        let diff = (i as f64 / na - j as f64 / nb).abs();
        if diff > best {
            best = diff;
            best_t = v;
        }
    }
    (best, best_t)
}

/// Sup over the given thresholds of |ecdf(sample) - cdf|, with the
/// attaining threshold.
pub fn grid_ks<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F, grid: &[f64]) -> (f64, f64) {
    debug_assert!(!grid.is_empty());
    let mut best = 0.0f64;
    let mut best_t = grid[0];
    for &t in grid {
        let diff = (ecdf(sorted, t) - cdf(t)).abs();
        if diff > best {
            best = diff;
            best_t = t;
        }
    }
    (best, best_t)
}

/// Asymptotic two-sample KS critical value c(alpha) sqrt((m+k)/(mk)) with
/// c(alpha) = sqrt(-ln(alpha/2)/2), e.g. c(0.01) ~ 1.628.
pub fn two_sample_critical(alpha: f64, m: usize, k: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((m + k) as f64 / (m as f64 * k as f64)).sqrt()
}

/// Binomial standard-error proxy sqrt(F(1-F)/m) at the argmax, with F
/// clamped away from {0, 1} so the proxy is strictly positive.
pub fn binomial_se(f_hat: f64, m: usize) -> f64 {
    let mf = m as f64;
    let f = f_hat.clamp(0.5 / mf, 1.0 - 0.5 / mf);
    (f * (1.0 - f) / mf).sqrt()
}
