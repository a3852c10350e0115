//! Self-normalized statistics, the band smoother, tilted sums, and
//! U-statistic diagnostics.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::sampling::SampleMatrix;
use crate::truncation::{TruncatedSample, TruncationLevels, TruncationMode};
use crate::CoreError;

/// Coordinatewise self-normalized ratios |sum| / sqrt(sum of squares).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfNormalizedStat {
    /// values\[j\] = |sum_i X_ij| / sqrt(sum_i X_ij^2); 0 where degenerate.
    pub values: Vec<f64>,
    /// Maximum over non-degenerate coordinates.
    pub max_value: f64,
    /// True where the column sum of squares is zero (ratio undefined).
    pub degenerate_mask: Vec<bool>,
}

/// eta_j = (sum of squared Y column) - 1 with its band membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaVector {
    pub eta: Vec<f64>,
    /// |1 + eta_j| in [1/4, 7/4].
    pub in_band: Vec<bool>,
}

/// Tilted column sums (sum_i Y_ij) * g(1 + eta_j).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedSum {
    pub y_tilde_sum: Vec<f64>,
    pub max_value: f64,
}

/// Maxima of the degree <= 3 sums behind the U-statistic remainder terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UStatDiagnostics {
    /// max_j |sum_{i1 != i2} Y_{i1 j} (Y_{i2 j}^2 - 1/n)|
    pub u_max: f64,
    /// max_j |sum_i Y_ij|
    pub s1: f64,
    /// max_j |sum_i Y_ij^2 - 1|
    pub s2: f64,
    /// max_j |sum_i (Y_ij^3 - Y_ij / n)|
    pub s3: f64,
}

fn column_sums(sample: &SampleMatrix, j: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for x in sample.col(j) {
        sum += x;
        sum_sq += x * x;
    }
    (sum, sum_sq)
}

fn stat_from_ratios(parts: Vec<(f64, f64)>) -> Result<SelfNormalizedStat, CoreError> {
    let d = parts.len();
    let mut values = Vec::with_capacity(d);
    let mut mask = Vec::with_capacity(d);
    let mut max_value = f64::NEG_INFINITY;
    for (sum, sum_sq) in parts {
        if sum_sq <= 0.0 {
            values.push(0.0);
            mask.push(true);
        } else {
            let v = fmath::abs(sum) / fmath::sqrt(sum_sq);
            max_value = max_value.max(v);
            values.push(v);
            mask.push(false);
        }
    }
    if !max_value.is_finite() {
        return Err(CoreError::AllDegenerate);
    }
    Ok(SelfNormalizedStat { values, max_value, degenerate_mask: mask })
}

/// The self-normalized max statistic of a raw sample.
pub fn self_normalized(sample: &SampleMatrix) -> Result<SelfNormalizedStat, CoreError> {
    let parts = (0..sample.d()).map(|j| column_sums(sample, j)).collect();
    stat_from_ratios(parts)
}

/// The self-normalized statistic of the truncated vectors, evaluated in
/// scale-cancelled form: the common factor 1/(a_j sqrt(n)) of surviving
/// entries drops out of the ratio, so only the kill indicator acts. On a
/// sample with no truncation this performs the exact same float operations
/// as [`self_normalized`], making the two bit-identical on that event.
pub fn self_normalized_truncated(
    sample: &SampleMatrix,
    levels: &TruncationLevels,
) -> Result<SelfNormalizedStat, CoreError> {
    let (n_rows, d) = (sample.n(), sample.d());
    let nf = levels.n as f64;
    let mut parts = Vec::with_capacity(d);
    match levels.mode {
        TruncationMode::PerCoordinate => {
            for j in 0..d {
                let a = levels.level(j);
                let cut = a * a * nf;
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                for x in sample.col(j) {
                    if x * x <= cut {
                        sum += x;
                        sum_sq += x * x;
                    }
                }
                parts.push((sum, sum_sq));
            }
        }
        TruncationMode::Global => {
            let a = levels.level(0);
            let cut = a * a * nf;
            let mut sums = alloc::vec![(0.0f64, 0.0f64); d];
            for i in 0..n_rows {
                let row = sample.row(i);
                let sup = row.iter().fold(0.0f64, |m, v| m.max(fmath::abs(*v)));
                if sup * sup <= cut {
                    for (j, x) in row.iter().enumerate() {
                        sums[j].0 += x;
                        sums[j].1 += x * x;
                    }
                }
            }
            parts = sums;
        }
    }
    stat_from_ratios(parts)
}

/// eta_j = sum_i Y_ij^2 - 1.
pub fn eta(trunc: &TruncatedSample) -> EtaVector {
    let d = trunc.y.d();
    let mut eta = Vec::with_capacity(d);
    let mut in_band = Vec::with_capacity(d);
    for j in 0..d {
        let sum_sq: f64 = trunc.y.col(j).map(|y| y * y).sum();
        let e = sum_sq - 1.0;
        let arg = fmath::abs(1.0 + e);
        eta.push(e);
        in_band.push((0.25..=1.75).contains(&arg));
    }
    EtaVector { eta, in_band }
}

// ---------------------------------------------------------------------------
// smoother

/// Construction constants of the smoother g(x) = m(x)^{-1/2}: the argument
/// clamp m equals |x| on the central band, holds constant plateaus outside,
/// and blends between them with a quintic smoothstep on the two transition
/// intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmootherG {
    pub transition_lo: (f64, f64),
    pub transition_hi: (f64, f64),
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl Default for SmootherG {
    fn default() -> Self {
        SmootherG {
            transition_lo: (3.0 / 16.0, 0.25),
            transition_hi: (1.75, 15.0 / 8.0),
            clamp_lo: 0.25,
            clamp_hi: 4.0,
        }
    }
}

/// Quintic smoothstep and its first two derivatives on [0, 1].
fn smoothstep(t: f64) -> (f64, f64, f64) {
    let s = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
    let s1 = 30.0 * t * t * (t - 1.0) * (t - 1.0);
    let s2 = t * (t * (120.0 * t - 180.0) + 60.0);
    (s, s1, s2)
}

/// The argument clamp and its derivatives in u = |x|.
fn clamp_m(u: f64) -> (f64, f64, f64) {
    let c = SmootherG::default();
    let (lo0, lo1) = c.transition_lo;
    let (hi0, hi1) = c.transition_hi;
    if u <= lo0 {
        (c.clamp_lo, 0.0, 0.0)
    } else if u < lo1 {
        let w = lo1 - lo0;
        let (s, s1, s2) = smoothstep((u - lo0) / w);
        let (s1, s2) = (s1 / w, s2 / (w * w));
        // m = (1-s) clamp_lo + s u
        let dev = u - c.clamp_lo;
        (c.clamp_lo + s * dev, s1 * dev + s, s2 * dev + 2.0 * s1)
    } else if u <= hi0 {
        (u, 1.0, 0.0)
    } else if u < hi1 {
        let w = hi1 - hi0;
        let (s, s1, s2) = smoothstep((u - hi0) / w);
        let (s1, s2) = (s1 / w, s2 / (w * w));
        // m = (1-s) u + s clamp_hi
        let dev = c.clamp_hi - u;
        (u + s * dev, 1.0 + s1 * dev - s, s2 * dev - 2.0 * s1)
    } else {
        (c.clamp_hi, 0.0, 0.0)
    }
}

/// Evaluate the smoother: returns (g, g', g'').
///
/// g(x) = |x|^{-1/2} exactly for |x| in [1/4, 7/4]; outside, the clamp
/// plateaus keep g between regular values with analytic derivatives. An
/// even total function, C^2 everywhere.
pub fn g_eval(x: f64) -> (f64, f64, f64) {
    let u = fmath::abs(x);
    let (m, m1, m2) = clamp_m(u);
    let inv_sqrt = 1.0 / fmath::sqrt(m);
    let g = inv_sqrt;
    let m_pow_3 = m * fmath::sqrt(m);
    let du = -0.5 * m1 / m_pow_3;
    let d2u = 0.75 * m1 * m1 / (m_pow_3 * m) - 0.5 * m2 / m_pow_3;
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    (g, sign * du, d2u)
}

// ---------------------------------------------------------------------------
// tilted sums and U-statistics

/// Column sums of the tilted vectors: (sum_i Y_ij) * g(1 + eta_j).
pub fn tilted_sum(trunc: &TruncatedSample) -> TiltedSum {
    let d = trunc.y.d();
    let etas = eta(trunc);
    let mut y_tilde_sum = Vec::with_capacity(d);
    let mut max_value = 0.0f64;
    for j in 0..d {
        let sum: f64 = trunc.y.col(j).sum();
        let (g, _, _) = g_eval(1.0 + etas.eta[j]);
        let v = sum * g;
        max_value = max_value.max(fmath::abs(v));
        y_tilde_sum.push(v);
    }
    TiltedSum { y_tilde_sum, max_value }
}

/// Degree <= 3 sum maxima over non-degenerate coordinates, with the
/// off-diagonal U-statistic folded to O(nd) through
/// sum_{i1 != i2} A_{i1} B_{i2} = (sum A)(sum B) - sum A B.
pub fn ustat_diagnostics(trunc: &TruncatedSample) -> Result<UStatDiagnostics, CoreError> {
    let (rows, d) = (trunc.y.n(), trunc.y.d());
    if rows < 2 {
        return Err(CoreError::invalid(format!(
            "u-statistic diagnostics need at least 2 rows, got {rows}"
        )));
    }
    let inv_n = 1.0 / trunc.levels.n as f64;
    let (mut u_max, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..d {
        let (mut sum_a, mut sum_sq, mut sum_b, mut sum_ab, mut sum_c) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for y in trunc.y.col(j) {
            let b = y * y - inv_n;
            sum_a += y;
            sum_sq += y * y;
            sum_b += b;
            sum_ab += y * b;
            sum_c += y * y * y - y * inv_n;
        }
        if sum_sq <= 0.0 {
            continue;
        }
        u_max = u_max.max(fmath::abs(sum_a * sum_b - sum_ab));
        s1 = s1.max(fmath::abs(sum_a));
        s2 = s2.max(fmath::abs(sum_sq - 1.0));
        s3 = s3.max(fmath::abs(sum_c));
    }
    Ok(UStatDiagnostics { u_max, s1, s2, s3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{generate_sample, DistributionSpec, Family, SampleMatrix};
    use crate::truncation::{solve_levels, truncate, Source, TruncationMode};
    use alloc::vec;

    #[test]
    fn single_observation_gives_ones() {
        let x = SampleMatrix::from_rows(1, 3, vec![2.0, -0.5, 7.0]).unwrap();
        let stat = self_normalized(&x).unwrap();
        for v in &stat.values {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert_eq!(stat.max_value, 1.0);
    }

    #[test]
    fn constant_column_attains_sqrt_n_cap() {
        let n = 9;
        let x = SampleMatrix::from_rows(n, 1, vec![3.0; n]).unwrap();
        let stat = self_normalized(&x).unwrap();
        assert!((stat.values[0] - 3.0).abs() < 1e-12); // sqrt(9)
    }

    #[test]
    fn alternating_column_is_zero() {
        let x = SampleMatrix::from_rows(4, 1, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let stat = self_normalized(&x).unwrap();
        assert_eq!(stat.values[0], 0.0);
        assert!(!stat.degenerate_mask[0]);
    }

    #[test]
    fn degenerate_columns_are_masked_not_fatal() {
        let x = SampleMatrix::from_rows(2, 2, vec![0.0, 1.0, 0.0, 2.0]).unwrap();
        let stat = self_normalized(&x).unwrap();
        assert!(stat.degenerate_mask[0]);
        assert!(!stat.degenerate_mask[1]);
        let all_zero = SampleMatrix::from_rows(2, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(self_normalized(&all_zero), Err(CoreError::AllDegenerate)));
    }

    #[test]
    fn sign_and_scale_invariance() {
        let spec = DistributionSpec::new(Family::Gaussian, 3);
        let x = generate_sample(&spec, 40, 2).unwrap();
        let base = self_normalized(&x).unwrap();
        let mut flipped = x.data().to_vec();
        for i in 0..40 {
            flipped[i * 3 + 1] = -flipped[i * 3 + 1];
            flipped[i * 3 + 2] *= 3.5;
        }
        let x2 = SampleMatrix::from_rows(40, 3, flipped).unwrap();
        let stat2 = self_normalized(&x2).unwrap();
        for j in 0..3 {
            assert!((base.values[j] - stat2.values[j]).abs() <= 1e-12 * base.values[j].max(1.0));
        }
    }

    #[test]
    fn truncated_stat_is_bit_identical_without_flags() {
        let spec = DistributionSpec::new(Family::Gaussian, 4);
        let x = generate_sample(&spec, 60, 5).unwrap();
        let levels = solve_levels(Source::Sample(&x), 60, TruncationMode::PerCoordinate).unwrap();
        let trunc = truncate(&x, &levels).unwrap();
        let t_y = self_normalized_truncated(&x, &levels).unwrap();
        if trunc.flag_count() == 0 {
            let t = self_normalized(&x).unwrap();
            assert_eq!(t.values, t_y.values);
        }
        // scale-cancelled route matches the materialized route loosely
        let mat = self_normalized(&trunc.y).unwrap();
        for j in 0..4 {
            if !mat.degenerate_mask[j] {
                assert!((mat.values[j] - t_y.values[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eta_of_plug_in_truncation_is_near_zero() {
        let spec = DistributionSpec::new(Family::Rademacher, 2);
        let x = generate_sample(&spec, 25, 8).unwrap();
        let levels = solve_levels(Source::Sample(&x), 25, TruncationMode::PerCoordinate).unwrap();
        let trunc = truncate(&x, &levels).unwrap();
        let e = eta(&trunc);
        for j in 0..2 {
            assert!(e.eta[j].abs() < 1e-12, "eta {}", e.eta[j]);
            assert!(e.in_band[j]);
        }
    }

    #[test]
    fn eta_lower_bound_and_band_edges() {
        let y = SampleMatrix::from_rows(1, 1, vec![0.0]).unwrap();
        let trunc = TruncatedSample {
            y,
            truncated_flags: vec![true],
            levels: crate::truncation::TruncationLevels {
                mode: TruncationMode::PerCoordinate,
                levels: vec![1.0],
                n: 1,
            },
        };
        let e = eta(&trunc);
        assert_eq!(e.eta[0], -1.0);
        assert!(!e.in_band[0]);
    }

    #[test]
    fn smoother_band_identity_and_endpoints() {
        for &x in &[0.25, 0.3, 0.5, 1.0, 1.5, 1.75] {
            let (g, _, _) = g_eval(x);
            assert_eq!(g, 1.0 / x.sqrt(), "band identity at {x}");
        }
        assert_eq!(g_eval(1.0).0, 1.0);
        assert_eq!(g_eval(0.25).0, 2.0);
        assert_eq!(g_eval(0.0).0, 2.0); // clamp_lo = 1/4
        assert_eq!(g_eval(10.0).0, 0.5); // clamp_hi = 4
        assert_eq!(g_eval(-1.0).0, 1.0); // even
    }

    #[test]
    fn smoother_derivatives_match_finite_differences() {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for k in 0..2000 {
            let x = -2.5 + 5.0 * (k as f64 + 0.5) / 2000.0;
            let (_, g1, g2) = g_eval(x);
            let gp = g_eval(x + h).0;
            let gm = g_eval(x - h).0;
            let g0 = g_eval(x).0;
            let fd1 = (gp - gm) / (2.0 * h);
            let fd2 = (gp - 2.0 * g0 + gm) / (h * h);
            worst = worst.max((fd1 - g1).abs() / g1.abs().max(1.0));
            assert!((fd1 - g1).abs() <= 1e-6 * g1.abs().max(1.0), "g' at {x}: {fd1} vs {g1}");
            assert!((fd2 - g2).abs() <= 1e-3 * g2.abs().max(10.0), "g'' at {x}: {fd2} vs {g2}");
        }
        assert!(worst < 1e-6);
    }

    #[test]
    fn smoother_is_even_with_odd_derivative() {
        for &x in &[0.1, 0.2, 0.9, 1.8, 2.2] {
            let (g, g1, g2) = g_eval(x);
            let (gn, g1n, g2n) = g_eval(-x);
            assert_eq!(g, gn);
            assert_eq!(g1, -g1n);
            assert_eq!(g2, g2n);
        }
    }

    #[test]
    fn tilt_equals_self_normalized_in_band() {
        let spec = DistributionSpec::new(Family::Gaussian, 5);
        let x = generate_sample(&spec, 80, 13).unwrap();
        let levels = solve_levels(Source::Sample(&x), 80, TruncationMode::PerCoordinate).unwrap();
        let trunc = truncate(&x, &levels).unwrap();
        let e = eta(&trunc);
        assert!(e.in_band.iter().all(|b| *b), "plug-in eta should sit in band");
        let tilt = tilted_sum(&trunc);
        let t_y = self_normalized(&trunc.y).unwrap();
        for j in 0..5 {
            assert!(
                (tilt.y_tilde_sum[j].abs() - t_y.values[j]).abs() < 1e-10,
                "j={j}: {} vs {}",
                tilt.y_tilde_sum[j].abs(),
                t_y.values[j]
            );
        }
        assert!((tilt.max_value - t_y.max_value).abs() < 1e-10);
    }

    #[test]
    fn ustat_identity_matches_brute_force() {
        let spec = DistributionSpec::new(Family::StudentT { nu: 4.0 }, 3);
        let x = generate_sample(&spec, 30, 21).unwrap();
        let levels = solve_levels(Source::Sample(&x), 30, TruncationMode::PerCoordinate).unwrap();
        let trunc = truncate(&x, &levels).unwrap();
        let diag = ustat_diagnostics(&trunc).unwrap();
        let inv_n = 1.0 / 30.0;
        let mut brute_max = 0.0f64;
        for j in 0..3 {
            let col: Vec<f64> = trunc.y.col(j).collect();
            let mut total = 0.0;
            for i1 in 0..30 {
                for i2 in 0..30 {
                    if i1 != i2 {
                        total += col[i1] * (col[i2] * col[i2] - inv_n);
                    }
                }
            }
            brute_max = brute_max.max(total.abs());
        }
        assert!(
            (diag.u_max - brute_max).abs() <= 1e-10 * brute_max.max(1.0),
            "{} vs {}",
            diag.u_max,
            brute_max
        );
    }

    #[test]
    fn rademacher_plug_in_has_zero_ustat() {
        let spec = DistributionSpec::new(Family::Rademacher, 2);
        let x = generate_sample(&spec, 16, 3).unwrap();
        let levels = solve_levels(Source::Sample(&x), 16, TruncationMode::PerCoordinate).unwrap();
        let trunc = truncate(&x, &levels).unwrap();
        let diag = ustat_diagnostics(&trunc).unwrap();
        assert!(diag.u_max < 1e-12);
        assert!(diag.s2 < 1e-12);
    }

    #[test]
    fn ustat_needs_two_rows() {
        let y = SampleMatrix::from_rows(1, 1, vec![0.5]).unwrap();
        let trunc = TruncatedSample {
            y,
            truncated_flags: vec![false],
            levels: crate::truncation::TruncationLevels {
                mode: TruncationMode::PerCoordinate,
                levels: vec![1.0],
                n: 1,
            },
        };
        assert!(ustat_diagnostics(&trunc).is_err());
    }
}
