//! Gaussian reference machinery: factorized covariance specs, sup-norm
//! maxima sampling, exact smoothed indicators, covariance discrepancies,
//! anti-concentration and Sidak thresholds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::linalg;
use crate::rng::{substream, tags};
use crate::sampling::SampleMatrix;
use crate::special;
use crate::CoreError;

/// A zero-mean Gaussian law ready for sampling: the covariance, its
/// lower-triangular factor, and summary spectral facts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub d: usize,
    /// Row-major d x d covariance (possibly PSD-repaired from the input).
    pub omega: Vec<f64>,
    /// Row-major lower-triangular L with L L^T = omega.
    pub factor: Vec<f64>,
    /// Smallest eigenvalue, clipped at 0 when rounding noise dips below.
    pub lambda_min: f64,
    /// True when every diagonal entry is within 1e-12 of 1.
    pub unit_diagonal: bool,
}

impl GaussianSpec {
    /// Build a spec from a symmetric PSD matrix. Eigenvalues in
    /// [-1e-10 * scale, 0) are treated as rounding noise and clipped to 0
    /// (the stored covariance is the clipped reconstruction); anything
    /// more negative is rejected.
    pub fn from_covariance(omega: Vec<f64>, d: usize) -> Result<Self, CoreError> {
        if d == 0 || omega.len() != d * d {
            return Err(CoreError::DimensionMismatch {
                what: String::from("covariance buffer"),
                expected: d * d,
                got: omega.len(),
            });
        }
        let mut scale = 0.0f64;
        for i in 0..d {
            for j in 0..i {
                if fmath::abs(omega[i * d + j] - omega[j * d + i]) > 1e-10 {
                    return Err(CoreError::invalid(format!(
                        "covariance must be symmetric, entries ({i},{j}) differ"
                    )));
                }
            }
            for j in 0..d {
                if !omega[i * d + j].is_finite() {
                    return Err(CoreError::invalid("covariance entries must be finite"));
                }
                scale = scale.max(fmath::abs(omega[i * d + j]));
            }
        }
        let tol = 1e-10 * scale.max(1.0);
        let (eigs, _) = linalg::jacobi_eigen(&omega, d);
        let raw_min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        if raw_min < -tol {
            return Err(CoreError::NotPositiveSemidefinite { min_eigenvalue: raw_min });
        }
        // Clipping rounding-level negative eigenvalues must not knock a
        // correlation matrix off its exact unit diagonal.
        let input_unit_diag = (0..d).all(|j| fmath::abs(omega[j * d + j] - 1.0) <= 1e-12);
        let omega =
            if raw_min < 0.0 { clip_spectrum(&omega, d, input_unit_diag)? } else { omega };
        let factor = linalg::cholesky_psd(&omega, d, 1e-12)?;
        let residual = linalg::factor_residual(&factor, &omega, d);
        if residual > 1e-10 * scale.max(1.0) {
            return Err(CoreError::NonConvergence {
                context: format!("covariance factorization residual {residual:e}"),
            });
        }
        let unit_diagonal = (0..d).all(|j| fmath::abs(omega[j * d + j] - 1.0) <= 1e-12);
        Ok(GaussianSpec { d, omega, factor, lambda_min: raw_min.max(0.0), unit_diagonal })
    }

    /// The identity covariance in dimension d.
    pub fn identity(d: usize) -> Result<Self, CoreError> {
        let mut omega = vec![0.0; d * d];
        for j in 0..d {
            omega[j * d + j] = 1.0;
        }
        Self::from_covariance(omega, d)
    }

    /// Smallest diagonal standard deviation.
    pub fn sigma_min(&self) -> f64 {
        (0..self.d)
            .map(|j| fmath::sqrt(self.omega[j * self.d + j].max(0.0)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigen-clip a symmetric matrix at zero; optionally renormalize the
/// diagonal to exactly 1 afterwards.
fn clip_spectrum(m: &[f64], d: usize, renormalize: bool) -> Result<Vec<f64>, CoreError> {
    let (eigs, vecs) = linalg::jacobi_eigen(m, d);
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = 0.0;
            for (k, lam) in eigs.iter().enumerate() {
                if *lam > 0.0 {
                    acc += lam * vecs[i * d + k] * vecs[j * d + k];
                }
            }
            out[i * d + j] = acc;
            out[j * d + i] = acc;
        }
    }
    if renormalize {
        let norms: Vec<f64> = (0..d).map(|j| fmath::sqrt(out[j * d + j].max(0.0))).collect();
        if let Some(z) = norms.iter().position(|v| *v <= 0.0) {
            return Err(CoreError::DegenerateColumn { index: z });
        }
        for i in 0..d {
            for j in 0..d {
                // rounding can push a correlation an ulp past +-1
                out[i * d + j] = (out[i * d + j] / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            }
            out[i * d + i] = 1.0;
        }
    }
    Ok(out)
}

/// Empirical correlation matrix of a sample, PSD-repaired (eigenvalue
/// clipping at 0, then diagonal renormalization back to exactly 1).
pub fn correlation_from_sample(sample: &SampleMatrix) -> Result<GaussianSpec, CoreError> {
    let (n, d) = (sample.n(), sample.d());
    let nf = n as f64;
    let means: Vec<f64> = (0..d).map(|j| sample.col(j).sum::<f64>() / nf).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let row = sample.row(i);
        for a in 0..d {
            let da = row[a] - means[a];
            for b in 0..=a {
                cov[a * d + b] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            cov[a * d + b] /= nf;
            cov[b * d + a] = cov[a * d + b];
        }
    }
    for j in 0..d {
        if cov[j * d + j] <= 0.0 {
            return Err(CoreError::DegenerateColumn { index: j });
        }
    }
    let sds: Vec<f64> = (0..d).map(|j| fmath::sqrt(cov[j * d + j])).collect();
    let mut corr = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            corr[a * d + b] = cov[a * d + b] / (sds[a] * sds[b]);
        }
        corr[a * d + a] = 1.0;
    }
    // A Gram-derived matrix is PSD up to rounding; clip that noise away.
    let repaired = clip_spectrum(&corr, d, true)?;
    GaussianSpec::from_covariance(repaired, d)
}

/// One draw of ||Z||_inf under the spec, on the sub-stream for `index`.
/// Draws with distinct indices are independent and any subset can be
/// produced in any order or on any thread with identical results.
pub fn max_draw(spec: &GaussianSpec, seed: u64, index: u64) -> f64 {
    let mut rng = substream(seed, &[tags::GAUSS_MAX, index]);
    let d = spec.d;
    let mut w = vec![0.0; d];
    for v in w.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    let mut best = 0.0f64;
    for i in 0..d {
        let mut acc = 0.0;
        for (k, wv) in w.iter().enumerate().take(i + 1) {
            acc += spec.factor[i * d + k] * wv;
        }
        best = best.max(fmath::abs(acc));
    }
    best
}

/// M draws of ||Z||_inf.
pub fn sample_max(spec: &GaussianSpec, m: usize, seed: u64) -> Vec<f64> {
    (0..m as u64).map(|r| max_draw(spec, seed, r)).collect()
}

/// Exact P(||Z||_inf <= t) when Z has iid standard normal coordinates.
pub fn max_cdf_diag(t: f64, d: usize) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let p = (2.0 * special::norm_cdf(t) - 1.0).max(0.0);
    let mut acc = 1.0;
    let mut base = p;
    let mut e = d;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Empirical CDF of sampled maxima on a grid, with binomial standard
/// errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxDistEstimate {
    pub draws: usize,
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub se: Vec<f64>,
}

impl MaxDistEstimate {
    pub fn from_draws(values: &[f64], mut grid: Vec<f64>) -> Result<Self, CoreError> {
        if values.is_empty() || grid.is_empty() {
            return Err(CoreError::invalid("need at least one draw and one grid point"));
        }
        grid.sort_unstable_by(f64::total_cmp);
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let m = sorted.len() as f64;
        let mut cdf = Vec::with_capacity(grid.len());
        let mut se = Vec::with_capacity(grid.len());
        for t in &grid {
            let k = sorted.partition_point(|v| *v <= *t);
            let p = k as f64 / m;
            cdf.push(p);
            se.push(fmath::sqrt(p * (1.0 - p) / m));
        }
        Ok(MaxDistEstimate { draws: values.len(), grid, cdf, se })
    }
}

/// Exact E[ 1{ ||x + eps W||_inf <= t } ] for W standard normal: the
/// product of per-coordinate normal interval probabilities.
pub fn smoothed_indicator(x: &[f64], eps: f64, t: f64) -> Result<f64, CoreError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CoreError::invalid(format!("bandwidth must be positive, got {eps}")));
    }
    let mut p = 1.0;
    for xj in x {
        let hi = (t - xj) / eps;
        let lo = (-t - xj) / eps;
        let factor = special::norm_cdf_diff(hi, lo).max(0.0);
        p *= factor;
        if p == 0.0 {
            break;
        }
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Entrywise max absolute difference of two covariance matrices.
pub fn discrepancy(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64, CoreError> {
    if a.d != b.d {
        return Err(CoreError::DimensionMismatch {
            what: String::from("covariance dimensions"),
            expected: a.d,
            got: b.d,
        });
    }
    let mut worst = 0.0f64;
    for (x, y) in a.omega.iter().zip(b.omega.iter()) {
        worst = worst.max(fmath::abs(x - y));
    }
    Ok(worst)
}

/// Anti-concentration budget eps (sqrt(2 log d) + 2) / sigma_min for the
/// band P(t < ||Z||_inf <= t + eps) under a unit-diagonal covariance.
pub fn nazarov_band_bound(eps: f64, d: usize, sigma_min: f64) -> Result<f64, CoreError> {
    if !(eps >= 0.0) {
        return Err(CoreError::invalid(format!("band half-width must be >= 0, got {eps}")));
    }
    if !(sigma_min > 0.0) {
        return Err(CoreError::invalid(format!("sigma_min must be positive, got {sigma_min}")));
    }
    if d == 0 {
        return Err(CoreError::invalid("dimension must be at least 1"));
    }
    Ok(eps * (fmath::sqrt(2.0 * fmath::ln(d as f64)) + 2.0) / sigma_min)
}

/// t with (2 Phi(t) - 1)^d = 1 - alpha: the exact simultaneous threshold
/// for d independent standard normal coordinates.
pub fn sidak_threshold(alpha: f64, d: usize) -> Result<f64, CoreError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::invalid(format!("level must lie in (0,1), got {alpha}")));
    }
    if d == 0 {
        return Err(CoreError::invalid("dimension must be at least 1"));
    }
    let per_coord = fmath::powf(1.0 - alpha, 1.0 / d as f64);
    Ok(special::norm_quantile((1.0 + per_coord) / 2.0))
}
