//! Sample generation: standardized marginal families mixed through a
//! triangular covariance factor, with deterministic seeding.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, OpenClosed01, StandardNormal, StudentT};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::fmath;
use crate::linalg;
use crate::rng::{substream, tags};
use crate::special;
use crate::CoreError;

/// Marginal family of the iid innovations. Each family is standardized to
/// unit variance whenever the variance exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT { nu: f64 },
    SymmetricPareto { alpha: f64 },
    Rademacher,
}

impl Family {
    fn validate(&self) -> Result<(), CoreError> {
        match *self {
            Family::StudentT { nu } if !(nu > 0.0 && nu.is_finite()) => {
                Err(CoreError::invalid(format!("student_t requires nu > 0, got {nu}")))
            }
            Family::SymmetricPareto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(CoreError::invalid(format!("symmetric_pareto requires alpha > 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Internal standardization multiplier applied to raw draws.
    fn standardizer(&self) -> f64 {
        match *self {
            Family::StudentT { nu } if nu > 2.0 => fmath::sqrt((nu - 2.0) / nu),
            _ => 1.0,
        }
    }

    /// Left edge of the positive part of the support (0 for full support).
    pub fn support_lower(&self) -> f64 {
        match *self {
            Family::SymmetricPareto { alpha } => pareto_x0(alpha),
            Family::Rademacher => 1.0,
            _ => 0.0,
        }
    }

    /// Variance of the standardized family, None when infinite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Family::Gaussian | Family::Rademacher => Some(1.0),
            Family::StudentT { nu } => (nu > 2.0).then_some(1.0),
            Family::SymmetricPareto { alpha } => (alpha > 2.0).then_some(1.0),
        }
    }

    /// Whether the standardized family has a Lebesgue density.
    pub fn has_density(&self) -> bool {
        !matches!(self, Family::Rademacher)
    }

    /// Density of the standardized family.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian => special::norm_pdf(x),
            Family::StudentT { nu } => {
                let s = self.standardizer();
                student_pdf(x / s, nu) / s
            }
            Family::SymmetricPareto { alpha } => {
                let x0 = pareto_x0(alpha);
                let ax = fmath::abs(x);
                if ax < x0 {
                    0.0
                } else {
                    0.5 * alpha * fmath::powf(x0, alpha) * fmath::powf(ax, -alpha - 1.0)
                }
            }
            Family::Rademacher => 0.0,
        }
    }

    /// CDF of the standardized family.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian => special::norm_cdf(x),
            Family::StudentT { nu } => special::student_t_cdf(x / self.standardizer(), nu),
            Family::SymmetricPareto { alpha } => {
                let x0 = pareto_x0(alpha);
                if x >= x0 {
                    1.0 - 0.5 * fmath::powf(x0 / x, alpha)
                } else if x > -x0 {
                    0.5
                } else {
                    0.5 * fmath::powf(-x0 / x, alpha)
                }
            }
            Family::Rademacher => {
                if x >= 1.0 {
                    1.0
                } else if x >= -1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// P(|X| <= c) for the standardized family.
    pub fn abs_cdf(&self, c: f64) -> f64 {
        if c < 0.0 {
            return 0.0;
        }
        match *self {
            Family::Rademacher => {
                if c >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => (2.0 * self.cdf(c) - 1.0).max(0.0),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Gaussian => StandardNormal.sample(rng),
            Family::StudentT { nu } => {
                let raw: f64 = StudentT::new(nu).expect("validated nu > 0").sample(rng);
                raw * self.standardizer()
            }
            Family::SymmetricPareto { alpha } => {
                let u: f64 = OpenClosed01.sample(rng);
                let mag = pareto_x0(alpha) * fmath::powf(u, -1.0 / alpha);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
            Family::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Scale of the two-sided Pareto: chosen so the variance is 1 when it exists.
fn pareto_x0(alpha: f64) -> f64 {
    if alpha > 2.0 {
        fmath::sqrt((alpha - 2.0) / alpha)
    } else {
        1.0
    }
}

fn student_pdf(u: f64, nu: f64) -> f64 {
    let ln_c = fmath::ln_gamma(0.5 * (nu + 1.0)) - fmath::ln_gamma(0.5 * nu)
        - 0.5 * fmath::ln(nu * core::f64::consts::PI);
    fmath::exp(ln_c - 0.5 * (nu + 1.0) * fmath::ln_1p(u * u / nu))
}

/// Covariance structure of the mixing step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    #[default]
    Identity,
    Equicorrelated { rho: f64 },
    Ar1 { rho: f64 },
}

/// Build the d x d covariance matrix for a covariance spec.
///
/// Equicorrelated requires rho in (-1/(d-1), 1); AR(1) requires |rho| < 1.
pub fn build_covariance(spec: CovarianceSpec, d: usize) -> Result<Vec<f64>, CoreError> {
    if d == 0 {
        return Err(CoreError::invalid("dimension must be at least 1"));
    }
    let mut m = vec![0.0; d * d];
    match spec {
        CovarianceSpec::Identity => {
            for i in 0..d {
                m[i * d + i] = 1.0;
            }
        }
        CovarianceSpec::Equicorrelated { rho } => {
            let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
            if !(rho.is_finite() && rho > lower && rho < 1.0) {
                return Err(CoreError::invalid(format!(
                    "equicorrelated rho must lie in ({lower}, 1), got {rho}"
                )));
            }
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] = if i == j { 1.0 } else { rho };
                }
            }
        }
        CovarianceSpec::Ar1 { rho } => {
            if !(rho.is_finite() && rho.abs() < 1.0) {
                return Err(CoreError::invalid(format!("ar1 rho must lie in (-1, 1), got {rho}")));
            }
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] = fmath::powi(rho, i.abs_diff(j) as u32);
                }
            }
        }
    }
    Ok(m)
}

/// Where a spec's randomness comes from: a reproducible 64-bit seed, or
/// externally supplied data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SeedSpec {
    Seeded(u64),
    #[default]
    External,
}

impl Serialize for SeedSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            SeedSpec::Seeded(s) => ser.serialize_u64(*s),
            SeedSpec::External => ser.serialize_str("external"),
        }
    }
}

impl<'de> Deserialize<'de> for SeedSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct SeedVisitor;
        impl<'de> Visitor<'de> for SeedVisitor {
            type Value = SeedSpec;
            fn expecting(&self, f: &mut core::fmt::Formatter) -> core::fmt::Result {
                f.write_str("a 64-bit seed or the string \"external\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<SeedSpec, E> {
                Ok(SeedSpec::Seeded(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<SeedSpec, E> {
                u64::try_from(v)
                    .map(SeedSpec::Seeded)
                    .map_err(|_| E::custom("seed must be non-negative"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<SeedSpec, E> {
                if v == "external" {
                    Ok(SeedSpec::External)
                } else {
                    Err(E::custom("expected \"external\""))
                }
            }
        }
        de.deserialize_any(SeedVisitor)
    }
}

/// Full description of a sampling law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    pub d: usize,
    #[serde(default)]
    pub covariance: CovarianceSpec,
    /// Per-coordinate positive scales applied after mixing; None means all 1.
    #[serde(default)]
    pub scale: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: SeedSpec,
}

impl DistributionSpec {
    /// A spec with identity covariance, unit scales, and external seed.
    pub fn new(family: Family, d: usize) -> Self {
        DistributionSpec { family, d, covariance: CovarianceSpec::Identity, scale: None, seed: SeedSpec::External }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.d == 0 {
            return Err(CoreError::invalid("dimension must be at least 1"));
        }
        self.family.validate()?;
        build_covariance(self.covariance, self.d)?;
        if let Some(scale) = &self.scale {
            if scale.len() != self.d {
                return Err(CoreError::DimensionMismatch {
                    what: String::from("scale vector"),
                    expected: self.d,
                    got: scale.len(),
                });
            }
            if let Some(&bad) = scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                return Err(CoreError::invalid(format!("scales must be positive finite, got {bad}")));
            }
        }
        Ok(())
    }

    /// Scale of coordinate j (the marginal standard deviation when the
    /// family variance exists).
    pub fn sigma(&self, j: usize) -> f64 {
        self.scale.as_ref().map_or(1.0, |s| s[j])
    }

    pub fn is_identity_covariance(&self) -> bool {
        matches!(self.covariance, CovarianceSpec::Identity)
    }

    /// Correlation matrix implied by the covariance spec (unit diagonal by
    /// construction for the specs built here).
    pub fn correlation_matrix(&self) -> Result<Vec<f64>, CoreError> {
        build_covariance(self.covariance, self.d)
    }
}

/// A dense n x d sample, rows are observations.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Wrap row-major data; every entry must be finite.
    pub fn from_rows(n: usize, d: usize, data: Vec<f64>) -> Result<Self, CoreError> {
        if n == 0 || d == 0 {
            return Err(CoreError::invalid("sample must have at least one row and column"));
        }
        if data.len() != n * d {
            return Err(CoreError::DimensionMismatch {
                what: String::from("sample buffer"),
                expected: n * d,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("sample entries must be finite"));
        }
        Ok(SampleMatrix { n, d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Iterator over column j.
    pub fn col(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data[j..].iter().step_by(self.d).copied()
    }

    /// Per-row sup norm max_j |x_ij|.
    pub fn row_max_abs(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().fold(0.0f64, |m, v| m.max(fmath::abs(*v))))
            .collect()
    }
}

/// Draw an n x d sample from a spec. A pure function of `(spec, n, seed)`:
/// identical inputs give identical matrices on every platform and any
/// worker count.
pub fn generate_sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<SampleMatrix, CoreError> {
    spec.validate()?;
    if n == 0 {
        return Err(CoreError::invalid("sample size must be at least 1"));
    }
    let d = spec.d;
    let cov = build_covariance(spec.covariance, d)?;
    let l = linalg::cholesky_psd(&cov, d, 1e-12)?;
    let identity = spec.is_identity_covariance();
    let mut rng = substream(seed, &[tags::SAMPLE, n as u64]);
    let mut data = vec![0.0; n * d];
    let mut xi = vec![0.0; d];
    for i in 0..n {
        for x in xi.iter_mut() {
            *x = spec.family.draw(&mut rng);
        }
        let row = &mut data[i * d..(i + 1) * d];
        if identity {
            row.copy_from_slice(&xi);
        } else {
            linalg::lower_matvec(&l, d, &xi, row);
        }
        if let Some(scale) = &spec.scale {
            for (v, s) in row.iter_mut().zip(scale.iter()) {
                *v *= s;
            }
        }
    }
    SampleMatrix::from_rows(n, d, data)
}
