//! Truncation levels, truncated vectors, and the moment quantities built
//! from them.
//!
//! The level of a coordinate is the square root of the largest solution of
//! psi(b) = b, where psi(b) = E[X^2 1{X^2 <= b n}]. psi is nondecreasing
//! and right-continuous, so iterating b <- psi(b) from any point at or above
//! the largest solution descends monotonically onto it. Empirical sources
//! terminate with exact float equality because psi takes finitely many
//! values; analytic sources stop at a relative tolerance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::quad;
use crate::sampling::{DistributionSpec, Family, SampleMatrix};
use crate::CoreError;

/// Truncation scheme: independent per-coordinate cutoffs, or one shared
/// cutoff applied to the row sup norm (whole rows survive or die).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    PerCoordinate,
    Global,
}

/// Solved truncation levels. `levels` has one entry per coordinate in
/// per-coordinate mode and exactly one entry in global mode; `n` is the
/// sample size appearing in the defining equation, which may differ from
/// the row count of the sample the levels were solved on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationLevels {
    pub mode: TruncationMode,
    pub levels: Vec<f64>,
    pub n: usize,
}

impl TruncationLevels {
    /// Level applied to coordinate j.
    #[inline]
    pub fn level(&self, j: usize) -> f64 {
        match self.mode {
            TruncationMode::PerCoordinate => self.levels[j],
            TruncationMode::Global => self.levels[0],
        }
    }

    fn check_dim(&self, d: usize) -> Result<(), CoreError> {
        let expected = match self.mode {
            TruncationMode::PerCoordinate => d,
            TruncationMode::Global => 1,
        };
        if self.levels.len() != expected {
            return Err(CoreError::DimensionMismatch {
                what: String::from("truncation levels"),
                expected,
                got: self.levels.len(),
            });
        }
        Ok(())
    }
}

/// A truncated sample: y holds the scaled entries, flags mark the entries
/// the indicator killed (y is exactly 0 there).
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSample {
    pub y: SampleMatrix,
    pub truncated_flags: Vec<bool>,
    pub levels: TruncationLevels,
}

impl TruncatedSample {
    /// Number of killed entries.
    pub fn flag_count(&self) -> usize {
        self.truncated_flags.iter().filter(|f| **f).count()
    }

    /// True where row i lost at least one entry.
    pub fn row_flagged(&self, i: usize) -> bool {
        let d = self.y.d();
        self.truncated_flags[i * d..(i + 1) * d].iter().any(|f| *f)
    }
}

/// Scalar summaries of the truncated law. All quantities are dimensionless;
/// infinite-variance sources give r_n = +inf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMomentReport {
    /// n * max_j |E Y_j|
    pub mu1: f64,
    /// n * E[max_j |Y_j|^3]
    pub mu3: f64,
    /// n * P(max_j X_j^2 / a_j^2 > n)
    pub tail_prob: f64,
    /// max_j E[(X_j/a_j)^2 1{X_j^2 > a_j^2 n}] + mu1^2
    pub r_n: f64,
    /// E[Y_j^2] per coordinate
    pub truncated_sq: Vec<f64>,
    /// tau^2 P(M^2 > tau^2) / E[M^2 1{M^2 <= tau^2}] at tau = a_* sqrt(n),
    /// M the row sup norm; global mode only.
    pub doa_ratio: Option<f64>,
}

/// Where expectations come from: a concrete sample (empirical means) or a
/// known law (closed forms and quadrature, identity covariance only).
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Sample(&'a SampleMatrix),
    Law(&'a DistributionSpec),
}

impl<'a> Source<'a> {
    fn d(&self) -> usize {
        match self {
            Source::Sample(s) => s.d(),
            Source::Law(spec) => spec.d,
        }
    }
}

fn require_identity(spec: &DistributionSpec) -> Result<(), CoreError> {
    spec.validate()?;
    if !spec.is_identity_covariance() {
        return Err(CoreError::AnalyticUnsupported {
            what: String::from("analytic expectations require identity covariance"),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// psi evaluation

/// Sorted squares of a scalar variable with prefix sums; supports exact
/// evaluation of the empirical psi.
struct EmpiricalPsi {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl EmpiricalPsi {
    fn new(mut squares: Vec<f64>) -> Self {
        squares.sort_unstable_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(squares.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for q in &squares {
            acc += q;
            prefix.push(acc);
        }
        EmpiricalPsi { sorted: squares, prefix }
    }

    fn second_moment(&self) -> f64 {
        self.prefix[self.sorted.len()] / self.sorted.len() as f64
    }

    /// psi(b) = mean of squares not exceeding b*n. Exactly monotone in b.
    fn psi(&self, b: f64, n: f64) -> f64 {
        let cut = b * n;
        let k = self.sorted.partition_point(|q| *q <= cut);
        self.prefix[k] / self.sorted.len() as f64
    }
}

fn column_squares(sample: &SampleMatrix, j: usize) -> Vec<f64> {
    sample.col(j).map(|x| x * x).collect()
}

fn sup_norm_squares(sample: &SampleMatrix) -> Vec<f64> {
    sample.row_max_abs().into_iter().map(|m| m * m).collect()
}

/// E[xi^2 1{|xi| <= c}] for the standardized family.
fn std_truncated_sq(family: Family, c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    match family {
        Family::Gaussian => {
            crate::special::norm_cdf_diff(c, -c) - 2.0 * c * crate::special::norm_pdf(c)
        }
        Family::StudentT { .. } => {
            2.0 * quad::integrate(&|x| x * x * family.density(x), 0.0, c, 1e-13)
        }
        Family::SymmetricPareto { alpha } => {
            let x0 = family.support_lower();
            if c <= x0 {
                0.0
            } else if alpha == 2.0 {
                // x0 = 1 here
                2.0 * fmath::ln(c)
            } else {
                alpha * fmath::powf(x0, alpha) * (fmath::powf(c, 2.0 - alpha) - fmath::powf(x0, 2.0 - alpha))
                    / (2.0 - alpha)
            }
        }
        Family::Rademacher => {
            if c >= 1.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// P(|X_j| <= t) for coordinate j of an identity-covariance law.
fn coord_abs_cdf(spec: &DistributionSpec, j: usize, t: f64) -> f64 {
    spec.family.abs_cdf(t / spec.sigma(j))
}

/// CDF of the row sup norm M = max_j |X_j| under identity covariance.
fn sup_cdf(spec: &DistributionSpec, t: f64) -> f64 {
    let mut p = 1.0;
    for j in 0..spec.d {
        p *= coord_abs_cdf(spec, j, t);
        if p == 0.0 {
            break;
        }
    }
    p
}

/// E[M^2 1{M <= tau}] by parts: tau^2 F(tau) - 2 int_0^tau m F(m) dm.
fn sup_truncated_sq(spec: &DistributionSpec, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let head = tau * tau * sup_cdf(spec, tau);
    let tail = 2.0 * quad::integrate(&|m| m * sup_cdf(spec, m), 0.0, tau, 1e-13);
    (head - tail).max(0.0)
}

/// Analytic psi for one coordinate: E[X_j^2 1{X_j^2 <= b n}].
fn law_coord_psi(spec: &DistributionSpec, j: usize, b: f64, n: f64) -> f64 {
    let s = spec.sigma(j);
    let c = fmath::sqrt(b * n) / s;
    s * s * std_truncated_sq(spec.family, c)
}

/// Evaluate psi(b) over the requested source.
///
/// `n` is the count in the defining indicator 1{X^2 <= b n}; for an
/// empirical source the mean still runs over all rows, so a pilot sample
/// can solve levels for a smaller target n.
pub fn truncated_second_moment(source: Source, j: usize, b: f64, n: usize) -> Result<f64, CoreError> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(CoreError::invalid(format!("truncation level must be finite and >= 0, got {b}")));
    }
    if n == 0 {
        return Err(CoreError::invalid("count in the truncation indicator must be >= 1"));
    }
    if j >= source.d() {
        return Err(CoreError::DimensionMismatch {
            what: String::from("coordinate index"),
            expected: source.d(),
            got: j,
        });
    }
    match source {
        Source::Sample(sample) => {
            Ok(EmpiricalPsi::new(column_squares(sample, j)).psi(b, n as f64))
        }
        Source::Law(spec) => {
            require_identity(spec)?;
            Ok(law_coord_psi(spec, j, b, n as f64))
        }
    }
}

// ---------------------------------------------------------------------------
// fixed-point solvers

/// Iterate b <- psi(b) downward from `start` (an upper bound for every
/// fixed point) until the decrement stalls; verify the residual.
fn descend<F: Fn(f64) -> f64>(psi: F, start: f64, context: &str) -> Result<f64, CoreError> {
    let scale = start.max(1e-300);
    let mut b = psi(start);
    if !(b > 0.0) {
        return Err(CoreError::NonConvergence {
            context: format!("{context}: no positive fixed point below {start:e}"),
        });
    }
    let mut converged = false;
    for _ in 0..10_000 {
        let next = psi(b);
        let tol = 1e-12 * b.max(1e-9);
        if next > b + tol {
            return Err(CoreError::NonConvergence {
                context: format!("{context}: iteration increased from {b:e} to {next:e}"),
            });
        }
        if b - next <= tol {
            b = next.min(b);
            converged = true;
            break;
        }
        b = next;
    }
    let residual = fmath::abs(psi(b) - b);
    if !converged || residual > 1e-10 * b.max(scale) {
        return Err(CoreError::NonConvergence {
            context: format!("{context}: residual {residual:e} at b = {b:e}"),
        });
    }
    Ok(b)
}

/// Find an upper bound for every fixed point of psi when no finite second
/// moment provides one. Doubles until psi(cap) <= cap and the secant slope
/// over [cap, 2cap] is below 1. The map b -> psi(b) is concave for
/// b >= 1/n for every supported family (x f(x) peaks at or before the
/// standardized point x = 1), so from `lo` >= 1 onward a sub-unit secant
/// slope certifies psi stays below the identity ever after. A sparse scan
/// further out guards the multi-scale sup-norm case.
fn doubling_cap<F: Fn(f64) -> f64>(psi: &F, lo: f64, context: &str) -> Result<f64, CoreError> {
    let mut cap = lo.max(1.0);
    for _ in 0..1100 {
        if psi(cap) <= cap && psi(2.0 * cap) - psi(cap) < cap {
            for factor in [4.0, 64.0, 4096.0] {
                let t = cap * factor;
                if psi(t) > t {
                    return Err(CoreError::NonConvergence {
                        context: format!("{context}: fixed-point bound unstable near {t:e}"),
                    });
                }
            }
            return Ok(cap);
        }
        cap *= 2.0;
        if !cap.is_finite() {
            break;
        }
    }
    Err(CoreError::NonConvergence {
        context: format!("{context}: could not bracket the largest fixed point"),
    })
}

fn solve_empirical(squares: Vec<f64>, n: f64, context: &str) -> Result<f64, CoreError> {
    let psi = EmpiricalPsi::new(squares);
    let m = psi.sorted.len();
    let b_max = psi.second_moment();
    if !(b_max > 0.0) {
        return Err(CoreError::NonConvergence {
            context: format!("{context}: zero empirical second moment"),
        });
    }
    let mut b = psi.psi(b_max, n);
    if !(b > 0.0) {
        return Err(CoreError::NonConvergence {
            context: format!("{context}: no positive fixed point"),
        });
    }
    // Values live in the finite set of prefix means, the map is exactly
    // monotone on it, and the iterates strictly decrease until fixed, so
    // equality is reached within m + 2 steps.
    for _ in 0..m + 2 {
        let next = psi.psi(b, n);
        debug_assert!(next <= b);
        if next == b {
            return Ok(b);
        }
        b = next;
    }
    Err(CoreError::NonConvergence {
        context: format!("{context}: empirical iteration failed to settle"),
    })
}

fn solve_law_coord(spec: &DistributionSpec, j: usize, n: f64) -> Result<f64, CoreError> {
    let s = spec.sigma(j);
    let context = format!("analytic level, coordinate {j}");
    // Work on the standardized scale u = b / s^2 so the solve is exactly
    // scale equivariant.
    let psi_std = |u: f64| std_truncated_sq(spec.family, fmath::sqrt(u * n));
    let start = match spec.family.variance() {
        Some(v) => v,
        None => doubling_cap(&psi_std, 1.0, &context)?,
    };
    let u = descend(psi_std, start, &context)?;
    Ok(u * s * s)
}

fn solve_law_global(spec: &DistributionSpec, n: f64) -> Result<f64, CoreError> {
    let context = "analytic level, sup norm";
    let psi = |b: f64| sup_truncated_sq(spec, fmath::sqrt(b * n));
    let start = match spec.family.variance() {
        Some(v) => {
            // E M^2 <= sum_j E X_j^2 bounds every fixed point.
            (0..spec.d).map(|j| v * spec.sigma(j) * spec.sigma(j)).sum()
        }
        None => {
            let lo = (0..spec.d).map(|j| spec.sigma(j) * spec.sigma(j)).fold(1.0f64, f64::max);
            doubling_cap(&psi, lo, context)?
        }
    };
    descend(psi, start, context)
}

/// Solve the level equation: the largest b with psi(b) = b, reported as
/// a = sqrt(b) per coordinate (or once, for the sup norm, in global mode).
pub fn solve_levels(source: Source, n: usize, mode: TruncationMode) -> Result<TruncationLevels, CoreError> {
    if n == 0 {
        return Err(CoreError::invalid("sample size in the level equation must be >= 1"));
    }
    let nf = n as f64;
    let levels = match (source, mode) {
        (Source::Sample(sample), TruncationMode::PerCoordinate) => {
            let mut levels = Vec::with_capacity(sample.d());
            for j in 0..sample.d() {
                let squares = column_squares(sample, j);
                if squares.iter().all(|q| *q == 0.0) {
                    return Err(CoreError::DegenerateColumn { index: j });
                }
                let b = solve_empirical(squares, nf, &format!("empirical level, coordinate {j}"))?;
                levels.push(fmath::sqrt(b));
            }
            levels
        }
        (Source::Sample(sample), TruncationMode::Global) => {
            let squares = sup_norm_squares(sample);
            if squares.iter().all(|q| *q == 0.0) {
                return Err(CoreError::AllDegenerate);
            }
            let b = solve_empirical(squares, nf, "empirical level, sup norm")?;
            alloc::vec![fmath::sqrt(b)]
        }
        (Source::Law(spec), TruncationMode::PerCoordinate) => {
            require_identity(spec)?;
            let mut levels = Vec::with_capacity(spec.d);
            for j in 0..spec.d {
                levels.push(fmath::sqrt(solve_law_coord(spec, j, nf)?));
            }
            levels
        }
        (Source::Law(spec), TruncationMode::Global) => {
            require_identity(spec)?;
            alloc::vec![fmath::sqrt(solve_law_global(spec, nf)?)]
        }
    };
    if let Some(bad) = levels.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(CoreError::NonConvergence {
            context: format!("level solved to non-positive value {bad}"),
        });
    }
    Ok(TruncationLevels { mode, levels, n })
}

// ---------------------------------------------------------------------------
// truncated vectors and moments

/// Build Y from X: Y_ij = X_ij / (a_j sqrt(n)) where the indicator keeps
/// the entry, 0 where it kills it. Per-coordinate mode tests each entry
/// X_ij^2 <= a_j^2 n; global mode keeps or kills whole rows by the sup
/// norm. Surviving entries satisfy |Y_ij| <= 1 (clamped at the boundary
/// where rounding in a_j sqrt(n) could overshoot by an ulp).
pub fn truncate(sample: &SampleMatrix, levels: &TruncationLevels) -> Result<TruncatedSample, CoreError> {
    levels.check_dim(sample.d())?;
    let (n_rows, d) = (sample.n(), sample.d());
    let nf = levels.n as f64;
    let sqrt_n = fmath::sqrt(nf);
    let mut y = alloc::vec![0.0; n_rows * d];
    let mut flags = alloc::vec![false; n_rows * d];
    match levels.mode {
        TruncationMode::PerCoordinate => {
            for j in 0..d {
                let a = levels.level(j);
                let cut = a * a * nf;
                let denom = a * sqrt_n;
                for i in 0..n_rows {
                    let x = sample.get(i, j);
                    if x * x <= cut {
                        y[i * d + j] = (x / denom).clamp(-1.0, 1.0);
                    } else {
                        flags[i * d + j] = true;
                    }
                }
            }
        }
        TruncationMode::Global => {
            let a = levels.level(0);
            let cut = a * a * nf;
            let denom = a * sqrt_n;
            for i in 0..n_rows {
                let row = sample.row(i);
                let sup = row.iter().fold(0.0f64, |m, v| m.max(fmath::abs(*v)));
                if sup * sup <= cut {
                    for (j, x) in row.iter().enumerate() {
                        y[i * d + j] = (x / denom).clamp(-1.0, 1.0);
                    }
                } else {
                    flags[i * d..(i + 1) * d].fill(true);
                }
            }
        }
    }
    Ok(TruncatedSample {
        y: SampleMatrix::from_rows(n_rows, d, y)?,
        truncated_flags: flags,
        levels: levels.clone(),
    })
}

fn empirical_report(sample: &SampleMatrix, levels: &TruncationLevels) -> Result<TruncatedMomentReport, CoreError> {
    let truncated = truncate(sample, levels)?;
    let (m, d) = (sample.n(), sample.d());
    let mf = m as f64;
    let nf = levels.n as f64;

    let mut mu1_max = 0.0f64;
    let mut truncated_sq = Vec::with_capacity(d);
    let mut tail_sq_max = 0.0f64;
    for j in 0..d {
        let (mut sum_y, mut sum_y2, mut tail) = (0.0, 0.0, 0.0);
        let a = levels.level(j);
        let cut = a * a * nf;
        for i in 0..m {
            let yv = truncated.y.get(i, j);
            sum_y += yv;
            sum_y2 += yv * yv;
            let x = sample.get(i, j);
            if x * x > cut {
                tail += (x / a) * (x / a);
            }
        }
        mu1_max = mu1_max.max(fmath::abs(sum_y / mf));
        truncated_sq.push(sum_y2 / mf);
        tail_sq_max = tail_sq_max.max(tail / mf);
    }
    let mu1 = nf * mu1_max;

    let mut sum_max3 = 0.0;
    let mut exceed_rows = 0usize;
    for i in 0..m {
        let ymax = truncated.y.row(i).iter().fold(0.0f64, |acc, v| acc.max(fmath::abs(*v)));
        sum_max3 += ymax * ymax * ymax;
        // In both modes an exceedance max_j X_j^2/a_j^2 > n is exactly a
        // flagged entry in the row.
        if truncated.row_flagged(i) {
            exceed_rows += 1;
        }
    }
    let mu3 = nf * sum_max3 / mf;
    let tail_prob = nf * exceed_rows as f64 / mf;
    let r_n = tail_sq_max + mu1 * mu1;

    let doa_ratio = match levels.mode {
        TruncationMode::PerCoordinate => None,
        TruncationMode::Global => {
            let a = levels.level(0);
            let tau_sq = a * a * nf;
            let (mut above, mut kept) = (0usize, 0.0f64);
            for i in 0..m {
                let sup = sample.row(i).iter().fold(0.0f64, |acc, v| acc.max(fmath::abs(*v)));
                if sup * sup > tau_sq {
                    above += 1;
                } else {
                    kept += sup * sup;
                }
            }
            let num = tau_sq * above as f64 / mf;
            let den = kept / mf;
            Some(if den > 0.0 { num / den } else { f64::INFINITY })
        }
    };

    Ok(TruncatedMomentReport { mu1, mu3, tail_prob, r_n, truncated_sq, doa_ratio })
}

fn law_report(spec: &DistributionSpec, levels: &TruncationLevels) -> Result<TruncatedMomentReport, CoreError> {
    require_identity(spec)?;
    levels.check_dim(spec.d)?;
    let d = spec.d;
    let nf = levels.n as f64;
    let sqrt_n = fmath::sqrt(nf);

    // All supported families are symmetric and the truncation sets are
    // symmetric, so E Y = 0 exactly.
    let mu1 = 0.0;

    // Standardized cutoffs c_j = a_j sqrt(n) / s_j.
    let cuts: Vec<f64> = (0..d).map(|j| levels.level(j) * sqrt_n / spec.sigma(j)).collect();

    let mut keep_all = 1.0f64;
    for c in &cuts {
        keep_all *= spec.family.abs_cdf(*c);
    }
    let tail_prob = nf * (1.0 - keep_all);

    let mu3 = match levels.mode {
        TruncationMode::PerCoordinate => {
            // P(|Y_j| <= m) = 1 - (A(c_j) - A(m c_j)); coordinates independent.
            let integrand = |m: f64| {
                let mut prod = 1.0;
                for c in &cuts {
                    prod *= 1.0 - (spec.family.abs_cdf(*c) - spec.family.abs_cdf(m * *c));
                }
                3.0 * m * m * (1.0 - prod)
            };
            nf * quad::integrate(&integrand, 0.0, 1.0, 1e-12)
        }
        TruncationMode::Global => {
            let tau = levels.level(0) * sqrt_n;
            let f_tau = sup_cdf(spec, tau);
            let integrand = |m: f64| 3.0 * m * m * (f_tau - sup_cdf(spec, m * tau));
            nf * quad::integrate(&integrand, 0.0, 1.0, 1e-12)
        }
    };

    let mut tail_sq_max = 0.0f64;
    for j in 0..d {
        let a = levels.level(j);
        let s = spec.sigma(j);
        let tail = match spec.family.variance() {
            Some(v) => {
                let sigma_sq = v * s * s;
                ((sigma_sq - law_coord_psi(spec, j, a * a, nf)) / (a * a)).max(0.0)
            }
            None => f64::INFINITY,
        };
        tail_sq_max = tail_sq_max.max(tail);
    }
    let r_n = tail_sq_max + mu1 * mu1;

    let truncated_sq: Vec<f64> = match levels.mode {
        TruncationMode::PerCoordinate => (0..d)
            .map(|j| {
                let a = levels.level(j);
                law_coord_psi(spec, j, a * a, nf) / (a * a * nf)
            })
            .collect(),
        TruncationMode::Global => {
            let a = levels.level(0);
            (0..d)
                .map(|j| {
                    let mut keep_others = 1.0;
                    for (k, c) in cuts.iter().enumerate() {
                        if k != j {
                            keep_others *= spec.family.abs_cdf(*c);
                        }
                    }
                    law_coord_psi(spec, j, a * a, nf) * keep_others / (a * a * nf)
                })
                .collect()
        }
    };

    let doa_ratio = match levels.mode {
        TruncationMode::PerCoordinate => None,
        TruncationMode::Global => {
            let tau = levels.level(0) * sqrt_n;
            let num = tau * tau * (1.0 - sup_cdf(spec, tau));
            let den = sup_truncated_sq(spec, tau);
            Some(if den > 0.0 { num / den } else { f64::INFINITY })
        }
    };

    Ok(TruncatedMomentReport { mu1, mu3, tail_prob, r_n, truncated_sq, doa_ratio })
}

/// Moment summary of the truncated law. Expectations come from the same
/// kind of source the levels were solved on; mixing sources is allowed for
/// oracle studies but the plug-in identities only hold source-matched.
pub fn moment_report(source: Source, levels: &TruncationLevels) -> Result<TruncatedMomentReport, CoreError> {
    match source {
        Source::Sample(sample) => empirical_report(sample, levels),
        Source::Law(spec) => law_report(spec, levels),
    }
}
