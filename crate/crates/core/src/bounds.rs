//! Closed-form bound evaluators. Every universal constant is taken as 1
//! (the "structural C=1" convention recorded in each report): the values
//! certify rates and structure, not absolute dominance. Throughout,
//! L = log(ed) = 1 + ln d.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::CoreError;

/// The convention string stamped into every report.
pub const CONVENTION: &str = "structural C=1";

fn log_ed(d: f64) -> f64 {
    1.0 + fmath::ln(d)
}

fn check_dim(d: f64) -> Result<f64, CoreError> {
    if !(d >= 1.0) || !d.is_finite() {
        return Err(CoreError::invalid(format!("dimension must be >= 1, got {d}")));
    }
    Ok(log_ed(d))
}

fn check_nonneg(value: f64, what: &str) -> Result<(), CoreError> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(CoreError::invalid(format!("{what} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

/// The closed-form smoothing bandwidth minimizing the phi trade-off,
/// assembled termwise:
/// L^{1/4}(mu3^{1/2} + mu1^{1/2}) + L^{2/3} mu3^{1/3} + mu1^{2/3}
///   + L^{1/8} mu3^{1/4} + L^{1/5} mu3^{2/5}.
pub fn epsilon_star(mu1: f64, mu3: f64, d: f64) -> Result<f64, CoreError> {
    let l = check_dim(d)?;
    check_nonneg(mu1, "mu1")?;
    check_nonneg(mu3, "mu3")?;
    if mu1 == 0.0 && mu3 == 0.0 {
        return Err(CoreError::invalid("epsilon_star needs mu1 or mu3 positive"));
    }
    Ok(fmath::powf(l, 0.25) * (fmath::sqrt(mu3) + fmath::sqrt(mu1))
        + fmath::powf(l, 2.0 / 3.0) * fmath::powf(mu3, 1.0 / 3.0)
        + fmath::powf(mu1, 2.0 / 3.0)
        + fmath::powf(l, 0.125) * fmath::powf(mu3, 0.25)
        + fmath::powf(l, 0.2) * fmath::powf(mu3, 0.4))
}

/// The smoothing trade-off
/// phi(eps) = eps^{-1}(L^{3/2} mu3 + L^{1/2} mu1)
///          + eps^{-2}(L^3 mu3 + L mu1^2)
///          + eps^{-3} L^{3/2} mu3 + eps^{-4} L^2 mu3^2 + eps L.
pub fn phi(eps: f64, mu1: f64, mu3: f64, d: f64) -> Result<f64, CoreError> {
    let l = check_dim(d)?;
    check_nonneg(mu1, "mu1")?;
    check_nonneg(mu3, "mu3")?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CoreError::invalid(format!("bandwidth must be positive, got {eps}")));
    }
    let l_sqrt = fmath::sqrt(l);
    Ok((l * l_sqrt * mu3 + l_sqrt * mu1) / eps
        + (l * l * l * mu3 + l * mu1 * mu1) / (eps * eps)
        + l * l_sqrt * mu3 / (eps * eps * eps)
        + l * l * mu3 * mu3 / (eps * eps * eps * eps)
        + eps * l)
}

/// Corollary-style moment bound L^{5/4} n^{-delta/8} nu^{1/4}, capped at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryBound {
    pub value: f64,
    /// True when nu_2delta < 1, which Jensen's inequality forbids for a
    /// genuine standardized moment; reported, never fatal.
    pub jensen_violated: bool,
}

pub fn corollary_bound(nu_2delta: f64, delta: f64, n: f64, d: f64) -> Result<CorollaryBound, CoreError> {
    let l = check_dim(d)?;
    check_nonneg(nu_2delta, "nu_2delta")?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CoreError::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(n >= 1.0) || !n.is_finite() {
        return Err(CoreError::invalid(format!("sample size must be >= 1, got {n}")));
    }
    let value = fmath::powf(l, 1.25) * fmath::powf(n, -delta / 8.0) * fmath::powf(nu_2delta, 0.25);
    Ok(CorollaryBound { value: value.min(1.0), jensen_violated: nu_2delta < 1.0 })
}

/// Gaussian comparison bounds from a covariance discrepancy varpi:
/// (L sqrt(varpi), lambda_min^{-1} L varpi max(log(1/varpi), 1)).
/// Both are 0 at varpi = 0 by convention.
pub fn gaussian_comparison_bound(varpi: f64, d: f64, lambda_min: f64) -> Result<(f64, f64), CoreError> {
    let l = check_dim(d)?;
    check_nonneg(varpi, "varpi")?;
    if varpi == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(lambda_min > 0.0) {
        return Err(CoreError::invalid(format!(
            "refined comparison bound needs lambda_min > 0, got {lambda_min}"
        )));
    }
    let sqrt_variant = l * fmath::sqrt(varpi);
    let refined = l * varpi * fmath::ln(1.0 / varpi).max(1.0) / lambda_min;
    Ok((sqrt_variant, refined))
}

/// Bounded-increment maximal bound with its internal bandwidth choice.
/// Note this family of expressions is written in log(d), not log(ed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropB1Bound {
    /// (B^4 log^5(d)/n)^{1/4} + D log^{3/2}(d)/n^{1/2 - 1/q}, capped at 1.
    pub value: f64,
    /// The diagnostic bandwidth: 1/phi = B log^{3/4}(d)/n^{1/4}
    ///                                  + D log(d)/n^{1/2 - 1/q}.
    pub phi_inverse: f64,
}

pub fn prop_b1_bound(b_n: f64, d_n: f64, q: f64, n: f64, d: f64) -> Result<PropB1Bound, CoreError> {
    if !(b_n >= 1.0 && b_n.is_finite()) {
        return Err(CoreError::invalid(format!("envelope B must be >= 1, got {b_n}")));
    }
    if !(d_n >= 1.0 && d_n.is_finite()) {
        return Err(CoreError::invalid(format!("envelope D must be >= 1, got {d_n}")));
    }
    if !(q > 2.0) {
        return Err(CoreError::invalid(format!("moment order q must exceed 2, got {q}")));
    }
    if !(n >= 1.0 && n.is_finite()) || !(d >= 1.0 && d.is_finite()) {
        return Err(CoreError::invalid("n and d must be finite and >= 1"));
    }
    let ld = fmath::ln(d).max(0.0);
    let first = fmath::powf(b_n * b_n * b_n * b_n * fmath::powf(ld, 5.0) / n, 0.25);
    let second = d_n * fmath::powf(ld, 1.5) / fmath::powf(n, 0.5 - 1.0 / q);
    let phi_inverse = b_n * fmath::powf(ld, 0.75) / fmath::powf(n, 0.25)
        + d_n * ld / fmath::powf(n, 0.5 - 1.0 / q);
    Ok(PropB1Bound { value: (first + second).min(1.0), phi_inverse })
}

/// Right-hand sides of the event and moment lemmas, exposed so a harness
/// can report empirical-LHS/RHS ratios. `lemma7_rhs` carries, in order,
/// the second-moment bounds for the linear, quadratic, and cubic column
/// sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRhs {
    pub lemma2_rhs: f64,
    pub lemma3_rhs: f64,
    pub lemma6_rhs: f64,
    pub lemma7_rhs: [f64; 3],
}

pub fn lemma_rhs_diagnostics(
    mu1: f64,
    mu3: f64,
    tail_prob: f64,
    n: f64,
    d: f64,
) -> Result<LemmaRhs, CoreError> {
    let l = check_dim(d)?;
    check_nonneg(mu1, "mu1")?;
    check_nonneg(mu3, "mu3")?;
    check_nonneg(tail_prob, "tail_prob")?;
    if !(n >= 1.0) {
        return Err(CoreError::invalid(format!("sample size must be >= 1, got {n}")));
    }
    Ok(LemmaRhs {
        lemma2_rhs: tail_prob,
        lemma3_rhs: l * mu3,
        lemma6_rhs: l * l * mu3 + mu1 * mu1,
        lemma7_rhs: [
            l + fmath::powf(l * l * mu3, 2.0 / 3.0) + fmath::sqrt(l * mu3) + mu1 * mu1,
            l * mu3 + fmath::powf(fmath::sqrt(l) * mu3, 4.0 / 3.0),
            l * mu3 + mu1 * mu1,
        ],
    })
}

/// Everything the assembled report needs. Moment fields mirror
/// `TruncatedMomentReport`; the remaining fields parameterize the
/// corollary, comparison, and bounded-increment expressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: u64,
    pub d: u64,
    pub mu1: f64,
    pub mu3: f64,
    pub tail_prob: f64,
    pub r_n: f64,
    /// Moment order in (0, 1].
    pub delta: f64,
    /// E max_j |X_j / sigma_j|^{2+delta}.
    pub nu_2delta: f64,
    /// Covariance discrepancy feeding the comparison bounds.
    pub varpi: f64,
    /// Smallest eigenvalue of the reference covariance.
    pub lambda_min: f64,
    pub b_n: f64,
    pub d_n: f64,
    pub q: f64,
    /// Existence constants of the bounded-increment statement; validated,
    /// not consumed by any evaluated expression.
    pub b1: f64,
    pub b2: f64,
}

impl BoundInputs {
    /// Neutral parameterization: delta = 1, unit envelopes, q = 3, no
    /// comparison discrepancy.
    pub fn new(n: u64, d: u64, mu1: f64, mu3: f64, tail_prob: f64, r_n: f64) -> Self {
        BoundInputs {
            n,
            d,
            mu1,
            mu3,
            tail_prob,
            r_n,
            delta: 1.0,
            nu_2delta: 1.0,
            varpi: 0.0,
            lambda_min: 1.0,
            b_n: 1.0,
            d_n: 1.0,
            q: 3.0,
            b1: 1.0,
            b2: 1.0,
        }
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.n == 0 || self.d == 0 {
            return Err(CoreError::invalid("n and d must be at least 1"));
        }
        check_nonneg(self.mu1, "mu1")?;
        check_nonneg(self.mu3, "mu3")?;
        check_nonneg(self.tail_prob, "tail_prob")?;
        if !(self.r_n >= 0.0) {
            return Err(CoreError::invalid(format!("r_n must be >= 0, got {}", self.r_n)));
        }
        check_nonneg(self.varpi, "varpi")?;
        if !(self.b1 > 0.0 && self.b2 > 0.0) {
            return Err(CoreError::invalid("b1 and b2 must be positive"));
        }
        Ok(())
    }
}

/// The assembled bound report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub eps_star: f64,
    pub phi_at_eps_star: f64,
    /// h_j(eps*) = eps*^{-j} L^{j/2} for j = 1..4; informational.
    pub h: [f64; 4],
    pub term_tail: f64,
    pub term_mu1: f64,
    pub term_mu3: f64,
    /// (sqrt variant, refined variant) of the comparison bound.
    pub term_comparison: (f64, f64),
    pub total_theorem1: f64,
    #[serde(rename = "total_theorem1_X")]
    pub total_theorem1_x: f64,
    pub corollary_value: f64,
    #[serde(rename = "propB1_value")]
    pub prop_b1_value: f64,
    pub convention: String,
}

/// Assemble the full report:
/// total = min(1, tail + (mu1 L^{5/2})^{1/2} + (mu3 L^5)^{1/4}), and the
/// X-statistic variant adds L (r_n - mu1^2)^{1/2} before capping. When
/// both moments vanish the smoothing is unused and eps_star, phi, and h
/// report 0.
pub fn theorem1_bound(inputs: &BoundInputs) -> Result<BoundReport, CoreError> {
    inputs.validate()?;
    let d = inputs.d as f64;
    let n = inputs.n as f64;
    let l = log_ed(d);

    let (eps_star_v, phi_v, h) = if inputs.mu1 == 0.0 && inputs.mu3 == 0.0 {
        (0.0, 0.0, [0.0; 4])
    } else {
        let e = epsilon_star(inputs.mu1, inputs.mu3, d)?;
        let p = phi(e, inputs.mu1, inputs.mu3, d)?;
        let mut h = [0.0; 4];
        for (j, slot) in h.iter_mut().enumerate() {
            let jf = (j + 1) as f64;
            *slot = fmath::powf(e, -jf) * fmath::powf(l, jf / 2.0);
        }
        (e, p, h)
    };

    let term_tail = inputs.tail_prob;
    let term_mu1 = fmath::sqrt(inputs.mu1 * fmath::powf(l, 2.5));
    let term_mu3 = fmath::powf(inputs.mu3 * fmath::powf(l, 5.0), 0.25);
    let total_theorem1 = (term_tail + term_mu1 + term_mu3).min(1.0);

    let tail_second_moment = (inputs.r_n - inputs.mu1 * inputs.mu1).max(0.0);
    let x_extra = l * fmath::sqrt(tail_second_moment);
    let total_theorem1_x = (term_tail + term_mu1 + term_mu3 + x_extra).min(1.0);

    let corollary = corollary_bound(inputs.nu_2delta, inputs.delta, n, d)?;
    let term_comparison = gaussian_comparison_bound(inputs.varpi, d, inputs.lambda_min)?;
    let prop = prop_b1_bound(inputs.b_n, inputs.d_n, inputs.q, n, d)?;

    Ok(BoundReport {
        eps_star: eps_star_v,
        phi_at_eps_star: phi_v,
        h,
        term_tail,
        term_mu1,
        term_mu3,
        term_comparison,
        total_theorem1,
        total_theorem1_x,
        corollary_value: corollary.value,
        prop_b1_value: prop.value,
        convention: String::from(CONVENTION),
    })
}

/// A compact vector of the report's headline values, in a stable order,
/// for tabular output.
pub fn report_headline(report: &BoundReport) -> Vec<(&'static str, f64)> {
    alloc::vec![
        ("total_theorem1", report.total_theorem1),
        ("total_theorem1_X", report.total_theorem1_x),
        ("term_tail", report.term_tail),
        ("term_mu1", report.term_mu1),
        ("term_mu3", report.term_mu3),
        ("corollary_value", report.corollary_value),
        ("propB1_value", report.prop_b1_value),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_star_hand_values() {
        // mu1=0, mu3=1, d=1: 1 + 1 + 0 + 1 + 1 = 4
        assert!((epsilon_star(0.0, 1.0, 1.0).unwrap() - 4.0).abs() < 1e-14);
        // mu1=1, mu3=0, d=1: 1 + 0 + 1 + 0 + 0 = 2
        assert!((epsilon_star(1.0, 0.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(epsilon_star(0.0, 0.0, 4.0).is_err());
    }

    #[test]
    fn phi_hand_values() {
        // mu1=mu3=0: phi = eps L
        assert!((phi(0.7, 0.0, 0.0, 1.0).unwrap() - 0.7).abs() < 1e-15);
        // d=1, mu3=1, mu1=0, eps=1: 1+1+1+1+1 = 5
        assert!((phi(1.0, 0.0, 1.0, 1.0).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn phi_at_eps_star_inequality_spot_checks() {
        let cases = [
            (1.0, 1.0, 1.0),
            (1e-12, 1e-12, 1.0),
            (1e-12, 1.0, 1e6),
            (1.0, 1e-12, 1e6),
            (0.37, 0.002, 1000.0),
        ];
        for (mu1, mu3, d) in cases {
            let l = 1.0 + (d as f64).ln();
            let e = epsilon_star(mu1, mu3, d).unwrap();
            let p = phi(e, mu1, mu3, d).unwrap();
            assert!(p <= 4.0 * e * l * (1.0 + 1e-12), "({mu1},{mu3},{d}): {p} vs {}", 4.0 * e * l);
        }
    }

    #[test]
    fn theorem1_assembly() {
        // all zeros -> 0
        let z = theorem1_bound(&BoundInputs::new(10, 3, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(z.total_theorem1, 0.0);
        assert_eq!(z.eps_star, 0.0);
        assert_eq!(z.convention, "structural C=1");

        // rademacher-style: n=100, d=1, mu3 = 1/sqrt(100) = 0.1
        let r = theorem1_bound(&BoundInputs::new(100, 1, 0.0, 0.1, 0.0, 0.0)).unwrap();
        assert!((r.total_theorem1 - 0.1f64.powf(0.25)).abs() < 1e-12, "{}", r.total_theorem1);
        assert!((r.total_theorem1 - 0.5623).abs() < 1e-4);

        // X-variant adds the tail second-moment term
        let mut inputs = BoundInputs::new(50, 4, 0.01, 0.02, 0.05, 0.3);
        let rep = theorem1_bound(&inputs).unwrap();
        let l = 1.0 + 4.0f64.ln();
        let expected_extra = l * (0.3 - 0.0001f64).sqrt();
        assert!(
            (rep.total_theorem1_x
                - (rep.term_tail + rep.term_mu1 + rep.term_mu3 + expected_extra).min(1.0))
            .abs()
                < 1e-12
        );
        assert!(rep.total_theorem1_x >= rep.total_theorem1);
        // capping
        inputs.tail_prob = 5.0;
        let capped = theorem1_bound(&inputs).unwrap();
        assert_eq!(capped.total_theorem1, 1.0);
        assert_eq!(capped.term_tail, 5.0); // raw term uncapped
    }

    #[test]
    fn theorem1_monotone_in_moments() {
        let base = BoundInputs::new(200, 16, 0.01, 0.005, 0.02, 0.1);
        let b0 = theorem1_bound(&base).unwrap();
        for bump in 0..4 {
            let mut nudged = base.clone();
            match bump {
                0 => nudged.mu1 *= 1.5,
                1 => nudged.mu3 *= 1.5,
                2 => nudged.tail_prob *= 1.5,
                _ => nudged.r_n *= 1.5,
            }
            let b1 = theorem1_bound(&nudged).unwrap();
            assert!(b1.total_theorem1 + 1e-15 >= b0.total_theorem1);
            assert!(b1.total_theorem1_x + 1e-15 >= b0.total_theorem1_x);
        }
    }

    #[test]
    fn corollary_values_and_scaling() {
        let c = corollary_bound(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.value, 1.0);
        assert!(!c.jensen_violated);
        // n below the cap region: value = L^{5/4} n^{-1/8} nu^{1/4},
        // so multiplying n by 256 halves it
        let a = corollary_bound(2.0, 1.0, 1e7, 10.0).unwrap();
        let b = corollary_bound(2.0, 1.0, 256.0 * 1e7, 10.0).unwrap();
        assert!(a.value < 1.0);
        assert!((b.value / a.value - 0.5).abs() < 1e-12);
        assert!(corollary_bound(0.5, 1.0, 10.0, 4.0).unwrap().jensen_violated);
        assert!(corollary_bound(1.0, 1.5, 10.0, 4.0).is_err());
    }

    #[test]
    fn comparison_bound_values() {
        assert_eq!(gaussian_comparison_bound(0.0, 100.0, 1e-9).unwrap(), (0.0, 0.0));
        let e = core::f64::consts::E;
        let (s, r) = gaussian_comparison_bound(1.0 / e, 1.0, 1.0).unwrap();
        assert!((s - (-0.5f64).exp()).abs() < 1e-14);
        assert!((r - 1.0 / e).abs() < 1e-14);
        // refined beats sqrt for tiny discrepancies
        let (s2, r2) = gaussian_comparison_bound(1e-6, 100.0, 0.5).unwrap();
        assert!(r2 < s2);
        assert!(gaussian_comparison_bound(0.5, 4.0, 0.0).is_err());
    }

    #[test]
    fn prop_b1_values() {
        let e = core::f64::consts::E;
        let p = prop_b1_bound(1.0, 1.0, 3.0, 1.0, e).unwrap();
        assert_eq!(p.value, 1.0); // 1 + 1 capped
        // uncapped region: both terms shrink as n grows
        let ld: f64 = 50.0f64.ln();
        let a = prop_b1_bound(1.0, 1.0, 4.0, 1e8, 50.0).unwrap();
        let b = prop_b1_bound(1.0, 1.0, 4.0, 16.0 * 1e8, 50.0).unwrap();
        assert!(a.value < 1.0);
        let expected_a = (ld.powf(5.0) / 1e8).powf(0.25) + ld.powf(1.5) / 1e8f64.powf(0.25);
        assert!((a.value - expected_a).abs() < 1e-14);
        // the quartic term halves when n is multiplied by 16
        let f1 = (ld.powf(5.0) / 1e8).powf(0.25);
        let f2 = (ld.powf(5.0) / 16e8).powf(0.25);
        assert!((f2 / f1 - 0.5).abs() < 1e-12);
        assert!(b.value < a.value);
        // q -> infinity second-term exponent approaches 1/2
        let big_q = prop_b1_bound(1.0, 1.0, 1e6, 10_000.0, 50.0).unwrap();
        let limit = 1.0 * ld.powf(1.5) / 10_000.0f64.powf(0.5);
        let second = big_q.value - (ld.powf(5.0) / 10_000.0).powf(0.25);
        assert!((second - limit).abs() <= 1e-3 * limit, "{second} vs {limit}");
        assert!(prop_b1_bound(0.5, 1.0, 3.0, 10.0, 4.0).is_err());
        assert!(prop_b1_bound(1.0, 1.0, 2.0, 10.0, 4.0).is_err());
    }

    #[test]
    fn lemma_rhs_values() {
        let z = lemma_rhs_diagnostics(0.0, 0.0, 0.0, 5.0, 3.0).unwrap();
        assert_eq!(z.lemma3_rhs, 0.0);
        assert_eq!(z.lemma6_rhs, 0.0);
        assert_eq!(z.lemma7_rhs[1], 0.0);
        let v = lemma_rhs_diagnostics(0.0, 1.0, 0.25, 1.0, 1.0).unwrap();
        assert_eq!(v.lemma2_rhs, 0.25);
        assert_eq!(v.lemma3_rhs, 1.0);
        assert_eq!(v.lemma6_rhs, 1.0);
        assert_eq!(v.lemma7_rhs, [1.0 + 1.0 + 1.0 + 0.0, 2.0, 1.0]);
    }

    #[test]
    fn report_serializes_with_exact_field_names() {
        let report = theorem1_bound(&BoundInputs::new(10, 2, 0.1, 0.1, 0.0, 0.1)).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        let obj = json.as_object().unwrap();
        for key in [
            "eps_star",
            "phi_at_eps_star",
            "h",
            "term_tail",
            "term_mu1",
            "term_mu3",
            "term_comparison",
            "total_theorem1",
            "total_theorem1_X",
            "corollary_value",
            "propB1_value",
            "convention",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj.len(), 12);
        let back: BoundReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn cap_coherence() {
        let inputs = BoundInputs::new(3, 1000, 0.9, 0.9, 0.7, 2.0);
        let rep = theorem1_bound(&inputs).unwrap();
        let largest_capped = rep.term_tail.min(1.0).max(rep.term_mu1.min(1.0)).max(rep.term_mu3.min(1.0));
        assert!(rep.total_theorem1 <= 1.0);
        assert!(rep.total_theorem1 >= largest_capped - 1e-15);
    }
}
