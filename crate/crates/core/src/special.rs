//! Double-precision special functions: normal CDF and quantile, the
//! regularized incomplete beta function, and the Student-t CDF.

use crate::fmath;

/// 1/sqrt(2*pi).
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * fmath::exp(-0.5 * x * x)
}

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * fmath::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function, accurate in the far right tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * fmath::erfc(x * FRAC_1_SQRT_2)
}

/// Phi(hi) - Phi(lo) computed through erfc so neither tail cancels.
#[inline]
pub fn norm_cdf_diff(hi: f64, lo: f64) -> f64 {
    0.5 * (fmath::erfc(lo * FRAC_1_SQRT_2) - fmath::erfc(hi * FRAC_1_SQRT_2))
}

/// Standard normal quantile for p in (0, 1); NaN outside.
///
/// Rational initial approximation polished by two Halley steps against
/// the erfc-based CDF, giving close to full double precision.
pub fn norm_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = fmath::sqrt(-2.0 * fmath::ln(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = fmath::sqrt(-2.0 * fmath::ln_1p(-p));
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };

    for _ in 0..2 {
        let e = norm_cdf(x) - p;
        let u = e / norm_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = fmath::ln_gamma(a + b) - fmath::ln_gamma(a) - fmath::ln_gamma(b)
        + a * fmath::ln(x)
        + b * fmath::ln_1p(-x);
    let front = fmath::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 2.0 * f64::EPSILON;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fmath::abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fmath::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fmath::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fmath::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fmath::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fmath::abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// CDF of the Student-t distribution with `nu` degrees of freedom.
pub fn student_t_cdf(t: f64, nu: f64) -> f64 {
    let x = nu / (nu + t * t);
    let half_tail = 0.5 * reg_inc_beta(0.5 * nu, 0.5, x);
    if t >= 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((norm_sf(8.0) / 6.220_960_574_271_78e-16 - 1.0).abs() < 1e-13);
        assert!((norm_cdf(-1.0) + norm_cdf(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norm_quantile_round_trips() {
        for &p in &[1e-12, 1e-6, 0.02425, 0.1, 0.5, 0.9, 0.975, 1.0 - 1e-6, 1.0 - 1e-12] {
            let x = norm_quantile(p);
            assert!((norm_cdf(x) - p).abs() <= 1e-14 * p.max(1.0 - p).max(1e-3));
        }
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((norm_quantile(0.5)).abs() < 1e-15);
        assert!(norm_quantile(0.0).is_nan());
        assert!(norm_quantile(1.0).is_nan());
    }

    #[test]
    fn student_t_cdf_closed_forms() {
        // nu = 1 is Cauchy: F(t) = 1/2 + atan(t)/pi.
        for &t in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            let cauchy = 0.5 + libm::atan(t) / core::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-14);
        }
        // nu = 2 has F(t) = 1/2 + t / (2 sqrt(t^2 + 2)).
        for &t in &[-2.0f64, -0.3, 0.0, 1.0, 4.0] {
            let exact = 0.5 + t / (2.0 * (t * t + 2.0).sqrt());
            assert!((student_t_cdf(t, 2.0) - exact).abs() < 1e-14);
        }
        // Large nu approaches the normal CDF.
        assert!((student_t_cdf(1.5, 1e7) - norm_cdf(1.5)).abs() < 1e-6);
    }

    #[test]
    fn reg_inc_beta_endpoints_and_symmetry() {
        assert_eq!(reg_inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(reg_inc_beta(2.0, 3.0, 1.0), 1.0);
        for &(a, b, x) in &[(0.5, 0.5, 0.3), (2.0, 5.0, 0.7), (4.5, 1.5, 0.2)] {
            let s = reg_inc_beta(a, b, x) + reg_inc_beta(b, a, 1.0 - x);
            assert!((s - 1.0).abs() < 1e-13);
        }
        // I_x(1, 1) is the identity.
        assert!((reg_inc_beta(1.0, 1.0, 0.42) - 0.42).abs() < 1e-15);
    }
}
