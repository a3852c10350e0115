//! Adaptive Simpson quadrature with an absolute error target.

use crate::fmath;

/// Integrate `f` over [a, b] to absolute tolerance `abs_tol`.
///
/// The interval is pre-split into eight panels (so symmetric integrands do
/// not fool the refinement test) and each panel is refined recursively with
/// the usual |S2 - S1|/15 error estimate and Richardson extrapolation.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, abs_tol);
    }
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let panel_tol = abs_tol / panels as f64;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels { b } else { lo + h };
        let flo = f(lo);
        let fhi = f(hi);
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let whole = simpson(lo, hi, flo, fmid, fhi);
        total += adaptive(f, lo, hi, flo, fmid, fhi, whole, panel_tol, 52);
    }
    total
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Subdivision cannot continue below the spacing of adjacent floats.
    if depth == 0 || fmath::abs(delta) <= 15.0 * tol || m <= a || m >= b {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
