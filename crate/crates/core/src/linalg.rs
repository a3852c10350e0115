//! Small dense symmetric matrix kernels: semidefinite-tolerant Cholesky and
//! cyclic Jacobi eigendecomposition. Matrices are row-major `Vec<f64>` of
//! size d*d; dimensions here are desk scale (d up to a few hundred).

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::CoreError;

/// Lower-triangular Cholesky factor of a positive semidefinite matrix.
///
/// Pivots below `tol * max_diag` are treated as exactly zero and their
/// column is zeroed, so exactly singular PSD matrices factor cleanly.
/// A pivot below `-tol * max_diag` means the matrix is indefinite.
pub fn cholesky_psd(a: &[f64], d: usize, tol: f64) -> Result<Vec<f64>, CoreError> {
    assert_eq!(a.len(), d * d);
    let mut max_diag = 0.0f64;
    for j in 0..d {
        max_diag = max_diag.max(fmath::abs(a[j * d + j]));
    }
    let scale = if max_diag > 0.0 { max_diag } else { 1.0 };
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= l[j * d + k] * l[j * d + k];
        }
        if s < -tol * scale {
            return Err(CoreError::NotPositiveSemidefinite { min_eigenvalue: s });
        }
        if s <= tol * scale {
            // Semidefinite direction: the whole column must vanish.
            continue;
        }
        let piv = fmath::sqrt(s);
        l[j * d + j] = piv;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / piv;
        }
    }
    Ok(l)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues, eigenvectors) with eigenvectors stored row-major,
/// column k of the returned matrix belonging to eigenvalue k. Accuracy is
/// machine precision times the spectral radius; cost is O(d^3) per sweep.
pub fn jacobi_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), d * d);
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    if d == 1 {
        return (vec![m[0]], v);
    }
    let mut norm = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            norm += m[i * d + j] * m[i * d + j];
        }
    }
    let norm = fmath::sqrt(norm).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off += 2.0 * m[i * d + j] * m[i * d + j];
            }
        }
        if fmath::sqrt(off) <= 1e-14 * norm {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if fmath::abs(apq) <= 1e-300 {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + fmath::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + fmath::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..d).map(|i| m[i * d + i]).collect();
    (eig, v)
}

/// y = L x for lower-triangular L.
pub fn lower_matvec(l: &[f64], d: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(l.len(), d * d);
    debug_assert_eq!(x.len(), d);
    debug_assert_eq!(y.len(), d);
    for i in 0..d {
        let mut s = 0.0;
        for k in 0..=i {
            s += l[i * d + k] * x[k];
        }
        y[i] = s;
    }
}

/// Largest entrywise absolute difference between L L^T and A.
pub fn factor_residual(l: &[f64], a: &[f64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..=j.min(i) {
                s += l[i * d + k] * l[j * d + k];
            }
            worst = worst.max(fmath::abs(s - a[i * d + j]));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul_t(l: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += l[i * d + k] * l[j * d + k];
                }
                out[i * d + j] = s;
            }
        }
        out
    }

    #[test]
    fn cholesky_recovers_spd_matrix() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let l = cholesky_psd(&a, 3, 1e-12).unwrap();
        let r = matmul_t(&l, 3);
        for (x, y) in a.iter().zip(r.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_handles_exactly_singular_psd() {
        // Rank-1 correlation: duplicated coordinates.
        let a = [1.0, 1.0, 1.0, 1.0];
        let l = cholesky_psd(&a, 2, 1e-12).unwrap();
        assert!(factor_residual(&l, &a, 2) < 1e-12);
        assert_eq!(l[3], 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            cholesky_psd(&a, 2, 1e-12),
            Err(CoreError::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // Equicorrelated rho = 0.5, d = 3: eigenvalues 0.5, 0.5, 2.0.
        let a = [1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0];
        let (mut eig, v) = jacobi_eigen(&a, 3);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((eig[0] - 0.5).abs() < 1e-12);
        assert!((eig[1] - 0.5).abs() < 1e-12);
        assert!((eig[2] - 2.0).abs() < 1e-12);
        // Eigenvector columns are orthonormal.
        for c1 in 0..3 {
            for c2 in 0..3 {
                let dot: f64 = (0..3).map(|r| v[r * 3 + c1] * v[r * 3 + c2]).sum();
                let want = if c1 == c2 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = [2.0, -0.3, 0.1, -0.3, 1.5, 0.4, 0.1, 0.4, 0.9];
        let (eig, v) = jacobi_eigen(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += v[i * 3 + k] * eig[k] * v[j * 3 + k];
                }
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }
}
