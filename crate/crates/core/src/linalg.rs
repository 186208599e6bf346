//! Small dense solves for output-weight systems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::problem::Mat2;
use crate::quadrature::Point;

/// How a symmetric positive definite system was solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    /// Ridge shift added to the diagonal, if the plain factorization failed.
    pub ridge: Option<f64>,
    /// 2-norm condition number of the (unshifted) matrix.
    pub condition: f64,
}

/// Solve `K x = F` by Cholesky. When `K` is not numerically positive definite
/// (or `force_ridge` is set), retry with `K + λI`, starting from
/// `λ = 1e-10 · tr(K) / dim` and growing by 100× up to three times.
pub fn spd_solve(k: &DMatrix<f64>, f: &DVector<f64>, force_ridge: bool) -> Result<(DVector<f64>, SolveInfo)> {
    let n = k.nrows();
    let condition = condition_number(k);
    if !force_ridge {
        if let Some(ch) = k.clone().cholesky() {
            return Ok((ch.solve(f), SolveInfo { ridge: None, condition }));
        }
    }
    let trace = k.trace().abs().max(f64::MIN_POSITIVE);
    let mut lambda = 1e-10 * trace / n as f64;
    for _ in 0..4 {
        let mut shifted = k.clone();
        for i in 0..n {
            shifted[(i, i)] += lambda;
        }
        if let Some(ch) = shifted.cholesky() {
            return Ok((
                ch.solve(f),
                SolveInfo {
                    ridge: Some(lambda),
                    condition,
                },
            ));
        }
        lambda *= 100.0;
    }
    Err(AneError::NotPositiveDefinite)
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub fn condition_number(k: &DMatrix<f64>) -> f64 {
    if k.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(k.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix: `(λ_min, v_min, λ_max, v_max)`.
///
/// Each eigenvector is normalized with its first nonzero component positive.
/// When the eigenvalues coincide (relative gap ≤ 1e-12) the minimum is
/// reported as `(0, 1)` and the maximum as `(1, 0)`.
pub fn sym_eigen2(m: &Mat2) -> (f64, Point, f64, Point) {
    let (a, b, c) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (lmin, lmax) = (mean - rad, mean + rad);
    let scale = a.abs().max(c.abs()).max(b.abs());
    if rad <= 1e-12 * scale || scale == 0.0 {
        return (lmin, [0.0, 1.0], lmax, [1.0, 0.0]);
    }
    let vec_for = |l: f64| -> Point {
        // Rows of (M − λI) are orthogonal to the eigenvector; use the longer one.
        let r1 = [b, l - a];
        let r2 = [l - c, b];
        let v = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) { r1 } else { r2 };
        canonical_sign(normalize(v))
    };
    (lmin, vec_for(lmin), lmax, vec_for(lmax))
}

pub fn normalize(v: Point) -> Point {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Flip `v` so its first nonzero component is positive.
pub fn canonical_sign(v: Point) -> Point {
    let first = if v[0] != 0.0 { v[0] } else { v[1] };
    if first < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let (l0, v0, l1, v1) = sym_eigen2(&[[2.0, 0.0], [0.0, 0.5]]);
        assert_eq!((l0, l1), (0.5, 2.0));
        assert_eq!(v0, [0.0, 1.0]);
        assert_eq!(v1, [1.0, 0.0]);
    }

    #[test]
    fn eigen_of_diagonal_line() {
        // Covariance of points on x = y.
        let (l0, v0, _, v1) = sym_eigen2(&[[1.0, 1.0], [1.0, 1.0]]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(l0.abs() < 1e-15);
        assert!((v0[0] - s).abs() < 1e-15 && (v0[1] + s).abs() < 1e-15);
        assert!((v1[0] - s).abs() < 1e-15 && (v1[1] - s).abs() < 1e-15);
    }

    #[test]
    fn isotropic_tie_break() {
        let (_, v0, _, _) = sym_eigen2(&[[3.0, 0.0], [0.0, 3.0]]);
        assert_eq!(v0, [0.0, 1.0]);
    }

    #[test]
    fn ridge_fallback_on_singular() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = DVector::from_vec(vec![1.0, 1.0]);
        let (x, info) = spd_solve(&k, &f, false).unwrap();
        assert!(info.ridge.is_some());
        assert!(((&k * &x) - &f).norm() < 1e-6);
    }

    #[test]
    fn plain_cholesky_when_spd() {
        let k = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = DVector::from_vec(vec![1.0, 2.0]);
        let (x, info) = spd_solve(&k, &f, false).unwrap();
        assert!(info.ridge.is_none());
        assert!(((&k * &x) - &f).norm() < 1e-14);
        assert!(info.condition > 1.0);
    }
}
