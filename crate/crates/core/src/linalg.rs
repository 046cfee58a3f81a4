//! Dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Solution of a symmetric positive semidefinite system.
#[derive(Debug, Clone)]
pub struct PsdSolution {
    pub x: DVector<f64>,
    /// The matrix was numerically singular and the minimum-norm solution
    /// was returned.
    pub degenerate: bool,
}

/// Solves `a x = b` for symmetric positive semidefinite `a`.
///
/// Uses a Cholesky factorization when the pivots are well separated from
/// zero, otherwise falls back to the eigenvalue pseudo-inverse, which yields
/// the minimum-norm least-squares solution.
pub fn solve_psd(a: &DMatrix<f64>, b: &DVector<f64>) -> PsdSolution {
    let p = a.nrows();
    if p == 0 {
        return PsdSolution {
            x: DVector::zeros(0),
            degenerate: false,
        };
    }
    let max_diag = (0..p).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(chol) = a.clone().cholesky() {
        let l = chol.l_dirty();
        let min_pivot = (0..p).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-13 * max_diag.max(f64::MIN_POSITIVE) {
            return PsdSolution {
                x: chol.solve(b),
                degenerate: false,
            };
        }
    }
    PsdSolution {
        x: pinv_solve(a, b),
        degenerate: true,
    }
}

/// Minimum-norm solution of `a x = b` for symmetric `a`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = max_ev * (a.nrows() as f64) * f64::EPSILON * 16.0;
    let vtb = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        vtb.len(),
        vtb.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(v, &ev)| if ev > tol { v / ev } else { 0.0 }),
    );
    &eig.eigenvectors * scaled
}

/// Prepends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols(), "vstack column mismatch");
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

pub fn vconcat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

pub fn select_entries(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&i| v[i]))
}

/// Penalty diagonal with an unpenalized leading intercept.
pub fn intercept_penalty(p: usize, alpha: f64) -> DVector<f64> {
    DVector::from_fn(p, |i, _| if i == 0 { 0.0 } else { alpha })
}

/// Minimizes `Σ wᵢ (tᵢ − xᵢᵀc)² + Σ_j penalty_j c_j²`.
pub fn weighted_ridge(
    features: &DMatrix<f64>,
    targets: &DVector<f64>,
    weights: &DVector<f64>,
    penalty: &DVector<f64>,
) -> Result<PsdSolution> {
    let (r, p) = features.shape();
    if targets.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: targets.len(),
        });
    }
    if weights.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: weights.len(),
        });
    }
    if penalty.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: penalty.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    if penalty.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::invalid("penalties must be nonnegative"));
    }
    let mut weighted = features.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let mut normal = weighted.transpose() * features;
    for j in 0..p {
        normal[(j, j)] += penalty[j];
    }
    let rhs = weighted.transpose() * targets;
    Ok(solve_psd(&normal, &rhs))
}

/// Deterministic generator for a `(seed, stream)` pair. Distinct streams
/// never overlap regardless of how many draws each consumes.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_solve_matches_inverse_on_spd() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let s = solve_psd(&a, &b);
        assert!(!s.degenerate);
        let expect = a.clone().try_inverse().unwrap() * &b;
        assert!((s.x - expect).norm() < 1e-14);
    }

    #[test]
    fn singular_system_returns_minimum_norm() {
        // rank one: [1 1; 1 1] x = [2; 2] has min-norm solution [1, 1]
        let a = DMatrix::from_element(2, 2, 1.0);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let s = solve_psd(&a, &b);
        assert!(s.degenerate);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_weight_rejected() {
        let x = DMatrix::from_element(2, 1, 1.0);
        let t = DVector::from_vec(vec![1.0, 1.0]);
        let w = DVector::from_vec(vec![1.0, -1.0]);
        assert!(weighted_ridge(&x, &t, &w, &DVector::zeros(1)).is_err());
    }

    #[test]
    fn streams_are_independent_of_draw_counts() {
        use rand::Rng;
        let mut a = stream_rng(7, 2);
        let mut other = stream_rng(7, 1);
        for _ in 0..100 {
            let _: f64 = other.random();
        }
        let mut b = stream_rng(7, 2);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_eq!(xa, xb);
    }
}
