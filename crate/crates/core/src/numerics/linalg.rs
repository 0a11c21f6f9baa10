//! Small dense solvers: cyclic Jacobi for symmetric eigenproblems and a
//! Cholesky ridge solve for the r×r systems that show up in ALS.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in non-increasing order and the matching unit
/// eigenvectors as the rows of the second matrix.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut m = a.clone();
    // Columns of `v` accumulate the rotations.
    let mut v = DenseMatrix::identity(n);

    let scale: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the lower index first on ties.
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(c, order[r])]);
    if !vectors.is_finite() {
        return Err(Error::Numeric("eigen-decomposition produced non-finite values".into()));
    }
    Ok((values, vectors))
}

/// Solves `(A + ridge·I) x = b` for symmetric positive semi-definite `A`
/// given as a row-major `n×n` slice.
///
/// A system that is singular even after the ridge falls back to a tiny
/// diagonal jitter so rank-deficient least-squares blocks still yield the
/// minimum-norm-ish solution instead of failing.
pub fn solve_ridge(a: &[f64], b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    if let Some(x) = cholesky_solve(a, b, ridge) {
        return Ok(x);
    }
    let jitter = ridge + 1e-10 * trace.max(1.0);
    cholesky_solve(a, b, jitter)
        .ok_or_else(|| Error::Numeric(format!("{n}x{n} normal equations are not positive definite")))
}

fn cholesky_solve(a: &[f64], b: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            if i == j {
                sum += ridge;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
