use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as columns. Iterates until the off-diagonal Frobenius norm
/// falls below `1e-12` (relative to the matrix norm when that exceeds one).
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Usage("eigen-decomposition needs a square matrix".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = 1e-12 * a.norm().max(1.0);

    let mut converged = off_diagonal_norm(&a) < tol;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diagonal_norm(&a) < tol;
    }
    if !converged {
        return Err(Error::Internal("Jacobi rotations did not converge".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_closed_form() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)].abs() - h).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_matrix() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[4.0, 1.0, -2.0, 2.0, 1.0, 2.0, 0.0, 1.0, -2.0, 0.0, 3.0, -2.0, 2.0, 1.0, -2.0, -1.0],
        );
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone()));
        let back = &vecs * d * vecs.transpose();
        assert!((back - &m).norm() < 1e-10);
        assert!((vecs.transpose() * &vecs - DMatrix::identity(4, 4)).norm() < 1e-10);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert!((vals.iter().sum::<f64>() - m.trace()).abs() < 1e-10);
    }
}
