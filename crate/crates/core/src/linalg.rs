//! Small dense helpers shared by the matrix statistics and baselines.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// P M P with P = I − 𝟙𝟙ᵀ/n, computed through row/column means.
pub fn center_project(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut row_mean = vec![0.0f64; n];
    for j in 0..n {
        for i in 0..n {
            row_mean[i] += m[(i, j)];
        }
    }
    let inv = 1.0 / n as f64;
    for v in &mut row_mean {
        *v *= inv;
    }
    let grand: f64 = row_mean.iter().sum::<f64>() * inv;
    Mat::from_fn(n, n, |i, j| m[(i, j)] - row_mean[i] - row_mean[j] + grand)
}

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

/// Symmetric eigenvalues only, ascending.
pub fn sym_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Matrix of pairwise column distances scaled by 1/√dim:
/// out[k][l] = ‖m_k − m_l‖ / √dim.
pub fn column_distance_matrix(m: MatRef<'_, f64>) -> Mat<f64> {
    let (dim, n) = m.shape();
    let gram = m.transpose() * m;
    let mut out = Mat::<f64>::zeros(n, n);
    let inv = 1.0 / dim as f64;
    for k in 0..n {
        for l in 0..k {
            let d2 = (gram[(k, k)] + gram[(l, l)] - 2.0 * gram[(k, l)]).max(0.0);
            let d = (d2 * inv).sqrt();
            out[(k, l)] = d;
            out[(l, k)] = d;
        }
    }
    out
}

/// Frobenius inner product.
pub fn frob_inner(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

pub fn trace(m: MatRef<'_, f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_annihilates_ones_and_is_idempotent() {
        let n = 7;
        let m = Mat::from_fn(n, n, |i, j| ((i * 31 + j * 17) % 13) as f64 - 5.0);
        let sym = &m + m.transpose();
        let g = center_project(sym.as_ref());
        // rows and columns of P M P sum to zero
        for i in 0..n {
            let row: f64 = (0..n).map(|j| g[(i, j)]).sum();
            let col: f64 = (0..n).map(|j| g[(j, i)]).sum();
            assert!(row.abs() < 1e-12 && col.abs() < 1e-12);
        }
        // applying the centering twice changes nothing
        let gg = center_project(g.as_ref());
        for j in 0..n {
            for i in 0..n {
                assert!((g[(i, j)] - gg[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distances_match_direct_evaluation() {
        let m = Mat::from_fn(3, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let d = column_distance_matrix(m.as_ref());
        for k in 0..4 {
            for l in 0..4 {
                let direct = (0..3)
                    .map(|i| (m[(i, k)] - m[(i, l)]).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / 3.0f64.sqrt();
                assert!((d[(k, l)] - direct).abs() < 1e-14);
            }
        }
    }
}
