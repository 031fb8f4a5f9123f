//! Minimal dense symmetric linear algebra for the Newton solver and the
//! observed-information standard errors. Matrices here are tiny (feature
//! count plus one), so simplicity beats sophistication.

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix, or `None` if the matrix is not positive definite.
pub(crate) fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve `L L^T x = b` given the Cholesky factor `L`.
pub(crate) fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    // Forward: L y = b.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    // Backward: L^T x = y.
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

/// Diagonal of the inverse of a symmetric positive-definite matrix.
pub(crate) fn inverse_diagonal(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let l = cholesky(a)?;
    let n = a.len();
    let mut diag = Vec::with_capacity(n);
    for j in 0..n {
        let mut unit = vec![0.0f64; n];
        unit[j] = 1.0;
        diag.push(cholesky_solve(&l, &unit)[j]);
    }
    Some(diag)
}
