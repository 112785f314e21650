//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Nonnegative least squares `min ‖A x - b‖₂ s.t. x ≥ 0` (Lawson-Hanson
/// active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.amax().max(1.0) * b.amax().max(1.0);
    let tol = 1e-13 * scale * (m.max(n) as f64);
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z_p = least_squares_columns(a, b, &idx);
            if z_p.iter().all(|&v| v > 0.0) {
                for (k, &col) in idx.iter().enumerate() {
                    x[col] = z_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &col) in idx.iter().enumerate() {
                if z_p[k] <= 0.0 {
                    let denom = x[col] - z_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[col] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &col) in idx.iter().enumerate() {
                x[col] += alpha * (z_p[k] - x[col]);
            }
            let drop_tol = 1e-14 * x.amax();
            for &col in &idx {
                if x[col] <= drop_tol {
                    x[col] = 0.0;
                    passive[col] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Least-squares solution restricted to the listed columns of `a`.
pub fn least_squares_columns(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(cols.len()))
}

/// Greedy maximal linearly independent subset of the rows of `rows`
/// (visited in `order`), by modified Gram-Schmidt with relative threshold
/// `tol`.
pub fn independent_rows(rows: &[Vec<f64>], order: &[usize], tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for &i in order {
        let mut v = DVector::from_column_slice(&rows[i]);
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= c * q;
            }
        }
        let r = v.norm();
        if r > tol * norm0 {
            basis.push(v / r);
            kept.push(i);
        }
        if basis.len() == rows[i].len() {
            break;
        }
    }
    kept
}

/// Unit vector spanning the direction of smallest singular value of `a`
/// (a null vector when `a` has more columns than rows).
pub fn null_vector(a: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let (m, n) = a.shape();
    if n == 0 {
        return None;
    }
    // Square up so the SVD returns a full set of right singular vectors.
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t?;
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
        );
    Some((v_t.row(k).transpose().into_owned(), s))
}
