use nalgebra::{DMatrix, DVector};

/// Lawson–Hanson non-negative least squares: `min ‖Ax − b‖` with `x ≥ 0`.
///
/// Returns the solution and the final residual norm. The passive set at exit
/// has at most `rank(A)` members, so the solution is basic.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let tol = 10.0 * f64::EPSILON * a.amax().max(1.0) * (a.nrows().max(n) as f64);
    let max_outer = 3 * n + 10;

    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];

    for _ in 0..max_outer {
        let grad = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z_p = solve_subset(a, b, &idx);
            let mut z = DVector::zeros(n);
            for (k, &i) in idx.iter().enumerate() {
                z[i] = z_p[k];
            }

            if idx.iter().all(|&i| z[i] > tol) {
                x = z;
                break;
            }

            // Step towards z until the first passive coordinate hits zero.
            let mut alpha = f64::INFINITY;
            for &i in &idx {
                if z[i] <= tol {
                    let denom = x[i] - z[i];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x += (z - &x) * alpha;
            for &i in &idx {
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    let res = (b - a * &x).norm();
    (x, res)
}

/// Unconstrained least squares on a column subset.
pub(crate) fn solve_subset(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    if cols.is_empty() {
        return DVector::zeros(0);
    }
    let sub = a.select_columns(cols);
    sub.svd(true, true)
        .solve(b, 1e-13)
        .expect("both factors were requested")
}
