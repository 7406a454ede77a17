//! Small dense helpers shared by the local and global solvers.

use faer::Mat;

/// Hager's estimate of `‖A⁻¹‖₁` given solvers for `A x = b` and `Aᵀ x = b`
/// (both in place).
pub fn hager_inverse_norm1(
    n: usize,
    mut solve: impl FnMut(&mut [f64]),
    mut solve_transpose: impl FnMut(&mut [f64]),
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut estimate = 0.0;
    for iter in 0..5 {
        let mut y = x.clone();
        solve(&mut y);
        estimate = y.iter().map(|v| v.abs()).sum::<f64>();
        if !estimate.is_finite() {
            return f64::INFINITY;
        }
        let mut z: Vec<f64> = y
            .iter()
            .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        solve_transpose(&mut z);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                if v.abs() > acc.1 {
                    (i, v.abs())
                } else {
                    acc
                }
            });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if iter > 0 && zmax <= ztx {
            break;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        x[j] = 1.0;
    }
    // Higham's alternating-sign safeguard
    let mut alt: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        })
        .collect();
    solve(&mut alt);
    let alt_est = 2.0 * alt.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
    estimate.max(alt_est)
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn norm1(matrix: &Mat<f64>) -> f64 {
    (0..matrix.ncols())
        .map(|j| {
            (0..matrix.nrows())
                .map(|i| matrix[(i, j)].abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Solve;

    #[test]
    fn estimate_matches_exact_inverse_norm() {
        let n = 8;
        let a = Mat::<f64>::from_fn(n, n, |i, j| {
            1.0 / (i + j + 1) as f64 + if i == j { 0.5 } else { 0.0 }
        });
        let lu = a.partial_piv_lu();
        let mut inv = Mat::<f64>::identity(n, n);
        lu.solve_in_place(inv.as_mut());
        let exact = norm1(&inv);
        let est = hager_inverse_norm1(
            n,
            |b| {
                let mut m = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
                lu.solve_in_place(m.as_mut());
                for i in 0..n {
                    b[i] = m[(i, 0)];
                }
            },
            |b| {
                let mut m = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
                lu.solve_transpose_in_place(m.as_mut());
                for i in 0..n {
                    b[i] = m[(i, 0)];
                }
            },
        );
        // the estimator is a lower bound and is usually exact for small n
        assert!(est <= exact * (1.0 + 1e-10));
        assert!(est >= 0.3 * exact);
    }
}
