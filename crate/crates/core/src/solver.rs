//! Sparse solves of the global system, singular-value estimates, condition
//! numbers and dense product spectra.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::GlobalSystem;
use crate::error::{Error, Result};
use crate::linalg::hager_inverse_norm1;
use crate::sparse::CsrMatrix;

/// Normal-equation condition estimate above which `Auto` refines once.
pub const REFINEMENT_THRESHOLD: f64 = 1e12;
/// Maximum number of power/inverse iterations.
pub const MAX_ITERATIONS: usize = 500;
/// Relative tolerance of the power/inverse iterations.
pub const ITERATION_TOLERANCE: f64 = 1e-6;
/// Largest dense product formed for spectra.
pub const DENSE_LIMIT: usize = 5000;

const POWER_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefinementPolicy {
    Never,
    /// One refinement step when the normal-equation condition estimate is large.
    #[default]
    Auto,
    Always,
}

/// Sparse Cholesky factorization of `AᵀA`.
pub struct NormalFactor {
    llt: Llt<usize, f64>,
    pub size: usize,
    /// Hager estimate of the 1-norm condition number of `AᵀA`.
    pub condition: f64,
}

impl NormalFactor {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let normal = matrix.normal_matrix()?;
        let llt = normal
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization {
                reason: format!("normal equations are not positive definite ({e:?})"),
                condition: f64::INFINITY,
            })?;
        let n = matrix.ncols;
        let mut norm1: f64 = 0.0;
        let colptr = normal.col_ptr();
        let vals = normal.val();
        for j in 0..n {
            let s: f64 = vals[colptr[j]..colptr[j + 1]].iter().map(|v| v.abs()).sum();
            norm1 = norm1.max(s);
        }
        let mut factor = NormalFactor {
            llt,
            size: n,
            condition: f64::NAN,
        };
        let inv = hager_inverse_norm1(
            n,
            |b| factor.solve_in_place(b),
            |b| factor.solve_in_place(b),
        );
        factor.condition = norm1 * inv;
        if !factor.condition.is_finite() {
            return Err(Error::Factorization {
                reason: "normal equations are numerically singular".into(),
                condition: factor.condition,
            });
        }
        Ok(factor)
    }

    /// Solves `AᵀA x = b` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let mut col = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.llt.solve_in_place(col.as_mut());
        for (i, v) in rhs.iter_mut().enumerate() {
            *v = col[(i, 0)];
        }
    }
}

/// Statistics of one global solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub rows: usize,
    pub columns: usize,
    pub nonzeros: usize,
    pub normal_condition: Option<f64>,
    pub refinement_steps: usize,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    /// `‖D̄ᵀ r‖ / (‖D̄‖_F ‖r‖)`.
    pub orthogonality: f64,
}

pub struct Solution {
    /// Values at the free unknowns.
    pub free: Vec<f64>,
    /// Values at all trial nodes, Dirichlet values re-inserted.
    pub trial: Vec<f64>,
    pub stats: SolveStats,
    /// Cholesky factor of `D̄ᵀD̄` when the least-squares path was used.
    pub normal_factor: Option<NormalFactor>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `D̄ u = F̃`: sparse LU when square, otherwise sparse normal
/// equations with Cholesky.
pub fn solve(sys: &GlobalSystem, policy: RefinementPolicy) -> Result<Solution> {
    let a = &sys.matrix;
    if a.nrows < a.ncols {
        return Err(Error::Factorization {
            reason: format!("underdetermined system {}x{}", a.nrows, a.ncols),
            condition: f64::INFINITY,
        });
    }
    let (free, method, factor, refinements) = if a.nrows == a.ncols {
        let lu: Lu<usize, f64> = a.to_faer()?.sp_lu().map_err(|e| Error::Factorization {
            reason: format!("sparse LU failed ({e:?})"),
            condition: f64::INFINITY,
        })?;
        let mut col = Mat::<f64>::from_fn(a.nrows, 1, |i, _| sys.rhs[i]);
        lu.solve_in_place(col.as_mut());
        let u: Vec<f64> = (0..a.ncols).map(|i| col[(i, 0)]).collect();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization {
                reason: "square system is singular".into(),
                condition: f64::INFINITY,
            });
        }
        (u, "sparse-lu", None, 0)
    } else {
        let factor = NormalFactor::new(a)?;
        let mut u = a.transpose_matvec(&sys.rhs);
        factor.solve_in_place(&mut u);
        let steps = match policy {
            RefinementPolicy::Never => 0,
            RefinementPolicy::Always => 1,
            RefinementPolicy::Auto => usize::from(factor.condition > REFINEMENT_THRESHOLD),
        };
        for _ in 0..steps {
            let r: Vec<f64> = sys.residual(&u).iter().map(|v| -v).collect();
            let mut delta = a.transpose_matvec(&r);
            factor.solve_in_place(&mut delta);
            for (ui, di) in u.iter_mut().zip(&delta) {
                *ui += di;
            }
        }
        (u, "normal-cholesky", Some(factor), steps)
    };
    let r = sys.residual(&free);
    let residual_norm = norm2(&r);
    let orthogonality = if residual_norm > 0.0 {
        norm2(&a.transpose_matvec(&r)) / (a.frobenius_norm() * residual_norm)
    } else {
        0.0
    };
    let stats = SolveStats {
        method: method.to_string(),
        rows: a.nrows,
        columns: a.ncols,
        nonzeros: a.nnz(),
        normal_condition: factor.as_ref().map(|f| f.condition),
        refinement_steps: refinements,
        residual_norm,
        rhs_norm: norm2(&sys.rhs),
        orthogonality,
    };
    Ok(Solution {
        trial: sys.expand(&free),
        free,
        stats,
        normal_factor: factor,
    })
}

/// Dense least-squares solution by Householder QR (test oracle).
pub fn dense_least_squares(matrix: &CsrMatrix, rhs: &[f64]) -> Vec<f64> {
    let d = matrix.to_dense();
    let rhs = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = d.qr().solve_lstsq(&rhs);
    (0..matrix.ncols).map(|i| x[(i, 0)]).collect()
}

/// All singular values by dense SVD, largest first.
pub fn dense_singular_values(matrix: &CsrMatrix) -> Result<Vec<f64>> {
    let mut s = matrix
        .to_dense()
        .singular_values()
        .map_err(|e| Error::NonConvergence {
            iterations: 0,
            estimate: {
                log::warn!("dense SVD failed: {e:?}");
                f64::NAN
            },
        })?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

fn random_unit(len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = norm2(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// `(alpha, beta)` that are larger than `x` (Sturm sequence).
fn count_above(alpha: &[f64], beta: &[f64], shift: f64) -> usize {
    let mut below = 0;
    let mut d = 1.0;
    for k in 0..alpha.len() {
        let off = if k == 0 {
            0.0
        } else {
            beta[k - 1] * beta[k - 1]
        };
        d = alpha[k] - shift - if k == 0 { 0.0 } else { off / d };
        if d == 0.0 {
            d = -f64::EPSILON * (shift.abs() + 1.0);
        }
        if d < 0.0 {
            below += 1;
        }
    }
    alpha.len() - below
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by bisection.
fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for k in 0..n {
        let r = if k > 0 { beta[k - 1].abs() } else { 0.0 }
            + if k + 1 < n { beta[k].abs() } else { 0.0 };
        hi = hi.max(alpha[k] + r);
        lo = lo.min(alpha[k] - r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_above(alpha, beta, mid) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by
/// Lanczos with full reorthogonalization. The estimate is the top Ritz value,
/// which is never below the Rayleigh quotient of the power iterate from the
/// same start vector; it stops once it changes by less than the relative
/// tolerance between steps.
fn largest_eigenvalue(
    dim: usize,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    let mut basis: Vec<Vec<f64>> = vec![random_unit(dim)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev = 0.0;
    for it in 1..=MAX_ITERATIONS.min(dim) {
        let q = &basis[it - 1];
        let mut w = apply(q)?;
        let a = dot(&w, q);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let theta = tridiagonal_max(&alpha, &beta);
        let b = norm2(&w);
        if !theta.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                estimate: theta,
            });
        }
        if b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || it == dim {
            return Ok(theta);
        }
        if it > 1 && (theta - prev).abs() <= ITERATION_TOLERANCE * theta.abs() {
            return Ok(theta);
        }
        prev = theta;
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        estimate: prev,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest singular value from the extreme eigenvalue of `AᵀA`.
pub fn sigma_max(matrix: &CsrMatrix) -> Result<f64> {
    if matrix.ncols == 0 || matrix.nnz() == 0 {
        return Ok(0.0);
    }
    let lambda = largest_eigenvalue(matrix.ncols, |v| {
        Ok(matrix.transpose_matvec(&matrix.matvec(v)))
    })
    .map_err(|e| match e {
        Error::NonConvergence {
            iterations,
            estimate,
        } => Error::NonConvergence {
            iterations,
            estimate: estimate.max(0.0).sqrt(),
        },
        other => other,
    })?;
    Ok(lambda.max(0.0).sqrt())
}

/// Smallest singular value by inverse iteration: the extreme eigenvalue of
/// `(AᵀA)⁻¹`, applied through the Cholesky factor.
pub fn sigma_min(matrix: &CsrMatrix, factor: &NormalFactor) -> Result<f64> {
    if matrix.ncols == 0 {
        return Ok(0.0);
    }
    let lambda = largest_eigenvalue(matrix.ncols, |v| {
        let mut w = v.to_vec();
        factor.solve_in_place(&mut w);
        if w.iter().all(|x| x.is_finite()) {
            Ok(w)
        } else {
            Err(Error::Factorization {
                reason: "inverse iteration broke down".into(),
                condition: factor.condition,
            })
        }
    })
    .map_err(|e| match e {
        Error::NonConvergence {
            iterations,
            estimate,
        } => Error::NonConvergence {
            iterations,
            estimate: 1.0 / estimate.max(f64::MIN_POSITIVE).sqrt(),
        },
        other => other,
    })?;
    if !(lambda > 0.0) {
        return Err(Error::Factorization {
            reason: "normal matrix is not positive definite".into(),
            condition: factor.condition,
        });
    }
    Ok(1.0 / lambda.sqrt())
}

/// `κ(A) = σ_max / σ_min`, factorizing `AᵀA` when no factor is given.
pub fn condition_number(matrix: &CsrMatrix, factor: Option<&NormalFactor>) -> Result<f64> {
    let owned;
    let f = match factor {
        Some(f) => f,
        None => {
            owned = NormalFactor::new(matrix)?;
            &owned
        }
    };
    Ok(sigma_max(matrix)? / sigma_min(matrix, f)?)
}

/// Stability quantities of a least-squares discretization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub sigma_max_e: f64,
    pub sigma_min_d: f64,
    pub stability_norm: f64,
    pub kappa_d: Option<f64>,
    pub kappa_e: Option<f64>,
}

/// `σ_max(Ē) / σ_min(D̄)` together with its two factors.
pub fn stability_norm(
    e_bar: &CsrMatrix,
    d_bar: &CsrMatrix,
    factor: &NormalFactor,
) -> Result<SpectralReport> {
    let sigma_max_e = sigma_max(e_bar)?;
    let sigma_min_d = sigma_min(d_bar, factor)?;
    Ok(SpectralReport {
        sigma_max_e,
        sigma_min_d,
        stability_norm: sigma_max_e / sigma_min_d,
        kappa_d: None,
        kappa_e: None,
    })
}

/// Which product's eigenvalues are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductOrder {
    /// `E D̄⁺`.
    #[default]
    EvaluationTimesOperatorPinv,
    /// `D̄ E⁺`.
    OperatorTimesEvaluationPinv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<(f64, f64)>,
    /// `#{|λ| < 1e−8 max|λ|}`.
    pub nullspace: usize,
    /// Number of singular values above `1e−10 σ_max`.
    pub rank: usize,
    pub size: usize,
}

/// Relative eigenvalue magnitude counted as zero.
pub const NULLSPACE_TOLERANCE: f64 = 1e-8;
/// Relative singular value counted as zero in rank estimates.
pub const RANK_TOLERANCE: f64 = 1e-10;

fn pseudo_inverse(matrix: &Mat<f64>) -> Mat<f64> {
    let id = Mat::<f64>::identity(matrix.nrows(), matrix.nrows());
    matrix.qr().solve_lstsq(&id)
}

/// Eigenvalues of the dense `M × M` product of the evaluation and operator
/// matrices (both `M × N`).
pub fn product_spectrum(
    evaluation: &CsrMatrix,
    operator: &CsrMatrix,
    order: ProductOrder,
) -> Result<Spectrum> {
    if evaluation.nrows != operator.nrows || evaluation.ncols != operator.ncols {
        return Err(Error::Dimension(format!(
            "evaluation matrix {}x{} and operator {}x{}",
            evaluation.nrows, evaluation.ncols, operator.nrows, operator.ncols
        )));
    }
    if evaluation.nrows > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            size: evaluation.nrows,
            limit: DENSE_LIMIT,
        });
    }
    let (ed, dd) = (evaluation.to_dense(), operator.to_dense());
    let product = match order {
        ProductOrder::EvaluationTimesOperatorPinv => &ed * pseudo_inverse(&dd),
        ProductOrder::OperatorTimesEvaluationPinv => &dd * pseudo_inverse(&ed),
    };
    let eig = product
        .eigenvalues()
        .map_err(|evaluation| Error::NonConvergence {
            iterations: 0,
            estimate: {
                log::warn!("eigenvalue solver failed: {evaluation:?}");
                f64::NAN
            },
        })?;
    let eigenvalues: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    let max_abs = eigenvalues
        .iter()
        .map(|(r, i)| r.hypot(*i))
        .fold(0.0, f64::max);
    let nullspace = eigenvalues
        .iter()
        .filter(|(r, i)| r.hypot(*i) < NULLSPACE_TOLERANCE * max_abs)
        .count();
    let sv = product
        .singular_values()
        .map_err(|evaluation| Error::NonConvergence {
            iterations: 0,
            estimate: {
                log::warn!("dense SVD failed: {evaluation:?}");
                f64::NAN
            },
        })?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count();
    Ok(Spectrum {
        eigenvalues,
        nullspace,
        rank,
        size: evaluation.nrows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_bisection_matches_closed_form() {
        let n = 40;
        let alpha = vec![2.0; n];
        let beta = vec![-1.0; n - 1];
        let exact = 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((tridiagonal_max(&alpha, &beta) - exact).abs() < 1e-12);
        assert_eq!(count_above(&alpha, &beta, 2.0), n / 2);
    }

    fn random_sparse(rows: usize, cols: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..rows)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = (0..4)
                    .map(|_| (rng.random_range(0..cols), rng.random_range(-1.0..1.0)))
                    .collect();
                r.push((i % cols, 2.0));
                r
            })
            .collect();
        CsrMatrix::from_rows(cols, rows)
    }

    fn system(matrix: CsrMatrix, rhs: Vec<f64>) -> GlobalSystem {
        let n = matrix.ncols;
        GlobalSystem {
            row_kinds: vec![crate::assembly::RowKind::Interior; matrix.nrows],
            row_scale: vec![1.0; matrix.nrows],
            matrix,
            rhs,
            columns: (0..n).collect(),
            dirichlet: Vec::new(),
            num_trial: n,
        }
    }

    #[test]
    fn least_squares_matches_dense_qr() {
        let a = random_sparse(120, 40, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b: Vec<f64> = (0..120).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = system(a.clone(), b.clone());
        let sol = solve(&sys, RefinementPolicy::Auto).unwrap();
        let oracle = dense_least_squares(&a, &b);
        let err = norm2(
            &sol.free
                .iter()
                .zip(&oracle)
                .map(|(x, y)| x - y)
                .collect::<Vec<_>>(),
        );
        assert!(err <= 1e-10 * norm2(&oracle));
        assert!(sol.stats.orthogonality < 1e-8);
        // optimality: perturbations never reduce the residual
        let base = norm2(&sys.residual(&sol.free));
        for t in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + t);
            let mut u = sol.free.clone();
            let scale = 1e-3 * norm2(&u) / (u.len() as f64).sqrt();
            u.iter_mut()
                .for_each(|v| *v += scale * rng.random_range(-1.0..1.0));
            assert!(norm2(&sys.residual(&u)) >= base);
        }
    }

    #[test]
    fn square_systems_use_lu() {
        let a = random_sparse(30, 30, 3);
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let sol = solve(&system(a, b.clone()), RefinementPolicy::Auto).unwrap();
        assert_eq!(sol.stats.method, "sparse-lu");
        assert!(sol.stats.residual_norm <= 1e-10 * norm2(&b));
    }

    #[test]
    fn singular_values_match_dense_svd() {
        let a = random_sparse(90, 30, 4);
        let s = dense_singular_values(&a).unwrap();
        let f = NormalFactor::new(&a).unwrap();
        let smax = sigma_max(&a).unwrap();
        let smin = sigma_min(&a, &f).unwrap();
        assert!(smax <= s[0] * (1.0 + 1e-12) && smax >= 0.99 * s[0]);
        assert!((smin - s[s.len() - 1]).abs() <= 0.01 * s[s.len() - 1]);
        let k = condition_number(&a, None).unwrap();
        assert!((k - s[0] / s[s.len() - 1]).abs() <= 0.02 * k);
        let one = CsrMatrix::from_rows(1, vec![vec![(0, 3.5)]]);
        assert!((condition_number(&one, None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_nullspace() {
        let e = random_sparse(50, 20, 5);
        let d = random_sparse(50, 20, 6);
        let s = product_spectrum(&e, &d, ProductOrder::EvaluationTimesOperatorPinv).unwrap();
        assert_eq!(s.eigenvalues.len(), 50);
        assert!(s.nullspace >= 30, "{}", s.nullspace);
        assert!(s.rank <= 20);
        let sq = random_sparse(20, 20, 7);
        let id = CsrMatrix::from_rows(20, (0..20).map(|i| vec![(i, 1.0)]).collect());
        let s = product_spectrum(&id, &sq, ProductOrder::OperatorTimesEvaluationPinv).unwrap();
        assert_eq!(s.nullspace, 0);
    }
}
