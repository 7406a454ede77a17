//! Local polyharmonic-spline + polynomial interpolation on a stencil and the
//! differentiation weights derived from it.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Point};
use crate::linalg::{hager_inverse_norm1, norm1};
use crate::nodes::NodeSet;
use crate::stencil::StencilTable;

/// Local condition estimate above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e12;
/// Local condition estimate above which the stencil is rejected.
pub const CONDITION_LIMIT: f64 = 1e15;

/// Basis on a stencil: `φ(r) = r^(2k−1)` plus all monomials of degree `≤ p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhsBasis {
    pub exponent_index: u32,
    pub degree: u32,
    pub dim: usize,
}

impl PhsBasis {
    pub fn new(exponent_index: u32, degree: u32, dim: usize) -> Result<Self> {
        if exponent_index < 2 {
            return Err(Error::InvalidBasis(format!(
                "exponent index {exponent_index} gives a kernel without a Laplacian at r = 0"
            )));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidBasis(format!("dimension {dim}")));
        }
        Ok(PhsBasis {
            exponent_index,
            degree,
            dim,
        })
    }

    /// Cubic kernel with polynomials of degree `p`.
    pub fn cubic(degree: u32, dim: usize) -> Self {
        PhsBasis {
            exponent_index: 2,
            degree,
            dim,
        }
    }

    /// The odd power `2k − 1`.
    pub fn exponent(&self) -> i32 {
        2 * self.exponent_index as i32 - 1
    }

    /// Number of monomials, `binom(p + d, d)`.
    pub fn num_monomials(&self) -> usize {
        binomial(self.degree as usize + self.dim, self.dim)
    }

    /// Default stencil size `2m`.
    pub fn default_stencil_size(&self) -> usize {
        2 * self.num_monomials()
    }
}

pub fn binomial(total: usize, chosen: usize) -> usize {
    let chosen = chosen.min(total - chosen.min(total));
    (0..chosen).fold(1usize, |acc, i| acc * (total - i) / (i + 1))
}

/// Linear operator applied at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Operator {
    Identity,
    Laplacian,
    /// Derivative along a unit outward normal.
    NormalDerivative(Point),
    /// Derivative along an arbitrary direction.
    Directional(Point),
}

impl Operator {
    fn order(&self) -> i32 {
        match self {
            Operator::Identity => 0,
            Operator::Laplacian => 2,
            Operator::NormalDerivative(_) | Operator::Directional(_) => 1,
        }
    }
}

/// `φ(r) = r^(2k−1)`.
pub fn phs_value(radius: f64, exponent_index: u32) -> f64 {
    radius.powi(2 * exponent_index as i32 - 1)
}

/// `∇φ(‖v‖) = (2k−1) ‖v‖^(2k−3) v`.
pub fn phs_gradient(offset: &Point, exponent_index: u32) -> Point {
    let kappa = 2 * exponent_index as i32 - 1;
    let r = norm(offset);
    let c = kappa as f64 * r.powi(kappa - 2);
    [c * offset[0], c * offset[1], c * offset[2]]
}

/// `Δφ = (2k−1)(2k−3+d) r^(2k−3)`.
pub fn phs_laplacian(radius: f64, exponent_index: u32, dim: usize) -> f64 {
    let kappa = 2 * exponent_index as i32 - 1;
    (kappa * (kappa - 2 + dim as i32)) as f64 * radius.powi(kappa - 2)
}

/// Exponent triples of all monomials of degree `≤ p` in graded
/// lexicographic order.
pub fn monomial_exponents(degree: u32, dim: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for t in 0..=degree {
        match dim {
            1 => out.push([t, 0, 0]),
            2 => {
                for a in (0..=t).rev() {
                    out.push([a, t - a, 0]);
                }
            }
            _ => {
                for a in (0..=t).rev() {
                    for b in (0..=t - a).rev() {
                        out.push([a, b, t - a - b]);
                    }
                }
            }
        }
    }
    out
}

#[inline]
fn ipow(base: f64, power: u32) -> f64 {
    base.powi(power as i32)
}

fn monomial(z: &Point, powers: &[u32; 3]) -> f64 {
    ipow(z[0], powers[0]) * ipow(z[1], powers[1]) * ipow(z[2], powers[2])
}

/// `∂/∂z_axis` of a monomial.
fn monomial_partial(z: &Point, powers: &[u32; 3], axis: usize) -> f64 {
    if powers[axis] == 0 {
        return 0.0;
    }
    let mut f = powers[axis] as f64;
    for k in 0..3 {
        let ek = if k == axis { powers[k] - 1 } else { powers[k] };
        f *= ipow(z[k], ek);
    }
    f
}

fn monomial_second(z: &Point, powers: &[u32; 3], axis: usize) -> f64 {
    if powers[axis] < 2 {
        return 0.0;
    }
    let mut f = (powers[axis] * (powers[axis] - 1)) as f64;
    for k in 0..3 {
        let ek = if k == axis { powers[k] - 2 } else { powers[k] };
        f *= ipow(z[k], ek);
    }
    f
}

/// Monomial basis values (or an operator applied to them) at `z`.
pub fn poly_basis(offset: &Point, degree: u32, dim: usize, op: &Operator) -> Vec<f64> {
    monomial_exponents(degree, dim)
        .iter()
        .map(|e| apply_monomial(offset, e, dim, op))
        .collect()
}

fn apply_monomial(z: &Point, powers: &[u32; 3], dim: usize, op: &Operator) -> f64 {
    match op {
        Operator::Identity => monomial(z, powers),
        Operator::Laplacian => (0..dim).map(|k| monomial_second(z, powers, k)).sum(),
        Operator::NormalDerivative(v) | Operator::Directional(v) => (0..dim)
            .map(|k| v[k] * monomial_partial(z, powers, k))
            .sum(),
    }
}

fn apply_kernel(basis: &PhsBasis, offset: &Point, op: &Operator) -> f64 {
    match op {
        Operator::Identity => phs_value(norm(offset), basis.exponent_index),
        Operator::Laplacian => phs_laplacian(norm(offset), basis.exponent_index, basis.dim),
        Operator::NormalDerivative(v) | Operator::Directional(v) => {
            let g = phs_gradient(offset, basis.exponent_index);
            (0..basis.dim).map(|k| v[k] * g[k]).sum()
        }
    }
}

/// Factorized saddle-point system `[[A, P], [Pᵀ, 0]]` of one stencil, in
/// coordinates shifted to the center and scaled by the stencil radius.
pub struct LocalSystem {
    pub stencil: usize,
    pub basis: PhsBasis,
    pub center: Point,
    pub scale: f64,
    pub nodes: Vec<Point>,
    pub local: Vec<Point>,
    pub condition: f64,
    /// Symmetric diagonal equilibration `D` of the factorized matrix `D Ã D`.
    equilibration: Vec<f64>,
    lu: PartialPivLu<f64>,
}

impl std::fmt::Debug for LocalSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalSystem")
            .field("stencil", &self.stencil)
            .field("center", &self.center)
            .field("scale", &self.scale)
            .field("condition", &self.condition)
            .finish()
    }
}

/// Assembles the (unfactorized) saddle matrix for local coordinates.
pub fn saddle_matrix(local: &[Point], basis: &PhsBasis) -> Mat<f64> {
    let n = local.len();
    let exps = monomial_exponents(basis.degree, basis.dim);
    let m = exps.len();
    let mut a = Mat::<f64>::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..i {
            let v = phs_value(norm(&sub(&local[i], &local[j])), basis.exponent_index);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        for (l, e) in exps.iter().enumerate() {
            let v = monomial(&local[i], e);
            a[(i, n + l)] = v;
            a[(n + l, i)] = v;
        }
    }
    a
}

impl LocalSystem {
    /// Builds and factorizes the local system of stencil `stencil` with the
    /// given node coordinates (the first is the center).
    pub fn new(stencil: usize, nodes: &[Point], basis: PhsBasis) -> Result<Self> {
        let m = basis.num_monomials();
        if nodes.is_empty() || nodes.len() < m {
            return Err(Error::InvalidBasis(format!(
                "stencil {stencil} has {} nodes but the polynomial space needs {m}",
                nodes.len()
            )));
        }
        let center = nodes[0];
        let radius = nodes
            .iter()
            .map(|x| norm(&sub(x, &center)))
            .fold(0.0, f64::max);
        let scale = if radius > 0.0 { radius } else { 1.0 };
        let local: Vec<Point> = nodes
            .iter()
            .map(|x| {
                let d = sub(x, &center);
                [d[0] / scale, d[1] / scale, d[2] / scale]
            })
            .collect();
        let mut a = saddle_matrix(&local, &basis);
        let equilibration: Vec<f64> = (0..a.nrows())
            .map(|i| {
                let big = (0..a.ncols()).map(|j| a[(i, j)].abs()).fold(0.0, f64::max);
                if big > 0.0 {
                    1.0 / big.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                a[(i, j)] *= equilibration[i] * equilibration[j];
            }
        }
        let lu = a.partial_piv_lu();
        let size = a.nrows();
        let apply = |b: &mut [f64]| {
            let mut col = Mat::<f64>::from_fn(size, 1, |i, _| b[i]);
            lu.solve_in_place(col.as_mut());
            for i in 0..size {
                b[i] = col[(i, 0)];
            }
        };
        let inv_norm = hager_inverse_norm1(size, apply, apply);
        let condition = norm1(&a) * inv_norm;
        if !condition.is_finite() || condition > CONDITION_LIMIT {
            return Err(Error::SingularStencil { stencil, condition });
        }
        if condition > CONDITION_WARN {
            log::warn!("stencil {stencil}: local condition estimate {condition:.2e}");
        }
        Ok(LocalSystem {
            stencil,
            basis,
            center,
            scale,
            nodes: nodes.to_vec(),
            local,
            condition,
            equilibration,
            lu,
        })
    }

    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }

    fn to_local(&self, point: &Point) -> Point {
        let d = sub(point, &self.center);
        [d[0] / self.scale, d[1] / self.scale, d[2] / self.scale]
    }

    /// Weights for several `(point, operator)` pairs with one multi-column solve.
    pub fn weights_many(&self, queries: &[(Point, Operator)]) -> Vec<Vec<f64>> {
        let n = self.len();
        let exps = monomial_exponents(self.basis.degree, self.basis.dim);
        let size = n + exps.len();
        let mut rhs = Mat::<f64>::zeros(size, queries.len());
        let mut exact: Vec<Option<usize>> = vec![None; queries.len()];
        for (c, (y, op)) in queries.iter().enumerate() {
            let z = self.to_local(y);
            if matches!(op, Operator::Identity) {
                // cardinal property: evaluation at a node is exactly e_i
                if let Some(i) = self.nodes.iter().position(|p| p == y) {
                    exact[c] = Some(i);
                    continue;
                }
            }
            for j in 0..n {
                rhs[(j, c)] = apply_kernel(&self.basis, &sub(&z, &self.local[j]), op);
            }
            for (l, e) in exps.iter().enumerate() {
                rhs[(n + l, c)] = apply_monomial(&z, e, self.basis.dim, op);
            }
        }
        self.solve_scaled(rhs.as_mut());
        queries
            .iter()
            .enumerate()
            .map(|(c, (_, op))| {
                if let Some(i) = exact[c] {
                    let mut w = vec![0.0; n];
                    w[i] = 1.0;
                    return w;
                }
                let unscale = self.scale.powi(-op.order());
                (0..n).map(|j| rhs[(j, c)] * unscale).collect()
            })
            .collect()
    }

    /// Weights `w` with `Lu(y) ≈ Σ w_j u(x_j)`.
    pub fn weights(&self, point: &Point, op: &Operator) -> Vec<f64> {
        self.weights_many(&[(*point, *op)]).pop().unwrap()
    }

    /// Value at `y` of the local cardinal function of node `i`.
    pub fn cardinal_value(&self, point: &Point, i: usize) -> f64 {
        self.weights(point, &Operator::Identity)[i]
    }

    /// Solves the saddle system for a right-hand side (used by tests and diagnostics).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut col = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_scaled(col.as_mut());
        (0..rhs.len()).map(|i| col[(i, 0)]).collect()
    }

    /// `Ã⁻¹ B = D (D Ã D)⁻¹ D B`, in place.
    fn solve_scaled(&self, mut b: faer::MatMut<'_, f64>) {
        let d = &self.equilibration;
        for c in 0..b.ncols() {
            for i in 0..b.nrows() {
                b[(i, c)] *= d[i];
            }
        }
        self.lu.solve_in_place(b.as_mut());
        for c in 0..b.ncols() {
            for i in 0..b.nrows() {
                b[(i, c)] *= d[i];
            }
        }
    }
}

/// A request for the weights of `op` at `point`, using stencil `stencil`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightRequest {
    pub stencil: usize,
    pub point: Point,
    pub op: Operator,
}

/// Summary of a weight pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub stencils: usize,
    pub max_condition: f64,
    pub warnings: usize,
}

/// Computes the weights of all requests, factorizing each involved stencil
/// once. Results are returned in request order.
pub fn compute_weights(
    x: &NodeSet,
    table: &StencilTable,
    basis: PhsBasis,
    requests: &[WeightRequest],
) -> Result<(Vec<Vec<f64>>, WeightStats)> {
    let mut by_stencil: Vec<Vec<usize>> = vec![Vec::new(); table.num_stencils()];
    for (r, req) in requests.iter().enumerate() {
        by_stencil[req.stencil].push(r);
    }
    let groups: Vec<(usize, &Vec<usize>)> = by_stencil
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .collect();
    let results: Vec<Result<(Vec<(usize, Vec<f64>)>, f64)>> = groups
        .par_iter()
        .map(|&(k, reqs)| {
            let pts: Vec<Point> = table.row(k).iter().map(|&j| x.points[j]).collect();
            let sys = LocalSystem::new(k, &pts, basis)?;
            let queries: Vec<(Point, Operator)> = reqs
                .iter()
                .map(|&r| (requests[r].point, requests[r].op))
                .collect();
            let w = sys.weights_many(&queries);
            Ok((reqs.iter().copied().zip(w).collect(), sys.condition))
        })
        .collect();
    let mut out = vec![Vec::new(); requests.len()];
    let mut stats = WeightStats::default();
    for res in results {
        let (ws, cond) = res?;
        stats.stencils += 1;
        stats.max_condition = stats.max_condition.max(cond);
        if cond > CONDITION_WARN {
            stats.warnings += 1;
        }
        for (r, w) in ws {
            out[r] = w;
        }
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::SolveLstsq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(phs_value(0.0, 2), 0.0);
        assert_eq!(phs_value(2.0, 2), 8.0);
        assert_eq!(phs_gradient(&[0.0; 3], 2), [0.0; 3]);
        assert_eq!(phs_laplacian(0.0, 2, 2), 0.0);
        assert_eq!(phs_laplacian(1.5, 2, 2), 9.0 * 1.5);
    }

    #[test]
    fn kernel_laplacian_matches_finite_differences() {
        let h = 1e-5;
        let f = |x: f64, y: f64| phs_value((x * x + y * y).sqrt(), 2);
        let (x, y) = (0.3, 0.4);
        let fd = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h);
        let exact = phs_laplacian(0.5, 2, 2);
        assert!((fd - exact).abs() <= 1e-5 * exact, "{fd} vs {exact}");
        let g = phs_gradient(&[x, y, 0.0], 2);
        let gx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-8);
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(
            poly_basis(&[0.3, 0.2, 0.0], 0, 2, &Operator::Identity),
            vec![1.0]
        );
        assert_eq!(monomial_exponents(3, 2).len(), 10);
        assert_eq!(monomial_exponents(2, 3).len(), 10);
        assert_eq!(PhsBasis::cubic(3, 2).num_monomials(), 10);
        assert_eq!(PhsBasis::cubic(3, 2).default_stencil_size(), 20);
        assert_eq!(
            monomial_exponents(1, 2),
            vec![[0, 0, 0], [1, 0, 0], [0, 1, 0]]
        );
    }

    #[test]
    fn single_node_system() {
        let sys = LocalSystem::new(0, &[[0.2, 0.1, 0.0]], PhsBasis::cubic(0, 2)).unwrap();
        let a = saddle_matrix(&sys.local, &sys.basis);
        assert_eq!(
            (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]),
            (0.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(
            sys.weights(&[0.5, 0.5, 0.0], &Operator::Identity),
            vec![1.0]
        );
    }

    #[test]
    fn collinear_nodes_are_singular() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 0.0]];
        let r = LocalSystem::new(4, &pts, PhsBasis::cubic(1, 2));
        assert!(
            matches!(r, Err(Error::SingularStencil { stencil: 4, .. })),
            "{r:?}"
        );
    }

    #[test]
    fn classical_second_difference() {
        let h = 0.01;
        let pts = [[0.0; 3], [-h, 0.0, 0.0], [h, 0.0, 0.0]];
        let sys = LocalSystem::new(0, &pts, PhsBasis::cubic(2, 1)).unwrap();
        let w = sys.weights(&[0.0; 3], &Operator::Laplacian);
        let expected = [-2.0 / (h * h), 1.0 / (h * h), 1.0 / (h * h)];
        for (a, b) in w.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9 * b.abs(), "{w:?}");
        }
    }

    /// Random stencil around a random center, with a minimum separation so
    /// that the local system stays reasonably conditioned.
    fn random_stencil(rng: &mut ChaCha8Rng, n: usize, dim: usize, spread: f64) -> Vec<Point> {
        let c = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let mut center = [0.0; 3];
        center[..dim].copy_from_slice(&c[..dim]);
        let min_sep = 0.25 * spread / (n as f64).powf(1.0 / dim as f64);
        let mut pts = vec![center];
        while pts.len() < n {
            let mut p = center;
            for k in 0..dim {
                p[k] += rng.random_range(-spread..spread);
            }
            if pts.iter().all(|q| norm(&sub(&p, q)) >= min_sep) {
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn saddle_solve_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let basis = PhsBasis::cubic(3, 2);
            let pts = random_stencil(&mut rng, 20, 2, 0.1);
            let sys = LocalSystem::new(trial, &pts, basis).unwrap();
            let a = saddle_matrix(&sys.local, &basis);
            let b: Vec<f64> = (0..a.nrows())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let x = sys.solve(&b);
            let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
            let oracle = a.qr().solve_lstsq(&rhs);
            let err: f64 = (0..b.len())
                .map(|i| (x[i] - oracle[(i, 0)]).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = (0..b.len())
                .map(|i| oracle[(i, 0)].powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-9 * scale, "trial {trial}: {err} vs {scale}");
            let mut resid: f64 = 0.0;
            for i in 0..b.len() {
                let ax: f64 = (0..b.len()).map(|j| a[(i, j)] * x[j]).sum();
                resid = resid.max((ax - b[i]).abs());
            }
            assert!(resid < 1e-9);
        }
    }

    #[test]
    fn cardinal_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_stencil(&mut rng, 20, 2, 0.05);
        let sys = LocalSystem::new(0, &pts, PhsBasis::cubic(3, 2)).unwrap();
        for (i, p) in pts.iter().enumerate() {
            for j in 0..pts.len() {
                assert_eq!(sys.cardinal_value(p, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rigid_motion_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_stencil(&mut rng, 30, 2, 0.1);
        let y = [pts[0][0] + 0.01, pts[0][1] - 0.02, 0.0];
        let basis = PhsBasis::cubic(4, 2);
        let w = LocalSystem::new(0, &pts, basis)
            .unwrap()
            .weights(&y, &Operator::Laplacian);
        let (s, c) = 0.7f64.sin_cos();
        let rot = |p: &Point| [c * p[0] - s * p[1] + 0.3, s * p[0] + c * p[1] - 1.1, 0.0];
        let moved: Vec<Point> = pts.iter().map(rot).collect();
        let w2 = LocalSystem::new(0, &moved, basis)
            .unwrap()
            .weights(&rot(&y), &Operator::Laplacian);
        let wn: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in w.iter().zip(&w2) {
            assert!((a - b).abs() < 1e-10 * wn);
        }
        let normal = [0.6, 0.8, 0.0];
        let g = LocalSystem::new(0, &pts, basis)
            .unwrap()
            .weights(&y, &Operator::NormalDerivative(normal));
        let g2 = LocalSystem::new(0, &moved, basis).unwrap().weights(
            &rot(&y),
            &Operator::NormalDerivative([c * 0.6 - s * 0.8, s * 0.6 + c * 0.8, 0.0]),
        );
        let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in g.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-10 * gn);
        }
    }

    /// Exact operator values of a monomial in physical coordinates.
    fn monomial_operator(y: &Point, e: &[u32; 3], dim: usize, op: &Operator) -> f64 {
        apply_monomial(y, e, dim, op)
    }

    fn reproduction_error(pts: &[Point], y: &Point, basis: PhsBasis, op: &Operator) -> f64 {
        let sys = LocalSystem::new(0, pts, basis).unwrap();
        let w = sys.weights(y, op);
        let wn: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for e in monomial_exponents(basis.degree, basis.dim) {
            let vals: Vec<f64> = pts.iter().map(|p| monomial(p, &e)).collect();
            let vn: f64 = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            let approx: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
            let exact = monomial_operator(y, &e, basis.dim, op);
            worst = worst.max((approx - exact).abs() / (wn * vn).max(1e-300));
        }
        worst
    }

    #[test]
    fn constants_and_linears() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_stencil(&mut rng, 20, 2, 0.1);
        let sys = LocalSystem::new(0, &pts, PhsBasis::cubic(3, 2)).unwrap();
        let y = [pts[0][0] + 0.013, pts[0][1] + 0.004, 0.0];
        let wi = sys.weights(&y, &Operator::Identity);
        assert!((wi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let wl = sys.weights(&y, &Operator::Laplacian);
        let wn: f64 = wl.iter().map(|v| v.abs()).sum();
        assert!(wl.iter().sum::<f64>().abs() < 1e-12 * wn);
        let mx: f64 = wl.iter().zip(&pts).map(|(w, p)| w * p[0]).sum();
        assert!(mx.abs() < 1e-12 * wn);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn polynomial_reproduction(seed in 0u64..1_000_000, degree in 2u32..6, three_d in any::<bool>()) {
            let dim = if three_d { 3 } else { 2 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = PhsBasis::cubic(degree, dim);
            let pts = random_stencil(&mut rng, basis.default_stencil_size(), dim, 0.2);
            let mut y = pts[0];
            for k in 0..dim { y[k] += rng.random_range(-0.05..0.05); }
            let dir = [0.48, 0.6, 0.64];
            for op in [Operator::Identity, Operator::Laplacian, Operator::Directional(dir)] {
                let e = reproduction_error(&pts, &y, basis, &op);
                prop_assert!(e <= 1e-8, "{op:?}: {e}");
            }
        }
    }
}
