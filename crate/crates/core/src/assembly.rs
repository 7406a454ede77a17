//! Global rectangular operators: row selection, row scaling, right-hand
//! sides and strong elimination of Dirichlet unknowns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RegionMeasures};
use crate::local_weights::{Operator, WeightRequest};
use crate::nodes::{EvaluationSet, NodeKind, NodeSet};
use crate::problems::ExactSolution;
use crate::sparse::CsrMatrix;
use crate::stencil::assign_evaluation_points;

/// Differential operator of the interior equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pde {
    /// `Δu = f` with Dirichlet and Neumann data.
    #[default]
    Poisson,
    /// `−g·∇u` with Dirichlet data on the inflow part; the remaining
    /// boundary carries the advection operator.
    Advection { velocity: Point },
}

/// Region weights `β₀` (Dirichlet), `β₁` (Neumann), `β₂` (interior).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub dirichlet: f64,
    pub neumann: f64,
    pub interior: f64,
}

impl ScalingSpec {
    pub fn unit() -> Self {
        ScalingSpec {
            dirichlet: 1.0,
            neumann: 1.0,
            interior: 1.0,
        }
    }

    /// `β₀ = 1/h`, `β₁ = β₂ = 1`.
    pub fn inverse_h(spacing: f64) -> Self {
        ScalingSpec {
            dirichlet: 1.0 / spacing,
            ..Self::unit()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub pde: Pde,
    pub scaling: ScalingSpec,
    /// Append a Laplacian row at every boundary trial node (used with ghost
    /// nodes, or alone as a side experiment).
    pub boundary_laplacian: bool,
    pub eliminate_dirichlet: bool,
    /// Remove rows left without entries by the elimination.
    pub drop_empty_rows: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            pde: Pde::Poisson,
            scaling: ScalingSpec::unit(),
            boundary_laplacian: false,
            eliminate_dirichlet: true,
            drop_empty_rows: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Interior,
    Dirichlet,
    Neumann,
    /// Extra Laplacian equation at a boundary trial node.
    BoundaryLaplacian,
}

/// One equation of the global system before assembly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowSpec {
    pub kind: RowKind,
    pub point: Point,
    pub normal: Option<Point>,
    pub stencil: usize,
    pub op: Operator,
}

/// The global system `D̄ u = F̃` over the free unknowns.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub row_kinds: Vec<RowKind>,
    pub row_scale: Vec<f64>,
    /// Trial-node index of each column.
    pub columns: Vec<usize>,
    /// Eliminated Dirichlet trial nodes and their prescribed values.
    pub dirichlet: Vec<(usize, f64)>,
    pub num_trial: usize,
}

impl GlobalSystem {
    /// Full trial-node vector from the free unknowns.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_trial];
        for (c, &i) in self.columns.iter().enumerate() {
            u[i] = free[c];
        }
        for &(i, v) in &self.dirichlet {
            u[i] = v;
        }
        u
    }

    /// Map from trial-node index to column index.
    pub fn column_map(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.num_trial];
        for (c, &i) in self.columns.iter().enumerate() {
            map[i] = Some(c);
        }
        map
    }

    /// `r = D̄ u − F̃`.
    pub fn residual(&self, free: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.matvec(free);
        for (ri, fi) in r.iter_mut().zip(&self.rhs) {
            *ri -= fi;
        }
        r
    }
}

fn row_operator(kind: NodeKind, normal: Option<Point>, pde: &Pde) -> Result<(RowKind, Operator)> {
    Ok(match (kind, pde) {
        (NodeKind::Dirichlet, _) => (RowKind::Dirichlet, Operator::Identity),
        (NodeKind::Interior, Pde::Poisson) => (RowKind::Interior, Operator::Laplacian),
        (NodeKind::Neumann, Pde::Poisson) => {
            let n =
                normal.ok_or_else(|| Error::Dimension("Neumann point without a normal".into()))?;
            (RowKind::Neumann, Operator::NormalDerivative(n))
        }
        (NodeKind::Interior, Pde::Advection { velocity }) => {
            (RowKind::Interior, Operator::Directional(negate(velocity)))
        }
        (NodeKind::Neumann, Pde::Advection { velocity }) => {
            (RowKind::Neumann, Operator::Directional(negate(velocity)))
        }
        (NodeKind::Ghost, _) => {
            return Err(Error::Dimension(
                "ghost nodes cannot be evaluation points".into(),
            ))
        }
    })
}

fn negate(v: &Point) -> Point {
    [-v[0], -v[1], -v[2]]
}

/// Equations of the global system: one per evaluation point, followed by
/// the boundary Laplacian rows when requested.
pub fn row_plan(
    trial: &NodeSet,
    evaluation: &EvaluationSet,
    opts: &AssemblyOptions,
) -> Result<Vec<RowSpec>> {
    let assignment = assign_evaluation_points(&evaluation.nodes.points, trial);
    let mut rows = Vec::with_capacity(evaluation.nodes.len());
    for i in 0..evaluation.nodes.len() {
        let (kind, op) = row_operator(
            evaluation.nodes.kinds[i],
            evaluation.nodes.normals[i],
            &opts.pde,
        )?;
        rows.push(RowSpec {
            kind,
            point: evaluation.nodes.points[i],
            normal: evaluation.nodes.normals[i],
            stencil: assignment[i],
            op,
        });
    }
    if opts.boundary_laplacian {
        for b in 0..trial.len() {
            if trial.kinds[b].is_boundary() {
                rows.push(RowSpec {
                    kind: RowKind::BoundaryLaplacian,
                    point: trial.points[b],
                    normal: trial.normals[b],
                    stencil: b,
                    op: Operator::Laplacian,
                });
            }
        }
    }
    Ok(rows)
}

pub fn weight_requests(rows: &[RowSpec]) -> Vec<WeightRequest> {
    rows.iter()
        .map(|r| WeightRequest {
            stencil: r.stencil,
            point: r.point,
            op: r.op,
        })
        .collect()
}

/// Identity requests for arbitrary points, each using the stencil of its
/// nearest non-ghost trial node.
pub fn evaluation_requests(trial: &NodeSet, points: &[Point]) -> Vec<WeightRequest> {
    assign_evaluation_points(points, trial)
        .into_iter()
        .zip(points)
        .map(|(k, p)| WeightRequest {
            stencil: k,
            point: *p,
            op: Operator::Identity,
        })
        .collect()
}

/// Sparse matrix whose row `i` holds `weights[i]` at the stencil columns of
/// `requests[i]`.
pub fn weights_to_csr(
    rows_stencils: impl Iterator<Item = usize>,
    weights: &[Vec<f64>],
    table: &crate::stencil::StencilTable,
    ncols: usize,
) -> CsrMatrix {
    let rows = rows_stencils
        .zip(weights)
        .map(|(k, w)| {
            table
                .row(k)
                .iter()
                .copied()
                .zip(w.iter().copied())
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(ncols, rows)
}

/// Per-row scaling factors `β · (|region| / M_region)^½`. Boundary Laplacian
/// rows use the interior factor.
pub fn row_scaling(
    rows: &[RowSpec],
    measures: &RegionMeasures,
    scaling: &ScalingSpec,
) -> Result<Vec<f64>> {
    let count = |k: RowKind| rows.iter().filter(|r| r.kind == k).count();
    let m_dir = count(RowKind::Dirichlet);
    let m_neu = count(RowKind::Neumann);
    let m_int = count(RowKind::Interior);
    let factor = |measure: f64, m: usize, beta: f64| -> Result<f64> {
        if m == 0 {
            return Ok(beta);
        }
        if !(measure > 0.0) {
            return Err(Error::Dimension(format!(
                "region measure {measure} is not positive but has {m} evaluation points"
            )));
        }
        Ok(beta * (measure / m as f64).sqrt())
    };
    let f_dir = factor(measures.dirichlet, m_dir, scaling.dirichlet)?;
    let f_neu = factor(measures.neumann, m_neu, scaling.neumann)?;
    let f_int = factor(measures.volume, m_int, scaling.interior)?;
    Ok(rows
        .iter()
        .map(|r| match r.kind {
            RowKind::Dirichlet => f_dir,
            RowKind::Neumann => f_neu,
            RowKind::Interior | RowKind::BoundaryLaplacian => f_int,
        })
        .collect())
}

/// Right-hand side of each row from the exact solution.
pub fn row_rhs(rows: &[RowSpec], problem: &dyn ExactSolution, pde: &Pde) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| match (r.kind, pde) {
            (RowKind::Dirichlet, _) => Ok(problem.value(&r.point)),
            (RowKind::Interior | RowKind::BoundaryLaplacian, Pde::Poisson) => {
                problem.laplacian(&r.point)
            }
            (RowKind::Neumann, Pde::Poisson) => {
                Ok(problem.normal_derivative(&r.point, &r.normal.unwrap_or([0.0; 3])))
            }
            (_, Pde::Advection { velocity }) => Ok(-problem.normal_derivative(&r.point, velocity)),
        })
        .collect()
}

/// Assembles `D̄ u = F̃`: scaled rows, Dirichlet columns moved to the
/// right-hand side, and (optionally) empty rows removed.
pub fn assemble(
    x: &NodeSet,
    rows: &[RowSpec],
    raw: CsrMatrix,
    problem: &dyn ExactSolution,
    measures: &RegionMeasures,
    opts: &AssemblyOptions,
) -> Result<GlobalSystem> {
    if raw.nrows != rows.len() || raw.ncols != x.len() {
        return Err(Error::Dimension(format!(
            "operator is {}x{} for {} rows and {} trial nodes",
            raw.nrows,
            raw.ncols,
            rows.len(),
            x.len()
        )));
    }
    let scale = row_scaling(rows, measures, &opts.scaling)?;
    let mut rhs = row_rhs(rows, problem, &opts.pde)?;
    let mut matrix = raw;
    matrix.scale_rows(&scale);
    for (f, s) in rhs.iter_mut().zip(&scale) {
        *f *= s;
    }
    let dirichlet: Vec<(usize, f64)> = if opts.eliminate_dirichlet {
        (0..x.len())
            .filter(|&i| x.kinds[i] == NodeKind::Dirichlet)
            .map(|i| (i, problem.value(&x.points[i])))
            .collect()
    } else {
        Vec::new()
    };
    let mut boundary_values = vec![0.0; x.len()];
    let mut map: Vec<Option<usize>> = vec![None; x.len()];
    for &(i, v) in &dirichlet {
        boundary_values[i] = v;
    }
    let mut columns = Vec::new();
    let mut is_dirichlet = vec![false; x.len()];
    for &(i, _) in &dirichlet {
        is_dirichlet[i] = true;
    }
    for i in 0..x.len() {
        if !is_dirichlet[i] {
            map[i] = Some(columns.len());
            columns.push(i);
        }
    }
    if !dirichlet.is_empty() {
        let moved = matrix.matvec(&boundary_values);
        for (f, m) in rhs.iter_mut().zip(&moved) {
            *f -= m;
        }
        matrix = matrix.select_columns(&map, columns.len());
    }
    let mut row_kinds: Vec<RowKind> = rows.iter().map(|r| r.kind).collect();
    let mut row_scale = scale;
    if opts.drop_empty_rows {
        let keep: Vec<usize> = (0..matrix.nrows)
            .filter(|&i| matrix.row_nnz(i) > 0)
            .collect();
        if keep.len() < matrix.nrows {
            matrix = matrix.select_rows(&keep);
            rhs = keep.iter().map(|&i| rhs[i]).collect();
            row_kinds = keep.iter().map(|&i| row_kinds[i]).collect();
            row_scale = keep.iter().map(|&i| row_scale[i]).collect();
        }
    }
    Ok(GlobalSystem {
        matrix,
        rhs,
        row_kinds,
        row_scale,
        columns,
        dirichlet,
        num_trial: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BcMode, Domain};
    use crate::local_weights::{compute_weights, LocalSystem, PhsBasis};
    use crate::nodes::{add_ghost_layer, generate_evaluation_set, generate_nodes};
    use crate::problems::Problem;
    use crate::stencil::build_stencils;

    struct Setup {
        x: NodeSet,
        y: EvaluationSet,
        rows: Vec<RowSpec>,
        table: crate::stencil::StencilTable,
        raw: CsrMatrix,
        basis: PhsBasis,
    }

    fn setup(
        spacing: f64,
        oversampling: f64,
        degree: u32,
        ghost: bool,
        opts: &AssemblyOptions,
    ) -> Setup {
        let d = Domain::star();
        let mut x = generate_nodes(&d, spacing, 1).unwrap();
        if ghost {
            x = add_ghost_layer(&d, &x, spacing).0;
        }
        let y = generate_evaluation_set(&d, &x, oversampling, 1, BcMode::Mixed).unwrap();
        let basis = PhsBasis::cubic(degree, 2);
        let table = build_stencils(&x, basis.default_stencil_size()).unwrap();
        let rows = row_plan(&x, &y, opts).unwrap();
        let (w, _) = compute_weights(&x, &table, basis, &weight_requests(&rows)).unwrap();
        let raw = weights_to_csr(rows.iter().map(|r| r.stencil), &w, &table, x.len());
        Setup {
            x,
            y,
            rows,
            table,
            raw,
            basis,
        }
    }

    #[test]
    fn collocation_is_square_and_evaluation_is_identity() {
        let opts = AssemblyOptions::default();
        let s = setup(0.15, 1.0, 3, false, &opts);
        assert_eq!(s.raw.nrows, s.x.len());
        let e = evaluation_requests(&s.x, &s.y.nodes.points);
        let (w, _) = compute_weights(&s.x, &s.table, s.basis, &e).unwrap();
        let emat = weights_to_csr(e.iter().map(|r| r.stencil), &w, &s.table, s.x.len());
        for i in 0..emat.nrows {
            let row: Vec<(usize, f64)> = emat.row(i).filter(|e| e.1 != 0.0).collect();
            assert_eq!(row, vec![(i, 1.0)]);
        }
        let measures = Domain::star().region_measures(BcMode::Mixed);
        let sys = assemble(
            &s.x,
            &s.rows,
            s.raw,
            &Problem::RationalSine,
            &measures,
            &opts,
        )
        .unwrap();
        assert_eq!(sys.matrix.nrows, sys.matrix.ncols);
    }

    #[test]
    fn ghost_sizes() {
        let opts = AssemblyOptions {
            boundary_laplacian: true,
            ..AssemblyOptions::default()
        };
        let s = setup(0.15, 3.0, 3, true, &opts);
        let ng = s.x.count(NodeKind::Ghost);
        assert_eq!(s.raw.nrows, s.y.nodes.len() + ng);
        assert_eq!(s.raw.ncols, s.x.len());
        let colloc = setup(0.15, 1.0, 3, true, &opts);
        let measures = Domain::star().region_measures(BcMode::Mixed);
        let sys = assemble(
            &colloc.x,
            &colloc.rows,
            colloc.raw,
            &Problem::NonAnalytic,
            &measures,
            &opts,
        )
        .unwrap();
        assert_eq!(sys.matrix.nrows, sys.matrix.ncols);
    }

    #[test]
    fn sparse_rows_match_direct_local_evaluation() {
        let opts = AssemblyOptions::default();
        let s = setup(0.2, 3.0, 3, false, &opts);
        assert!(s.y.nodes.len() as f64 > 2.4 * s.x.len() as f64);
        let dense = s.raw.to_dense();
        for (i, r) in s.rows.iter().enumerate() {
            assert!(s.raw.row_nnz(i) <= s.table.size);
            let pts: Vec<Point> = s
                .table
                .row(r.stencil)
                .iter()
                .map(|&j| s.x.points[j])
                .collect();
            let w = LocalSystem::new(r.stencil, &pts, s.basis)
                .unwrap()
                .weights(&r.point, &r.op);
            let mut expected = vec![0.0; s.x.len()];
            for (&j, wj) in s.table.row(r.stencil).iter().zip(&w) {
                expected[j] += wj;
            }
            for j in 0..s.x.len() {
                assert!((dense[(i, j)] - expected[j]).abs() <= 1e-12 * (1.0 + expected[j].abs()));
            }
        }
    }

    #[test]
    fn row_operators_follow_boundary_mode() {
        let opts = AssemblyOptions::default();
        let s = setup(0.2, 2.0, 2, false, &opts);
        for r in &s.rows {
            match r.kind {
                RowKind::Dirichlet => assert_eq!(r.op, Operator::Identity),
                RowKind::Neumann => assert!(matches!(r.op, Operator::NormalDerivative(_))),
                RowKind::Interior => assert_eq!(r.op, Operator::Laplacian),
                RowKind::BoundaryLaplacian => unreachable!(),
            }
        }
        let d = Domain::star();
        let x = generate_nodes_mode(&d, BcMode::PureDirichlet);
        let y = generate_evaluation_set(&d, &x, 2.0, 1, BcMode::PureDirichlet).unwrap();
        let rows = row_plan(&x, &y, &opts).unwrap();
        assert!(rows.iter().all(|r| r.kind != RowKind::Neumann));
        assert!(rows.iter().any(|r| r.kind == RowKind::Dirichlet));
    }

    fn generate_nodes_mode(domain: &Domain, mode: BcMode) -> NodeSet {
        crate::nodes::generate_nodes_with(
            domain,
            0.2,
            1,
            &crate::nodes::GeneratorOptions {
                bc_mode: mode,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn elimination_moves_boundary_data() {
        let opts = AssemblyOptions::default();
        let s = setup(0.2, 2.0, 3, false, &opts);
        let measures = Domain::star().region_measures(BcMode::Mixed);
        let full = assemble(
            &s.x,
            &s.rows,
            s.raw.clone(),
            &Problem::RationalSine,
            &measures,
            &AssemblyOptions {
                eliminate_dirichlet: false,
                drop_empty_rows: false,
                ..opts
            },
        )
        .unwrap();
        let reduced = assemble(
            &s.x,
            &s.rows,
            s.raw,
            &Problem::RationalSine,
            &measures,
            &AssemblyOptions {
                drop_empty_rows: false,
                ..opts
            },
        )
        .unwrap();
        // any u with the Dirichlet values fixed gives the same residual both ways
        let u_full: Vec<f64> = (0..s.x.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut u_fixed = u_full.clone();
        for &(i, v) in &reduced.dirichlet {
            u_fixed[i] = v;
        }
        let free: Vec<f64> = reduced.columns.iter().map(|&i| u_fixed[i]).collect();
        let r1 = full.residual(&u_fixed);
        let r2 = reduced.residual(&free);
        for (a, b) in r1.iter().zip(&r2) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
        assert_eq!(reduced.expand(&free), u_fixed);
        // zero right-hand side with no elimination: u = 0 gives r = −F
        let r0 = full.residual(&vec![0.0; s.x.len()]);
        for (a, b) in r0.iter().zip(&full.rhs) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn unit_scaling_splits_into_regions() {
        let opts = AssemblyOptions::default();
        let s = setup(0.2, 2.0, 3, false, &opts);
        let measures = Domain::star().region_measures(BcMode::Mixed);
        let scale = row_scaling(&s.rows, &measures, &ScalingSpec::unit()).unwrap();
        let m_int = s
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Interior)
            .count() as f64;
        let m_dir = s
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Dirichlet)
            .count() as f64;
        for (r, f) in s.rows.iter().zip(&scale) {
            match r.kind {
                RowKind::Interior => assert!((f * f - measures.volume / m_int).abs() < 1e-14),
                RowKind::Dirichlet => assert!((f * f - measures.dirichlet / m_dir).abs() < 1e-14),
                _ => {}
            }
        }
    }
}
