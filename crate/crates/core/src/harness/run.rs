//! Single runs: one solve, one spectrum, interpolation errors.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble, evaluation_requests, row_plan, weight_requests, weights_to_csr, AssemblyOptions,
    GlobalSystem,
};
use crate::error::{Error, Result};
use crate::geometry::{BcMode, Domain, Point, RegionMeasures};
use crate::harness::config::{ExperimentConfig, PdeKind};
use crate::local_weights::{compute_weights, Operator, PhsBasis, WeightRequest};
use crate::nodes::{
    add_ghost_layer, generate_evaluation_set, generate_nodes_with, EvaluationSet, GeneratorOptions,
    NodeKind, NodeSet,
};
use crate::problems::{relative_error, ExactSolution};
use crate::solver::{self, condition_number, sigma_max, NormalFactor, SolveStats, Spectrum};
use crate::stencil::{build_stencils, StencilTable};

/// Everything measured by one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub degree: u32,
    pub oversampling: f64,
    pub spacing: f64,
    /// Trial nodes, ghosts excluded.
    pub trial_nodes: usize,
    pub n_ghost: usize,
    /// Evaluation points.
    pub evaluation_points: usize,
    pub error: f64,
    pub error_points: usize,
    pub stability_norm: Option<f64>,
    pub sigma_max_e: Option<f64>,
    pub sigma_min_d: Option<f64>,
    pub kappa_d: Option<f64>,
    pub kappa_e: Option<f64>,
    pub max_local_condition: f64,
    pub r1_seconds: f64,
    pub r2_seconds: f64,
    pub solve: SolveStats,
}

/// Node sets of one run.
pub struct Discretization {
    pub domain: Domain,
    pub measures: RegionMeasures,
    pub trial: NodeSet,
    pub evaluation: EvaluationSet,
    pub spacing: f64,
}

fn stage<T>(result: Result<T>, name: &'static str) -> Result<T> {
    result.map_err(|e| e.at(name))
}

fn bc_mode(cfg: &ExperimentConfig) -> BcMode {
    match cfg.pde {
        PdeKind::Advection => BcMode::Inflow,
        PdeKind::Poisson => cfg.bc_mode,
    }
}

/// Node spacing that gives about `target` trial nodes (within 2%).
pub fn spacing_for_count(domain: &Domain, target: usize, seed: u64, mode: BcMode) -> Result<f64> {
    let dim_f = domain.dim() as f64;
    let volume = domain.region_measures(mode).volume;
    let density = match domain.dim() {
        1 => 1.0,
        2 => 3f64.sqrt() / 2.0,
        _ => 1.0 / 2f64.sqrt(),
    };
    let mut spacing = (volume / (density * target as f64)).powf(1.0 / dim_f);
    let opts = GeneratorOptions {
        bc_mode: mode,
        ..GeneratorOptions::default()
    };
    for _ in 0..6 {
        let count = generate_nodes_with(domain, spacing, seed, &opts)?.len() as f64;
        let ratio = count / target as f64;
        if (ratio - 1.0).abs() <= 0.02 {
            break;
        }
        spacing *= ratio.powf(1.0 / dim_f);
    }
    Ok(spacing)
}

/// Generates X (with ghosts when requested) and Y for a configuration.
pub fn discretize(cfg: &ExperimentConfig, spacing: f64) -> Result<Discretization> {
    let domain = stage(cfg.domain(), "geometry")?;
    let mode = bc_mode(cfg);
    let measures = domain.region_measures(mode);
    let opts = GeneratorOptions {
        bc_mode: mode,
        ..GeneratorOptions::default()
    };
    let mut trial = stage(
        generate_nodes_with(&domain, spacing, cfg.seed, &opts),
        "nodes",
    )?;
    if cfg.method.ghost() {
        trial = add_ghost_layer(&domain, &trial, spacing).0;
    }
    let evaluation = stage(
        generate_evaluation_set(
            &domain,
            &trial,
            cfg.effective_oversampling(),
            cfg.seed,
            mode,
        ),
        "evaluation set",
    )?;
    Ok(Discretization {
        domain,
        measures,
        trial,
        evaluation,
        spacing,
    })
}

fn basis_for(cfg: &ExperimentConfig, dim: usize) -> Result<(PhsBasis, usize)> {
    let basis = PhsBasis::new(cfg.phs_index, cfg.degree, dim)?;
    let stencil_size = cfg
        .stencil_size
        .unwrap_or_else(|| basis.default_stencil_size());
    Ok((basis, stencil_size))
}

fn assembly_options(cfg: &ExperimentConfig, spacing: f64) -> AssemblyOptions {
    AssemblyOptions {
        pde: cfg.pde_operator(),
        scaling: cfg.scaling(spacing),
        boundary_laplacian: cfg.method.ghost() || cfg.boundary_laplacian,
        eliminate_dirichlet: true,
        drop_empty_rows: true,
    }
}

/// Runs the full pipeline for one spacing.
pub fn run_solve(cfg: &ExperimentConfig, spacing: f64) -> Result<SolveReport> {
    let disc = discretize(cfg, spacing)?;
    run_solve_on(cfg, &disc)
}

/// Runs the pipeline on given node sets.
pub fn run_solve_on(cfg: &ExperimentConfig, disc: &Discretization) -> Result<SolveReport> {
    let problem = stage(cfg.problem(), "problem")?;
    let Discretization {
        domain,
        measures,
        trial,
        evaluation,
        spacing,
    } = disc;
    let spacing = *spacing;
    let (basis, stencil_size) = stage(basis_for(cfg, domain.dim()), "basis")?;
    let opts = assembly_options(cfg, spacing);

    // the error is measured on a fixed oversampled set shared by all methods
    let error_set = if (cfg.error_oversampling - cfg.effective_oversampling()).abs() < 1e-12 {
        None
    } else {
        Some(stage(
            generate_evaluation_set(
                domain,
                trial,
                cfg.error_oversampling,
                cfg.seed,
                bc_mode(cfg),
            ),
            "error set",
        )?)
    };
    let error_points: Vec<Point> = error_set
        .as_ref()
        .unwrap_or(evaluation)
        .nodes
        .points
        .clone();

    let r1 = Instant::now();
    let table = stage(build_stencils(trial, stencil_size), "stencils")?;
    let rows = stage(row_plan(trial, evaluation, &opts), "stencils")?;
    let mut requests = weight_requests(&rows);
    let n_rows = requests.len();
    let e_requests = evaluation_requests(trial, &evaluation.nodes.points);
    let n_e = e_requests.len();
    requests.extend(e_requests);
    if error_set.is_some() {
        requests.extend(evaluation_requests(trial, &error_points));
    }
    let (weights, wstats) = stage(
        compute_weights(trial, &table, basis, &requests),
        "local weights",
    )?;
    let r1_seconds = r1.elapsed().as_secs_f64();

    let r2 = Instant::now();
    let stencil_of = |range: std::ops::Range<usize>| {
        requests[range]
            .iter()
            .map(|r| r.stencil)
            .collect::<Vec<_>>()
    };
    let raw = weights_to_csr(
        stencil_of(0..n_rows).into_iter(),
        &weights[..n_rows],
        &table,
        trial.len(),
    );
    let sys = stage(
        assemble(trial, &rows, raw, &problem, measures, &opts),
        "assembly",
    )?;
    let sol = stage(solver::solve(&sys, cfg.refinement), "solve")?;
    let r2_seconds = r2.elapsed().as_secs_f64();

    let e_y = weights_to_csr(
        stencil_of(n_rows..n_rows + n_e).into_iter(),
        &weights[n_rows..n_rows + n_e],
        &table,
        trial.len(),
    );
    let e_err = if error_set.is_some() {
        weights_to_csr(
            stencil_of(n_rows + n_e..requests.len()).into_iter(),
            &weights[n_rows + n_e..],
            &table,
            trial.len(),
        )
    } else {
        e_y.clone()
    };
    let approx = e_err.matvec(&sol.trial);
    let exact: Vec<f64> = error_points.iter().map(|p| problem.value(p)).collect();
    let error = stage(relative_error(&approx, &exact), "error")?;

    let mut report = SolveReport {
        method: cfg.method.label().to_string(),
        degree: cfg.degree,
        oversampling: cfg.effective_oversampling(),
        spacing,
        trial_nodes: trial.len() - trial.count(NodeKind::Ghost),
        n_ghost: trial.count(NodeKind::Ghost),
        evaluation_points: evaluation.nodes.len(),
        error,
        error_points: error_points.len(),
        stability_norm: None,
        sigma_max_e: None,
        sigma_min_d: None,
        kappa_d: None,
        kappa_e: None,
        max_local_condition: wstats.max_condition,
        r1_seconds,
        r2_seconds,
        solve: sol.stats.clone(),
    };

    if cfg.measure_stability || cfg.measure_conditioning {
        let map = sys.column_map();
        let e_free = e_y.select_columns(&map, sys.columns.len());
        let owned;
        let factor = match &sol.normal_factor {
            Some(f) => f,
            None => {
                owned = stage(NormalFactor::new(&sys.matrix), "stability")?;
                &owned
            }
        };
        let mut e_bar = e_free.clone();
        let s = (measures.volume / evaluation.nodes.len() as f64).sqrt();
        e_bar.scale_rows(&vec![s; e_bar.nrows]);
        let spectral = stage(
            solver::stability_norm(&e_bar, &sys.matrix, factor),
            "stability",
        )?;
        report.stability_norm = Some(spectral.stability_norm);
        report.sigma_max_e = Some(spectral.sigma_max_e);
        report.sigma_min_d = Some(spectral.sigma_min_d);
        if cfg.measure_conditioning {
            let smax_d = stage(sigma_max(&sys.matrix), "conditioning")?;
            report.kappa_d = Some(smax_d / spectral.sigma_min_d);
            report.kappa_e = Some(stage(condition_number(&e_free, None), "conditioning")?);
        }
    }
    Ok(report)
}

/// Spectrum of the product of the evaluation and operator matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub trial_nodes: usize,
    pub evaluation_points: usize,
    pub oversampling: f64,
    pub spectrum: Spectrum,
    pub min_real: f64,
    pub max_real: f64,
}

/// Eigenvalues of `E D⁺` (or `D E⁺`) over all trial nodes, Dirichlet
/// conditions kept as identity rows.
pub fn run_spectrum(cfg: &ExperimentConfig, spacing: f64) -> Result<SpectrumReport> {
    if cfg.method.ghost() || cfg.boundary_laplacian {
        return Err(Error::Unsupported(
            "spectra need as many operator rows as evaluation points".into(),
        )
        .at("spectrum"));
    }
    let disc = discretize(cfg, spacing)?;
    let problem = stage(cfg.problem(), "problem")?;
    let (basis, stencil_size) = stage(basis_for(cfg, disc.domain.dim()), "basis")?;
    let opts = AssemblyOptions {
        eliminate_dirichlet: false,
        drop_empty_rows: false,
        ..assembly_options(cfg, spacing)
    };
    let trial = &disc.trial;
    let table = stage(build_stencils(trial, stencil_size), "stencils")?;
    let rows = stage(row_plan(trial, &disc.evaluation, &opts), "stencils")?;
    let mut requests = weight_requests(&rows);
    let n_rows = requests.len();
    requests.extend(evaluation_requests(trial, &disc.evaluation.nodes.points));
    let (weights, _) = stage(
        compute_weights(trial, &table, basis, &requests),
        "local weights",
    )?;
    let stencils: Vec<usize> = requests.iter().map(|r| r.stencil).collect();
    let raw = weights_to_csr(
        stencils[..n_rows].iter().copied(),
        &weights[..n_rows],
        &table,
        trial.len(),
    );
    let sys = stage(
        assemble(trial, &rows, raw, &problem, &disc.measures, &opts),
        "assembly",
    )?;
    let mut e = weights_to_csr(
        stencils[n_rows..].iter().copied(),
        &weights[n_rows..],
        &table,
        trial.len(),
    );
    let s = (disc.measures.volume / disc.evaluation.nodes.len() as f64).sqrt();
    e.scale_rows(&vec![s; e.nrows]);
    let spectrum = stage(
        solver::product_spectrum(&e, &sys.matrix, cfg.spectrum_order),
        "spectrum",
    )?;
    let min_real = spectrum
        .eigenvalues
        .iter()
        .map(|z| z.0)
        .fold(f64::INFINITY, f64::min);
    let max_real = spectrum
        .eigenvalues
        .iter()
        .map(|z| z.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumReport {
        trial_nodes: trial.len(),
        evaluation_points: disc.evaluation.nodes.len(),
        oversampling: cfg.effective_oversampling(),
        spectrum,
        min_real,
        max_real,
    })
}

/// Maximum errors of the interpolant and of its Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationErrors {
    pub spacing: f64,
    pub trial_nodes: usize,
    pub value: f64,
    pub laplacian: f64,
}

/// Measures `‖I_h u − u‖_∞` and `‖Δ I_h u − Δu‖_∞` over an oversampled
/// point set, each point using the stencil of its nearest node.
pub fn interpolation_errors(
    domain: &Domain,
    problem: &dyn ExactSolution,
    spacing: f64,
    degree: u32,
    seed: u64,
) -> Result<InterpolationErrors> {
    let trial = generate_nodes_with(domain, spacing, seed, &GeneratorOptions::default())?;
    let evaluation = generate_evaluation_set(domain, &trial, 3.0, seed, BcMode::Mixed)?;
    let basis = PhsBasis::cubic(degree, domain.dim());
    let table = build_stencils(&trial, basis.default_stencil_size())?;
    let mut requests = evaluation_requests(&trial, &evaluation.nodes.points);
    let lap: Vec<WeightRequest> = requests
        .iter()
        .map(|r| WeightRequest {
            op: Operator::Laplacian,
            ..*r
        })
        .collect();
    requests.extend(lap);
    let (w, _) = compute_weights(&trial, &table, basis, &requests)?;
    let u: Vec<f64> = trial.points.iter().map(|p| problem.value(p)).collect();
    let count = evaluation.nodes.len();
    let mut value: f64 = 0.0;
    let mut laplacian: f64 = 0.0;
    for (i, req) in requests.iter().enumerate() {
        let approx: f64 = table
            .row(req.stencil)
            .iter()
            .zip(&w[i])
            .map(|(&j, wj)| wj * u[j])
            .sum();
        if i < count {
            value = value.max((approx - problem.value(&req.point)).abs());
        } else {
            laplacian = laplacian.max((approx - problem.laplacian(&req.point)?).abs());
        }
    }
    Ok(InterpolationErrors {
        spacing,
        trial_nodes: trial.len(),
        value,
        laplacian,
    })
}

/// Uniform 1D nodes at `(i + ½) h` on `[0, 1]`.
pub fn uniform_line(count: usize) -> NodeSet {
    let spacing = 1.0 / count as f64;
    let mut s = NodeSet {
        dim: 1,
        points: Vec::new(),
        kinds: Vec::new(),
        normals: Vec::new(),
        target_spacing: spacing,
        seed: 0,
    };
    for i in 0..count {
        s.push(
            [(i as f64 + 0.5) * spacing, 0.0, 0.0],
            NodeKind::Interior,
            None,
        );
    }
    s
}

fn line_table(nodes: &NodeSet, stencil_size: usize) -> Result<StencilTable> {
    build_stencils(nodes, stencil_size)
}

/// Samples the global cardinal function of node `node` on `[0, 1]`.
pub fn cardinal_trace(
    count: usize,
    stencil_size: usize,
    degree: u32,
    node: usize,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let nodes = uniform_line(count);
    if node >= count {
        return Err(Error::Dimension(format!("node {node} of {count}")));
    }
    let table = line_table(&nodes, stencil_size)?;
    let pts: Vec<Point> = (0..samples)
        .map(|i| [i as f64 / (samples - 1).max(1) as f64, 0.0, 0.0])
        .collect();
    let requests = evaluation_requests(&nodes, &pts);
    let (w, _) = compute_weights(&nodes, &table, PhsBasis::cubic(degree, 1), &requests)?;
    Ok(requests
        .iter()
        .zip(&w)
        .map(|(r, wi)| {
            let v = table
                .row(r.stencil)
                .iter()
                .position(|&j| j == node)
                .map(|k| wi[k])
                .unwrap_or(0.0);
            (r.point[0], v)
        })
        .collect())
}

/// Jump of the interpolant of `f` across the Voronoi edge at `x = 0.5`
/// between the two middle nodes of an even uniform line.
pub fn voronoi_jump(
    count: usize,
    stencil_size: usize,
    degree: u32,
    func: impl Fn(f64) -> f64,
) -> Result<f64> {
    if count % 2 != 0 {
        return Err(Error::Dimension(
            "the edge at 0.5 needs an even node count".into(),
        ));
    }
    let nodes = uniform_line(count);
    let table = line_table(&nodes, stencil_size)?;
    let edge = [0.5, 0.0, 0.0];
    let left = count / 2 - 1;
    let right = count / 2;
    let requests = [
        WeightRequest {
            stencil: left,
            point: edge,
            op: Operator::Identity,
        },
        WeightRequest {
            stencil: right,
            point: edge,
            op: Operator::Identity,
        },
    ];
    let (w, _) = compute_weights(&nodes, &table, PhsBasis::cubic(degree, 1), &requests)?;
    let eval = |k: usize, wi: &[f64]| -> f64 {
        table
            .row(k)
            .iter()
            .zip(wi)
            .map(|(&j, wj)| wj * func(nodes.points[j][0]))
            .sum()
    };
    Ok((eval(left, &w[0]) - eval(right, &w[1])).abs())
}

/// Assembles the global system of a run without solving it.
pub fn assemble_system(cfg: &ExperimentConfig, disc: &Discretization) -> Result<GlobalSystem> {
    let problem = stage(cfg.problem(), "problem")?;
    let (basis, stencil_size) = stage(basis_for(cfg, disc.domain.dim()), "basis")?;
    let opts = assembly_options(cfg, disc.spacing);
    let table = stage(build_stencils(&disc.trial, stencil_size), "stencils")?;
    let rows = stage(row_plan(&disc.trial, &disc.evaluation, &opts), "stencils")?;
    let requests = weight_requests(&rows);
    let (w, _) = stage(
        compute_weights(&disc.trial, &table, basis, &requests),
        "local weights",
    )?;
    let raw = weights_to_csr(
        requests.iter().map(|r| r.stencil),
        &w,
        &table,
        disc.trial.len(),
    );
    stage(
        assemble(&disc.trial, &rows, raw, &problem, &disc.measures, &opts),
        "assembly",
    )
}
