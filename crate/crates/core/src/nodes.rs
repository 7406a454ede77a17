//! Node generation: the trial set X, the oversampled evaluation set Y, the
//! ghost layer, spacing diagnostics and the plain-text node format.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    add, dist2, norm, scale, spherical_angles, spherical_area_element, sub, BcMode, BoundaryClass,
    BoundaryParam, Domain, Point,
};
use crate::kdtree::KdTree;

/// Role of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Interior,
    Dirichlet,
    Neumann,
    /// Extra trial node outside the domain; never an evaluation point.
    Ghost,
}

impl NodeKind {
    pub fn tag(self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::Dirichlet => "dirichlet",
            NodeKind::Neumann => "neumann",
            NodeKind::Ghost => "ghost",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "interior" | "i" | "0" => Ok(NodeKind::Interior),
            "dirichlet" | "d" | "1" => Ok(NodeKind::Dirichlet),
            "neumann" | "n" | "2" => Ok(NodeKind::Neumann),
            "ghost" | "g" | "3" => Ok(NodeKind::Ghost),
            other => Err(Error::Parse(format!("unknown node class '{other}'"))),
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, NodeKind::Dirichlet | NodeKind::Neumann)
    }
}

impl From<BoundaryClass> for NodeKind {
    fn from(c: BoundaryClass) -> Self {
        match c {
            BoundaryClass::Interior => NodeKind::Interior,
            BoundaryClass::Dirichlet => NodeKind::Dirichlet,
            BoundaryClass::Neumann => NodeKind::Neumann,
        }
    }
}

/// A set of nodes with per-node class and, for boundary and ghost nodes, the
/// outward normal of the boundary point they belong to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub dim: usize,
    pub points: Vec<Point>,
    pub kinds: Vec<NodeKind>,
    pub normals: Vec<Option<Point>>,
    pub target_spacing: f64,
    pub seed: u64,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, point: Point, kind: NodeKind, normal: Option<Point>) {
        self.points.push(point);
        self.kinds.push(kind);
        self.normals.push(normal);
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Indices of all nodes that are not ghosts.
    pub fn physical_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.kinds[i] != NodeKind::Ghost)
            .collect()
    }

    pub fn num_boundary(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_boundary()).count()
    }

    /// Order-sensitive hash of the exact coordinates and classes.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (i, p) in self.points.iter().enumerate() {
            for v in p {
                v.to_bits().hash(&mut h);
            }
            self.kinds[i].hash(&mut h);
        }
        h.finish()
    }

    /// Writes the plain-text node format.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# dim={} h={} n={}",
            self.dim,
            self.target_spacing,
            self.len()
        )?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            for k in 0..self.dim {
                write!(line, "{:e} ", self.points[i][k]).unwrap();
            }
            line.push_str(self.kinds[i].tag());
            if let Some(n) = self.normals[i] {
                for v in n.iter().take(self.dim) {
                    write!(line, " {v:e}").unwrap();
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the plain-text node format.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty node file".into()))??;
        let mut dim = None;
        let mut h = None;
        let mut n = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some((key, val)) = tok.split_once('=') {
                let bad = || Error::Parse(format!("bad header field '{tok}'"));
                match key {
                    "dim" => dim = Some(val.parse::<usize>().map_err(|_| bad())?),
                    "h" => h = Some(val.parse::<f64>().map_err(|_| bad())?),
                    "n" => n = Some(val.parse::<usize>().map_err(|_| bad())?),
                    _ => {}
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("header lacks dim".into()))?;
        if !(1..=3).contains(&dim) {
            return Err(Error::Parse(format!("dimension {dim}")));
        }
        let mut set = NodeSet {
            dim,
            points: Vec::new(),
            kinds: Vec::new(),
            normals: Vec::new(),
            target_spacing: h.unwrap_or(f64::NAN),
            seed: 0,
        };
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 2));
            if toks.len() != dim + 1 && toks.len() != 2 * dim + 1 {
                return Err(bad("wrong number of fields"));
            }
            let mut x = [0.0; 3];
            for k in 0..dim {
                x[k] = toks[k].parse().map_err(|_| bad("bad coordinate"))?;
            }
            let kind = NodeKind::from_tag(toks[dim])?;
            let normal = if toks.len() == 2 * dim + 1 {
                let mut nv = [0.0; 3];
                for k in 0..dim {
                    nv[k] = toks[dim + 1 + k].parse().map_err(|_| bad("bad normal"))?;
                }
                Some(nv)
            } else {
                None
            };
            set.push(x, kind, normal);
        }
        if let Some(n) = n {
            if n != set.len() {
                return Err(Error::Parse(format!(
                    "header announces {n} points, file has {}",
                    set.len()
                )));
            }
        }
        Ok(set)
    }
}

/// Fill distance, separation distance and their ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingReport {
    pub fill_distance: f64,
    pub separation_distance: f64,
    pub quality: f64,
}

/// An evaluation set Y together with the position in Y of every trial node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSet {
    pub nodes: NodeSet,
    /// For each Y point, the index of the X node it coincides with.
    pub trial_index: Vec<Option<usize>>,
}

/// Warning produced while adding ghost nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhostWarning {
    pub boundary_node: usize,
    pub ghost: Point,
}

/// Options for the node generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub bc_mode: BcMode,
    /// Relaxation sweeps (at most 50 are used).
    pub relax_iterations: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            bc_mode: BcMode::Mixed,
            relax_iterations: 50,
        }
    }
}

/// Generates a quasi-uniform node set with target spacing `h`.
pub fn generate_nodes(domain: &Domain, spacing: f64, seed: u64) -> Result<NodeSet> {
    generate_nodes_with(domain, spacing, seed, &GeneratorOptions::default())
}

pub fn generate_nodes_with(
    domain: &Domain,
    spacing: f64,
    seed: u64,
    opts: &GeneratorOptions,
) -> Result<NodeSet> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InsufficientNodes {
            interior: 0,
            spacing,
        });
    }
    let dim = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = NodeSet {
        dim,
        points: Vec::new(),
        kinds: Vec::new(),
        normals: Vec::new(),
        target_spacing: spacing,
        seed,
    };
    let boundary = boundary_nodes(domain, spacing, &mut rng)?;
    for (x, param) in &boundary {
        let normal = domain.outward_normal(param)?;
        let class = domain.classify_boundary(x, param, opts.bc_mode);
        set.push(*x, class.into(), Some(normal));
    }
    let n_boundary = set.len();
    let interior = interior_lattice(domain, spacing, &mut rng);
    if interior.len() < 10 {
        return Err(Error::InsufficientNodes {
            interior: interior.len(),
            spacing,
        });
    }
    for x in interior {
        set.push(x, NodeKind::Interior, None);
    }
    relax_interior(
        domain,
        &mut set.points,
        n_boundary,
        spacing,
        opts.relax_iterations.min(50),
    );
    check_distinct(&set.points, dim, spacing)?;
    Ok(set)
}

fn check_distinct(points: &[Point], dim: usize, spacing: f64) -> Result<()> {
    let tree = KdTree::new(points, dim);
    let tol = (1e-9 * spacing) * (1e-9 * spacing);
    for (i, p) in points.iter().enumerate() {
        let nb = tree.knn(p, 2);
        if let Some(&(j, d2)) = nb.iter().find(|(j, _)| *j != i) {
            if d2 <= tol {
                return Err(Error::DegenerateNodeSet(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

/// Boundary nodes with their parameters.
fn boundary_nodes(
    domain: &Domain,
    spacing: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Point, BoundaryParam)>> {
    match domain {
        Domain::PolarCurve { .. } | Domain::Disk { .. } => Ok(polar_boundary(domain, spacing)),
        Domain::Spherical => surface_boundary(domain, spacing, rng),
        Domain::Box { lower, upper, dim } => Ok(box_boundary(lower, upper, *dim, spacing)),
    }
}

/// Arc-length equispaced points on a closed polar curve, the first at θ = 0.
fn polar_boundary(domain: &Domain, spacing: f64) -> Vec<(Point, BoundaryParam)> {
    const K: usize = 1 << 16;
    let dt = 2.0 * PI / K as f64;
    let speed = |t: f64| {
        let a = domain
            .boundary_point(&BoundaryParam::Polar { theta: t + 1e-7 })
            .unwrap();
        let b = domain
            .boundary_point(&BoundaryParam::Polar { theta: t - 1e-7 })
            .unwrap();
        norm(&sub(&a, &b)) / 2e-7
    };
    let mut cumulative = vec![0.0; K + 1];
    let mut prev = speed(0.0);
    for i in 1..=K {
        let s = speed(i as f64 * dt);
        cumulative[i] = cumulative[i - 1] + 0.5 * (prev + s) * dt;
        prev = s;
    }
    let total = cumulative[K];
    let count = ((total / spacing).round() as usize).max(3);
    (0..count)
        .map(|i| {
            let target = total * i as f64 / count as f64;
            let j = cumulative.partition_point(|&c| c <= target).clamp(1, K);
            let frac = (target - cumulative[j - 1]) / (cumulative[j] - cumulative[j - 1]);
            let theta = crate::geometry::wrap_angle((j as f64 - 1.0 + frac) * dt);
            let param = BoundaryParam::Polar { theta };
            (domain.boundary_point(&param).unwrap(), param)
        })
        .collect()
}

fn box_boundary(
    lower: &Point,
    upper: &Point,
    dim: usize,
    spacing: f64,
) -> Vec<(Point, BoundaryParam)> {
    let mut out = Vec::new();
    match dim {
        1 => {
            out.push((
                *lower,
                BoundaryParam::Planar {
                    normal: [-1.0, 0.0, 0.0],
                },
            ));
            out.push((
                *upper,
                BoundaryParam::Planar {
                    normal: [1.0, 0.0, 0.0],
                },
            ));
        }
        2 => {
            let corners = [
                [lower[0], lower[1], 0.0],
                [upper[0], lower[1], 0.0],
                [upper[0], upper[1], 0.0],
                [lower[0], upper[1], 0.0],
            ];
            let normals = [
                [0.0, -1.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [-1.0, 0.0, 0.0],
            ];
            for side in 0..4 {
                let a = corners[side];
                let b = corners[(side + 1) % 4];
                let len = norm(&sub(&b, &a));
                let n = ((len / spacing).round() as usize).max(1);
                let corner_normal = add(&normals[side], &normals[(side + 3) % 4]);
                let corner_normal = scale(&corner_normal, 1.0 / norm(&corner_normal));
                out.push((
                    a,
                    BoundaryParam::Planar {
                        normal: corner_normal,
                    },
                ));
                for i in 1..n {
                    let t = i as f64 / n as f64;
                    let x = add(&a, &scale(&sub(&b, &a), t));
                    out.push((
                        x,
                        BoundaryParam::Planar {
                            normal: normals[side],
                        },
                    ));
                }
            }
        }
        _ => {
            let n: Vec<usize> = (0..3)
                .map(|k| (((upper[k] - lower[k]) / spacing).round() as usize).max(1))
                .collect();
            for i in 0..=n[0] {
                for j in 0..=n[1] {
                    for l in 0..=n[2] {
                        let idx = [i, j, l];
                        let mut normal = [0.0; 3];
                        let mut on_face = false;
                        for k in 0..3 {
                            if idx[k] == 0 {
                                normal[k] = -1.0;
                                on_face = true;
                            } else if idx[k] == n[k] {
                                normal[k] = 1.0;
                                on_face = true;
                            }
                        }
                        if !on_face {
                            continue;
                        }
                        let normal = scale(&normal, 1.0 / norm(&normal));
                        let x = [
                            lower[0] + (upper[0] - lower[0]) * i as f64 / n[0] as f64,
                            lower[1] + (upper[1] - lower[1]) * j as f64 / n[1] as f64,
                            lower[2] + (upper[2] - lower[2]) * l as f64 / n[2] as f64,
                        ];
                        out.push((x, BoundaryParam::Planar { normal }));
                    }
                }
            }
        }
    }
    out
}

/// Area-uniform points on the spherical-type surface, relaxed by tangential
/// repulsion with radial reprojection.
fn surface_boundary(
    domain: &Domain,
    spacing: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Point, BoundaryParam)>> {
    let area = domain.region_measures(BcMode::PureDirichlet).dirichlet;
    let count = (area / (3f64.sqrt() / 2.0 * spacing * spacing)).round() as usize;
    if count < 4 {
        return Err(Error::InsufficientNodes {
            interior: 0,
            spacing,
        });
    }
    // area element relative to the unit sphere, bounded by a scan
    let ratio = |t: f64, p: f64| spherical_area_element(t, p) / p.cos().max(1e-12);
    let mut bound: f64 = 0.0;
    for i in 0..200 {
        for j in 1..100 {
            let t = -PI + 2.0 * PI * i as f64 / 200.0;
            let p = -PI / 2.0 + PI * j as f64 / 100.0;
            bound = bound.max(ratio(t, p));
        }
    }
    bound *= 1.2;
    let mut params = Vec::with_capacity(count);
    while params.len() < count {
        let t = rng.random_range(-PI..PI);
        let p = rng.random_range(-1.0f64..1.0).asin();
        if rng.random::<f64>() * bound <= ratio(t, p) {
            params.push((t, p));
        }
    }
    let project = |x: &Point| -> (Point, BoundaryParam) {
        let (theta, phi) = spherical_angles(x);
        let param = BoundaryParam::Spherical { theta, phi };
        (domain.boundary_point(&param).unwrap(), param)
    };
    let mut pts: Vec<Point> = params
        .iter()
        .map(|&(theta, phi)| {
            domain
                .boundary_point(&BoundaryParam::Spherical { theta, phi })
                .unwrap()
        })
        .collect();
    let r0 = 1.2 * spacing;
    for _ in 0..40 {
        let tree = KdTree::new(&pts, 3);
        let moves: Vec<Point> = pts
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut f = [0.0; 3];
                for j in tree.within_radius(x, r0) {
                    if j == i {
                        continue;
                    }
                    let d = sub(x, &pts[j]);
                    let len = norm(&d);
                    if len > 0.0 {
                        f = add(&f, &scale(&d, (r0 - len) / len));
                    }
                }
                scale(&f, 0.2)
            })
            .collect();
        let mut max_move: f64 = 0.0;
        for (x, m) in pts.iter_mut().zip(&moves) {
            max_move = max_move.max(norm(m));
            *x = project(&add(x, m)).0;
        }
        if max_move < 1e-3 * spacing {
            break;
        }
    }
    Ok(pts.iter().map(project).collect())
}

/// Jittered hexagonal (2D) or face-centred cubic (3D) lattice points kept at
/// least `0.6 h` inside the boundary.
fn interior_lattice(domain: &Domain, spacing: f64, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let jitter = 0.05 * spacing;
    let mut candidates = Vec::new();
    match dim {
        1 => {
            let n = ((hi[0] - lo[0]) / spacing).round().max(1.0) as usize;
            for i in 1..n {
                candidates.push([lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64, 0.0, 0.0]);
            }
            return candidates;
        }
        2 => {
            let dy = spacing * 3f64.sqrt() / 2.0;
            let off = [rng.random::<f64>() * spacing, rng.random::<f64>() * dy];
            let nx = ((hi[0] - lo[0]) / spacing).ceil() as i64 + 2;
            let ny = ((hi[1] - lo[1]) / dy).ceil() as i64 + 2;
            for j in -1..ny {
                for i in -1..nx {
                    let shift = if j.rem_euclid(2) == 1 {
                        0.5 * spacing
                    } else {
                        0.0
                    };
                    candidates.push([
                        lo[0] + off[0] + i as f64 * spacing + shift,
                        lo[1] + off[1] + j as f64 * dy,
                        0.0,
                    ]);
                }
            }
        }
        _ => {
            let a = spacing * 2f64.sqrt();
            let basis = [
                [0.0, 0.0, 0.0],
                [0.5, 0.5, 0.0],
                [0.5, 0.0, 0.5],
                [0.0, 0.5, 0.5],
            ];
            let off = [
                rng.random::<f64>() * a,
                rng.random::<f64>() * a,
                rng.random::<f64>() * a,
            ];
            let n: Vec<i64> = (0..3)
                .map(|k| ((hi[k] - lo[k]) / a).ceil() as i64 + 2)
                .collect();
            for l in -1..n[2] {
                for j in -1..n[1] {
                    for i in -1..n[0] {
                        for b in &basis {
                            candidates.push([
                                lo[0] + off[0] + (i as f64 + b[0]) * a,
                                lo[1] + off[1] + (j as f64 + b[1]) * a,
                                lo[2] + off[2] + (l as f64 + b[2]) * a,
                            ]);
                        }
                    }
                }
            }
        }
    }
    let mut kept = Vec::new();
    for mut x in candidates {
        for v in x.iter_mut().take(dim) {
            *v += rng.random_range(-jitter..jitter);
        }
        if keep_interior(domain, &x, spacing) {
            kept.push(x);
        }
    }
    kept
}

fn keep_interior(domain: &Domain, point: &Point, spacing: f64) -> bool {
    let gap = domain.radial_gap(point);
    if gap >= -0.6 * spacing {
        return false;
    }
    if gap < -3.0 * spacing {
        return true;
    }
    domain.signed_distance(point) < -0.6 * spacing
}

/// Neighbour-repulsion smoothing of the interior nodes; boundary nodes
/// (the first `n_fixed`) stay in place.
fn relax_interior(
    domain: &Domain,
    points: &mut [Point],
    n_fixed: usize,
    spacing: f64,
    iterations: usize,
) {
    let dim = domain.dim();
    if dim == 1 {
        return;
    }
    let r0 = 1.2 * spacing;
    let dt = 0.2;
    let min_depth = 0.5 * spacing;
    for _ in 0..iterations {
        let tree = KdTree::new(points, dim);
        let moves: Vec<Point> = (n_fixed..points.len())
            .map(|i| {
                let x = points[i];
                let mut f = [0.0; 3];
                for j in tree.within_radius(&x, r0) {
                    if j == i {
                        continue;
                    }
                    let d = sub(&x, &points[j]);
                    let len = norm(&d);
                    if len > 0.0 {
                        f = add(&f, &scale(&d, (r0 - len) / len));
                    }
                }
                scale(&f, dt)
            })
            .collect();
        let mut max_move: f64 = 0.0;
        for (k, m) in moves.iter().enumerate() {
            let i = n_fixed + k;
            let old = points[i];
            let mut x = add(&old, m);
            if domain.radial_gap(&x) > -3.0 * spacing && domain.signed_distance(&x) > -min_depth {
                let (c, param) = domain.closest_boundary_point(&x);
                match domain.outward_normal(&param) {
                    Ok(n) => x = sub(&c, &scale(&n, min_depth)),
                    Err(_) => x = old,
                }
                if !domain.inside(&x) {
                    x = old;
                }
            }
            max_move = max_move.max(dist2(&x, &old).sqrt());
            points[i] = x;
        }
        if max_move < 1e-3 * spacing {
            break;
        }
    }
}

/// Builds the evaluation set Y ⊇ X with `M ≈ qN`.
///
/// With `q == 1` the evaluation set is X itself (ghost nodes excluded).
/// Otherwise a finer set is generated and, in node-index order, the free Y
/// point nearest to each trial node (of the same interior/boundary role) is
/// moved onto it.
pub fn generate_evaluation_set(
    domain: &Domain,
    trial: &NodeSet,
    oversampling: f64,
    seed: u64,
    bc_mode: BcMode,
) -> Result<EvaluationSet> {
    if !(oversampling >= 1.0) {
        return Err(Error::Parse(format!(
            "oversampling {oversampling} must be at least 1"
        )));
    }
    let physical = trial.physical_indices();
    if oversampling == 1.0 {
        let mut nodes = NodeSet {
            dim: trial.dim,
            points: Vec::new(),
            kinds: Vec::new(),
            normals: Vec::new(),
            target_spacing: trial.target_spacing,
            seed: trial.seed,
        };
        for &i in &physical {
            nodes.push(trial.points[i], trial.kinds[i], trial.normals[i]);
        }
        return Ok(EvaluationSet {
            nodes,
            trial_index: physical.iter().map(|&i| Some(i)).collect(),
        });
    }
    let physical_count = physical.len() as f64;
    let dim_f = trial.dim as f64;
    let opts = GeneratorOptions {
        bc_mode,
        ..GeneratorOptions::default()
    };
    let eval_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut eval_spacing = trial.target_spacing / oversampling.powf(1.0 / dim_f);
    let mut candidates = generate_nodes_with(domain, eval_spacing, eval_seed, &opts)?;
    for _ in 0..4 {
        let ratio = candidates.len() as f64 / (oversampling * physical_count);
        if (ratio - 1.0).abs() <= 0.03 {
            break;
        }
        eval_spacing *= ratio.powf(1.0 / dim_f);
        candidates = generate_nodes_with(domain, eval_spacing, eval_seed, &opts)?;
    }
    let boundary_ids = (0..candidates.len())
        .filter(|&i| candidates.kinds[i].is_boundary())
        .map(|i| (i, candidates.points[i]));
    let interior_ids = (0..candidates.len())
        .filter(|&i| !candidates.kinds[i].is_boundary())
        .map(|i| (i, candidates.points[i]));
    let boundary_tree = KdTree::from_iter(boundary_ids, trial.dim);
    let interior_tree = KdTree::from_iter(interior_ids, trial.dim);
    let mut taken = vec![false; candidates.len()];
    let mut trial_index = vec![None; candidates.len()];
    for &k in &physical {
        let tree = if trial.kinds[k].is_boundary() {
            &boundary_tree
        } else {
            &interior_tree
        };
        let mut want = 4;
        let slot = loop {
            let found = tree
                .knn(&trial.points[k], want)
                .into_iter()
                .find(|(j, _)| !taken[*j]);
            if let Some((j, _)) = found {
                break j;
            }
            if want >= tree.len() {
                return Err(Error::SnappingExhausted(k));
            }
            want *= 4;
        };
        taken[slot] = true;
        candidates.points[slot] = trial.points[k];
        candidates.kinds[slot] = trial.kinds[k];
        candidates.normals[slot] = trial.normals[k];
        trial_index[slot] = Some(k);
    }
    Ok(EvaluationSet {
        nodes: candidates,
        trial_index,
    })
}

/// Appends one ghost node `x_b + h n_b` per boundary node. Ghosts that land
/// inside the domain are kept and reported.
pub fn add_ghost_layer(
    domain: &Domain,
    trial: &NodeSet,
    spacing: f64,
) -> (NodeSet, Vec<GhostWarning>) {
    let mut out = trial.clone();
    let mut warnings = Vec::new();
    for i in 0..trial.len() {
        if !trial.kinds[i].is_boundary() {
            continue;
        }
        let Some(n) = trial.normals[i] else { continue };
        let g = add(&trial.points[i], &scale(&n, spacing));
        if domain.inside(&g) {
            log::warn!("ghost node of boundary node {i} lies inside the domain");
            warnings.push(GhostWarning {
                boundary_node: i,
                ghost: g,
            });
        }
        out.push(g, NodeKind::Ghost, Some(n));
    }
    (out, warnings)
}

/// Radical-inverse (Halton) value of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Separation distance exactly and fill distance from at least `10 N`
/// quasi-random probes inside the domain. Ghost nodes are ignored.
pub fn spacing_report(trial: &NodeSet, domain: &Domain) -> SpacingReport {
    let idx = trial.physical_indices();
    let tree = KdTree::from_iter(idx.iter().map(|&i| (i, trial.points[i])), trial.dim);
    let mut min_d2 = f64::INFINITY;
    for &i in &idx {
        for (j, d2) in tree.knn(&trial.points[i], 2) {
            if j != i {
                min_d2 = min_d2.min(d2);
            }
        }
    }
    let separation = 0.5 * min_d2.sqrt();
    let (lo, hi) = domain.bounding_box();
    let wanted = 10 * idx.len().max(1);
    let bases = [2u64, 3, 5];
    let mut fill2: f64 = 0.0;
    let mut found = 0;
    let mut i = 1u64;
    while found < wanted && i < 1000 * wanted as u64 {
        let mut p = [0.0; 3];
        for k in 0..trial.dim {
            p[k] = lo[k] + (hi[k] - lo[k]) * radical_inverse(i, bases[k]);
        }
        i += 1;
        if domain.signed_distance(&p) > 0.0 {
            continue;
        }
        found += 1;
        if let Some((_, d2)) = tree.nearest(&p) {
            fill2 = fill2.max(d2);
        }
    }
    let fill = fill2.sqrt().max(separation);
    SpacingReport {
        fill_distance: fill,
        separation_distance: separation,
        quality: separation / fill,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_boundary_count_and_start() {
        let d = Domain::unit_disk();
        let b = polar_boundary(&d, 0.5);
        assert_eq!(b.len(), 13);
        assert!((b[0].0[0] - 1.0).abs() < 1e-12 && b[0].0[1].abs() < 1e-12);
        let gaps: Vec<f64> = (0..b.len())
            .map(|i| norm(&sub(&b[i].0, &b[(i + 1) % b.len()].0)))
            .collect();
        for g in &gaps {
            assert!((g - gaps[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn star_boundary_is_equispaced_in_arc_length() {
        let d = Domain::star();
        let b = polar_boundary(&d, 0.05);
        let gaps: Vec<f64> = (0..b.len())
            .map(|i| norm(&sub(&b[i].0, &b[(i + 1) % b.len()].0)))
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        for g in &gaps {
            assert!((g - mean).abs() < 0.01 * mean);
        }
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let d = Domain::star();
        let a = generate_nodes(&d, 0.08, 7).unwrap();
        let b = generate_nodes(&d, 0.08, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        for i in 0..a.len() {
            assert!(d.signed_distance(&a.points[i]) <= 1e-10);
            assert_eq!(a.normals[i].is_some(), a.kinds[i].is_boundary());
        }
        let c = generate_nodes(&d, 0.08, 8).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn too_coarse_is_insufficient() {
        let r = generate_nodes(&Domain::unit_disk(), 1.5, 0);
        assert!(matches!(r, Err(Error::InsufficientNodes { .. })));
    }

    #[test]
    fn disk_quality_floor() {
        let d = Domain::unit_disk();
        for h in [0.1, 0.05, 0.025] {
            let x = generate_nodes(&d, h, 1).unwrap();
            let s = spacing_report(&x, &d);
            assert!(s.quality >= 0.3, "h={h}: {s:?}");
            assert!(s.separation_distance <= s.fill_distance);
        }
    }

    #[test]
    fn evaluation_set_contains_trial_nodes() {
        let d = Domain::star();
        let x = generate_nodes(&d, 0.08, 3).unwrap();
        let y = generate_evaluation_set(&d, &x, 3.0, 3, BcMode::Mixed).unwrap();
        let ratio = y.nodes.len() as f64 / x.len() as f64;
        assert!((0.8 * 3.0..=1.25 * 3.0).contains(&ratio), "{ratio}");
        let mut seen = vec![0; x.len()];
        for (j, t) in y.trial_index.iter().enumerate() {
            if let Some(k) = t {
                seen[*k] += 1;
                assert_eq!(y.nodes.points[j], x.points[*k]);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(y.nodes.count(NodeKind::Dirichlet) > x.count(NodeKind::Dirichlet));
        assert!(y.nodes.count(NodeKind::Neumann) > x.count(NodeKind::Neumann));
    }

    #[test]
    fn unit_oversampling_is_identity() {
        let d = Domain::unit_disk();
        let x = generate_nodes(&d, 0.2, 0).unwrap();
        let y = generate_evaluation_set(&d, &x, 1.0, 0, BcMode::Mixed).unwrap();
        assert_eq!(y.nodes.points, x.points);
    }

    #[test]
    fn ghost_layer() {
        let d = Domain::unit_disk();
        let x = generate_nodes(&d, 0.1, 0).unwrap();
        let (g, warnings) = add_ghost_layer(&d, &x, 0.1);
        assert!(warnings.is_empty());
        assert_eq!(g.count(NodeKind::Ghost), x.num_boundary());
        // first boundary node is (1, 0)
        let first = g.kinds.iter().position(|&k| k == NodeKind::Ghost).unwrap();
        assert!((g.points[first][0] - 1.1).abs() < 1e-12 && g.points[first][1].abs() < 1e-12);
        for i in first..g.len() {
            assert!(!d.inside(&g.points[i]));
        }
    }

    #[test]
    fn separation_of_two_points() {
        let d = Domain::unit_box(1);
        let set = NodeSet {
            dim: 1,
            points: vec![[0.0; 3], [1.0, 0.0, 0.0]],
            kinds: vec![NodeKind::Dirichlet, NodeKind::Neumann],
            normals: vec![Some([-1.0, 0.0, 0.0]), Some([1.0, 0.0, 0.0])],
            target_spacing: 1.0,
            seed: 0,
        };
        let s = spacing_report(&set, &d);
        assert_eq!(s.separation_distance, 0.5);
    }

    #[test]
    fn grid_fill_distance() {
        // unit grid on [0, 8]^d: the farthest point from the grid is a cell centre
        for dim in [2usize, 3] {
            let mut upper = [0.0; 3];
            for u in upper.iter_mut().take(dim) {
                *u = 8.0;
            }
            let d = Domain::Box {
                lower: [0.0; 3],
                upper,
                dim,
            };
            let mut set = NodeSet {
                dim,
                points: Vec::new(),
                kinds: Vec::new(),
                normals: Vec::new(),
                target_spacing: 1.0,
                seed: 0,
            };
            let n3 = if dim == 3 { 9 } else { 1 };
            for i in 0..9 {
                for j in 0..9 {
                    for l in 0..n3 {
                        set.push([i as f64, j as f64, l as f64], NodeKind::Interior, None);
                    }
                }
            }
            let s = spacing_report(&set, &d);
            let exact = (dim as f64).sqrt() / 2.0;
            assert!(
                (s.fill_distance - exact).abs() <= 0.05 * exact,
                "{dim}: {s:?}"
            );
            assert_eq!(s.separation_distance, 0.5);
        }
    }

    #[test]
    fn text_roundtrip() {
        let d = Domain::star();
        let x = generate_nodes(&d, 0.15, 2).unwrap();
        let (x, _) = add_ghost_layer(&d, &x, 0.15);
        let mut buf = Vec::new();
        x.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("# dim=2 h=0.15 n={}\n", x.len())));
        let back = NodeSet::read_text(&buf[..]).unwrap();
        assert_eq!(back.kinds, x.kinds);
        for i in 0..x.len() {
            assert_eq!(back.points[i], x.points[i]);
            assert_eq!(back.normals[i], x.normals[i]);
        }
    }

    #[test]
    fn sphere_nodes() {
        let d = Domain::Spherical;
        let x = generate_nodes(&d, 0.25, 4).unwrap();
        assert!(x.num_boundary() > 50);
        assert!(x.count(NodeKind::Interior) > 50);
        for i in 0..x.len() {
            assert!(d.radial_gap(&x.points[i]) <= 1e-9);
        }
        let s = spacing_report(&x, &d);
        assert!(s.quality > 0.15, "{s:?}");
    }
}
