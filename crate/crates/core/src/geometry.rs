//! Computational domains: inside/outside queries, boundary parameterizations,
//! outward normals, boundary classification and region measures.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in up to three dimensions. Unused trailing coordinates are zero.
pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let d = sub(a, b);
    dot(&d, &d)
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Height separating the Dirichlet (below) and Neumann (at or above) parts of
/// the three-dimensional boundary.
pub const SPHERICAL_SPLIT_HEIGHT: f64 = 0.7;

/// Boundary condition region of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryClass {
    Interior,
    Dirichlet,
    Neumann,
}

/// How the boundary is split between Dirichlet and Neumann data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcMode {
    /// Lower half (2D, θ ∈ [−π, 0)) or z < 0.7 (3D) is Dirichlet, the rest Neumann.
    #[default]
    Mixed,
    /// Dirichlet data on the whole boundary.
    PureDirichlet,
    /// Dirichlet on θ ∈ [0, π] (the inflow part used by the advection
    /// spectrum); the remaining boundary is tagged Neumann and carries the
    /// PDE operator instead of a boundary condition.
    Inflow,
}

/// Where a boundary point sits on its parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryParam {
    /// Polar angle on a star-shaped curve.
    Polar { theta: f64 },
    /// Longitude `theta` and latitude `phi` on a star-shaped surface.
    Spherical { theta: f64, phi: f64 },
    /// A point on a flat face (or corner) of a box, with its outward normal.
    Planar { normal: Point },
}

/// Implicitly defined computational domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// Star-shaped curve `r(θ) = 1 + a (sin(f₁θ) + sin(f₂θ))`.
    PolarCurve {
        amplitude: f64,
        freq_a: f64,
        freq_b: f64,
    },
    /// Star-shaped surface
    /// `r(θ,φ) = (1 + sin²(2 sinφ sinθ) sin²(2 sinφ cosθ) sin²(2 cosφ))^½`.
    Spherical,
    /// Disk of the given radius centered at the origin.
    Disk { radius: f64 },
    /// Axis-aligned box in 1, 2 or 3 dimensions.
    Box {
        lower: Point,
        upper: Point,
        dim: usize,
    },
}

/// Volume and boundary-part measures, `|Ω|`, `|∂Ω₀|`, `|∂Ω₁|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMeasures {
    pub volume: f64,
    pub dirichlet: f64,
    pub neumann: f64,
}

impl Domain {
    /// The seven-lobed star used throughout the experiments.
    pub fn star() -> Self {
        Domain::PolarCurve {
            amplitude: 0.1,
            freq_a: 7.0,
            freq_b: 1.0,
        }
    }

    pub fn unit_disk() -> Self {
        Domain::Disk { radius: 1.0 }
    }

    pub fn unit_box(dim: usize) -> Self {
        let mut upper = [0.0; 3];
        for u in upper.iter_mut().take(dim) {
            *u = 1.0;
        }
        Domain::Box {
            lower: [0.0; 3],
            upper,
            dim,
        }
    }

    /// Builds a domain from its configuration name and parameter list.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let p = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        match name {
            "star" | "polar" => Ok(Domain::PolarCurve {
                amplitude: p(0, 0.1),
                freq_a: p(1, 7.0),
                freq_b: p(2, 1.0),
            }),
            "sphere3d" | "spherical" => Ok(Domain::Spherical),
            "disk" => Ok(Domain::Disk { radius: p(0, 1.0) }),
            "box" | "square" => {
                let dim = p(0, 2.0) as usize;
                if !(1..=3).contains(&dim) {
                    return Err(Error::Parse(format!("box dimension {dim}")));
                }
                Ok(Domain::unit_box(dim))
            }
            other => Err(Error::Parse(format!("unknown domain '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::PolarCurve { .. } | Domain::Disk { .. } => 2,
            Domain::Spherical => 3,
            Domain::Box { dim, .. } => *dim,
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::PolarCurve {
                amplitude,
                freq_a: _,
                freq_b: _,
            } => {
                let r = 1.0 + 2.0 * amplitude.abs();
                ([-r, -r, 0.0], [r, r, 0.0])
            }
            Domain::Disk { radius } => ([-radius, -radius, 0.0], [*radius, *radius, 0.0]),
            Domain::Spherical => {
                let r = 2f64.sqrt();
                ([-r, -r, -r], [r, r, r])
            }
            Domain::Box { lower, upper, .. } => (*lower, *upper),
        }
    }

    /// True when `x` lies strictly inside the domain.
    pub fn inside(&self, point: &Point) -> bool {
        self.signed_distance(point) < 0.0
    }

    /// Cheap sign-exact indicator: negative inside, positive outside, zero on
    /// the boundary. Its magnitude is the radial gap for star-shaped domains,
    /// not the Euclidean distance.
    pub fn radial_gap(&self, point: &Point) -> f64 {
        match self {
            Domain::PolarCurve { .. } | Domain::Disk { .. } => {
                let theta = point[1].atan2(point[0]);
                (point[0] * point[0] + point[1] * point[1]).sqrt() - self.polar_radius(theta)
            }
            Domain::Spherical => {
                let rho = norm(point);
                if rho == 0.0 {
                    return -1.0;
                }
                let (theta, phi) = spherical_angles(point);
                rho - spherical_radius(theta, phi)
            }
            Domain::Box { .. } => self.signed_distance(point),
        }
    }

    /// Signed Euclidean distance to the boundary (negative inside).
    pub fn signed_distance(&self, point: &Point) -> f64 {
        match self {
            Domain::Box { lower, upper, dim } => {
                let mut outside = 0.0;
                let mut inside = f64::INFINITY;
                let mut any_out = false;
                for k in 0..*dim {
                    let below = lower[k] - point[k];
                    let above = point[k] - upper[k];
                    let d = below.max(above);
                    if d > 0.0 {
                        any_out = true;
                        outside += d * d;
                    }
                    inside = inside.min(-d);
                }
                if any_out {
                    outside.sqrt()
                } else {
                    -inside
                }
            }
            Domain::Disk { radius } => (point[0] * point[0] + point[1] * point[1]).sqrt() - radius,
            _ => {
                let gap = self.radial_gap(point);
                if gap == 0.0 {
                    return 0.0;
                }
                let (closest, _) = self.closest_boundary_point(point);
                let d = norm(&sub(point, &closest));
                // the radial comparison fixes the sign exactly
                d.max(f64::MIN_POSITIVE).copysign(gap)
            }
        }
    }

    /// Radius of the polar boundary curve at angle `theta`.
    pub fn polar_radius(&self, theta: f64) -> f64 {
        self.polar_radius_derivs(theta).0
    }

    /// `(r, r', r'')` of the polar boundary curve.
    fn polar_radius_derivs(&self, theta: f64) -> (f64, f64, f64) {
        match self {
            Domain::PolarCurve {
                amplitude,
                freq_a,
                freq_b,
            } => {
                let (sa, ca) = (freq_a * theta).sin_cos();
                let (sb, cb) = (freq_b * theta).sin_cos();
                (
                    1.0 + amplitude * (sa + sb),
                    amplitude * (freq_a * ca + freq_b * cb),
                    -amplitude * (freq_a * freq_a * sa + freq_b * freq_b * sb),
                )
            }
            Domain::Disk { radius } => (*radius, 0.0, 0.0),
            _ => (f64::NAN, f64::NAN, f64::NAN),
        }
    }

    /// Position of a parameterized boundary point.
    pub fn boundary_point(&self, param: &BoundaryParam) -> Result<Point> {
        match (self, param) {
            (Domain::PolarCurve { .. } | Domain::Disk { .. }, BoundaryParam::Polar { theta }) => {
                let r = self.polar_radius(*theta);
                Ok([r * theta.cos(), r * theta.sin(), 0.0])
            }
            (Domain::Spherical, BoundaryParam::Spherical { theta, phi }) => {
                Ok(spherical_surface(*theta, *phi).0)
            }
            _ => Err(Error::Unsupported(format!(
                "parameter {param:?} does not describe a point of {self:?}"
            ))),
        }
    }

    /// Unit outward normal at a parameterized boundary point.
    pub fn outward_normal(&self, param: &BoundaryParam) -> Result<Point> {
        match (self, param) {
            (_, BoundaryParam::Planar { normal }) => Ok(*normal),
            (Domain::PolarCurve { .. } | Domain::Disk { .. }, BoundaryParam::Polar { theta }) => {
                let tangent = self.polar_tangent(*theta);
                let len = norm(&tangent);
                if len < 1e-14 {
                    return Err(Error::DegenerateParameterization(len));
                }
                // counterclockwise tangent rotated clockwise points outward
                Ok([tangent[1] / len, -tangent[0] / len, 0.0])
            }
            (Domain::Spherical, BoundaryParam::Spherical { theta, phi }) => {
                let (pos, d_theta, d_phi) = spherical_surface(*theta, *phi);
                let lt = norm(&d_theta);
                let lp = norm(&d_phi);
                if lt < 1e-14 || lp < 1e-14 {
                    return Err(Error::DegenerateParameterization(lt.min(lp)));
                }
                let n = cross(&d_theta, &d_phi);
                let len = norm(&n);
                if len < 1e-14 * lt * lp {
                    return Err(Error::DegenerateParameterization(len));
                }
                let s = if dot(&n, &pos) < 0.0 { -1.0 } else { 1.0 };
                Ok(scale(&n, s / len))
            }
            _ => Err(Error::Unsupported(format!(
                "parameter {param:?} does not describe a point of {self:?}"
            ))),
        }
    }

    fn polar_tangent(&self, theta: f64) -> Point {
        let (r, dr, _) = self.polar_radius_derivs(theta);
        let (s, c) = theta.sin_cos();
        [dr * c - r * s, dr * s + r * c, 0.0]
    }

    /// Classifies a boundary point given its position and parameter.
    pub fn classify_boundary(
        &self,
        point: &Point,
        param: &BoundaryParam,
        mode: BcMode,
    ) -> BoundaryClass {
        if mode == BcMode::PureDirichlet {
            return BoundaryClass::Dirichlet;
        }
        match self.dim() {
            1 => {
                let (lo, hi) = self.bounding_box();
                let mid = 0.5 * (lo[0] + hi[0]);
                match (mode, point[0] < mid) {
                    (BcMode::Inflow, true) | (BcMode::Mixed, true) => BoundaryClass::Dirichlet,
                    _ => BoundaryClass::Neumann,
                }
            }
            2 => {
                let theta = match param {
                    BoundaryParam::Polar { theta } => wrap_angle(*theta),
                    _ => {
                        let (lo, hi) = self.bounding_box();
                        let cx = 0.5 * (lo[0] + hi[0]);
                        let cy = 0.5 * (lo[1] + hi[1]);
                        wrap_angle((point[1] - cy).atan2(point[0] - cx))
                    }
                };
                match mode {
                    BcMode::Inflow => {
                        // closed interval [0, π]; π is represented as −π
                        if theta >= 0.0 || theta == -PI {
                            BoundaryClass::Dirichlet
                        } else {
                            BoundaryClass::Neumann
                        }
                    }
                    _ => {
                        if theta < 0.0 {
                            BoundaryClass::Dirichlet
                        } else {
                            BoundaryClass::Neumann
                        }
                    }
                }
            }
            _ => {
                let lower = point[2] < SPHERICAL_SPLIT_HEIGHT;
                match (mode, lower) {
                    (BcMode::Inflow, false) | (BcMode::Mixed, true) => BoundaryClass::Dirichlet,
                    _ => BoundaryClass::Neumann,
                }
            }
        }
    }

    /// Closest boundary point and its parameter.
    ///
    /// Polar curves use a coarse angular scan followed by Newton refinement;
    /// the spherical surface uses Gauss–Newton started from the radial
    /// projection.
    pub fn closest_boundary_point(&self, point: &Point) -> (Point, BoundaryParam) {
        match self {
            Domain::PolarCurve { .. } | Domain::Disk { .. } => {
                let theta0 = point[1].atan2(point[0]);
                let g = |t: f64| {
                    let r = self.polar_radius(t);
                    let dx = r * t.cos() - point[0];
                    let dy = r * t.sin() - point[1];
                    dx * dx + dy * dy
                };
                let mut candidates = vec![theta0];
                const SCAN: usize = 96;
                let mut scan: Vec<(f64, f64)> = (0..SCAN)
                    .map(|i| {
                        let t = -PI + 2.0 * PI * i as f64 / SCAN as f64;
                        (g(t), t)
                    })
                    .collect();
                scan.sort_by(|a, b| a.0.total_cmp(&b.0));
                candidates.extend(scan.iter().take(2).map(|s| s.1));
                let mut best = (f64::INFINITY, theta0);
                for start in candidates {
                    let t = self.polar_newton(point, start);
                    let v = g(t);
                    if v < best.0 {
                        best = (v, t);
                    }
                }
                let theta = wrap_angle(best.1);
                let param = BoundaryParam::Polar { theta };
                (self.boundary_point(&param).unwrap(), param)
            }
            Domain::Spherical => {
                let (mut theta, mut phi) = spherical_angles(point);
                let mut pos = spherical_surface(theta, phi).0;
                let mut err = dist2(&pos, point);
                for _ in 0..30 {
                    let (s, st, sp) = spherical_surface(theta, phi);
                    let res = sub(&s, point);
                    let a11 = dot(&st, &st);
                    let a12 = dot(&st, &sp);
                    let a22 = dot(&sp, &sp);
                    let b1 = dot(&st, &res);
                    let b2 = dot(&sp, &res);
                    let det = a11 * a22 - a12 * a12;
                    if det.abs() < 1e-300 {
                        break;
                    }
                    let dt = (a22 * b1 - a12 * b2) / det;
                    let dp = (a11 * b2 - a12 * b1) / det;
                    let mut step = 1.0;
                    let mut improved = false;
                    for _ in 0..20 {
                        let t2 = theta - step * dt;
                        let p2 = (phi - step * dp).clamp(-PI / 2.0, PI / 2.0);
                        let cand = spherical_surface(t2, p2).0;
                        let e2 = dist2(&cand, point);
                        if e2 <= err {
                            theta = t2;
                            phi = p2;
                            pos = cand;
                            improved = err - e2 > 1e-30;
                            err = e2;
                            break;
                        }
                        step *= 0.5;
                    }
                    if !improved || (dt.abs() + dp.abs()) * step < 1e-15 {
                        break;
                    }
                }
                (
                    pos,
                    BoundaryParam::Spherical {
                        theta: wrap_angle(theta),
                        phi,
                    },
                )
            }
            Domain::Box { lower, upper, dim } => {
                let mut p = *point;
                for k in 0..*dim {
                    p[k] = p[k].clamp(lower[k], upper[k]);
                }
                // inside: push to the nearest face
                let mut best = (f64::INFINITY, 0usize, false);
                for k in 0..*dim {
                    let dl = (p[k] - lower[k]).abs();
                    let du = (upper[k] - p[k]).abs();
                    if dl < best.0 {
                        best = (dl, k, false);
                    }
                    if du < best.0 {
                        best = (du, k, true);
                    }
                }
                let (_, axis, up) = best;
                p[axis] = if up { upper[axis] } else { lower[axis] };
                let mut normal = [0.0; 3];
                normal[axis] = if up { 1.0 } else { -1.0 };
                (p, BoundaryParam::Planar { normal })
            }
        }
    }

    fn polar_newton(&self, point: &Point, start: f64) -> f64 {
        let mut t = start;
        for _ in 0..30 {
            let (r, dr, ddr) = self.polar_radius_derivs(t);
            let (s, c) = t.sin_cos();
            let p = [r * c - point[0], r * s - point[1]];
            let d1 = [dr * c - r * s, dr * s + r * c];
            let d2 = [
                ddr * c - 2.0 * dr * s - r * c,
                ddr * s + 2.0 * dr * c - r * s,
            ];
            let g1 = p[0] * d1[0] + p[1] * d1[1];
            let g2 = d1[0] * d1[0] + d1[1] * d1[1] + p[0] * d2[0] + p[1] * d2[1];
            let step = if g2 > 0.0 {
                g1 / g2
            } else {
                g1 / (d1[0] * d1[0] + d1[1] * d1[1])
            };
            let step = step.clamp(-0.2, 0.2);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        t
    }

    /// Region measures `|Ω|`, `|∂Ω₀|`, `|∂Ω₁|` under the given boundary split,
    /// computed by numerical quadrature of the parameterization.
    pub fn region_measures(&self, mode: BcMode) -> RegionMeasures {
        match self {
            Domain::PolarCurve { .. } | Domain::Disk { .. } => {
                const K: usize = 40_000;
                let dt = 2.0 * PI / K as f64;
                let mut volume = 0.0;
                let mut dir = 0.0;
                let mut neu = 0.0;
                for i in 0..K {
                    // midpoint rule, spectrally accurate for periodic integrands
                    let t = -PI + (i as f64 + 0.5) * dt;
                    let (r, dr, _) = self.polar_radius_derivs(t);
                    volume += 0.5 * r * r * dt;
                    let ds = (r * r + dr * dr).sqrt() * dt;
                    let x = [r * t.cos(), r * t.sin(), 0.0];
                    match self.classify_boundary(&x, &BoundaryParam::Polar { theta: t }, mode) {
                        BoundaryClass::Dirichlet => dir += ds,
                        _ => neu += ds,
                    }
                }
                RegionMeasures {
                    volume,
                    dirichlet: dir,
                    neumann: neu,
                }
            }
            Domain::Spherical => {
                const NT: usize = 1200;
                const NP: usize = 600;
                let dt = 2.0 * PI / NT as f64;
                let dp = PI / NP as f64;
                let mut volume = 0.0;
                let mut dir = 0.0;
                let mut neu = 0.0;
                for j in 0..NP {
                    let phi = -PI / 2.0 + (j as f64 + 0.5) * dp;
                    for i in 0..NT {
                        let theta = -PI + (i as f64 + 0.5) * dt;
                        let (pos, st, sp) = spherical_surface(theta, phi);
                        let r = norm(&pos);
                        volume += r * r * r / 3.0 * phi.cos() * dt * dp;
                        let da = norm(&cross(&st, &sp)) * dt * dp;
                        let param = BoundaryParam::Spherical { theta, phi };
                        match self.classify_boundary(&pos, &param, mode) {
                            BoundaryClass::Dirichlet => dir += da,
                            _ => neu += da,
                        }
                    }
                }
                RegionMeasures {
                    volume,
                    dirichlet: dir,
                    neumann: neu,
                }
            }
            Domain::Box { lower, upper, dim } => {
                let ext: Vec<f64> = (0..*dim).map(|k| upper[k] - lower[k]).collect();
                let volume: f64 = ext.iter().product();
                let (mut dir, mut neu) = (0.0, 0.0);
                for sample in self.box_boundary_quadrature(400) {
                    let (x, normal, w) = sample;
                    match self.classify_boundary(&x, &BoundaryParam::Planar { normal }, mode) {
                        BoundaryClass::Dirichlet => dir += w,
                        _ => neu += w,
                    }
                }
                RegionMeasures {
                    volume,
                    dirichlet: dir,
                    neumann: neu,
                }
            }
        }
    }

    /// Midpoint samples `(point, normal, weight)` over the faces of a box.
    fn box_boundary_quadrature(&self, per_side: usize) -> Vec<(Point, Point, f64)> {
        let Domain::Box { lower, upper, dim } = self else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for axis in 0..*dim {
            for up in [false, true] {
                let mut normal = [0.0; 3];
                normal[axis] = if up { 1.0 } else { -1.0 };
                let others: Vec<usize> = (0..*dim).filter(|&k| k != axis).collect();
                let counts: Vec<usize> = others.iter().map(|_| per_side).collect();
                let total: usize = counts.iter().product::<usize>().max(1);
                let cell: f64 = others
                    .iter()
                    .map(|&k| (upper[k] - lower[k]) / per_side as f64)
                    .product();
                for idx in 0..total {
                    let mut x = [0.0; 3];
                    x[axis] = if up { upper[axis] } else { lower[axis] };
                    let mut rem = idx;
                    for &k in &others {
                        let i = rem % per_side;
                        rem /= per_side;
                        x[k] =
                            lower[k] + (i as f64 + 0.5) * (upper[k] - lower[k]) / per_side as f64;
                    }
                    out.push((x, normal, if others.is_empty() { 1.0 } else { cell }));
                }
            }
        }
        out
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t -= 2.0 * PI;
    }
    t
}

/// The seven-lobed star radius `r(θ) = 1 + (sin 7θ + sin θ)/10`.
pub fn polar_radius(theta: f64) -> f64 {
    1.0 + 0.1 * ((7.0 * theta).sin() + theta.sin())
}

/// Radius of the three-dimensional domain at longitude `theta` and latitude `phi`.
pub fn spherical_radius(theta: f64, phi: f64) -> f64 {
    spherical_radius_derivs(theta, phi).0
}

/// `(r, ∂r/∂θ, ∂r/∂φ)`.
fn spherical_radius_derivs(theta: f64, phi: f64) -> (f64, f64, f64) {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let a_arg = 2.0 * sp * st;
    let b_arg = 2.0 * sp * ct;
    let c_arg = 2.0 * cp;
    let (a, ca) = a_arg.sin_cos();
    let (b, cb) = b_arg.sin_cos();
    let (c, cc) = c_arg.sin_cos();
    let f = a * a * b * b * c * c;
    let r = (1.0 + f).sqrt();
    let a_t = ca * 2.0 * sp * ct;
    let b_t = -cb * 2.0 * sp * st;
    let a_p = ca * 2.0 * cp * st;
    let b_p = cb * 2.0 * cp * ct;
    let c_p = -cc * 2.0 * sp;
    let f_t = 2.0 * a * b * b * c * c * a_t + 2.0 * a * a * b * c * c * b_t;
    let f_p = 2.0 * a * b * b * c * c * a_p
        + 2.0 * a * a * b * c * c * b_p
        + 2.0 * a * a * b * b * c * c_p;
    (r, f_t / (2.0 * r), f_p / (2.0 * r))
}

/// Surface point and its partial derivatives with respect to θ and φ.
fn spherical_surface(theta: f64, phi: f64) -> (Point, Point, Point) {
    let (r, r_t, r_p) = spherical_radius_derivs(theta, phi);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let e = [cp * ct, cp * st, sp];
    let e_t = [-cp * st, cp * ct, 0.0];
    let e_p = [-sp * ct, -sp * st, cp];
    (
        scale(&e, r),
        add(&scale(&e, r_t), &scale(&e_t, r)),
        add(&scale(&e, r_p), &scale(&e_p, r)),
    )
}

/// Longitude and latitude of a nonzero point.
pub fn spherical_angles(point: &Point) -> (f64, f64) {
    let rho = norm(point);
    let theta = point[1].atan2(point[0]);
    let phi = (point[2] / rho).clamp(-1.0, 1.0).asin();
    (theta, phi)
}

/// Area element `|∂S/∂θ × ∂S/∂φ|` of the spherical surface.
pub(crate) fn spherical_area_element(theta: f64, phi: f64) -> f64 {
    let (_, st, sp) = spherical_surface(theta, phi);
    norm(&cross(&st, &sp))
}
