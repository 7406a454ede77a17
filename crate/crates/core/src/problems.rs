//! Manufactured solutions with analytic gradients and Laplacians.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, Point};

/// An exact solution `u` with its gradient and Laplacian.
pub trait ExactSolution: Sync {
    fn value(&self, point: &Point) -> f64;
    fn gradient(&self, point: &Point) -> Point;
    fn laplacian(&self, point: &Point) -> Result<f64>;

    /// Normal derivative `∇u · n`.
    fn normal_derivative(&self, point: &Point, normal: &Point) -> f64 {
        dot(&self.gradient(point), normal)
    }
}

/// The catalogue of test problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// `√(x² + y²)`.
    Distance,
    /// `Σ_{k=0}^{5} e^{−√(2^k)} (cos(2^k x) + cos(2^k y))`.
    NonAnalytic,
    /// `sin(2(x−0.1)²) cos((x−0.3)²) + sin²(2(y−0.5)²) / (1 + 2x² + y²)`.
    RationalSine,
    /// `sin(3π x y z)`.
    Sin3D,
    /// `sin(x + 2y)`.
    SineWave,
}

/// Number of terms of the truncated non-analytic series.
pub const NON_ANALYTIC_TERMS: usize = 6;

impl Problem {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "distance" => Ok(Problem::Distance),
            "non-analytic" | "nonanalytic" => Ok(Problem::NonAnalytic),
            "rational-sine" | "rationalsine" => Ok(Problem::RationalSine),
            "sin3d" => Ok(Problem::Sin3D),
            "sine-wave" | "sinewave" => Ok(Problem::SineWave),
            other => Err(Error::Parse(format!("unknown problem '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Distance => "distance",
            Problem::NonAnalytic => "non-analytic",
            Problem::RationalSine => "rational-sine",
            Problem::Sin3D => "sin3d",
            Problem::SineWave => "sine-wave",
        }
    }
}

fn non_analytic_coefficient(k: usize) -> f64 {
    (-(2f64.powi(k as i32)).sqrt()).exp()
}

impl ExactSolution for Problem {
    fn value(&self, p: &Point) -> f64 {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self {
            Problem::Distance => (x * x + y * y).sqrt(),
            Problem::NonAnalytic => (0..NON_ANALYTIC_TERMS)
                .map(|k| {
                    let f = 2f64.powi(k as i32);
                    non_analytic_coefficient(k) * ((f * x).cos() + (f * y).cos())
                })
                .sum(),
            Problem::RationalSine => {
                let s = (2.0 * (y - 0.5).powi(2)).sin();
                (2.0 * (x - 0.1).powi(2)).sin() * ((x - 0.3).powi(2)).cos()
                    + s * s / (1.0 + 2.0 * x * x + y * y)
            }
            Problem::Sin3D => (3.0 * PI * x * y * z).sin(),
            Problem::SineWave => (x + 2.0 * y).sin(),
        }
    }

    fn gradient(&self, p: &Point) -> Point {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self {
            Problem::Distance => {
                let r = (x * x + y * y).sqrt();
                if r == 0.0 {
                    [0.0; 3]
                } else {
                    [x / r, y / r, 0.0]
                }
            }
            Problem::NonAnalytic => {
                let mut g = [0.0; 3];
                for k in 0..NON_ANALYTIC_TERMS {
                    let f = 2f64.powi(k as i32);
                    let c = non_analytic_coefficient(k) * f;
                    g[0] -= c * (f * x).sin();
                    g[1] -= c * (f * y).sin();
                }
                g
            }
            Problem::RationalSine => {
                let r = RationalSineParts::new(x, y);
                [r.da * r.b + r.a * r.db + r.tx, r.ty, 0.0]
            }
            Problem::Sin3D => {
                let c = 3.0 * PI * (3.0 * PI * x * y * z).cos();
                [c * y * z, c * x * z, c * x * y]
            }
            Problem::SineWave => {
                let c = (x + 2.0 * y).cos();
                [c, 2.0 * c, 0.0]
            }
        }
    }

    fn laplacian(&self, p: &Point) -> Result<f64> {
        let (x, y, z) = (p[0], p[1], p[2]);
        Ok(match self {
            Problem::Distance => {
                let r = (x * x + y * y).sqrt();
                if r == 0.0 {
                    return Err(Error::SingularData {
                        point: *p,
                        reason: "the Laplacian of the distance function is singular at the origin",
                    });
                }
                1.0 / r
            }
            Problem::NonAnalytic => -(0..NON_ANALYTIC_TERMS)
                .map(|k| {
                    let f = 2f64.powi(k as i32);
                    non_analytic_coefficient(k) * f * f * ((f * x).cos() + (f * y).cos())
                })
                .sum::<f64>(),
            Problem::RationalSine => {
                let r = RationalSineParts::new(x, y);
                r.dda * r.b + 2.0 * r.da * r.db + r.a * r.ddb + r.txx + r.tyy
            }
            Problem::Sin3D => {
                -9.0 * PI
                    * PI
                    * (x * x * y * y + x * x * z * z + y * y * z * z)
                    * (3.0 * PI * x * y * z).sin()
            }
            Problem::SineWave => -5.0 * (x + 2.0 * y).sin(),
        })
    }
}

/// Factors of the rational-sine solution `A(x) B(x) + T(x, y)` with
/// `T = S(y) / Q(x, y)` and their derivatives.
struct RationalSineParts {
    a: f64,
    da: f64,
    dda: f64,
    b: f64,
    db: f64,
    ddb: f64,
    tx: f64,
    ty: f64,
    txx: f64,
    tyy: f64,
}

impl RationalSineParts {
    fn new(px: f64, py: f64) -> Self {
        let arg_a = 2.0 * (px - 0.1).powi(2);
        let darg_a = 4.0 * (px - 0.1);
        let (sa, ca) = arg_a.sin_cos();
        let a = sa;
        let da = ca * darg_a;
        let dda = -sa * darg_a * darg_a + ca * 4.0;

        let arg_b = (px - 0.3).powi(2);
        let darg_b = 2.0 * (px - 0.3);
        let (sb, cb) = arg_b.sin_cos();
        let b = cb;
        let db = -sb * darg_b;
        let ddb = -cb * darg_b * darg_b - sb * 2.0;

        let arg_c = 2.0 * (py - 0.5).powi(2);
        let darg_c = 4.0 * (py - 0.5);
        let sc = arg_c.sin();
        let s = sc * sc;
        let ds = (2.0 * arg_c).sin() * darg_c;
        let dds = 2.0 * (2.0 * arg_c).cos() * darg_c * darg_c + (2.0 * arg_c).sin() * 4.0;

        let q = 1.0 + 2.0 * px * px + py * py;
        let qx = 4.0 * px;
        let qy = 2.0 * py;
        let q2 = q * q;
        let q3 = q2 * q;
        let tx = -s * qx / q2;
        let txx = s * (2.0 * qx * qx / q3 - 4.0 / q2);
        let ty = ds / q - s * qy / q2;
        let tyy = dds / q - 2.0 * ds * qy / q2 + s * (2.0 * qy * qy / q3 - 2.0 / q2);
        RationalSineParts {
            a,
            da,
            dda,
            b,
            db,
            ddb,
            tx,
            ty,
            txx,
            tyy,
        }
    }
}

/// `‖u_h − u‖₂ / ‖u‖₂` over matching samples.
pub fn relative_error(approx: &[f64], exact: &[f64]) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::Dimension(format!(
            "{} approximate values against {} exact values",
            approx.len(),
            exact.len()
        )));
    }
    let den: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Fourth-order central differences.
    fn fd_laplacian(u: &dyn ExactSolution, p: &Point, dim: usize) -> f64 {
        let h = 1e-3;
        let mut s = 0.0;
        for k in 0..dim {
            let at = |t: f64| {
                let mut q = *p;
                q[k] += t;
                u.value(&q)
            };
            s += (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h))
                / (12.0 * h * h);
        }
        s
    }

    fn fd_gradient(u: &dyn ExactSolution, p: &Point, dim: usize) -> Point {
        let h = 1e-5;
        let mut g = [0.0; 3];
        for k in 0..dim {
            let mut a = *p;
            let mut b = *p;
            a[k] += h;
            b[k] -= h;
            g[k] = (u.value(&a) - u.value(&b)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn point_values() {
        assert_eq!(Problem::Distance.value(&[3.0, 4.0, 0.0]), 5.0);
        assert!((Problem::Distance.laplacian(&[3.0, 4.0, 0.0]).unwrap() - 0.2).abs() < 1e-15);
        assert!(Problem::Distance.laplacian(&[0.0; 3]).is_err());
        assert_eq!(Problem::Sin3D.value(&[0.0, 0.4, 0.9]), 0.0);
        // direct summation of 2 Σ e^{-2^{k/2}}
        let direct = 2.0
            * [1.0f64, 2f64.sqrt(), 2.0, 8f64.sqrt(), 4.0, 32f64.sqrt()]
                .iter()
                .map(|s| (-s).exp())
                .sum::<f64>();
        assert!((Problem::NonAnalytic.value(&[0.0; 3]) - direct).abs() < 1e-15);
        let seventh = 2.0 * (-8.0f64).exp();
        assert!(seventh < 1e-3);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cases = [
            (Problem::Distance, 2),
            (Problem::NonAnalytic, 2),
            (Problem::RationalSine, 2),
            (Problem::Sin3D, 3),
            (Problem::SineWave, 2),
        ];
        for (prob, dim) in cases {
            for _ in 0..100 {
                let mut p: Point = [0.0; 3];
                for v in p.iter_mut().take(dim) {
                    *v = rng.random_range(-1.0..1.0);
                }
                if prob == Problem::Distance && (p[0] * p[0] + p[1] * p[1]).sqrt() < 0.1 {
                    continue;
                }
                let lap = prob.laplacian(&p).unwrap();
                let fd = fd_laplacian(&prob, &p, dim);
                assert!(
                    (lap - fd).abs() <= 1e-6 * lap.abs().max(1.0),
                    "{prob:?} {p:?}: {lap} vs {fd}"
                );
                let g = prob.gradient(&p);
                let n = [0.6, -0.8, 0.0];
                let dn = prob.normal_derivative(&p, &n);
                let fd_dn = dot(&fd_gradient(&prob, &p, dim), &n);
                assert!((dn - fd_dn).abs() <= 1e-6 * dn.abs().max(1.0));
                let fg = fd_gradient(&prob, &p, dim);
                for k in 0..dim {
                    assert!((g[k] - fg[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn relative_error_algebra() {
        let u = [1.0, -2.0, 2.0];
        assert_eq!(relative_error(&u, &u).unwrap(), 0.0);
        let doubled: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        assert!((relative_error(&doubled, &u).unwrap() - 1.0).abs() < 1e-15);
        let eps = 1e-3;
        let shifted: Vec<f64> = u.iter().map(|v| v + eps).collect();
        assert!((relative_error(&shifted, &u).unwrap() - eps * 3f64.sqrt() / 3.0).abs() < 1e-15);
        assert!(matches!(
            relative_error(&[0.0], &[0.0]),
            Err(Error::ZeroReference)
        ));
    }
}
