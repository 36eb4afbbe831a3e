//! Scalar fields on R^3, the built-in catalog, radial derivatives along
//! rays from a ball center, and sampled convexity certificates.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, dot, norm, sub, Ball, SphericalCoord, Vec3};
use crate::sampling::{self, Stream};

/// A failed field evaluation, carrying the offending point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot evaluate field at ({}, {}, {}): {message}", point[0], point[1], point[2])]
pub struct EvalError {
    pub point: Vec3,
    pub message: String,
}

impl EvalError {
    pub fn new(point: Vec3, message: impl Into<String>) -> Self {
        Self {
            point,
            message: message.into(),
        }
    }
}

/// A real function on R^3.
///
/// Implementations must be deterministic and safe to evaluate from several
/// threads at once.
pub trait ScalarField: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, p: Vec3) -> Result<f64, EvalError>;

    /// Analytic gradient, when known at `p`. `None` makes callers fall back
    /// to finite differences.
    fn gradient(&self, _p: Vec3) -> Option<Vec3> {
        None
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        (**self).eval(p)
    }
    fn gradient(&self, p: Vec3) -> Option<Vec3> {
        (**self).gradient(p)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        (**self).eval(p)
    }
    fn gradient(&self, p: Vec3) -> Option<Vec3> {
        (**self).gradient(p)
    }
}

/// `p -> factor * f(p)`
pub struct Scaled<F> {
    pub inner: F,
    pub factor: f64,
}

impl<F: ScalarField> ScalarField for Scaled<F> {
    fn name(&self) -> String {
        format!("{} * {}", self.factor, self.inner.name())
    }
    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        Ok(self.factor * self.inner.eval(p)?)
    }
    fn gradient(&self, p: Vec3) -> Option<Vec3> {
        self.inner.gradient(p).map(|g| geometry::scale(g, self.factor))
    }
}

/// `p -> f(p - offset)`, i.e. `f` moved by `offset`.
pub struct Shifted<F> {
    pub inner: F,
    pub offset: Vec3,
}

impl<F: ScalarField> ScalarField for Shifted<F> {
    fn name(&self) -> String {
        format!("{} shifted by {:?}", self.inner.name(), self.offset)
    }
    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        self.inner.eval(sub(p, self.offset))
    }
    fn gradient(&self, p: Vec3) -> Option<Vec3> {
        self.inner.gradient(sub(p, self.offset))
    }
}

/// `p -> alpha f(p) + beta g(p)`
pub struct Combination<F, G> {
    pub alpha: f64,
    pub first: F,
    pub beta: f64,
    pub second: G,
}

impl<F: ScalarField, G: ScalarField> ScalarField for Combination<F, G> {
    fn name(&self) -> String {
        format!(
            "{} * {} + {} * {}",
            self.alpha,
            self.first.name(),
            self.beta,
            self.second.name()
        )
    }
    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        Ok(self.alpha * self.first.eval(p)? + self.beta * self.second.eval(p)?)
    }
    fn gradient(&self, p: Vec3) -> Option<Vec3> {
        let a = self.first.gradient(p)?;
        let b = self.second.gradient(p)?;
        Some(geometry::add(
            geometry::scale(a, self.alpha),
            geometry::scale(b, self.beta),
        ))
    }
}

// ---------------------------------------------------------------------------
// catalog

/// Names accepted by [`catalog`], in documentation order.
pub const CATALOG_NAMES: [&str; 8] = [
    "constant",
    "affine",
    "coordinate",
    "quadratic-psd",
    "max-affine",
    "exp-affine",
    "norm-squared",
    "sharpness-cone",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown catalog field `{0}` (expected one of: {names})", names = CATALOG_NAMES.join(", "))]
    UnknownName(String),
    #[error("`{name}` takes {expected} parameters, got {got}")]
    Arity {
        name: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("quadratic-psd matrix is not positive semidefinite (smallest eigenvalue {0})")]
    NotPositiveSemidefinite(f64),
    #[error("invalid parameter for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

/// An affine map `p -> g.p + h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    fn at(&self, p: Vec3) -> f64 {
        dot(self.normal, p) + self.offset
    }
}

/// The built-in fields.
#[derive(Debug, Clone, PartialEq)]
pub enum CatalogField {
    Constant(f64),
    Affine(Plane),
    /// `p -> p[axis]`
    Coordinate(usize),
    /// `p -> (p - center)^T A (p - center)`, `A` symmetric PSD.
    QuadraticPsd { matrix: [[f64; 3]; 3], center: Vec3 },
    MaxAffine(Vec<Plane>),
    /// `p -> exp(g.p + h)`
    ExpAffine(Plane),
    /// `p -> |p - center|^2`
    NormSquared { center: Vec3 },
    /// `p -> R - |p - C|`, the equality case of the trapezoid bound.
    SharpnessCone { center: Vec3, radius: f64 },
}

fn arity(name: &'static str, expected: &'static str, got: usize) -> CatalogError {
    CatalogError::Arity {
        name,
        expected,
        got,
    }
}

fn vec3(p: &[f64]) -> Vec3 {
    [p[0], p[1], p[2]]
}

fn plane(p: &[f64]) -> Plane {
    Plane {
        normal: vec3(p),
        offset: p[3],
    }
}

/// Builds a catalog field by name.
///
/// Fields that are naturally tied to a ball (`norm-squared` without a
/// center, `sharpness-cone` without `a,b,c,R`) bind to `ball`.
///
/// | name             | parameters                                  |
/// |------------------|---------------------------------------------|
/// | `constant`       | `c`                                         |
/// | `affine`         | `g1,g2,g3,h`                                |
/// | `coordinate`     | axis index `0`, `1` or `2`                  |
/// | `quadratic-psd`  | 9 row-major matrix entries, optional center |
/// | `max-affine`     | one or more groups `g1,g2,g3,h`             |
/// | `exp-affine`     | `g1,g2,g3,h`                                |
/// | `norm-squared`   | none, or center `a,b,c`                     |
/// | `sharpness-cone` | none, or `a,b,c,R`                          |
pub fn catalog(name: &str, params: &[f64], ball: &Ball) -> Result<CatalogField, CatalogError> {
    if let Some(bad) = params.iter().find(|v| !v.is_finite()) {
        return Err(CatalogError::InvalidParameter {
            name: "catalog",
            reason: format!("non-finite parameter {bad}"),
        });
    }
    let n = params.len();
    let field = match name {
        "constant" => {
            if n != 1 {
                return Err(arity("constant", "1", n));
            }
            CatalogField::Constant(params[0])
        }
        "affine" => {
            if n != 4 {
                return Err(arity("affine", "4", n));
            }
            CatalogField::Affine(plane(params))
        }
        "coordinate" => {
            if n != 1 {
                return Err(arity("coordinate", "1", n));
            }
            let axis = params[0];
            if ![0.0, 1.0, 2.0].contains(&axis) {
                return Err(CatalogError::InvalidParameter {
                    name: "coordinate",
                    reason: format!("axis must be 0, 1 or 2, got {axis}"),
                });
            }
            CatalogField::Coordinate(axis as usize)
        }
        "quadratic-psd" => {
            if n != 9 && n != 12 {
                return Err(arity("quadratic-psd", "9 or 12", n));
            }
            let mut a = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] = 0.5 * (params[3 * i + j] + params[3 * j + i]);
                }
            }
            let min_eig = symmetric_eigenvalues(&a)[0];
            let scale = a.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            if min_eig < -1e-12 * scale {
                return Err(CatalogError::NotPositiveSemidefinite(min_eig));
            }
            let center = if n == 12 { vec3(&params[9..]) } else { [0.0; 3] };
            CatalogField::QuadraticPsd { matrix: a, center }
        }
        "max-affine" => {
            if n == 0 || !n.is_multiple_of(4) {
                return Err(arity("max-affine", "a positive multiple of 4", n));
            }
            CatalogField::MaxAffine(params.chunks_exact(4).map(plane).collect())
        }
        "exp-affine" => {
            if n != 4 {
                return Err(arity("exp-affine", "4", n));
            }
            CatalogField::ExpAffine(plane(params))
        }
        "norm-squared" => match n {
            0 => CatalogField::NormSquared {
                center: ball.center(),
            },
            3 => CatalogField::NormSquared {
                center: vec3(params),
            },
            _ => return Err(arity("norm-squared", "0 or 3", n)),
        },
        "sharpness-cone" => match n {
            0 => CatalogField::SharpnessCone {
                center: ball.center(),
                radius: ball.radius(),
            },
            4 => {
                if params[3] <= 0.0 {
                    return Err(CatalogError::InvalidParameter {
                        name: "sharpness-cone",
                        reason: "radius must be positive".into(),
                    });
                }
                CatalogField::SharpnessCone {
                    center: vec3(params),
                    radius: params[3],
                }
            }
            _ => return Err(arity("sharpness-cone", "0 or 4", n)),
        },
        other => return Err(CatalogError::UnknownName(other.to_string())),
    };
    Ok(field)
}

impl CatalogField {
    /// Whether the field is continuously differentiable everywhere.
    pub fn is_smooth(&self) -> bool {
        !matches!(
            self,
            CatalogField::MaxAffine(_) | CatalogField::SharpnessCone { .. }
        )
    }

    pub fn catalog_name(&self) -> &'static str {
        match self {
            CatalogField::Constant(_) => "constant",
            CatalogField::Affine(_) => "affine",
            CatalogField::Coordinate(_) => "coordinate",
            CatalogField::QuadraticPsd { .. } => "quadratic-psd",
            CatalogField::MaxAffine(_) => "max-affine",
            CatalogField::ExpAffine(_) => "exp-affine",
            CatalogField::NormSquared { .. } => "norm-squared",
            CatalogField::SharpnessCone { .. } => "sharpness-cone",
        }
    }
}

impl fmt::Display for CatalogField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.catalog_name())
    }
}

impl ScalarField for CatalogField {
    fn name(&self) -> String {
        self.catalog_name().to_string()
    }

    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        let v = match self {
            CatalogField::Constant(c) => *c,
            CatalogField::Affine(pl) => pl.at(p),
            CatalogField::Coordinate(axis) => p[*axis],
            CatalogField::QuadraticPsd { matrix, center } => {
                let d = sub(p, *center);
                dot(d, mat_vec(matrix, d))
            }
            CatalogField::MaxAffine(planes) => planes
                .iter()
                .map(|pl| pl.at(p))
                .fold(f64::NEG_INFINITY, f64::max),
            CatalogField::ExpAffine(pl) => pl.at(p).exp(),
            CatalogField::NormSquared { center } => {
                let d = sub(p, *center);
                dot(d, d)
            }
            CatalogField::SharpnessCone { center, radius } => radius - norm(sub(p, *center)),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::new(p, format!("{} is not finite here", self)))
        }
    }

    fn gradient(&self, p: Vec3) -> Option<Vec3> {
        match self {
            CatalogField::Constant(_) => Some([0.0; 3]),
            CatalogField::Affine(pl) => Some(pl.normal),
            CatalogField::Coordinate(axis) => {
                let mut g = [0.0; 3];
                g[*axis] = 1.0;
                Some(g)
            }
            CatalogField::QuadraticPsd { matrix, center } => {
                Some(geometry::scale(mat_vec(matrix, sub(p, *center)), 2.0))
            }
            CatalogField::MaxAffine(planes) => {
                let values: Vec<f64> = planes.iter().map(|pl| pl.at(p)).collect();
                let (first, best) = values
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
                // on (or within rounding of) a kink there is no unique gradient
                let near_tie = |i: usize| {
                    let pl = &planes[i];
                    let scale = 1.0 + pl.offset.abs() + pl.normal.iter().zip(&p).map(|(g, x)| (g * x).abs()).sum::<f64>();
                    best - values[i] <= 1e-9 * scale
                };
                if (0..planes.len()).any(|i| planes[i].normal != planes[first].normal && near_tie(i)) {
                    return None;
                }
                Some(planes[first].normal)
            }
            CatalogField::ExpAffine(pl) => Some(geometry::scale(pl.normal, pl.at(p).exp())),
            CatalogField::NormSquared { center } => Some(geometry::scale(sub(p, *center), 2.0)),
            CatalogField::SharpnessCone { center, .. } => {
                let d = sub(p, *center);
                let r = norm(d);
                // the direction of d is noise this close to the apex
                let scale = 1.0 + center.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                if r <= 1e-6 * scale {
                    None
                } else {
                    Some(geometry::scale(d, -1.0 / r))
                }
            }
        }
    }
}

fn mat_vec(a: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
}

/// Eigenvalues of a symmetric 3x3 matrix in ascending order (cyclic Jacobi).
fn symmetric_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let mut m = *a;
    for _sweep in 0..50 {
        let off = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
        let diag = m[0][0].powi(2) + m[1][1].powi(2) + m[2][2].powi(2);
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let tau = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
            let t = if tau == 0.0 { 1.0 } else { t };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // m <- J^T m J for the rotation in the (p, q) plane
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
        }
    }
    let mut d = [m[0][0], m[1][1], m[2][2]];
    d.sort_by(f64::total_cmp);
    d
}

// ---------------------------------------------------------------------------
// radial derivative

/// A derivative value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

/// Finite-difference step for a ball of radius `radius`.
pub fn fd_step(radius: f64) -> f64 {
    (1e-5 * radius.max(1.0)).min(radius / 8.0)
}

/// Derivative of `t -> f(C + t dir)` at `t = rho`, `rho` in `[0, R]`.
///
/// Uses the analytic gradient when the field has one at that point.
/// Otherwise a second-order finite difference is taken: central in the
/// interior, one-sided near `rho = 0` and `rho = R` so the stencil stays in
/// the ball. The error estimate compares steps `h` and `2h` and adds a
/// rounding term.
pub fn radial_derivative_along(
    f: &dyn ScalarField,
    ball: &Ball,
    dir: Vec3,
    rho: f64,
) -> Result<Derivative, EvalError> {
    let p = ball.point_along(dir, rho);
    if let Some(g) = f.gradient(p) {
        let value = dot(g, dir);
        let mag: f64 = g.iter().zip(dir.iter()).map(|(a, b)| (a * b).abs()).sum();
        return Ok(Derivative {
            value,
            error: 4.0 * f64::EPSILON * mag,
        });
    }

    let r = ball.radius();
    let h = fd_step(r);
    let at = |t: f64| f.eval(ball.point_along(dir, t));
    let f0 = at(rho)?;
    let (d_h, d_2h, fmax) = if rho - 2.0 * h >= 0.0 && rho + 2.0 * h <= r {
        let (fp1, fm1) = (at(rho + h)?, at(rho - h)?);
        let (fp2, fm2) = (at(rho + 2.0 * h)?, at(rho - 2.0 * h)?);
        let fmax = [f0, fp1, fm1, fp2, fm2].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (
            (fp1 - fm1) / (2.0 * h),
            (fp2 - fm2) / (4.0 * h),
            fmax,
        )
    } else {
        // one-sided: forward near the center, backward near the surface
        let s = if rho - 2.0 * h < 0.0 { 1.0 } else { -1.0 };
        let f1 = at(rho + s * h)?;
        let f2 = at(rho + s * 2.0 * h)?;
        let f4 = at(rho + s * 4.0 * h)?;
        let fmax = [f0, f1, f2, f4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (
            s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
            s * (-3.0 * f0 + 4.0 * f2 - f4) / (4.0 * h),
            fmax,
        )
    };
    Ok(Derivative {
        value: d_h,
        error: (d_h - d_2h).abs() + 4.0 * f64::EPSILON * fmax / h,
    })
}

/// `d/drho f(to_cartesian(ball, (rho, phi, theta)))`.
pub fn radial_derivative(
    f: &dyn ScalarField,
    ball: &Ball,
    s: SphericalCoord,
) -> Result<f64, EvalError> {
    if s.rho > ball.radius() {
        return Err(EvalError::new(
            ball.point_along(s.direction(), s.rho),
            format!("radial coordinate {} outside [0, {}]", s.rho, ball.radius()),
        ));
    }
    Ok(radial_derivative_along(f, ball, s.direction(), s.rho)?.value)
}

/// The composite `p -> |df/drho|(p)` for rays from the center of `ball`.
/// Undefined at the center itself.
pub struct RadialSlope<'a> {
    pub field: &'a dyn ScalarField,
    pub ball: Ball,
}

impl ScalarField for RadialSlope<'_> {
    fn name(&self) -> String {
        format!("|d({})/drho|", self.field.name())
    }

    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        let d = sub(p, self.ball.center());
        let rho = norm(d);
        if rho == 0.0 {
            return Err(EvalError::new(p, "radial derivative undefined at the center"));
        }
        let r = self.ball.radius();
        if rho > r * (1.0 + 1e-12) {
            return Err(EvalError::new(p, "point outside the ball"));
        }
        let dir = geometry::scale(d, 1.0 / rho);
        Ok(radial_derivative_along(self.field, &self.ball, dir, rho.min(r))?
            .value
            .abs())
    }
}

// ---------------------------------------------------------------------------
// convexity certificate

/// Default number of sampled chords per certificate.
pub const DEFAULT_CERTIFICATE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub x: Vec3,
    pub y: Vec3,
    pub lambda: f64,
    /// `f(lambda x + (1 - lambda) y) - lambda f(x) - (1 - lambda) f(y)`
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityCertificate {
    pub target: String,
    pub samples_tested: usize,
    /// Samples where some evaluation failed (e.g. hitting the center for
    /// [`RadialSlope`]); they are excluded from the statistics.
    pub samples_skipped: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub counterexample: Option<Counterexample>,
    pub passed: bool,
}

#[derive(Default)]
struct BlockStats {
    tested: usize,
    skipped: usize,
    max_abs: f64,
    worst: Option<Counterexample>,
}

fn chord_violation(f: &dyn ScalarField, x: Vec3, y: Vec3, lambda: f64) -> Result<(f64, f64), EvalError> {
    let m = [
        lambda * x[0] + (1.0 - lambda) * y[0],
        lambda * x[1] + (1.0 - lambda) * y[1],
        lambda * x[2] + (1.0 - lambda) * y[2],
    ];
    let (fx, fy, fm) = (f.eval(x)?, f.eval(y)?, f.eval(m)?);
    let mag = fx.abs().max(fy.abs()).max(fm.abs());
    Ok((fm - lambda * fx - (1.0 - lambda) * fy, mag))
}

/// Samples `n` chords of the ball and records the worst violation of the
/// convexity inequality. Deterministic in `(n, seed)` for any thread count.
pub fn convexity_sample(
    f: &dyn ScalarField,
    ball: &Ball,
    n: usize,
    seed: u64,
) -> ConvexityCertificate {
    use rand::Rng;

    let blocks: Vec<BlockStats> = (0..sampling::block_count(n))
        .into_par_iter()
        .map(|b| {
            let mut rng = sampling::block_rng(seed, Stream::Convexity, b);
            let mut stats = BlockStats::default();
            for _ in sampling::block_range(b, n) {
                let x = sampling::uniform_in_ball(&mut rng, ball);
                let y = sampling::uniform_in_ball(&mut rng, ball);
                let lambda: f64 = rng.random();
                match chord_violation(f, x, y, lambda) {
                    Ok((v, mag)) => {
                        stats.tested += 1;
                        stats.max_abs = stats.max_abs.max(mag);
                        if stats.worst.as_ref().is_none_or(|w| v > w.violation) {
                            stats.worst = Some(Counterexample {
                                x,
                                y,
                                lambda,
                                violation: v,
                            });
                        }
                    }
                    Err(_) => stats.skipped += 1,
                }
            }
            stats
        })
        .collect();

    // blocks are merged in index order; ties keep the earliest sample
    let mut total = BlockStats::default();
    for b in blocks {
        total.tested += b.tested;
        total.skipped += b.skipped;
        total.max_abs = total.max_abs.max(b.max_abs);
        if let Some(w) = b.worst {
            if total.worst.as_ref().is_none_or(|t| w.violation > t.violation) {
                total.worst = Some(w);
            }
        }
    }

    let max_violation = total.worst.as_ref().map_or(0.0, |w| w.violation.max(0.0));
    let tolerance = 1e-10 * (1.0 + total.max_abs);
    let passed = max_violation <= tolerance;
    ConvexityCertificate {
        target: f.name(),
        samples_tested: total.tested,
        samples_skipped: total.skipped,
        max_violation,
        tolerance,
        counterexample: if passed { None } else { total.worst },
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> Ball {
        Ball::unit()
    }

    fn cat(name: &str, params: &[f64]) -> CatalogField {
        catalog(name, params, &unit()).unwrap()
    }

    /// A copy of a field with its gradient hidden, forcing finite differences.
    struct NoGradient<F>(F);
    impl<F: ScalarField> ScalarField for NoGradient<F> {
        fn name(&self) -> String {
            self.0.name()
        }
        fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
            self.0.eval(p)
        }
    }

    #[test]
    fn catalog_examples() {
        assert_eq!(cat("constant", &[3.0]).eval([0.4, -2.0, 9.0]).unwrap(), 3.0);
        let cone = cat("sharpness-cone", &[]);
        assert_eq!(cone.eval([1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cone.eval([0.0, 0.0, 0.0]).unwrap(), 1.0);
        let ns = cat("norm-squared", &[0.0, 0.0, 0.0]);
        assert_eq!(ns.eval([1.0, 2.0, 3.0]).unwrap(), 14.0);
        let ma = cat("max-affine", &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(ma.eval([-2.0, 5.0, 1.0]).unwrap(), 2.0);
        assert_eq!(cat("coordinate", &[2.0]).eval([1.0, 2.0, 3.0]).unwrap(), 3.0);
    }

    #[test]
    fn catalog_errors() {
        let b = unit();
        assert!(matches!(
            catalog("nope", &[], &b),
            Err(CatalogError::UnknownName(_))
        ));
        assert!(matches!(
            catalog("constant", &[], &b),
            Err(CatalogError::Arity { .. })
        ));
        assert!(matches!(
            catalog("max-affine", &[1.0, 2.0], &b),
            Err(CatalogError::Arity { .. })
        ));
        assert!(matches!(
            catalog("coordinate", &[3.0], &b),
            Err(CatalogError::InvalidParameter { .. })
        ));
        let indefinite = [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0];
        assert!(matches!(
            catalog("quadratic-psd", &indefinite, &b),
            Err(CatalogError::NotPositiveSemidefinite(_))
        ));
        let singular = [1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(catalog("quadratic-psd", &singular, &b).is_ok());
        assert!(catalog("constant", &[f64::NAN], &b).is_err());
    }

    #[test]
    fn eigenvalues_match_known_spectrum() {
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let e = symmetric_eigenvalues(&a);
        for (got, want) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((got - want).abs() < 1e-12, "{e:?}");
        }
        let e = symmetric_eigenvalues(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(e[0].abs() < 1e-15 && e[1].abs() < 1e-15 && (e[2] - 2.0).abs() < 1e-15, "{e:?}");
        let e = symmetric_eigenvalues(&[[4.0, 1.0, 2.0], [1.0, 3.0, 0.5], [2.0, 0.5, 6.0]]);
        // trace and determinant are invariants
        assert!((e.iter().sum::<f64>() - 13.0).abs() < 1e-12);
        assert!((e.iter().product::<f64>() - 55.0).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn radial_derivative_examples() {
        let ball = unit();
        let s = SphericalCoord::new(0.3, 1.1, 2.2).unwrap();
        let ns = cat("norm-squared", &[]);
        let analytic = radial_derivative(&ns, &ball, s).unwrap();
        let fd = radial_derivative(&NoGradient(ns.clone()), &ball, s).unwrap();
        assert!((analytic - 0.6).abs() < 1e-14);
        assert!((fd - 0.6).abs() < 1e-9);

        let c = cat("constant", &[2.5]);
        assert_eq!(radial_derivative(&c, &ball, s).unwrap(), 0.0);
        assert_eq!(radial_derivative(&NoGradient(c), &ball, s).unwrap(), 0.0);

        let cone = cat("sharpness-cone", &[]);
        let s = SphericalCoord::new(0.5, 0.4, 5.0).unwrap();
        assert!((radial_derivative(&cone, &ball, s).unwrap() + 1.0).abs() < 1e-15);
        assert!((radial_derivative(&NoGradient(cone.clone()), &ball, s).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn radial_derivative_at_endpoints_is_one_sided() {
        let ball = unit();
        let cone = cat("sharpness-cone", &[]);
        // no gradient at the center: falls back to a forward difference
        let s0 = SphericalCoord::new(0.0, 1.0, 1.0).unwrap();
        let d0 = radial_derivative_along(&cone, &ball, s0.direction(), 0.0).unwrap();
        assert!((d0.value + 1.0).abs() < 1e-9);
        assert!(d0.error < 1e-8);
        // a field that fails outside the ball still differentiates at the surface
        struct Inside;
        impl ScalarField for Inside {
            fn name(&self) -> String {
                "inside".into()
            }
            fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
                let r = norm(p);
                if r > 1.0 + 1e-14 {
                    Err(EvalError::new(p, "outside"))
                } else {
                    Ok(r * r * r)
                }
            }
        }
        let s = SphericalCoord::new(1.0, 2.0, 3.0).unwrap();
        let d = radial_derivative(&Inside, &ball, s).unwrap();
        assert!((d - 3.0).abs() < 1e-8);
        let too_far = SphericalCoord::new(1.5, 2.0, 3.0).unwrap();
        assert!(radial_derivative(&Inside, &ball, too_far).is_err());
    }

    #[test]
    fn radially_symmetric_derivative_ignores_direction() {
        use rand::{Rng, SeedableRng};
        let ball = Ball::new([0.5, -1.0, 2.0], 1.7).unwrap();
        let fields: Vec<Box<dyn ScalarField>> = vec![
            Box::new(cat("norm-squared", &[0.5, -1.0, 2.0])),
            Box::new(catalog("sharpness-cone", &[], &ball).unwrap()),
            Box::new(NoGradient(cat("norm-squared", &[0.5, -1.0, 2.0]))),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for f in &fields {
            let reference =
                radial_derivative(f.as_ref(), &ball, SphericalCoord::new(0.9, 0.0, 0.0).unwrap())
                    .unwrap();
            for _ in 0..1000 {
                let s = SphericalCoord::new(0.9, rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI)
                    .unwrap();
                let d = radial_derivative(f.as_ref(), &ball, s).unwrap();
                assert!((d - reference).abs() < 1e-9, "{} {d} {reference}", f.name());
            }
        }
    }

    fn smooth_samples(ball: &Ball) -> Vec<CatalogField> {
        vec![
            cat("constant", &[-2.0]),
            cat("affine", &[1.0, -2.0, 0.5, 3.0]),
            cat("coordinate", &[1.0]),
            cat(
                "quadratic-psd",
                &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0, 0.1, 0.2, -0.3],
            ),
            cat("exp-affine", &[0.3, -0.7, 1.1, 0.2]),
            catalog("norm-squared", &[], ball).unwrap(),
            cat("norm-squared", &[1.0, 2.0, -1.0]),
        ]
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        use rand::SeedableRng;
        for ball in [unit(), Ball::new([1.0, -2.0, 0.5], 3.0).unwrap()] {
            let h = 1e-5 * ball.radius().max(1.0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            let mut fields = smooth_samples(&ball);
            fields.push(cat("max-affine", &[1.0, 0.0, 0.0, 0.0, -1.0, 2.0, 0.0, 0.3]));
            fields.push(catalog("sharpness-cone", &[], &ball).unwrap());
            for f in &fields {
                for _ in 0..1000 {
                    let p = sampling::uniform_in_ball(&mut rng, &ball);
                    let Some(g) = f.gradient(p) else { continue };
                    for i in 0..3 {
                        let mut hi = p;
                        let mut lo = p;
                        hi[i] += h;
                        lo[i] -= h;
                        // skip stencils straddling a kink
                        if !f.is_smooth() && (f.gradient(hi) != Some(g) || f.gradient(lo) != Some(g)) {
                            continue;
                        }
                        let fd = (f.eval(hi).unwrap() - f.eval(lo).unwrap()) / (2.0 * h);
                        let err = (fd - g[i]).abs();
                        assert!(
                            err <= 1e-9 || err <= 1e-6 * g[i].abs(),
                            "{f} at {p:?}: fd {fd} vs {}",
                            g[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn convex_fields_pass_certificate() {
        let ball = Ball::new([0.3, 0.2, -0.1], 1.5).unwrap();
        let mut fields = smooth_samples(&ball);
        fields.retain(|f| !matches!(f, CatalogField::Affine(_) | CatalogField::Coordinate(_)));
        fields.push(cat(
            "max-affine",
            &[1.0, 0.0, 0.0, 0.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 2.0, -1.0],
        ));
        for f in &fields {
            let cert = convexity_sample(f, &ball, 10_000, 1);
            assert!(cert.passed, "{f}: {cert:?}");
            assert_eq!(cert.samples_tested, 10_000);
        }
        let ns = cat("norm-squared", &[0.0, 0.0, 0.0]);
        assert_eq!(convexity_sample(&ns, &ball, 10_000, 2).max_violation, 0.0);
        for f in [cat("affine", &[1.0, -2.0, 0.5, 3.0]), cat("coordinate", &[0.0])] {
            let cert = convexity_sample(&f, &ball, 10_000, 3);
            assert!(cert.passed && cert.max_violation <= 1e-12, "{cert:?}");
        }
    }

    #[test]
    fn cone_fails_certificate_with_checkable_counterexample() {
        let ball = unit();
        let cone = cat("sharpness-cone", &[]);
        let cert = convexity_sample(&cone, &ball, 10_000, 42);
        assert!(!cert.passed);
        let ce = cert.counterexample.clone().expect("counterexample");
        let m: Vec3 = std::array::from_fn(|i| ce.lambda * ce.x[i] + (1.0 - ce.lambda) * ce.y[i]);
        let direct = cone.eval(m).unwrap()
            - ce.lambda * cone.eval(ce.x).unwrap()
            - (1.0 - ce.lambda) * cone.eval(ce.y).unwrap();
        assert_eq!(direct, ce.violation);
        assert!(direct > cert.tolerance);
        assert_eq!(cert.max_violation, ce.violation);
    }

    #[test]
    fn certificate_is_deterministic() {
        let ball = unit();
        let cone = cat("sharpness-cone", &[]);
        let a = convexity_sample(&cone, &ball, 5000, 9);
        let b = convexity_sample(&cone, &ball, 5000, 9);
        assert_eq!(a, b);
        let c = convexity_sample(&cone, &ball, 5000, 10);
        assert_ne!(a.counterexample, c.counterexample);
    }

    #[test]
    fn radial_slope_of_norm_squared_is_convex() {
        let ball = unit();
        let ns = cat("norm-squared", &[]);
        let slope = RadialSlope { field: &ns, ball };
        assert!((slope.eval([0.0, 0.6, 0.0]).unwrap() - 1.2).abs() < 1e-14);
        assert!(slope.eval([0.0; 3]).is_err());
        let cert = convexity_sample(&slope, &ball, 10_000, 4);
        assert!(cert.passed, "{cert:?}");

        // |g.u| is not convex for a nonzero constant gradient
        let aff = cat("affine", &[1.0, 0.0, 0.0, 0.0]);
        let cert = convexity_sample(&RadialSlope { field: &aff, ball }, &ball, 10_000, 4);
        assert!(!cert.passed);
    }

    #[test]
    fn no_gradient_within_rounding_of_a_kink() {
        let ball = Ball::new([3.0, -4.0, 1.0], 0.5).unwrap();
        let cone = catalog("sharpness-cone", &[], &ball).unwrap();
        let c = ball.center();
        assert!(cone.gradient([c[0] + 1e-15, c[1], c[2]]).is_none());
        assert!(cone.gradient([c[0] + 1e-3, c[1], c[2]]).is_some());
        let vee = cat("max-affine", &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert!(vee.gradient([1e-17, 0.3, 0.0]).is_none());
        assert_eq!(vee.gradient([1e-3, 0.3, 0.0]), Some([1.0, 0.0, 0.0]));
        // the one-sided derivative at the apex still comes out exact-ish
        let moved = ball.translated([0.1, 7.3, -2.9]);
        let shifted = Shifted { inner: &cone, offset: [0.1, 7.3, -2.9] };
        let d = radial_derivative_along(&shifted, &moved, [0.6, 0.0, 0.8], 0.0).unwrap();
        assert!((d.value + 1.0).abs() < 1e-9, "{d:?}");
    }
}
