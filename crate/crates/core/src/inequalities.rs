//! Both sides of the Hermite-Hadamard chain on a ball and of the trapezoid,
//! midpoint and surface-versus-center bounds, plus the per-ray identities
//! they are built from.
//!
//! With `V` the volume mean, `S` the surface mean, `f(C)` the center value
//! and `I = int_sigma |df/drho| dsigma`:
//!
//! | check            | lhs            | rhs                                  |
//! |------------------|----------------|--------------------------------------|
//! | `hh_lower`       | `f(C)`         | `V`                                  |
//! | `hh_upper`       | `V`            | `S`                                  |
//! | `trapezoid`      | `|S - V|`      | `I / (16 pi R)`                      |
//! | `midpoint`       | `|V - f(C)|`   | `5 I / (16 pi R)`                    |
//! | `surface_center` | `|S - f(C)|`   | `(R/2) D0 + I / (8 pi R)`            |
//!
//! `D0` is the largest `|df/drho|` at the center over the sphere-rule
//! directions. A check holds when `rhs - lhs >= -tolerance`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    convexity_sample, radial_derivative_along, ConvexityCertificate, Derivative, EvalError,
    RadialSlope, ScalarField, DEFAULT_CERTIFICATE_SAMPLES,
};
use crate::geometry::{ray_direction, Ball, GeometryError, SphericalCoord};
use crate::quadrature::{
    ball_integral, gauss_legendre, sphere_integral, sphere_integral_with, QuadratureError,
    QuadratureSpec, SphereRule,
};
use crate::sampling::{self, Stream};
use crate::summation::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Multiplier applied to summed error estimates for the default tolerance.
pub const DEFAULT_TOLERANCE_FACTOR: f64 = 10.0;

/// Default relative tolerance for the per-ray identities.
pub const RAY_IDENTITY_TOLERANCE: f64 = 1e-9;

/// Rays sampled by [`BallAnalysis::ray_identities`].
pub const RAY_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    HhLower,
    HhUpper,
    Trapezoid,
    Midpoint,
    SurfaceCenter,
    RayPartsIdentity,
    RayFtcIdentity,
}

impl CheckName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::HhLower => "hh_lower",
            CheckName::HhUpper => "hh_upper",
            CheckName::Trapezoid => "trapezoid",
            CheckName::Midpoint => "midpoint",
            CheckName::SurfaceCenter => "surface_center",
            CheckName::RayPartsIdentity => "ray_parts_identity",
            CheckName::RayFtcIdentity => "ray_ftc_identity",
        }
    }
}

/// One evaluated bound.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: CheckName,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
    pub holds: bool,
    pub tolerance: f64,
    /// Sampled hypotheses of the underlying theorem. Informational only: a
    /// failed certificate does not change `holds`.
    pub hypothesis_certificates: Vec<ConvexityCertificate>,
}

impl InequalityReport {
    pub fn new(
        name: CheckName,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        hypothesis_certificates: Vec<ConvexityCertificate>,
    ) -> Self {
        let margin = rhs - lhs;
        Self {
            name,
            lhs,
            rhs,
            margin,
            holds: margin >= -tolerance,
            tolerance,
            hypothesis_certificates,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanErrors {
    pub volume_mean: f64,
    pub surface_mean: f64,
    pub center_value: f64,
    pub radial_abs_surface_integral: f64,
}

/// The members of the Hermite-Hadamard chain and the bound integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeansSummary {
    pub volume_mean: f64,
    pub surface_mean: f64,
    pub center_value: f64,
    /// `int_sigma |df/drho| dsigma`
    pub radial_abs_surface_integral: f64,
    pub error_estimates: MeanErrors,
    /// `int_sigma f dsigma`, kept for the alternative reading of the
    /// surface-versus-center bound.
    pub surface_integral: f64,
}

/// Computes the means of `f` on `ball`.
pub fn means(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<MeansSummary, CheckError> {
    let volume = ball_integral(f, ball, spec)?;
    let surface = sphere_integral(f, ball, spec)?;
    let r = ball.radius();
    let radial = sphere_integral_with(ball, spec, |dir| {
        let d = radial_derivative_along(f, ball, dir, r)?;
        Ok((d.value.abs(), d.error))
    })?;
    let center_value = f.eval(ball.center())?;
    Ok(MeansSummary {
        volume_mean: volume.value / ball.volume(),
        surface_mean: surface.value / ball.surface_area(),
        center_value,
        radial_abs_surface_integral: radial.value,
        error_estimates: MeanErrors {
            volume_mean: volume.error_estimate / ball.volume(),
            surface_mean: surface.error_estimate / ball.surface_area(),
            center_value: f64::EPSILON * center_value.abs(),
            radial_abs_surface_integral: radial.error_estimate,
        },
        surface_integral: surface.value,
    })
}

/// Largest `|df/drho|` at the center over the sphere-rule directions, with
/// the error estimate of the node that attains it.
fn center_slope(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<Derivative, CheckError> {
    let rule = SphereRule::new(spec.n_phi, spec.n_theta)?;
    let mut best = Derivative {
        value: 0.0,
        error: 0.0,
    };
    for dir in &rule.directions {
        let d = radial_derivative_along(f, ball, *dir, 0.0)?;
        if d.value.abs() > best.value {
            best = Derivative {
                value: d.value.abs(),
                error: d.error,
            };
        }
        best.error = best.error.max(d.error);
    }
    Ok(best)
}

/// All quantities for one `(f, ball, spec)`, computed once and shared by
/// every check so the reports are mutually consistent.
pub struct BallAnalysis<'a> {
    field: &'a dyn ScalarField,
    ball: Ball,
    spec: QuadratureSpec,
    means: MeansSummary,
    center_slope: Derivative,
    certificate_samples: usize,
    field_certificate: OnceLock<ConvexityCertificate>,
    slope_certificate: OnceLock<ConvexityCertificate>,
}

impl<'a> BallAnalysis<'a> {
    pub fn new(
        field: &'a dyn ScalarField,
        ball: Ball,
        spec: QuadratureSpec,
    ) -> Result<Self, CheckError> {
        let means = means(field, &ball, &spec)?;
        let center_slope = center_slope(field, &ball, &spec)?;
        Ok(Self {
            field,
            ball,
            spec,
            means,
            center_slope,
            certificate_samples: DEFAULT_CERTIFICATE_SAMPLES,
            field_certificate: OnceLock::new(),
            slope_certificate: OnceLock::new(),
        })
    }

    pub fn with_certificate_samples(mut self, n: usize) -> Self {
        self.certificate_samples = n;
        self
    }

    pub fn means(&self) -> &MeansSummary {
        &self.means
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    /// `D0` and its error estimate.
    pub fn center_slope(&self) -> Derivative {
        self.center_slope
    }

    /// Sampled convexity of `f` itself.
    pub fn field_certificate(&self) -> &ConvexityCertificate {
        self.field_certificate.get_or_init(|| {
            let mut c = convexity_sample(
                self.field,
                &self.ball,
                self.certificate_samples,
                self.spec.seed,
            );
            c.target = "f".into();
            c
        })
    }

    /// Sampled convexity of `p -> |df/drho|(p)`, away from the center.
    pub fn slope_certificate(&self) -> &ConvexityCertificate {
        self.slope_certificate.get_or_init(|| {
            let slope = RadialSlope {
                field: self.field,
                ball: self.ball,
            };
            let mut c = convexity_sample(
                &slope,
                &self.ball,
                self.certificate_samples,
                self.spec.seed,
            );
            c.target = "|df/drho|".into();
            c
        })
    }

    fn tolerance(tol: Option<f64>, errors: &[f64]) -> f64 {
        tol.unwrap_or_else(|| DEFAULT_TOLERANCE_FACTOR * errors.iter().sum::<f64>())
    }

    fn slope_error_scale(&self, k: f64) -> f64 {
        k * self.means.error_estimates.radial_abs_surface_integral / (PI * self.ball.radius())
    }

    /// `f(C) <= V` and `V <= S`.
    pub fn hh_chain(&self, tol: Option<f64>) -> (InequalityReport, InequalityReport) {
        let m = &self.means;
        let e = &m.error_estimates;
        let cert = vec![self.field_certificate().clone()];
        let lower = InequalityReport::new(
            CheckName::HhLower,
            m.center_value,
            m.volume_mean,
            Self::tolerance(tol, &[e.center_value, e.volume_mean]),
            cert.clone(),
        );
        let upper = InequalityReport::new(
            CheckName::HhUpper,
            m.volume_mean,
            m.surface_mean,
            Self::tolerance(tol, &[e.volume_mean, e.surface_mean]),
            cert,
        );
        (lower, upper)
    }

    /// `|S - V| <= I / (16 pi R)`
    pub fn trapezoid(&self, tol: Option<f64>) -> InequalityReport {
        let m = &self.means;
        let e = &m.error_estimates;
        let r = self.ball.radius();
        InequalityReport::new(
            CheckName::Trapezoid,
            (m.surface_mean - m.volume_mean).abs(),
            m.radial_abs_surface_integral / (16.0 * PI * r),
            Self::tolerance(
                tol,
                &[e.surface_mean, e.volume_mean, self.slope_error_scale(1.0 / 16.0)],
            ),
            vec![self.slope_certificate().clone()],
        )
    }

    /// `|V - f(C)| <= 5 I / (16 pi R)`
    pub fn midpoint(&self, tol: Option<f64>) -> InequalityReport {
        let m = &self.means;
        let e = &m.error_estimates;
        let r = self.ball.radius();
        InequalityReport::new(
            CheckName::Midpoint,
            (m.volume_mean - m.center_value).abs(),
            5.0 * m.radial_abs_surface_integral / (16.0 * PI * r),
            Self::tolerance(
                tol,
                &[e.volume_mean, e.center_value, self.slope_error_scale(5.0 / 16.0)],
            ),
            vec![self.slope_certificate().clone()],
        )
    }

    /// `|S - f(C)| <= (R/2) D0 + I / (8 pi R)`
    pub fn surface_center(&self, tol: Option<f64>) -> InequalityReport {
        let m = &self.means;
        let e = &m.error_estimates;
        let r = self.ball.radius();
        InequalityReport::new(
            CheckName::SurfaceCenter,
            (m.surface_mean - m.center_value).abs(),
            0.5 * r * self.center_slope.value + m.radial_abs_surface_integral / (8.0 * PI * r),
            Self::tolerance(
                tol,
                &[
                    e.surface_mean,
                    e.center_value,
                    0.5 * r * self.center_slope.error,
                    self.slope_error_scale(1.0 / 8.0),
                ],
            ),
            vec![self.slope_certificate().clone()],
        )
    }

    /// The right-hand side of the surface-versus-center bound when its last
    /// term is read as `int_sigma f dsigma / (8 pi R)` instead of the
    /// derivative integral.
    pub fn surface_center_rhs_with_field_integral(&self) -> f64 {
        let r = self.ball.radius();
        0.5 * r * self.center_slope.value + self.means.surface_integral / (8.0 * PI * r)
    }

    /// Both per-ray identities over [`RAY_SAMPLES`] seeded random rays with
    /// `spec.n_rho` radial nodes. `lhs` of each report is the largest
    /// relative discrepancy `|L - R| / (1 + |R|)`, `rhs` is 0, so the report
    /// holds when the discrepancy is within tolerance.
    pub fn ray_identities(
        &self,
        tol: Option<f64>,
    ) -> Result<(InequalityReport, InequalityReport), CheckError> {
        let rays = random_rays(self.spec.seed, RAY_SAMPLES);
        let mut parts = 0.0f64;
        let mut ftc = 0.0f64;
        for (phi, theta) in rays {
            let (l, r) = per_ray_parts_identity(self.field, &self.ball, phi, theta, self.spec.n_rho)?;
            parts = parts.max((l - r).abs() / (1.0 + r.abs()));
            let (l, r) = per_ray_ftc_identity(self.field, &self.ball, phi, theta, self.spec.n_rho)?;
            ftc = ftc.max((l - r).abs() / (1.0 + r.abs()));
        }
        let tolerance = tol.unwrap_or(RAY_IDENTITY_TOLERANCE);
        Ok((
            InequalityReport::new(CheckName::RayPartsIdentity, parts, 0.0, tolerance, vec![]),
            InequalityReport::new(CheckName::RayFtcIdentity, ftc, 0.0, tolerance, vec![]),
        ))
    }
}

/// Directions `(phi, theta)` uniform on the sphere, reproducible from `seed`.
pub fn random_rays(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rays = Vec::with_capacity(n);
    for b in 0..sampling::block_count(n) {
        let mut rng = sampling::block_rng(seed, Stream::Rays, b);
        for _ in sampling::block_range(b, n) {
            let v: f64 = rng.random();
            let w: f64 = rng.random();
            rays.push(((1.0 - 2.0 * v).clamp(-1.0, 1.0).acos(), 2.0 * PI * w));
        }
    }
    rays
}

struct Ray {
    dir: crate::geometry::Vec3,
    sin_phi: f64,
}

fn ray(ball: &Ball, phi: f64, theta: f64) -> Result<Ray, CheckError> {
    let theta = theta.rem_euclid(2.0 * PI);
    let s = SphericalCoord::new(ball.radius(), phi, if theta >= 2.0 * PI { 0.0 } else { theta })?;
    Ok(Ray {
        dir: ray_direction(s.phi, s.theta),
        sin_phi: s.phi.sin(),
    })
}

/// Integration by parts along one ray:
/// `int_0^R f_rho rho^3 sin(phi) drho` versus
/// `R^3 f(surface) sin(phi) - 3 int_0^R f rho^2 sin(phi) drho`,
/// both with the same `n`-point Gauss-Legendre rule.
pub fn per_ray_parts_identity(
    f: &dyn ScalarField,
    ball: &Ball,
    phi: f64,
    theta: f64,
    n: usize,
) -> Result<(f64, f64), CheckError> {
    let ray = ray(ball, phi, theta)?;
    let r = ball.radius();
    let rule = gauss_legendre(n, 0.0, r)?;
    let mut lhs_terms = Vec::with_capacity(n);
    let mut volume_terms = Vec::with_capacity(n);
    for (rho, w) in rule.nodes.iter().zip(&rule.weights) {
        let d = radial_derivative_along(f, ball, ray.dir, *rho)?.value;
        lhs_terms.push(w * d * rho.powi(3) * ray.sin_phi);
        volume_terms.push(w * f.eval(ball.point_along(ray.dir, *rho))? * rho * rho * ray.sin_phi);
    }
    let surface = f.eval(ball.point_along(ray.dir, r))?;
    let lhs = pairwise_sum(&lhs_terms);
    let rhs = r.powi(3) * surface * ray.sin_phi - 3.0 * pairwise_sum(&volume_terms);
    Ok((lhs, rhs))
}

/// Fundamental theorem of calculus along one ray:
/// `int_0^R f_rho sin(phi) drho` versus `(f(surface) - f(C)) sin(phi)`.
pub fn per_ray_ftc_identity(
    f: &dyn ScalarField,
    ball: &Ball,
    phi: f64,
    theta: f64,
    n: usize,
) -> Result<(f64, f64), CheckError> {
    let ray = ray(ball, phi, theta)?;
    let r = ball.radius();
    let rule = gauss_legendre(n, 0.0, r)?;
    let mut terms = Vec::with_capacity(n);
    for (rho, w) in rule.nodes.iter().zip(&rule.weights) {
        terms.push(w * radial_derivative_along(f, ball, ray.dir, *rho)?.value * ray.sin_phi);
    }
    let surface = f.eval(ball.point_along(ray.dir, r))?;
    let center = f.eval(ball.center())?;
    Ok((pairwise_sum(&terms), (surface - center) * ray.sin_phi))
}

/// `f(C) <= V <= S`, with the convexity certificate of `f` attached.
pub fn check_hh_chain(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
    tol: Option<f64>,
) -> Result<(InequalityReport, InequalityReport), CheckError> {
    Ok(BallAnalysis::new(f, *ball, *spec)?.hh_chain(tol))
}

pub fn check_trapezoid(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
    tol: Option<f64>,
) -> Result<InequalityReport, CheckError> {
    Ok(BallAnalysis::new(f, *ball, *spec)?.trapezoid(tol))
}

pub fn check_midpoint(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
    tol: Option<f64>,
) -> Result<InequalityReport, CheckError> {
    Ok(BallAnalysis::new(f, *ball, *spec)?.midpoint(tol))
}

pub fn check_surface_center(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
    tol: Option<f64>,
) -> Result<InequalityReport, CheckError> {
    Ok(BallAnalysis::new(f, *ball, *spec)?.surface_center(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{catalog, CatalogField};

    fn unit() -> Ball {
        Ball::unit()
    }

    fn cat(name: &str, params: &[f64]) -> CatalogField {
        catalog(name, params, &unit()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn analysis(f: &dyn ScalarField) -> BallAnalysis<'_> {
        BallAnalysis::new(f, unit(), QuadratureSpec::default())
            .unwrap()
            .with_certificate_samples(2000)
    }

    #[test]
    fn means_of_norm_squared() {
        let ns = cat("norm-squared", &[]);
        let m = means(&ns, &unit(), &QuadratureSpec::default()).unwrap();
        assert!(close(m.volume_mean, 0.6, 1e-13));
        assert!(close(m.surface_mean, 1.0, 1e-13));
        assert_eq!(m.center_value, 0.0);
        assert!(close(m.radial_abs_surface_integral, 8.0 * PI, 1e-12));
    }

    #[test]
    fn means_of_constant() {
        let c = cat("constant", &[-3.5]);
        let m = means(&c, &unit(), &QuadratureSpec::default()).unwrap();
        assert!(close(m.volume_mean, -3.5, 1e-13));
        assert!(close(m.surface_mean, -3.5, 1e-13));
        assert_eq!(m.center_value, -3.5);
        assert_eq!(m.radial_abs_surface_integral, 0.0);
    }

    #[test]
    fn means_of_sharpness_cone() {
        let f = cat("sharpness-cone", &[]);
        let m = means(&f, &unit(), &QuadratureSpec::default()).unwrap();
        assert!(close(m.volume_mean, 0.25, 1e-13));
        assert!(close(m.surface_mean, 0.0, 1e-13));
        assert_eq!(m.center_value, 1.0);
        assert!(close(m.radial_abs_surface_integral, 4.0 * PI, 1e-12));
    }

    #[test]
    fn hh_chain_examples() {
        let ns = cat("norm-squared", &[]);
        let (lo, up) = check_hh_chain(&ns, &unit(), &QuadratureSpec::default(), None).unwrap();
        assert!(lo.holds && up.holds);
        assert!(close(lo.lhs, 0.0, 1e-15) && close(lo.rhs, 0.6, 1e-13));
        assert!(close(up.lhs, 0.6, 1e-13) && close(up.rhs, 1.0, 1e-13));
        assert!(lo.hypothesis_certificates[0].passed);

        let c = cat("constant", &[2.0]);
        let (lo, up) = check_hh_chain(&c, &unit(), &QuadratureSpec::default(), None).unwrap();
        assert!(lo.holds && up.holds, "{lo:?} {up:?}");
        assert!(lo.margin.abs() < 1e-13 && up.margin.abs() < 1e-13);

        let cone = cat("sharpness-cone", &[]);
        let (lo, _) = check_hh_chain(&cone, &unit(), &QuadratureSpec::default(), None).unwrap();
        assert!(!lo.holds);
        assert!(close(lo.lhs, 1.0, 0.0) && close(lo.rhs, 0.25, 1e-13));
        assert!(!lo.hypothesis_certificates[0].passed);
        assert!(lo.hypothesis_certificates[0].counterexample.is_some());
    }

    #[test]
    fn trapezoid_midpoint_surface_center_examples() {
        let cone = cat("sharpness-cone", &[]);
        let a = analysis(&cone);
        let t = a.trapezoid(None);
        assert!(close(t.lhs, 0.25, 1e-13) && close(t.rhs, 0.25, 1e-13));
        assert!(t.holds, "{t:?}");
        let m = a.midpoint(None);
        assert!(close(m.lhs, 0.75, 1e-13) && close(m.rhs, 1.25, 1e-12) && m.holds);
        let s = a.surface_center(None);
        assert!(close(s.lhs, 1.0, 1e-13) && close(s.rhs, 1.0, 1e-9));
        assert!(s.holds, "{s:?}");
        assert!(close(a.center_slope().value, 1.0, 1e-9));
        // |df/drho| = 1 is convex even though f is not
        assert!(t.hypothesis_certificates[0].passed);

        let ns = cat("norm-squared", &[]);
        let a = analysis(&ns);
        let t = a.trapezoid(None);
        assert!(close(t.lhs, 0.4, 1e-13) && close(t.rhs, 0.5, 1e-13) && t.holds);
        let m = a.midpoint(None);
        assert!(close(m.lhs, 0.6, 1e-13) && close(m.rhs, 2.5, 1e-12) && m.holds);
        let s = a.surface_center(None);
        assert_eq!(a.center_slope().value, 0.0);
        assert!(close(s.lhs, 1.0, 1e-13) && close(s.rhs, 1.0, 1e-13));
        assert!(s.holds, "{s:?}");

        let c = cat("constant", &[7.0]);
        let a = analysis(&c);
        for r in [a.trapezoid(None), a.midpoint(None), a.surface_center(None)] {
            assert!(close(r.lhs, 0.0, 1e-13) && r.rhs == 0.0 && r.holds, "{r:?}");
        }
    }

    #[test]
    fn chain_consistency_reuses_means() {
        let f = cat("exp-affine", &[0.3, -1.0, 0.5, 0.2]);
        let a = analysis(&f);
        let (_, up) = a.hh_chain(None);
        assert_eq!(a.trapezoid(None).lhs, (up.rhs - up.lhs).abs());
    }

    #[test]
    fn field_integral_reading_is_reported() {
        let ns = cat("norm-squared", &[]);
        let a = analysis(&ns);
        // D0 = 0 and int f dsigma = 4 pi on the unit sphere
        assert!(close(a.surface_center_rhs_with_field_integral(), 0.5, 1e-13));
    }

    #[test]
    fn parts_identity_examples() {
        let ns = cat("norm-squared", &[]);
        let (l, r) = per_ray_parts_identity(&ns, &unit(), PI / 2.0, 0.3, 32).unwrap();
        assert!(close(l, 0.4, 1e-14) && close(r, 0.4, 1e-14), "{l} {r}");
        let c = cat("constant", &[3.0]);
        let (l, r) = per_ray_parts_identity(&c, &unit(), 1.0, 2.0, 32).unwrap();
        assert_eq!(l, 0.0);
        assert!(close(r, 0.0, 1e-14));
        let cone = cat("sharpness-cone", &[]);
        let (l, r) = per_ray_parts_identity(&cone, &unit(), PI / 2.0, 4.0, 32).unwrap();
        assert!(close(l, -0.25, 1e-14) && close(r, -0.25, 1e-14), "{l} {r}");
    }

    #[test]
    fn ftc_identity_examples() {
        let ns = cat("norm-squared", &[]);
        let (l, r) = per_ray_ftc_identity(&ns, &unit(), PI / 2.0, 0.3, 32).unwrap();
        assert!(close(l, 1.0, 1e-14) && close(r, 1.0, 1e-14));
        let c = cat("constant", &[3.0]);
        assert_eq!(per_ray_ftc_identity(&c, &unit(), 1.0, 2.0, 32).unwrap(), (0.0, 0.0));
        let x = cat("coordinate", &[0.0]);
        let (l, r) = per_ray_ftc_identity(&x, &unit(), PI / 2.0, 0.0, 32).unwrap();
        assert!(close(l, 1.0, 1e-14) && close(r, 1.0, 1e-14));
    }

    #[test]
    fn ray_identity_rejects_bad_polar_angle() {
        let c = cat("constant", &[1.0]);
        assert!(matches!(
            per_ray_ftc_identity(&c, &unit(), 4.0, 0.0, 8),
            Err(CheckError::Geometry(_))
        ));
        assert!(matches!(
            per_ray_parts_identity(&c, &unit(), 1.0, 0.0, 0),
            Err(CheckError::Quadrature(_))
        ));
        // azimuth wraps
        assert!(per_ray_ftc_identity(&c, &unit(), 1.0, -1.0, 8).is_ok());
    }

    #[test]
    fn ray_identity_reports() {
        let f = cat("exp-affine", &[0.3, -1.0, 0.5, 0.2]);
        let (p, q) = analysis(&f).ray_identities(None).unwrap();
        assert!(p.holds && q.holds, "{p:?} {q:?}");
        assert_eq!(p.rhs, 0.0);
        assert_eq!(p.margin, -p.lhs);
        assert_eq!(p.tolerance, RAY_IDENTITY_TOLERANCE);
    }

    #[test]
    fn report_holds_iff_margin_within_tolerance() {
        let r = InequalityReport::new(CheckName::Trapezoid, 1.0, 1.0 - 1e-9, 1e-9, vec![]);
        assert!(r.holds);
        let r = InequalityReport::new(CheckName::Trapezoid, 1.0, 1.0 - 2e-9, 1e-9, vec![]);
        assert!(!r.holds);
        assert_eq!(CheckName::SurfaceCenter.as_str(), "surface_center");
    }
}
