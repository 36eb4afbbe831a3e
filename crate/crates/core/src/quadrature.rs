//! Tensor-product cubature over balls and spheres, and the Monte Carlo
//! oracle used to cross-check it.
//!
//! The ball rule is Gauss-Legendre in `rho` on `[0, R]`, Gauss-Legendre in
//! `u = cos(phi)` on `[-1, 1]` (so the `sin(phi)` of the volume element is
//! absorbed by the substitution) and the equispaced periodic rule in
//! `theta`. Node contributions are evaluated in parallel and reduced by
//! pairwise summation in index order, so results are bit-identical for any
//! number of threads.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{EvalError, ScalarField};
use crate::geometry::{Ball, Vec3};
use crate::sampling::{self, Stream};
use crate::summation::{pairwise_abs_sum, pairwise_sum, roundoff_bound};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("{axis} node count must be at least 1, got {n}")]
    InvalidNodeCount { axis: &'static str, n: usize },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("Monte Carlo estimate needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Node counts for the tensor rule and the Monte Carlo budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadratureSpec {
    pub n_rho: usize,
    pub n_phi: usize,
    pub n_theta: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_rho: 32,
            n_phi: 32,
            n_theta: 64,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    /// Checks node counts; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, QuadratureError> {
        for (axis, n) in [
            ("n_rho", self.n_rho),
            ("n_phi", self.n_phi),
            ("n_theta", self.n_theta),
        ] {
            if n == 0 {
                return Err(QuadratureError::InvalidNodeCount { axis, n });
            }
        }
        let mut warnings = Vec::new();
        if self.n_theta % 2 == 1 {
            warnings.push(format!(
                "n_theta = {} is odd; an even count is recommended",
                self.n_theta
            ));
        }
        Ok(warnings)
    }

    /// The spec used for the refinement error estimate: `ceil(n/2)` nodes
    /// per axis.
    pub fn coarsened(&self) -> Self {
        Self {
            n_rho: self.n_rho.div_ceil(2),
            n_phi: self.n_phi.div_ceil(2),
            n_theta: self.n_theta.div_ceil(2),
            ..*self
        }
    }
}

/// An integral value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubatureEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// A one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .collect();
        pairwise_sum(&terms)
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Legendre nodes and weights on `[lo, hi]`, exact for polynomials of
/// degree `2n - 1`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<Rule, QuadratureError> {
    if n == 0 {
        return Err(QuadratureError::InvalidNodeCount { axis: "gauss-legendre", n });
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(QuadratureError::InvalidInterval { lo, hi });
    }
    let mut x_ref = vec![0.0; n];
    let mut w_ref = vec![0.0; n];
    // roots are symmetric; solve for the upper half and mirror
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        x_ref[i] = -x;
        x_ref[n - 1 - i] = x;
        w_ref[i] = w;
        w_ref[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        x_ref[n / 2] = 0.0;
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(Rule {
        nodes: x_ref.iter().map(|x| mid + half * x).collect(),
        weights: w_ref.iter().map(|w| half * w).collect(),
    })
}

/// Product rule on the unit sphere: Gauss-Legendre in `cos(phi)` times the
/// periodic rule in `theta`. Weights sum to `4 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub directions: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_phi: usize, n_theta: usize) -> Result<Self, QuadratureError> {
        if n_theta == 0 {
            return Err(QuadratureError::InvalidNodeCount { axis: "n_theta", n: n_theta });
        }
        let polar = gauss_legendre(n_phi, -1.0, 1.0)?;
        let dtheta = 2.0 * PI / n_theta as f64;
        let mut directions = Vec::with_capacity(n_phi * n_theta);
        let mut weights = Vec::with_capacity(n_phi * n_theta);
        for (u, wu) in polar.nodes.iter().zip(&polar.weights) {
            let sin_phi = (1.0 - u * u).sqrt();
            for k in 0..n_theta {
                let (s, c) = (k as f64 * dtheta).sin_cos();
                directions.push([c * sin_phi, s * sin_phi, *u]);
                weights.push(wu * dtheta);
            }
        }
        Ok(Self {
            directions,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Weighted terms `w_i g_i` in index order, with the summed per-node error
/// bound `sum w_i e_i`.
struct Terms {
    values: Vec<f64>,
    node_error: f64,
}

impl Terms {
    /// Evaluates `count` nodes in parallel. `node(i)` returns
    /// `(weight, value, value_error)`. The first error in index order wins.
    fn collect<G>(count: usize, node: G) -> Result<Self, EvalError>
    where
        G: Fn(usize) -> Result<(f64, f64, f64), EvalError> + Sync,
    {
        let raw: Vec<Result<(f64, f64), EvalError>> = (0..count)
            .into_par_iter()
            .map(|i| node(i).map(|(w, v, e)| (w * v, w.abs() * e)))
            .collect();
        let mut values = Vec::with_capacity(count);
        let mut errors = Vec::with_capacity(count);
        for r in raw {
            let (v, e) = r?;
            values.push(v);
            errors.push(e);
        }
        Ok(Self {
            node_error: pairwise_sum(&errors),
            values,
        })
    }

    fn sum(&self) -> f64 {
        pairwise_sum(&self.values)
    }

    fn roundoff(&self) -> f64 {
        roundoff_bound(self.values.len(), pairwise_abs_sum(&self.values))
    }
}

fn ball_terms(
    f: &dyn ScalarField,
    ball: &Ball,
    n_rho: usize,
    n_phi: usize,
    n_theta: usize,
) -> Result<Terms, QuadratureError> {
    let radial = gauss_legendre(n_rho, 0.0, ball.radius())?;
    let sphere = SphereRule::new(n_phi, n_theta)?;
    let m = sphere.len();
    Ok(Terms::collect(n_rho * m, |idx| {
        let (i, j) = (idx / m, idx % m);
        let rho = radial.nodes[i];
        let w = radial.weights[i] * rho * rho * sphere.weights[j];
        let v = f.eval(ball.point_along(sphere.directions[j], rho))?;
        Ok((w, v, 0.0))
    })?)
}

fn estimate(fine: &Terms, coarse: &Terms) -> CubatureEstimate {
    let value = fine.sum();
    CubatureEstimate {
        value,
        error_estimate: (value - coarse.sum()).abs() + fine.roundoff() + fine.node_error,
        evaluations: fine.values.len(),
    }
}

/// Integral of `f` over the ball.
///
/// The error estimate is the difference to the same rule with `ceil(n/2)`
/// nodes per axis plus an a-priori rounding bound.
pub fn ball_integral(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<CubatureEstimate, QuadratureError> {
    spec.validate()?;
    let c = spec.coarsened();
    let fine = ball_terms(f, ball, spec.n_rho, spec.n_phi, spec.n_theta)?;
    let coarse = ball_terms(f, ball, c.n_rho, c.n_phi, c.n_theta)?;
    Ok(estimate(&fine, &coarse))
}

/// Integrates a function of the ray direction over the bounding sphere,
/// `R^2 * sum_j w_j g(dir_j)`. `g` returns a value and its absolute error.
pub fn sphere_integral_with<G>(
    ball: &Ball,
    spec: &QuadratureSpec,
    g: G,
) -> Result<CubatureEstimate, QuadratureError>
where
    G: Fn(Vec3) -> Result<(f64, f64), EvalError> + Sync,
{
    spec.validate()?;
    let r2 = ball.radius() * ball.radius();
    let terms = |n_phi, n_theta| -> Result<Terms, QuadratureError> {
        let sphere = SphereRule::new(n_phi, n_theta)?;
        Ok(Terms::collect(sphere.len(), |j| {
            let (v, e) = g(sphere.directions[j])?;
            Ok((r2 * sphere.weights[j], v, e))
        })?)
    };
    let c = spec.coarsened();
    let fine = terms(spec.n_phi, spec.n_theta)?;
    let coarse = terms(c.n_phi, c.n_theta)?;
    Ok(estimate(&fine, &coarse))
}

/// Integral of `f` over the bounding sphere with respect to area.
pub fn sphere_integral(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<CubatureEstimate, QuadratureError> {
    sphere_integral_with(ball, spec, |dir| {
        Ok((f.eval(ball.point_along(dir, ball.radius()))?, 0.0))
    })
}

fn monte_carlo<S>(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
    stream: Stream,
    measure: f64,
    sample: S,
) -> Result<CubatureEstimate, QuadratureError>
where
    S: Fn(&mut rand_chacha::ChaCha8Rng, &Ball) -> Vec3 + Sync,
{
    let n = spec.mc_samples;
    if n < 2 {
        return Err(QuadratureError::TooFewSamples(n));
    }
    let blocks: Vec<Result<Vec<f64>, EvalError>> = (0..sampling::block_count(n))
        .into_par_iter()
        .map(|b| {
            let mut rng = sampling::block_rng(spec.seed, stream, b);
            sampling::block_range(b, n)
                .map(|_| f.eval(sample(&mut rng, ball)))
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    for b in blocks {
        values.extend(b?);
    }
    let mean = pairwise_sum(&values) / n as f64;
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1) as f64;
    Ok(CubatureEstimate {
        value: measure * mean,
        error_estimate: measure * (variance / n as f64).sqrt(),
        evaluations: n,
    })
}

/// Monte Carlo estimate of the ball integral with `spec.mc_samples` uniform
/// points; the error estimate is one standard error.
pub fn mc_ball_integral(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<CubatureEstimate, QuadratureError> {
    monte_carlo(f, ball, spec, Stream::BallOracle, ball.volume(), |rng, b| {
        sampling::uniform_in_ball(rng, b)
    })
}

/// Monte Carlo estimate of the sphere integral.
pub fn mc_sphere_integral(
    f: &dyn ScalarField,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<CubatureEstimate, QuadratureError> {
    monte_carlo(
        f,
        ball,
        spec,
        Stream::SphereOracle,
        ball.surface_area(),
        sampling::uniform_on_sphere,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss_legendre(1, 0.0, 1.0).unwrap();
        assert_eq!(r.nodes, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn two_point_rule_integrates_cubic() {
        let r = gauss_legendre(2, 0.0, 1.0).unwrap();
        assert!((r.integrate(|x| x * x * x) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn weights_positive_nodes_inside() {
        for n in [1, 2, 3, 8, 17, 32, 64, 200] {
            let r = gauss_legendre(n, -0.5, 2.0).unwrap();
            assert!(r.weights.iter().all(|w| *w > 0.0));
            assert!(r.nodes.iter().all(|x| *x > -0.5 && *x < 2.0));
            assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
            assert!((pairwise_sum(&r.weights) - 2.5).abs() < 1e-13, "n={n}");
        }
        let r = gauss_legendre(8, 0.0, 1.0).unwrap();
        assert!((pairwise_sum(&r.weights) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_through_degree_2n_minus_1() {
        // antiderivative of x^k on [lo, hi]
        let exact = |k: i32, lo: f64, hi: f64| (hi.powi(k + 1) - lo.powi(k + 1)) / (k + 1) as f64;
        for n in 1..=20usize {
            let r = gauss_legendre(n, -0.3, 1.7).unwrap();
            for k in 0..(2 * n as i32) {
                let got = r.integrate(|x| x.powi(k));
                let want = exact(k, -0.3, 1.7);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "n={n} k={k} {got} {want}"
                );
            }
            // degree 2n is not integrated exactly
            let k = 2 * n as i32;
            assert!((r.integrate(|x| x.powi(k)) - exact(k, -0.3, 1.7)).abs() > 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_rejects_bad_input() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
        assert!(gauss_legendre(3, 2.0, 1.0).is_err());
        assert!(gauss_legendre(3, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().unwrap().is_empty());
        let odd = QuadratureSpec {
            n_theta: 7,
            ..spec()
        };
        assert_eq!(odd.validate().unwrap().len(), 1);
        let bad = QuadratureSpec { n_rho: 0, ..spec() };
        assert!(bad.validate().is_err());
        let c = QuadratureSpec {
            n_rho: 5,
            n_phi: 1,
            n_theta: 64,
            ..spec()
        }
        .coarsened();
        assert_eq!((c.n_rho, c.n_phi, c.n_theta), (3, 1, 32));
    }

    #[test]
    fn volume_and_area() {
        let ball = Ball::unit();
        let one = catalog("constant", &[1.0], &ball).unwrap();
        let v = ball_integral(&one, &ball, &spec()).unwrap();
        assert!((v.value - 4.0 * PI / 3.0).abs() < 1e-13);
        assert_eq!(v.evaluations, 32 * 32 * 64);
        assert!(v.error_estimate >= 0.0 && v.error_estimate < 1e-12);
        let s = sphere_integral(&one, &ball, &spec()).unwrap();
        assert!((s.value - 4.0 * PI).abs() < 1e-13);
        assert_eq!(s.evaluations, 32 * 64);
    }

    #[test]
    fn closed_form_examples() {
        let ball = Ball::unit();
        let ns = catalog("norm-squared", &[], &ball).unwrap();
        let cone = catalog("sharpness-cone", &[], &ball).unwrap();
        let v = ball_integral(&ns, &ball, &spec()).unwrap();
        assert!((v.value - 4.0 * PI / 5.0).abs() < 1e-13);
        let v = ball_integral(&cone, &ball, &spec()).unwrap();
        assert!((v.value - PI / 3.0).abs() < 1e-13);
        let s = sphere_integral(&cone, &ball, &spec()).unwrap();
        assert!(s.value.abs() < 1e-13);
        let s = sphere_integral(&ns, &ball, &spec()).unwrap();
        assert!((s.value - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn monte_carlo_constant_is_exact() {
        let ball = Ball::new([1.0, 2.0, 3.0], 0.7).unwrap();
        let one = catalog("constant", &[1.0], &ball).unwrap();
        let s = QuadratureSpec {
            mc_samples: 10_000,
            ..spec()
        };
        let v = mc_ball_integral(&one, &ball, &s).unwrap();
        assert_eq!(v.value, ball.volume());
        assert_eq!(v.error_estimate, 0.0);
        assert_eq!(v.evaluations, 10_000);
        let a = mc_sphere_integral(&one, &ball, &s).unwrap();
        assert_eq!(a.value, ball.surface_area());
        assert_eq!(a.error_estimate, 0.0);
    }

    #[test]
    fn monte_carlo_norm_squared_within_four_sigma() {
        let ball = Ball::unit();
        let ns = catalog("norm-squared", &[], &ball).unwrap();
        let v = mc_ball_integral(&ns, &ball, &spec()).unwrap();
        assert!((v.value - 4.0 * PI / 5.0).abs() <= 4.0 * v.error_estimate);
        assert!(v.error_estimate > 0.0);
    }

    #[test]
    fn monte_carlo_needs_two_samples() {
        let ball = Ball::unit();
        let one = catalog("constant", &[1.0], &ball).unwrap();
        for n in [0, 1] {
            let s = QuadratureSpec {
                mc_samples: n,
                ..spec()
            };
            assert_eq!(
                mc_ball_integral(&one, &ball, &s),
                Err(QuadratureError::TooFewSamples(n))
            );
            assert!(mc_sphere_integral(&one, &ball, &s).is_err());
        }
    }

    #[test]
    fn evaluation_errors_carry_the_node() {
        struct Fails;
        impl ScalarField for Fails {
            fn name(&self) -> String {
                "fails".into()
            }
            fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
                if p[2] > 0.5 {
                    Err(EvalError::new(p, "too high"))
                } else {
                    Ok(1.0)
                }
            }
        }
        let ball = Ball::unit();
        match ball_integral(&Fails, &ball, &spec()) {
            Err(QuadratureError::Eval(e)) => assert!(e.point[2] > 0.5),
            other => panic!("{other:?}"),
        }
        // the reported node is the first failing one in index order
        let a = ball_integral(&Fails, &ball, &spec());
        let b = ball_integral(&Fails, &ball, &spec());
        assert_eq!(a, b);
    }

    #[test]
    fn identical_for_any_thread_count() {
        let ball = Ball::new([0.1, -0.2, 0.3], 1.3).unwrap();
        let f = catalog("exp-affine", &[0.4, -0.3, 1.2, 0.1], &ball).unwrap();
        let s = QuadratureSpec {
            mc_samples: 100_000,
            seed: 42,
            ..spec()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                (
                    ball_integral(&f, &ball, &s).unwrap(),
                    sphere_integral(&f, &ball, &s).unwrap(),
                    mc_ball_integral(&f, &ball, &s).unwrap(),
                    mc_sphere_integral(&f, &ball, &s).unwrap(),
                )
            })
        };
        let one = run(1);
        for threads in [2, 3, 8] {
            let other = run(threads);
            assert_eq!(one.0.value.to_bits(), other.0.value.to_bits());
            assert_eq!(one.1.value.to_bits(), other.1.value.to_bits());
            assert_eq!(one.2.value.to_bits(), other.2.value.to_bits());
            assert_eq!(one.3.value.to_bits(), other.3.value.to_bits());
            assert_eq!(one, other);
        }
    }
}
