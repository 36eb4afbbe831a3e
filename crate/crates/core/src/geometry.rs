//! Closed balls in R^3 and the spherical parametrization used by every
//! integral in the crate.
//!
//! A point of the ball `B(C, R)` with center `C = (a, b, c)` is written as
//!
//! ```text
//! x = a + rho cos(theta) sin(phi)
//! y = b + rho sin(theta) sin(phi)
//! z = c + rho cos(phi)
//! ```
//!
//! with `rho in [0, R]`, polar angle `phi in [0, pi]` and azimuth
//! `theta in [0, 2 pi)`. The volume element is `rho^2 sin(phi)`.

use std::f64::consts::PI;

use thiserror::Error;

/// A point (or displacement) in R^3.
pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("ball center must be finite, got {0:?}")]
    NonFiniteCenter(Vec3),
    #[error("radial coordinate {rho} outside [0, {radius}]")]
    RadiusOutOfRange { rho: f64, radius: f64 },
    #[error("polar angle {0} outside [0, pi]")]
    PolarOutOfRange(f64),
    #[error("azimuth {0} outside [0, 2 pi)")]
    AzimuthOutOfRange(f64),
}

/// The closed ball `B(C, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    center: Vec3,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec3, radius: f64) -> Result<Self, GeometryError> {
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFiniteCenter(center));
        }
        // `!(r > 0)` also rejects NaN
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn unit() -> Self {
        Self {
            center: [0.0; 3],
            radius: 1.0,
        }
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `4/3 pi R^3`
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    /// `4 pi R^2`
    pub fn surface_area(&self) -> f64 {
        4.0 * PI * self.radius * self.radius
    }

    /// The same ball moved by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            center: add(self.center, offset),
            radius: self.radius,
        }
    }

    /// Maps spherical coordinates relative to this ball to a Cartesian point.
    pub fn to_cartesian(&self, s: SphericalCoord) -> Result<Vec3, GeometryError> {
        if s.rho > self.radius {
            return Err(GeometryError::RadiusOutOfRange {
                rho: s.rho,
                radius: self.radius,
            });
        }
        Ok(self.point_along(ray_direction(s.phi, s.theta), s.rho))
    }

    /// `C + t * dir`, without any range checks.
    pub(crate) fn point_along(&self, dir: Vec3, t: f64) -> Vec3 {
        [
            self.center[0] + t * dir[0],
            self.center[1] + t * dir[1],
            self.center[2] + t * dir[2],
        ]
    }

    /// Distance from the center.
    pub fn distance_to_center(&self, p: Vec3) -> f64 {
        norm(sub(p, self.center))
    }
}

/// Spherical coordinates `(rho, phi, theta)` relative to some ball center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    pub rho: f64,
    pub phi: f64,
    pub theta: f64,
}

impl SphericalCoord {
    pub fn new(rho: f64, phi: f64, theta: f64) -> Result<Self, GeometryError> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(GeometryError::RadiusOutOfRange {
                rho,
                radius: f64::INFINITY,
            });
        }
        if !(0.0..=PI).contains(&phi) {
            return Err(GeometryError::PolarOutOfRange(phi));
        }
        if !(0.0..2.0 * PI).contains(&theta) {
            return Err(GeometryError::AzimuthOutOfRange(theta));
        }
        Ok(Self { rho, phi, theta })
    }

    /// Coordinates of a nonzero displacement `d` from the center. Returns
    /// `None` for the zero vector, where the angles are undefined.
    pub fn from_displacement(d: Vec3) -> Option<Self> {
        let rho = norm(d);
        if rho == 0.0 || !rho.is_finite() {
            return None;
        }
        let phi = (d[2] / rho).clamp(-1.0, 1.0).acos();
        let mut theta = d[1].atan2(d[0]);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        if theta >= 2.0 * PI {
            theta = 0.0;
        }
        Some(Self { rho, phi, theta })
    }

    pub fn direction(&self) -> Vec3 {
        ray_direction(self.phi, self.theta)
    }
}

/// Jacobian of the spherical parametrization, `rho^2 sin(phi)`.
pub fn volume_element(s: SphericalCoord) -> f64 {
    s.rho * s.rho * s.phi.sin()
}

/// Unit vector pointing along the ray with polar angle `phi` and azimuth `theta`.
pub fn ray_direction(phi: f64, theta: f64) -> Vec3 {
    let (sin_phi, cos_phi) = phi.sin_cos();
    let (sin_theta, cos_theta) = theta.sin_cos();
    [cos_theta * sin_phi, sin_theta * sin_phi, cos_phi]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}
