//! Report documents: JSON (the full run) and CSV (one check per row).
//!
//! JSON keys are a stable interface:
//!
//! ```text
//! { "ball": {"center": [a, b, c], "radius": R},
//!   "function": {"kind": "catalog" | "expr", "source": "..."},
//!   "spec": {"n_rho", "n_phi", "n_theta", "mc_samples", "seed"},
//!   "means": {"volume_mean", "surface_mean", "center_value",
//!             "radial_abs_surface_integral", "error_estimates": {...}},
//!   "checks": [{"name", "lhs", "rhs", "margin", "holds", "tolerance"}],
//!   "certificates": [{"target", "passed", "max_violation"}],
//!   "version": "x.y.z" }
//! ```
//!
//! Verbose runs add a `diagnostics` object.

use serde::Serialize;

use crate::fields::{ConvexityCertificate, Counterexample};
use crate::geometry::{Ball, Vec3};
use crate::inequalities::{InequalityReport, MeanErrors, MeansSummary};
use crate::quadrature::{CubatureEstimate, QuadratureSpec};

pub const CSV_HEADER: &str = "name,lhs,rhs,margin,holds,tolerance";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallJson {
    pub center: Vec3,
    pub radius: f64,
}

impl From<&Ball> for BallJson {
    fn from(b: &Ball) -> Self {
        Self {
            center: b.center(),
            radius: b.radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionJson {
    pub kind: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeansJson {
    pub volume_mean: f64,
    pub surface_mean: f64,
    pub center_value: f64,
    pub radial_abs_surface_integral: f64,
    pub error_estimates: MeanErrors,
}

impl From<&MeansSummary> for MeansJson {
    fn from(m: &MeansSummary) -> Self {
        Self {
            volume_mean: m.volume_mean,
            surface_mean: m.surface_mean,
            center_value: m.center_value,
            radial_abs_surface_integral: m.radial_abs_surface_integral,
            error_estimates: m.error_estimates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckJson {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
    pub tolerance: f64,
}

impl From<&InequalityReport> for CheckJson {
    fn from(r: &InequalityReport) -> Self {
        Self {
            name: r.name.as_str(),
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            holds: r.holds,
            tolerance: r.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateJson {
    pub target: String,
    pub passed: bool,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateDetail {
    pub target: String,
    pub samples_tested: usize,
    pub samples_skipped: usize,
    pub tolerance: f64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub cubature: CubatureEstimate,
    pub monte_carlo: CubatureEstimate,
    /// `|cubature - mc| <= 4 (err_cubature + err_mc)`
    pub agree: bool,
}

impl OracleComparison {
    pub fn new(cubature: CubatureEstimate, monte_carlo: CubatureEstimate) -> Self {
        let agree = (cubature.value - monte_carlo.value).abs()
            <= 4.0 * (cubature.error_estimate + monte_carlo.error_estimate);
        Self {
            cubature,
            monte_carlo,
            agree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Largest `|df/drho|` at the center over the sphere-rule directions.
    pub center_slope: f64,
    pub center_slope_error: f64,
    /// `int_sigma f dsigma`
    pub surface_integral: f64,
    /// Surface-versus-center bound with `int_sigma f dsigma` in place of
    /// the derivative integral.
    pub surface_center_rhs_field_reading: f64,
    pub certificates: Vec<CertificateDetail>,
    pub ball_oracle: Option<OracleComparison>,
    pub sphere_oracle: Option<OracleComparison>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub ball: BallJson,
    pub function: FunctionJson,
    pub spec: QuadratureSpec,
    pub means: MeansJson,
    pub checks: Vec<CheckJson>,
    pub certificates: Vec<CertificateJson>,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

/// Distinct certificates referenced by `checks`, in order of first use.
pub fn collect_certificates(checks: &[InequalityReport]) -> Vec<ConvexityCertificate> {
    let mut out: Vec<ConvexityCertificate> = Vec::new();
    for c in checks.iter().flat_map(|r| &r.hypothesis_certificates) {
        if !out.iter().any(|o| o.target == c.target) {
            out.push(c.clone());
        }
    }
    out
}

impl ReportDocument {
    pub fn new(
        ball: &Ball,
        function: FunctionJson,
        spec: &QuadratureSpec,
        means: &MeansSummary,
        checks: &[InequalityReport],
    ) -> Self {
        Self {
            ball: ball.into(),
            function,
            spec: *spec,
            means: means.into(),
            checks: checks.iter().map(CheckJson::from).collect(),
            certificates: collect_certificates(checks)
                .into_iter()
                .map(|c| CertificateJson {
                    target: c.target,
                    passed: c.passed,
                    max_violation: c.max_violation,
                })
                .collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            diagnostics: None,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Renders the document. CSV keeps only the checks.
pub fn emit_report(doc: &ReportDocument, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("report is serializable");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for c in &doc.checks {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.name, c.lhs, c.rhs, c.margin, c.holds, c.tolerance
                ));
            }
            s
        }
    }
}
