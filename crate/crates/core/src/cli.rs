//! Command-line configuration and orchestration.
//!
//! Exit status: 0 when every executed check holds, 1 when any fails, 2 on a
//! configuration or parse error, 3 on a numerical, evaluation or I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Parser};
use thiserror::Error;

use crate::expr::{ExprField, ParseError};
use crate::fields::{catalog, CatalogError, ScalarField, CATALOG_NAMES};
use crate::geometry::{Ball, GeometryError};
use crate::inequalities::{BallAnalysis, CheckError, InequalityReport};
use crate::quadrature::{
    ball_integral, mc_ball_integral, mc_sphere_integral, sphere_integral, QuadratureError,
    QuadratureSpec,
};
use crate::report::{
    collect_certificates, emit_report, CertificateDetail, Diagnostics, Format, FunctionJson,
    OracleComparison, ReportDocument,
};

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const AFTER_HELP: &str = "\
Expression grammar (--expr):
  numbers, variables x y z, constant pi
  operators + - * / ^   (^ binds tightest and is right associative,
                         then unary minus, then * /, then + -)
  functions abs exp sqrt ln (one argument), min max (two or more)
  e.g. \"x^2 + y^2 + z^2\", \"max(x, y, 0)\", \"exp(0.5*x - y)\"

Catalog fields (--catalog NAME[:p1,p2,...]):
  constant:c                  affine:g1,g2,g3,h
  coordinate:i (i = 0,1,2)    exp-affine:g1,g2,g3,h
  quadratic-psd:a11,...,a33[,c1,c2,c3]
  max-affine:g1,g2,g3,h[,g1,g2,g3,h...]
  norm-squared[:c1,c2,c3]     (defaults to the ball center)
  sharpness-cone[:a,b,c,R]    (defaults to the ball; f = R - |p - C|)

Checks (--check, comma separated):
  hh, trapezoid, midpoint, surface_center, ray_identities, all

Exit status: 0 all checks hold, 1 some check fails,
             2 configuration error, 3 numerical or I/O error.";

#[derive(Debug, Parser)]
#[command(
    name = "hh-ball",
    version,
    about = "Verify Hermite-Hadamard type inequalities for a scalar field on a ball in R^3",
    after_help = AFTER_HELP
)]
#[command(group(ArgGroup::new("function").required(true).args(["catalog", "expr"])))]
pub struct CliArgs {
    /// Ball center and radius as a,b,c,R
    #[arg(long, default_value = "0,0,0,1", allow_hyphen_values = true)]
    pub ball: String,

    /// Built-in field, NAME or NAME:p1,p2,...
    #[arg(long, allow_hyphen_values = true)]
    pub catalog: Option<String>,

    /// Field given as an expression in x, y, z
    #[arg(long, allow_hyphen_values = true)]
    pub expr: Option<String>,

    /// Checks to run
    #[arg(long, default_value = "all")]
    pub check: String,

    #[arg(long, default_value_t = 32)]
    pub n_rho: usize,

    #[arg(long, default_value_t = 32)]
    pub n_phi: usize,

    #[arg(long, default_value_t = 64)]
    pub n_theta: usize,

    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Tolerance for every check (default: 10x the summed error estimates)
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,

    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,

    /// Write the report here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Add a diagnostics section (repeat for progress on stderr)
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSource {
    Catalog { name: String, params: Vec<f64> },
    Expr(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Hh,
    Trapezoid,
    Midpoint,
    SurfaceCenter,
    RayIdentities,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::Hh,
        CheckKind::Trapezoid,
        CheckKind::Midpoint,
        CheckKind::SurfaceCenter,
        CheckKind::RayIdentities,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ball: Ball,
    pub function: FunctionSource,
    pub checks: Vec<CheckKind>,
    pub spec: QuadratureSpec,
    pub tolerance: Option<f64>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub verbosity: u8,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("cannot parse expression: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Numerical(#[from] CheckError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_)
            | RunError::Geometry(_)
            | RunError::Catalog(_)
            | RunError::Parse(_) => EXIT_CONFIG,
            RunError::Numerical(CheckError::Geometry(_))
            | RunError::Numerical(CheckError::Quadrature(QuadratureError::InvalidNodeCount {
                ..
            })) => EXIT_CONFIG,
            RunError::Numerical(_) | RunError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<QuadratureError> for RunError {
    fn from(e: QuadratureError) -> Self {
        RunError::Numerical(CheckError::Quadrature(e))
    }
}

fn parse_reals(text: &str, what: &str) -> Result<Vec<f64>, RunError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| RunError::Config(format!("{what}: `{s}` is not a finite number")))
        })
        .collect()
}

fn parse_ball(text: &str) -> Result<Ball, RunError> {
    let v = parse_reals(text, "--ball")?;
    if v.len() != 4 {
        return Err(RunError::Config(format!(
            "--ball expects a,b,c,R (4 numbers), got {}",
            v.len()
        )));
    }
    if v[3] <= 0.0 {
        return Err(RunError::Config("radius must be positive".into()));
    }
    Ok(Ball::new([v[0], v[1], v[2]], v[3])?)
}

fn parse_catalog(text: &str) -> Result<FunctionSource, RunError> {
    let (name, params) = match text.split_once(':') {
        Some((n, p)) if !p.trim().is_empty() => (n, parse_reals(p, "--catalog")?),
        Some((n, _)) => (n, vec![]),
        None => (text, vec![]),
    };
    let name = name.trim();
    if !CATALOG_NAMES.contains(&name) {
        return Err(CatalogError::UnknownName(name.to_string()).into());
    }
    Ok(FunctionSource::Catalog {
        name: name.to_string(),
        params,
    })
}

fn parse_checks(text: &str) -> Result<Vec<CheckKind>, RunError> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        let add: &[CheckKind] = match item {
            "hh" => &[CheckKind::Hh],
            "trapezoid" => &[CheckKind::Trapezoid],
            "midpoint" => &[CheckKind::Midpoint],
            "surface_center" => &[CheckKind::SurfaceCenter],
            "ray_identities" => &[CheckKind::RayIdentities],
            "all" => &CheckKind::ALL,
            other => {
                return Err(RunError::Config(format!(
                    "unknown check `{other}` (expected hh, trapezoid, midpoint, surface_center, ray_identities or all)"
                )))
            }
        };
        for k in add {
            if !out.contains(k) {
                out.push(*k);
            }
        }
    }
    // execution order is fixed regardless of how the list was written
    out.sort_by_key(|k| CheckKind::ALL.iter().position(|a| a == k));
    Ok(out)
}

impl RunConfig {
    pub fn from_args(args: CliArgs) -> Result<Self, RunError> {
        let ball = parse_ball(&args.ball)?;
        let function = match (args.catalog, args.expr) {
            (Some(c), None) => parse_catalog(&c)?,
            (None, Some(e)) => FunctionSource::Expr(e),
            _ => {
                return Err(RunError::Config(
                    "exactly one of --catalog or --expr is required".into(),
                ))
            }
        };
        if let Some(t) = args.tol {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(RunError::Config(format!(
                    "--tol must be a nonnegative number, got {t}"
                )));
            }
        }
        let spec = QuadratureSpec {
            n_rho: args.n_rho,
            n_phi: args.n_phi,
            n_theta: args.n_theta,
            mc_samples: args.mc_samples,
            seed: args.seed,
        };
        spec.validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        Ok(Self {
            ball,
            function,
            checks: parse_checks(&args.check)?,
            spec,
            tolerance: args.tol,
            format: match args.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            },
            output: args.out,
            verbosity: args.verbose,
        })
    }
}

fn build_field(config: &RunConfig) -> Result<(Box<dyn ScalarField>, FunctionJson), RunError> {
    Ok(match &config.function {
        FunctionSource::Catalog { name, params } => {
            let f = catalog(name, params, &config.ball)?;
            let source = if params.is_empty() {
                name.clone()
            } else {
                let p: Vec<String> = params.iter().map(|v| v.to_string()).collect();
                format!("{name}:{}", p.join(","))
            };
            (
                Box::new(f),
                FunctionJson {
                    kind: "catalog".into(),
                    source,
                },
            )
        }
        FunctionSource::Expr(text) => (
            Box::new(ExprField::parse(text)?),
            FunctionJson {
                kind: "expr".into(),
                source: text.clone(),
            },
        ),
    })
}

/// Runs the configured checks and assembles the report document.
pub fn run(config: &RunConfig) -> Result<ReportDocument, RunError> {
    let (field, function) = build_field(config)?;
    let warnings = config
        .spec
        .validate()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let analysis = BallAnalysis::new(field.as_ref(), config.ball, config.spec)?;
    let tol = config.tolerance;

    let mut checks: Vec<InequalityReport> = Vec::new();
    for kind in &config.checks {
        match kind {
            CheckKind::Hh => {
                let (lo, up) = analysis.hh_chain(tol);
                checks.push(lo);
                checks.push(up);
            }
            CheckKind::Trapezoid => checks.push(analysis.trapezoid(tol)),
            CheckKind::Midpoint => checks.push(analysis.midpoint(tol)),
            CheckKind::SurfaceCenter => checks.push(analysis.surface_center(tol)),
            CheckKind::RayIdentities => {
                let (parts, ftc) = analysis.ray_identities(tol)?;
                checks.push(parts);
                checks.push(ftc);
            }
        }
    }

    let mut doc = ReportDocument::new(
        &config.ball,
        function,
        &config.spec,
        analysis.means(),
        &checks,
    );

    if config.verbosity > 0 {
        let oracle = |cub, mc: Result<_, QuadratureError>| -> Result<_, RunError> {
            match mc {
                Ok(m) => Ok(Some(OracleComparison::new(cub, m))),
                Err(QuadratureError::TooFewSamples(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        };
        let f = field.as_ref();
        let (ball, spec) = (&config.ball, &config.spec);
        let ball_oracle = oracle(
            ball_integral(f, ball, spec)?,
            mc_ball_integral(f, ball, spec),
        )?;
        let sphere_oracle = oracle(
            sphere_integral(f, ball, spec)?,
            mc_sphere_integral(f, ball, spec),
        )?;
        let slope = analysis.center_slope();
        doc.diagnostics = Some(Diagnostics {
            center_slope: slope.value,
            center_slope_error: slope.error,
            surface_integral: analysis.means().surface_integral,
            surface_center_rhs_field_reading: analysis.surface_center_rhs_with_field_integral(),
            certificates: collect_certificates(&checks)
                .into_iter()
                .map(|c| CertificateDetail {
                    target: c.target,
                    samples_tested: c.samples_tested,
                    samples_skipped: c.samples_skipped,
                    tolerance: c.tolerance,
                    counterexample: c.counterexample,
                })
                .collect(),
            ball_oracle,
            sphere_oracle,
            warnings,
        });
    }
    Ok(doc)
}

/// Parses `args`, runs, writes the report and returns the exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_HOLDS
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = RunConfig::from_args(args).and_then(|config| {
        for w in config.spec.validate().unwrap_or_default() {
            let _ = writeln!(stderr, "warning: {w}");
        }
        let doc = run(&config)?;
        let text = emit_report(&doc, config.format);
        match &config.output {
            Some(path) => std::fs::write(path, &text)?,
            None => stdout.write_all(text.as_bytes())?,
        }
        if config.verbosity > 1 {
            for c in &doc.checks {
                let _ = writeln!(
                    stderr,
                    "{:<20} {}",
                    c.name,
                    if c.holds { "holds" } else { "FAILS" }
                );
            }
        }
        Ok(doc.all_hold())
    });
    match result {
        Ok(true) => EXIT_HOLDS,
        Ok(false) => EXIT_FAILS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
