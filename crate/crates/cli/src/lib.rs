//! Command-line front end for `minvol-core`: read `K`, solve the centered or
//! free-center problem, and write the solution, its certificate and optional
//! contour samples.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use minvol_core::center::{solve_p, OuterConfig};
use minvol_core::gaussint::{check_in_cone, integral_exp, QuadDiagnostics, QuadratureSpec};
use minvol_core::kkt::{build_certificate, KktCertificate};
use minvol_core::oracle::{mvee_symmetric, MVEE_TOLERANCE};
use minvol_core::polycore::HomogeneousPoly;
use minvol_core::semialg::{
    inclusion_check, to_constraints, InclusionAudit, KDescription, Polynomial, Provenance,
};
use minvol_core::solver::{solve_p0, SolveReport, SolverConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sublevel set centered at the origin.
    P0,
    /// Center chosen by the outer search.
    P,
}

/// One job: what to read, how to solve it and where to write.
#[derive(Clone, Debug, Parser)]
#[command(
    name = "minvol",
    version,
    about = "Minimum-volume sublevel sets of homogeneous polynomials"
)]
pub struct JobConfig {
    /// CSV (one point per row) or JSON input.
    pub input: PathBuf,
    /// Degree of g; must be even and at least 2.
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    #[arg(long, value_enum, default_value_t = Mode::P0)]
    pub mode: Mode,
    /// Samples drawn from a semialgebraic K, also the audit sample size.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// KKT residual target.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial angular resolution of the sphere rule.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Output JSON path; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write N contour samples of the boundary of the optimal set.
    #[arg(long, value_name = "N")]
    pub contours: Option<usize>,
    /// Contour CSV path; defaults to the output path with a
    /// `.contours.csv` extension, or `contours.csv`.
    #[arg(long)]
    pub contours_out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] minvol_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use minvol_core::Error as E;
        match self {
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Unsupported(_) | E::NotApplicable(_) => 2,
                E::NotInCone { .. } | E::EmptySet(_) | E::Degenerate(_) | E::Infeasible(_) => 3,
                E::NotConverged(_) | E::CertificateFailure(_) | E::ReductionFailure(_) => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use minvol_core::Error as E;
        match self {
            CliError::Parse(_) => "parse",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => "invalid_argument",
                E::NotInCone { .. } => "not_in_cone",
                E::EmptySet(_) => "empty_set",
                E::Degenerate(_) => "degenerate",
                E::Infeasible(_) => "infeasible",
                E::NotConverged(_) => "not_converged",
                E::CertificateFailure(_) => "certificate_failure",
                E::ReductionFailure(_) => "reduction_failure",
                E::NotApplicable(_) => "not_applicable",
                E::Unsupported(_) => "unsupported",
            },
        }
    }

    /// Machine-readable form written on failure.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonInput {
    points: Option<Vec<Vec<f64>>>,
    semialgebraic: Option<JsonSemialg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSemialg {
    inequalities: Vec<BTreeMap<String, f64>>,
    #[serde(rename = "box")]
    bbox: Vec<[f64; 2]>,
}

/// Parse `K` from JSON text.
pub fn parse_json(text: &str) -> Result<KDescription, CliError> {
    let input: JsonInput =
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let k = match (input.points, input.semialgebraic) {
        (Some(points), None) => KDescription::Points(points),
        (None, Some(s)) => {
            let n = s.bbox.len();
            let inequalities = s
                .inequalities
                .iter()
                .map(|m| Polynomial::from_keyed(n, m.iter().map(|(k, &c)| (k.as_str(), c))))
                .collect::<minvol_core::Result<Vec<_>>>()
                .map_err(|e| CliError::Parse(e.to_string()))?;
            KDescription::Semialgebraic {
                inequalities,
                bbox: s.bbox.iter().map(|b| (b[0], b[1])).collect(),
            }
        }
        _ => {
            return Err(CliError::Parse(
                "expected exactly one of \"points\" or \"semialgebraic\"".into(),
            ))
        }
    };
    k.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(k)
}

/// Parse `K` from CSV text: one point per row, an optional non-numeric
/// header row, `#` comments.
pub fn parse_csv(text: &str) -> Result<KDescription, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => points.push(p),
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(CliError::Parse(format!("row {}: {e}", row + 1)));
            }
        }
    }
    let k = KDescription::Points(points);
    k.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(k)
}

/// Read `K` from a file, choosing the format by extension and falling back
/// to sniffing the first character.
pub fn read_input(path: &Path) -> Result<KDescription, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("json") => parse_json(&text),
        Some("csv") => parse_csv(&text),
        _ if text.trim_start().starts_with('{') => parse_json(&text),
        _ => parse_csv(&text),
    }
}

/// Comparison against the minimum-volume symmetric ellipsoid (`d = 2`).
#[derive(Clone, Debug, Serialize)]
pub struct OracleComparison {
    pub volume: f64,
    pub coefficients: BTreeMap<String, f64>,
    /// `(volume - oracle) / oracle`.
    pub relative_gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SamplingInfo {
    pub provenance: Provenance,
    pub points: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobOutput {
    pub n: usize,
    pub degree: u32,
    pub mode: Mode,
    /// Coefficient keys in basis order.
    pub basis: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
    /// Center of the sublevel set; the origin in mode `p0`.
    pub center: Vec<f64>,
    /// `∫ exp(-g*)`.
    pub objective: f64,
    pub volume: f64,
    pub iterations: usize,
    pub outer_iterations: Option<usize>,
    pub kkt_residual: f64,
    pub certificate: KktCertificate,
    pub certificate_valid: bool,
    pub inclusion_audit: InclusionAudit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
    pub quadrature: QuadDiagnostics,
    pub sampling: SamplingInfo,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contours: Option<PathBuf>,
}

impl JobConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.degree < 2 || !self.degree.is_multiple_of(2) {
            return Err(minvol_core::Error::InvalidArgument(format!(
                "degree must be even and >= 2, got {}",
                self.degree
            ))
            .into());
        }
        if self.budget == 0 {
            return Err(minvol_core::Error::InvalidArgument("budget must be >= 1".into()).into());
        }
        if self.contours == Some(0) {
            return Err(minvol_core::Error::InvalidArgument(
                "contour resolution must be >= 1".into(),
            )
            .into());
        }
        Ok(())
    }

    fn solver_config(&self, n: usize) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(tol) = self.tol {
            cfg.kkt_tolerance = tol;
        }
        if let Some(res) = self.resolution {
            let mut q = QuadratureSpec::for_dim(n);
            q.angular_points = res;
            cfg.quadrature = Some(q);
        }
        cfg
    }

    fn contour_path(&self) -> PathBuf {
        if let Some(p) = &self.contours_out {
            return p.clone();
        }
        match &self.out {
            Some(out) => out.with_extension("contours.csv"),
            None => PathBuf::from("contours.csv"),
        }
    }
}

/// Run the job and return its output without writing it anywhere.
pub fn execute(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    cfg.validate()?;
    let k = read_input(&cfg.input)?;
    let n = k.n();
    let d = cfg.degree;
    let solver = cfg.solver_config(n);
    solver.validate(n)?;
    let cs = to_constraints(&k, cfg.budget, cfg.seed)?;

    let (report, center, outer_iterations, cs_centered): (SolveReport, _, _, _) = match cfg.mode {
        Mode::P0 => (solve_p0(&cs, d, &solver)?, vec![0.0; n], None, cs.clone()),
        Mode::P => {
            let r = solve_p(&cs, d, &solver, &OuterConfig::default())?;
            let shifted = cs.translated(&r.a_star);
            (r.inner, r.a_star, Some(r.outer_iterations), shifted)
        }
    };

    let certificate = build_certificate(&report, &cs_centered)?;
    let y0 = report.objective;
    let certificate_valid = certificate.is_valid(y0);
    let inclusion_audit = inclusion_check(&report.g_star, &center, &k, cfg.budget, cfg.seed)?;
    let oracle = if d == 2 {
        oracle_comparison(cs_centered.points(), report.volume)
    } else {
        None
    };

    let contours = match cfg.contours {
        Some(res) => {
            let path = cfg.contour_path();
            emit_contours(&report.g_star, &center, res, &path)?;
            Some(path)
        }
        None => None,
    };

    Ok(JobOutput {
        n,
        degree: d,
        mode: cfg.mode,
        basis: report.g_star.basis().keys(),
        coefficients: report.g_star.keyed_coeffs().into_iter().collect(),
        center,
        objective: report.objective,
        volume: report.volume,
        iterations: report.iterations,
        outer_iterations,
        kkt_residual: report.kkt_residual,
        certificate,
        certificate_valid,
        inclusion_audit,
        oracle,
        quadrature: report.quadrature.clone(),
        sampling: SamplingInfo {
            provenance: cs.provenance(),
            points: cs.len(),
            budget: cfg.budget,
        },
        seed: cfg.seed,
        contours,
    })
}

fn oracle_comparison(points: &[Vec<f64>], volume: f64) -> Option<OracleComparison> {
    // the oracle is a diagnostic; a degenerate cloud simply omits it
    let e = mvee_symmetric(points, MVEE_TOLERANCE).ok()?;
    Some(OracleComparison {
        volume: e.volume,
        coefficients: e.as_poly().keyed_coeffs().into_iter().collect(),
        relative_gap: (volume - e.volume) / e.volume,
        iterations: e.iterations,
    })
}

/// Run the job, write the JSON output (or error object) and return the
/// process exit code.
pub fn run(cfg: &JobConfig) -> i32 {
    match execute(cfg).and_then(|out| write_output(cfg, &out)) {
        Ok(()) => 0,
        Err(e) => {
            let body = e.to_json().to_string();
            let _ = writeln!(std::io::stderr(), "{body}");
            e.exit_code()
        }
    }
}

fn write_output(cfg: &JobConfig, out: &JobOutput) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(out).map_err(|e| CliError::Io(e.to_string()))?;
    match &cfg.out {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Boundary of `{g(x - a) <= 1}` in the plane: `resolution` equispaced
/// angles, each mapped to `a + g(u)^{-1/d} u`.
pub fn contour_points_2d(
    g: &HomogeneousPoly,
    a: &[f64],
    resolution: usize,
) -> Result<Vec<[f64; 2]>, CliError> {
    if g.n() != 2 || a.len() != 2 {
        return Err(
            minvol_core::Error::InvalidArgument("planar contours need n = 2".into()).into(),
        );
    }
    check_in_cone(g)?;
    (0..resolution)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / resolution as f64;
            let u = [theta.cos(), theta.sin()];
            let r = radial(g, &u)?;
            Ok([a[0] + r * u[0], a[1] + r * u[1]])
        })
        .collect()
}

/// Triangle soup approximating `{g(x - a) = 1}` in space: a UV sphere with
/// `resolution` latitude bands and `2 * resolution` longitudes, pushed out
/// radially.
pub fn contour_triangles_3d(
    g: &HomogeneousPoly,
    a: &[f64],
    resolution: usize,
) -> Result<Vec<[[f64; 3]; 3]>, CliError> {
    if g.n() != 3 || a.len() != 3 {
        return Err(
            minvol_core::Error::InvalidArgument("surface contours need n = 3".into()).into(),
        );
    }
    check_in_cone(g)?;
    let (rings, segments) = (resolution.max(2), 2 * resolution.max(2));
    let vertex = |i: usize, j: usize| -> Result<[f64; 3], CliError> {
        let phi = std::f64::consts::PI * i as f64 / rings as f64;
        let theta = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
        let u = [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()];
        let r = radial(g, &u)?;
        Ok([a[0] + r * u[0], a[1] + r * u[1], a[2] + r * u[2]])
    };
    let mut grid = Vec::with_capacity(rings + 1);
    for i in 0..=rings {
        grid.push(
            (0..segments)
                .map(|j| vertex(i, j))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let mut tris = Vec::with_capacity(2 * rings * segments);
    for i in 0..rings {
        for j in 0..segments {
            let jn = (j + 1) % segments;
            let (p00, p01, p10, p11) = (grid[i][j], grid[i][jn], grid[i + 1][j], grid[i + 1][jn]);
            // the first and last bands collapse to a pole on one side
            if i != 0 {
                tris.push([p00, p10, p01]);
            }
            if i + 1 != rings {
                tris.push([p01, p10, p11]);
            }
        }
    }
    Ok(tris)
}

fn radial(g: &HomogeneousPoly, u: &[f64]) -> Result<f64, CliError> {
    let v = g.eval(u)?;
    if !(v > 0.0) {
        return Err(minvol_core::Error::NotInCone {
            sphere_min: v,
            floor: minvol_core::gaussint::POSITIVITY_FLOOR,
        }
        .into());
    }
    Ok(v.powf(-1.0 / g.degree() as f64))
}

/// Write contour samples of `{g(x - a) = 1}` as CSV and return the number
/// of rows: `x,y` points for `n = 2`, one triangle per row
/// (`x1,y1,z1,...,x3,y3,z3`) for `n = 3`.
pub fn emit_contours(
    g: &HomogeneousPoly,
    a: &[f64],
    resolution: usize,
    path: &Path,
) -> Result<usize, CliError> {
    let rows: Vec<Vec<f64>> = match g.n() {
        2 => contour_points_2d(g, a, resolution)?
            .into_iter()
            .map(|p| p.to_vec())
            .collect(),
        3 => contour_triangles_3d(g, a, resolution)?
            .into_iter()
            .map(|t| t.iter().flatten().copied().collect())
            .collect(),
        n => {
            return Err(minvol_core::Error::Unsupported(format!(
                "contours are available for n = 2 or 3, got n = {n}"
            ))
            .into())
        }
    };
    let header: &[&str] = if g.n() == 2 {
        &["x", "y"]
    } else {
        &["x1", "y1", "z1", "x2", "y2", "z2", "x3", "y3", "z3"]
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in &rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(rows.len())
}

/// Re-evaluate `∫ exp(-g)` from keyed coefficients as written in the output.
pub fn objective_from_keyed(
    n: usize,
    d: u32,
    coefficients: &BTreeMap<String, f64>,
) -> Result<f64, CliError> {
    let g = HomogeneousPoly::from_keyed(n, d, coefficients.iter().map(|(k, &c)| (k.as_str(), c)))?;
    Ok(integral_exp(&g, &QuadratureSpec::for_dim(n))?)
}
