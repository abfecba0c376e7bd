//! Run reports and their JSON and CSV encodings.
//!
//! JSON keys appear in struct declaration order. Floating-point values are
//! written with 17 significant digits (`1.5555555555555556e0`), which
//! round-trips every `f64`; non-finite values are written as `null`.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sion_core::oligopoly::PairStrategies;
use sion_core::opt::QuasiConcavityReport;
use sion_core::{EquilibriumReport, Interval, SymmetricPoint};

use crate::config::{Format, RunConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
    VerificationFailed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Error => 1,
            Status::NotConverged => 2,
            Status::VerificationFailed => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NotConverged => "not_converged",
            Status::VerificationFailed => "verification_failed",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Toolkit {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Toolkit {
    fn default() -> Self {
        Toolkit {
            name: "sion",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GameSummary {
    pub family: &'static str,
    pub m: usize,
    pub n: usize,
    pub players: Vec<String>,
    pub group1_interval: Interval,
    pub group2_interval: Interval,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    /// `maximin-fp` or `best-response`.
    pub method: &'static str,
    pub start: SymmetricPoint,
    pub point: SymmetricPoint,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm residual `|map(p) - p|` at each iteration.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Verified,
    NotVerified,
    HypothesisNotSatisfied,
    CoincidenceFailed,
    Skipped,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremCheck {
    pub status: CheckStatus,
    pub detail: Option<String>,
    pub report: Option<EquilibriumReport>,
}

impl TheoremCheck {
    pub fn skipped(detail: impl Into<String>) -> Self {
        TheoremCheck {
            status: CheckStatus::Skipped,
            detail: Some(detail.into()),
            report: None,
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.status, CheckStatus::Verified | CheckStatus::Skipped)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub slice: String,
    pub report: QuasiConcavityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverError {
    pub method: &'static str,
    pub max_abs_error: f64,
}

/// Comparison against the family's analytic equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormComparison {
    /// `oligopoly_closed_form` or `quadratic_linear_system`.
    pub source: &'static str,
    pub point: SymmetricPoint,
    /// Equilibrium prices, oligopoly only.
    pub prices: Option<[f64; 2]>,
    /// Marginal costs, oligopoly only.
    pub marginal_costs: Option<[f64; 2]>,
    pub saddle_strategies: Vec<PairStrategies>,
    pub solver_errors: Vec<SolverError>,
    pub max_abs_error: Option<f64>,
    pub tolerance: f64,
    pub within_tolerance: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub solve_ms: f64,
    pub verify_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub toolkit: Toolkit,
    pub command: &'static str,
    pub status: Status,
    pub exit_code: i32,
    pub errors: Vec<String>,
    pub config: Option<RunConfig>,
    pub game: Option<GameSummary>,
    pub solvers: Vec<TraceSummary>,
    /// Sup-norm distance between the two solvers' limits.
    pub solver_agreement: Option<f64>,
    /// The best-response limit when available, else the fixed-point limit,
    /// else the point supplied to `verify`.
    pub equilibrium: Option<SymmetricPoint>,
    pub nash: Option<EquilibriumReport>,
    pub theorem1: Option<TheoremCheck>,
    pub theorem2: Option<TheoremCheck>,
    pub diagnostics: Vec<Diagnostic>,
    pub closed_form: Option<ClosedFormComparison>,
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            toolkit: Toolkit::default(),
            command,
            status: Status::Ok,
            exit_code: 0,
            errors: Vec::new(),
            config: None,
            game: None,
            solvers: Vec::new(),
            solver_agreement: None,
            equilibrium: None,
            nash: None,
            theorem1: None,
            theorem2: None,
            diagnostics: Vec::new(),
            closed_form: None,
            timings: None,
        }
    }

    /// Raises the status; the most severe outcome wins (error, then
    /// non-convergence, then verification failure).
    pub fn escalate(&mut self, status: Status) {
        let rank = |s: Status| match s {
            Status::Ok => 0,
            Status::VerificationFailed => 1,
            Status::NotConverged => 2,
            Status::Error => 3,
        };
        if rank(status) > rank(self.status) {
            self.status = status;
        }
        self.exit_code = self.status.exit_code();
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.errors.push(message.into());
        self.escalate(Status::Error);
    }
}

/// Pretty-printed JSON with fixed 17-significant-digit floats.
struct ReportFormatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident $(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
                self.0.$name(w $(, $arg)?)
            }
        )*
    };
}

impl Formatter for ReportFormatter {
    delegate! {
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        begin_object_value,
        end_object_value,
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, ReportFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

/// Column order of the flat CSV summary.
pub const CSV_HEADER: [&str; 26] = [
    "command",
    "family",
    "m",
    "n",
    "method",
    "status",
    "exit_code",
    "s1",
    "s2",
    "fp_converged",
    "fp_iterations",
    "fp_residual",
    "br_converged",
    "br_iterations",
    "br_residual",
    "solver_agreement",
    "is_nash",
    "max_deviation_gap",
    "theorem1",
    "theorem2",
    "sion_gap_g1",
    "sion_gap_g2",
    "closed_form_s1",
    "closed_form_s2",
    "closed_form_error",
    "total_ms",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn check(c: &Option<TheoremCheck>) -> String {
    c.as_ref()
        .map(|c| {
            serde_json::to_value(c.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        })
        .unwrap_or_default()
}

pub fn csv_row(report: &RunReport) -> Vec<String> {
    let trace = |method: &str| report.solvers.iter().find(|t| t.method == method);
    let fp = trace("maximin-fp");
    let br = trace("best-response");
    let theorem_report = |c: &Option<TheoremCheck>| c.as_ref().and_then(|c| c.report.clone());
    let t1 = theorem_report(&report.theorem1);
    let sion = |pick: fn(&EquilibriumReport) -> Option<f64>| {
        t1.as_ref()
            .and_then(pick)
            .or_else(|| theorem_report(&report.theorem2).as_ref().and_then(pick))
    };
    let method = report
        .config
        .as_ref()
        .map(|c| serde_json::to_value(c.solver.method).ok())
        .and_then(|v| v.and_then(|v| v.as_str().map(str::to_string)))
        .unwrap_or_default();
    vec![
        report.command.to_string(),
        report.game.as_ref().map(|g| g.family.to_string()).unwrap_or_default(),
        opt(report.game.as_ref().map(|g| g.m)),
        opt(report.game.as_ref().map(|g| g.n)),
        method,
        report.status.as_str().to_string(),
        report.exit_code.to_string(),
        num(report.equilibrium.map(|p| p.s1)),
        num(report.equilibrium.map(|p| p.s2)),
        opt(fp.map(|t| t.converged)),
        opt(fp.map(|t| t.iterations)),
        num(fp.map(|t| t.residual)),
        opt(br.map(|t| t.converged)),
        opt(br.map(|t| t.iterations)),
        num(br.map(|t| t.residual)),
        num(report.solver_agreement),
        opt(report.nash.as_ref().map(|n| n.is_nash)),
        num(report.nash.as_ref().map(|n| n.max_gap)),
        check(&report.theorem1),
        check(&report.theorem2),
        num(sion(|r| r.sion_g1.map(|s| s.gap))),
        num(sion(|r| r.sion_g2.map(|s| s.gap))),
        num(report.closed_form.as_ref().map(|c| c.point.s1)),
        num(report.closed_form.as_ref().map(|c| c.point.s2)),
        num(report.closed_form.as_ref().and_then(|c| c.max_abs_error)),
        num(report.timings.as_ref().map(|t| t.total_ms)),
    ]
}

pub fn to_csv(report: &RunReport) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(io::Error::other)?;
    w.write_record(csv_row(report)).map_err(io::Error::other)?;
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn encode(report: &RunReport, format: Format) -> io::Result<Vec<u8>> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report),
    }
}

/// Writes the report to `path`, or to standard output when `path` is `None`.
pub fn emit_report(report: &RunReport, format: Format, path: Option<&str>) -> io::Result<()> {
    let bytes = encode(report, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()
        }
    }
}
