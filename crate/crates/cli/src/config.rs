//! Run configuration: JSON ingestion, defaulting and validation.
//!
//! The document layout is described by `schema/run-config.v1.schema.json`.
//! Every error carries a JSON pointer to the offending value.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sion_core::custom::{self, CustomGameError, TemplatePayoffs};
use sion_core::expr::{self, ExprError};
use sion_core::oligopoly::{self, CournotProfits, OligopolyError};
use sion_core::quadratic::{self, QuadraticError};
use sion_core::{
    GroupSpec, GroupedGame, Interval, IterationSettings, OligopolyParams, OptSettings,
    QuadraticGroupParams, QuadraticSaddleParams, Relativized, SymmetricPoint, VerifySettings,
};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at '{pointer}': {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid value at '{pointer}': {message}")]
    Family { pointer: String, message: String },
    #[error("expression error at '{pointer}': {source}")]
    Expr { pointer: String, source: ExprError },
}

impl ConfigError {
    fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    fn family(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Family {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Oligopoly,
    QuadraticSaddle,
    CustomExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Method {
    #[serde(rename = "maximin-fp")]
    #[value(name = "maximin-fp")]
    MaximinFp,
    #[serde(rename = "best-response")]
    #[value(name = "best-response")]
    BestResponse,
    #[serde(rename = "both")]
    #[value(name = "both")]
    Both,
}

impl Method {
    pub fn runs_fixed_point(self) -> bool {
        matches!(self, Method::MaximinFp | Method::Both)
    }

    pub fn runs_best_response(self) -> bool {
        matches!(self, Method::BestResponse | Method::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OligopolyConfig {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "cA")]
    pub c_a: f64,
    #[serde(rename = "cC")]
    pub c_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    pub group1: QuadraticGroupParams,
    pub group2: QuadraticGroupParams,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        let d = QuadraticSaddleParams::default();
        QuadraticConfig {
            group1: d.group1,
            group2: d.group2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomExprConfig {
    /// Absolute payoff of the first group-one player.
    pub group1: String,
    /// Absolute payoff of the first group-two player.
    pub group2: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilyParams {
    Oligopoly(OligopolyConfig),
    QuadraticSaddle(QuadraticConfig),
    CustomExpr(CustomExprConfig),
}

impl FamilyParams {
    pub fn tag(&self) -> FamilyTag {
        match self {
            FamilyParams::Oligopoly(_) => FamilyTag::Oligopoly,
            FamilyParams::QuadraticSaddle(_) => FamilyTag::QuadraticSaddle,
            FamilyParams::CustomExpr(_) => FamilyTag::CustomExpr,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyParams::Oligopoly(_) => "oligopoly",
            FamilyParams::QuadraticSaddle(_) => "quadratic_saddle",
            FamilyParams::CustomExpr(_) => "custom_expr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsConfig {
    pub m: usize,
    pub n: usize,
}

impl Default for GroupsConfig {
    fn default() -> Self {
        GroupsConfig { m: 3, n: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalsConfig {
    pub group1: [f64; 2],
    pub group2: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub damping: f64,
    pub fp_tol: f64,
    pub opt_tol: f64,
    pub max_iter: usize,
    pub grid_points: usize,
    /// `[s1, s2]`; the interval midpoints when absent.
    pub start: Option<[f64; 2]>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let it = IterationSettings::default();
        let opt = OptSettings::default();
        SolverConfig {
            method: Method::Both,
            damping: it.damping,
            fp_tol: it.fp_tol,
            opt_tol: opt.tol,
            max_iter: it.max_iter,
            grid_points: opt.grid_points,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub theorem1: bool,
    pub theorem2: bool,
    pub diagnostics: bool,
    pub diagnostic_samples: usize,
    pub dev_tol: f64,
    pub gap_tol: f64,
    pub arg_tol: f64,
    pub coincidence_tol: f64,
    pub all_players: bool,
    /// `[s1, s2]` checked by the `verify` command.
    pub point: Option<[f64; 2]>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let v = VerifySettings::default();
        VerifyConfig {
            theorem1: true,
            theorem2: true,
            diagnostics: true,
            diagnostic_samples: 16,
            dev_tol: v.dev_tol,
            gap_tol: v.gap_tol,
            arg_tol: v.arg_tol,
            coincidence_tol: v.coincidence_tol,
            all_players: false,
            point: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Format,
    /// Include wall-clock timings; off by default so reports are reproducible.
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: None,
            format: Format::Json,
            timings: false,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "schema_version")]
    schema_version: u32,
    family: FamilyTag,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    groups: GroupsConfig,
    #[serde(default)]
    intervals: Option<IntervalsConfig>,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    verify: VerifyConfig,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    output: OutputConfig,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A validated configuration. Serializes back to an equivalent config
/// document with every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub family: FamilyParams,
    pub groups: GroupsConfig,
    pub intervals: IntervalsConfig,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
    pub seed: u64,
    pub output: OutputConfig,
    #[serde(skip)]
    templates: Option<TemplatePayoffs>,
}

impl PartialEq for RunConfig {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

fn pointer(path: &serde_path_to_error::Path, prefix: &str) -> String {
    use serde_path_to_error::Segment;
    let mut out = prefix.to_string();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".to_string()
    } else {
        out
    }
}

fn from_value<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let message = e.inner().to_string();
        ConfigError::schema(pointer(e.path(), prefix), message)
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> Result<RunConfig, ConfigError> {
    if !value.is_object() {
        return Err(ConfigError::schema("/", "expected a JSON object"));
    }
    let raw: RawConfig = from_value(value, "")?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::schema(
            "/schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        ));
    }
    let family = match raw.family {
        FamilyTag::Oligopoly => {
            if raw.params.is_null() {
                return Err(ConfigError::schema("/params", "oligopoly requires a, b, cA, cC"));
            }
            FamilyParams::Oligopoly(from_value(raw.params, "/params")?)
        }
        FamilyTag::QuadraticSaddle => FamilyParams::QuadraticSaddle(if raw.params.is_null() {
            QuadraticConfig::default()
        } else {
            from_value(raw.params, "/params")?
        }),
        FamilyTag::CustomExpr => {
            if raw.params.is_null() {
                return Err(ConfigError::schema("/params", "custom_expr requires group1 and group2"));
            }
            FamilyParams::CustomExpr(from_value(raw.params, "/params")?)
        }
    };
    GroupSpec::new(raw.groups.m, raw.groups.n)
        .map_err(|e| ConfigError::family("/groups", e.to_string()))?;

    let intervals = match (raw.intervals, &family) {
        (Some(iv), _) => iv,
        (None, FamilyParams::Oligopoly(p)) => IntervalsConfig {
            group1: [0.0, p.a],
            group2: [0.0, p.a],
        },
        (None, FamilyParams::QuadraticSaddle(_)) => IntervalsConfig {
            group1: [0.0, 10.0],
            group2: [0.0, 10.0],
        },
        (None, FamilyParams::CustomExpr(_)) => {
            return Err(ConfigError::schema("/intervals", "custom_expr requires explicit intervals"))
        }
    };

    let mut config = RunConfig {
        schema_version: raw.schema_version,
        family,
        groups: raw.groups,
        intervals,
        solver: raw.solver,
        verify: raw.verify,
        seed: raw.seed,
        output: raw.output,
        templates: None,
    };
    config.validate_settings()?;
    if let FamilyParams::CustomExpr(c) = &config.family {
        let groups = config.group_spec();
        let parse = |src: &str, field: &str| {
            expr::parse(src, groups, &c.constants).map_err(|source| ConfigError::Expr {
                pointer: format!("/params/{field}"),
                source,
            })
        };
        config.templates = Some(TemplatePayoffs {
            group1: parse(&c.group1, "group1")?,
            group2: parse(&c.group2, "group2")?,
        });
    }
    // Surfaces family-invariant violations at load time.
    config.build_game()?;
    Ok(config)
}

fn positive(value: f64, pointer: &str) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::schema(pointer, format!("must be a positive finite number, got {value}")))
    }
}

impl RunConfig {
    pub fn group_spec(&self) -> GroupSpec {
        GroupSpec::new(self.groups.m, self.groups.n).expect("validated at load")
    }

    pub fn space1(&self) -> Result<Interval, ConfigError> {
        let [lo, hi] = self.intervals.group1;
        Interval::new(lo, hi).map_err(|e| ConfigError::schema("/intervals/group1", e.to_string()))
    }

    pub fn space2(&self) -> Result<Interval, ConfigError> {
        let [lo, hi] = self.intervals.group2;
        Interval::new(lo, hi).map_err(|e| ConfigError::schema("/intervals/group2", e.to_string()))
    }

    fn validate_settings(&self) -> Result<(), ConfigError> {
        self.space1()?;
        self.space2()?;
        let s = &self.solver;
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(ConfigError::schema(
                "/solver/damping",
                format!("must be in (0, 1], got {}", s.damping),
            ));
        }
        positive(s.fp_tol, "/solver/fp_tol")?;
        positive(s.opt_tol, "/solver/opt_tol")?;
        if s.max_iter == 0 {
            return Err(ConfigError::schema("/solver/max_iter", "must be at least 1"));
        }
        if s.grid_points < 3 {
            return Err(ConfigError::schema("/solver/grid_points", "must be at least 3"));
        }
        let v = &self.verify;
        positive(v.dev_tol, "/verify/dev_tol")?;
        positive(v.gap_tol, "/verify/gap_tol")?;
        positive(v.arg_tol, "/verify/arg_tol")?;
        positive(v.coincidence_tol, "/verify/coincidence_tol")?;
        for (pointer, point) in [("/solver/start", s.start), ("/verify/point", v.point)] {
            if let Some(p) = point {
                self.check_point(p, pointer)?;
            }
        }
        Ok(())
    }

    /// Checks that `[s1, s2]` lies in the strategy intervals.
    pub fn check_point(&self, p: [f64; 2], pointer: &str) -> Result<SymmetricPoint, ConfigError> {
        let (s1, s2) = (self.space1()?, self.space2()?);
        if !(s1.contains(p[0]) && s2.contains(p[1])) {
            return Err(ConfigError::schema(
                pointer,
                format!(
                    "point ({}, {}) lies outside [{}, {}] x [{}, {}]",
                    p[0],
                    p[1],
                    s1.lo(),
                    s1.hi(),
                    s2.lo(),
                    s2.hi()
                ),
            ));
        }
        Ok(SymmetricPoint::new(p[0], p[1]))
    }

    pub fn oligopoly_params(&self) -> Option<OligopolyParams> {
        match &self.family {
            FamilyParams::Oligopoly(p) => {
                Some(OligopolyParams::new(p.a, p.b, p.c_a, p.c_c).with_groups(self.group_spec()))
            }
            _ => None,
        }
    }

    pub fn quadratic_params(&self) -> Option<QuadraticSaddleParams> {
        match &self.family {
            FamilyParams::QuadraticSaddle(q) => Some(QuadraticSaddleParams {
                group1: q.group1,
                group2: q.group2,
                groups: self.group_spec(),
            }),
            _ => None,
        }
    }

    pub fn start(&self) -> Result<SymmetricPoint, ConfigError> {
        match self.solver.start {
            Some(p) => self.check_point(p, "/solver/start"),
            None => Ok(SymmetricPoint::new(self.space1()?.midpoint(), self.space2()?.midpoint())),
        }
    }

    pub fn iteration_settings(&self) -> IterationSettings {
        IterationSettings {
            damping: self.solver.damping,
            fp_tol: self.solver.fp_tol,
            max_iter: self.solver.max_iter,
        }
    }

    pub fn opt_settings(&self) -> OptSettings {
        OptSettings {
            tol: self.solver.opt_tol,
            grid_points: self.solver.grid_points,
        }
    }

    pub fn verify_settings(&self) -> VerifySettings {
        let v = &self.verify;
        VerifySettings {
            opt: self.opt_settings(),
            dev_tol: v.dev_tol,
            gap_tol: v.gap_tol,
            arg_tol: v.arg_tol,
            coincidence_tol: v.coincidence_tol,
            all_players: v.all_players,
        }
    }

    pub fn build_game(&self) -> Result<GroupedGame, ConfigError> {
        let (space1, space2) = (self.space1()?, self.space2()?);
        match &self.family {
            FamilyParams::Oligopoly(_) => {
                let params = self.oligopoly_params().expect("oligopoly family");
                params.validate().map_err(oligopoly_error)?;
                let eq = oligopoly::closed_form_equilibrium(&params).map_err(oligopoly_error)?;
                for (pointer, space, s) in [
                    ("/intervals/group1", space1, eq.point.s1),
                    ("/intervals/group2", space2, eq.point.s2),
                ] {
                    if !space.contains(s) {
                        return Err(ConfigError::family(
                            pointer,
                            format!("must contain the equilibrium output {s}"),
                        ));
                    }
                }
                Ok(GroupedGame::new(
                    params.groups,
                    space1,
                    space2,
                    Relativized(CournotProfits(params)),
                ))
            }
            FamilyParams::QuadraticSaddle(_) => {
                let params = self.quadratic_params().expect("quadratic family");
                quadratic::build_game(&params, space1, space2).map_err(|e| match e {
                    QuadraticError::Invalid { field, reason } => {
                        ConfigError::family(format!("/params/{}", field.replace('.', "/")), reason)
                    }
                    other => ConfigError::family("/params", other.to_string()),
                })
            }
            FamilyParams::CustomExpr(_) => {
                let templates = self.templates.clone().expect("parsed at load");
                custom::build_game(self.group_spec(), space1, space2, templates, self.seed)
                    .map_err(|e| match e {
                        CustomGameError::Asymmetric { .. } => ConfigError::family("/params", e.to_string()),
                        CustomGameError::Game(g) => ConfigError::family("/intervals", g.to_string()),
                    })
            }
        }
    }
}

fn oligopoly_error(e: OligopolyError) -> ConfigError {
    match e {
        OligopolyError::Invalid { field, reason } => ConfigError::family(
            format!("/params/{field}"),
            format!("{field} {reason}"),
        ),
        other => ConfigError::family("/params", other.to_string()),
    }
}

/// Config for the built-in oligopoly with the given parameters and defaults
/// elsewhere.
pub fn oligopoly_config(a: f64, b: f64, c_a: f64, c_c: f64) -> Result<RunConfig, ConfigError> {
    config_from_value(serde_json::json!({
        "family": "oligopoly",
        "params": { "a": a, "b": b, "cA": c_a, "cC": c_c },
    }))
}
