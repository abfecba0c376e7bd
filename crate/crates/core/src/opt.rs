//! One-dimensional optimization on compact intervals and the nested
//! maximin / minimax problems built on top of it.
//!
//! Every search is a uniform grid scan that brackets the best grid point,
//! followed by golden-section refinement of the bracket down to width `tol`.
//! For quasi-concave (resp. quasi-convex) objectives the bracket contains the
//! optimum. Ties are broken toward the smallest argument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Interval;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("objective returned non-finite value {value} at {at}")]
    NonFinite { at: f64, value: f64 },
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptSettings {
    /// Final bracket width for the outer search; inner searches of nested
    /// problems use `tol / 10`.
    pub tol: f64,
    /// Points in the initial uniform scan, endpoints included.
    pub grid_points: usize,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings {
            tol: 1e-8,
            grid_points: 64,
        }
    }
}

impl OptSettings {
    pub fn with_tol(tol: f64) -> Self {
        OptSettings {
            tol,
            ..OptSettings::default()
        }
    }

    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(OptError::InvalidSettings(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.grid_points < 3 {
            return Err(OptError::InvalidSettings(format!(
                "grid_points must be at least 3, got {}",
                self.grid_points
            )));
        }
        Ok(())
    }

    fn inner(&self) -> OptSettings {
        OptSettings {
            tol: self.tol / 10.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub arg: f64,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Max,
    Min,
}

impl Sense {
    /// Strictly better; equal values are never better so the earlier
    /// (smaller) argument wins.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Max => a > b,
            Sense::Min => a < b,
        }
    }
}

fn search(
    f: &mut dyn FnMut(f64) -> Result<f64, OptError>,
    domain: Interval,
    settings: &OptSettings,
    sense: Sense,
) -> Result<OptResult, OptError> {
    settings.validate()?;
    let mut evaluations = 0usize;
    let mut eval = |x: f64| -> Result<f64, OptError> {
        evaluations += 1;
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OptError::NonFinite { at: x, value: v })
        }
    };

    let (lo, hi) = (domain.lo(), domain.hi());
    let last = settings.grid_points - 1;
    let step = (hi - lo) / last as f64;
    let grid_x = |i: usize| if i == last { hi } else { lo + step * i as f64 };

    let mut best_i = 0;
    let mut best_v = eval(lo)?;
    for i in 1..=last {
        let v = eval(grid_x(i))?;
        if sense.better(v, best_v) {
            best_i = i;
            best_v = v;
        }
    }

    let mut a = grid_x(best_i.saturating_sub(1));
    let mut b = grid_x((best_i + 1).min(last));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut steps = 0;
    while b - a > settings.tol && steps < MAX_GOLDEN_STEPS {
        // Ties keep the left part of the bracket.
        if sense.better(fd, fc) {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        }
        steps += 1;
    }
    let (golden_x, golden_v) = if sense.better(fd, fc) {
        (d, fd)
    } else {
        (c, fc)
    };

    let grid_best = grid_x(best_i);
    let (arg, value) = if sense.better(golden_v, best_v)
        || (golden_v == best_v && golden_x < grid_best)
    {
        (golden_x, golden_v)
    } else {
        (grid_best, best_v)
    };
    Ok(OptResult {
        arg,
        value,
        evaluations,
    })
}

fn infallible(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<f64, OptError> {
    move |x| Ok(f(x))
}

/// Maximizes `f` over `domain`.
pub fn argmax_interval(
    f: impl Fn(f64) -> f64,
    domain: Interval,
    settings: &OptSettings,
) -> Result<OptResult, OptError> {
    search(&mut infallible(f), domain, settings, Sense::Max)
}

/// Minimizes `f` over `domain`.
pub fn argmin_interval(
    f: impl Fn(f64) -> f64,
    domain: Interval,
    settings: &OptSettings,
) -> Result<OptResult, OptError> {
    search(&mut infallible(f), domain, settings, Sense::Min)
}

/// Outer optimum of a nested problem together with the inner optimizer at the
/// outer argument.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Nested {
    outer: OptResult,
    inner_arg: f64,
}

fn nested(
    f: &dyn Fn(f64, f64) -> f64,
    outer_domain: Interval,
    inner_domain: Interval,
    settings: &OptSettings,
    outer_is_x: bool,
    outer_sense: Sense,
) -> Result<Nested, OptError> {
    let inner_settings = settings.inner();
    let inner_sense = match outer_sense {
        Sense::Max => Sense::Min,
        Sense::Min => Sense::Max,
    };
    let mut inner_evaluations = 0;
    let mut solve_inner = |t: f64| -> Result<OptResult, OptError> {
        let mut g = |s: f64| Ok(if outer_is_x { f(t, s) } else { f(s, t) });
        let r = search(&mut g, inner_domain, &inner_settings, inner_sense)?;
        inner_evaluations += r.evaluations;
        Ok(r)
    };
    let mut outer_obj = |t: f64| solve_inner(t).map(|r| r.value);
    let mut outer = search(&mut outer_obj, outer_domain, settings, outer_sense)?;
    let at_arg = solve_inner(outer.arg)?;
    outer.evaluations = inner_evaluations;
    Ok(Nested {
        outer,
        inner_arg: at_arg.arg,
    })
}

/// `max over x of min over y of f(x, y)`; `arg` is the maximizing `x`.
pub fn maximin(
    f: impl Fn(f64, f64) -> f64,
    x_domain: Interval,
    y_domain: Interval,
    settings: &OptSettings,
) -> Result<OptResult, OptError> {
    nested(&f, x_domain, y_domain, settings, true, Sense::Max).map(|n| n.outer)
}

/// `min over y of max over x of f(x, y)`; `arg` is the minimizing `y`.
pub fn minimax(
    f: impl Fn(f64, f64) -> f64,
    x_domain: Interval,
    y_domain: Interval,
    settings: &OptSettings,
) -> Result<OptResult, OptError> {
    nested(&f, y_domain, x_domain, settings, false, Sense::Min).map(|n| n.outer)
}

/// Both sides of the minimax equality for one two-player slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleResult {
    pub maximin_value: f64,
    pub minimax_value: f64,
    /// The `x` achieving `max_x min_y f`.
    pub maximin_arg: f64,
    /// The `y` achieving `min_y max_x f`.
    pub minimax_arg: f64,
    /// The minimizing `y` of the inner problem at `maximin_arg`.
    pub inner_min_at_maximin: f64,
    /// The maximizing `x` of the inner problem at `minimax_arg`.
    pub inner_max_at_minimax: f64,
    /// `minimax_value - maximin_value`; nonnegative up to rounding.
    pub gap: f64,
    /// Whether the two args agree; `None` when `x` and `y` range over
    /// different intervals.
    pub coincident: Option<bool>,
    pub evaluations: usize,
}

pub const DEFAULT_COINCIDENCE_TOL: f64 = 1e-4;

pub fn saddle_check(
    f: impl Fn(f64, f64) -> f64,
    x_domain: Interval,
    y_domain: Interval,
    settings: &OptSettings,
    coincidence_tol: f64,
) -> Result<SaddleResult, OptError> {
    let lower = nested(&f, x_domain, y_domain, settings, true, Sense::Max)?;
    let upper = nested(&f, y_domain, x_domain, settings, false, Sense::Min)?;
    let coincident = (x_domain == y_domain)
        .then(|| (lower.outer.arg - upper.outer.arg).abs() <= coincidence_tol);
    Ok(SaddleResult {
        maximin_value: lower.outer.value,
        minimax_value: upper.outer.value,
        maximin_arg: lower.outer.arg,
        minimax_arg: upper.outer.arg,
        inner_min_at_maximin: lower.inner_arg,
        inner_max_at_minimax: upper.inner_arg,
        gap: upper.outer.value - lower.outer.value,
        coincident,
        evaluations: lower.outer.evaluations + upper.outer.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `f(., y)` failed quasi-concavity.
    X,
    /// `f(x, .)` failed quasi-convexity.
    Y,
}

/// A point strictly between two better points along one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub direction: Direction,
    /// The coordinate held fixed along the line.
    pub fixed: f64,
    pub left: f64,
    pub middle: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiConcavityReport {
    pub samples: usize,
    pub grid_points: usize,
    pub concavity_violations: usize,
    pub convexity_violations: usize,
    pub witnesses: Vec<Violation>,
}

impl QuasiConcavityReport {
    pub fn is_clean(&self) -> bool {
        self.concavity_violations == 0 && self.convexity_violations == 0
    }
}

const DIAGNOSTIC_GRID: usize = 65;
const MAX_WITNESSES: usize = 8;

/// Looks for an interior grid point that is beaten on both sides: for
/// quasi-concave lines (`upper = true`) a dip, for quasi-convex lines a bump.
fn line_violation(values: &[f64], upper: bool) -> Option<(usize, usize, usize)> {
    let scale = values.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let eps = 1e-10 * scale;
    let k = values.len();
    let key = |v: f64| if upper { v } else { -v };
    let mut prefix = vec![0usize; k];
    for i in 1..k {
        let p = prefix[i - 1];
        prefix[i] = if key(values[i - 1]) > key(values[p]) { i - 1 } else { p };
    }
    let mut suffix = vec![k - 1; k];
    for i in (0..k - 1).rev() {
        let s = suffix[i + 1];
        suffix[i] = if key(values[i + 1]) > key(values[s]) { i + 1 } else { s };
    }
    (1..k - 1).find_map(|i| {
        let (l, r) = (prefix[i], suffix[i]);
        let mid = key(values[i]);
        (key(values[l]) > mid + eps && key(values[r]) > mid + eps).then_some((l, i, r))
    })
}

/// Sampling-based check of the concave/convex shape assumptions; advisory only.
pub fn quasiconcavity_diagnostic(
    f: impl Fn(f64, f64) -> f64,
    x_domain: Interval,
    y_domain: Interval,
    samples: usize,
    seed: u64,
) -> QuasiConcavityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = |d: Interval| -> Vec<f64> {
        (0..DIAGNOSTIC_GRID)
            .map(|i| d.lo() + d.width() * i as f64 / (DIAGNOSTIC_GRID - 1) as f64)
            .collect()
    };
    let xs = grid(x_domain);
    let ys = grid(y_domain);
    let mut report = QuasiConcavityReport {
        samples,
        grid_points: DIAGNOSTIC_GRID,
        concavity_violations: 0,
        convexity_violations: 0,
        witnesses: Vec::new(),
    };
    for _ in 0..samples {
        let y = rng.gen_range(y_domain.lo()..=y_domain.hi());
        let values: Vec<f64> = xs.iter().map(|&x| f(x, y)).collect();
        if let Some((l, m, r)) = line_violation(&values, true) {
            report.concavity_violations += 1;
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(Violation {
                    direction: Direction::X,
                    fixed: y,
                    left: xs[l],
                    middle: xs[m],
                    right: xs[r],
                });
            }
        }
        let x = rng.gen_range(x_domain.lo()..=x_domain.hi());
        let values: Vec<f64> = ys.iter().map(|&y| f(x, y)).collect();
        if let Some((l, m, r)) = line_violation(&values, false) {
            report.convexity_violations += 1;
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(Violation {
                    direction: Direction::Y,
                    fixed: x,
                    left: ys[l],
                    middle: ys[m],
                    right: ys[r],
                });
            }
        }
    }
    report
}
