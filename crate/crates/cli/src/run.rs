//! Orchestration: build the game, solve, verify, compare, report.

use std::time::Instant;

use sion_core::equilibrium::{
    nash_check, slice_fn, solve_best_response_observed, solve_fixed_point_observed,
    verify_theorem1, verify_theorem2,
};
use sion_core::oligopoly::{closed_form_equilibrium, closed_form_saddle_strategies};
use sion_core::opt::quasiconcavity_diagnostic;
use sion_core::{
    EquilibriumError, EquilibriumReport, FixedPointTrace, GroupedGame, Slice, SymmetricPoint,
};

use crate::config::{FamilyParams, RunConfig};
use crate::report::{
    CheckStatus, ClosedFormComparison, Diagnostic, GameSummary, RunReport, SolverError, Status,
    TheoremCheck, Timings, TraceSummary,
};

/// Agreement required between a solver limit and the analytic equilibrium.
pub const CLOSED_FORM_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Oligopoly,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Oligopoly => "oligopoly",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stream per-iteration residuals to standard error.
    pub verbose: bool,
    /// Point for `verify`; overrides `verify.point` from the config.
    pub point: Option<[f64; 2]>,
}

pub fn run(config: &RunConfig, command: Command, options: &RunOptions) -> RunReport {
    let t0 = Instant::now();
    let mut report = RunReport::new(command.name());
    report.config = Some(config.clone());
    let game = match config.build_game() {
        Ok(g) => g,
        Err(e) => {
            report.fail(e.to_string());
            return report;
        }
    };
    let groups = game.groups();
    report.game = Some(GameSummary {
        family: config.family.name(),
        m: groups.m(),
        n: groups.n(),
        players: groups.players().map(|p| groups.player_name(p)).collect(),
        group1_interval: game.space1(),
        group2_interval: game.space2(),
    });

    let t_solve = Instant::now();
    let fp_trace = match command {
        Command::Solve | Command::Oligopoly => solve(config, &game, options, &mut report),
        Command::Verify => {
            match options.point.or(config.verify.point) {
                Some(p) => match config.check_point(p, "/verify/point") {
                    Ok(p) => report.equilibrium = Some(p),
                    Err(e) => report.fail(e.to_string()),
                },
                None => report.fail("verify requires a point (--point s1,s2 or verify.point)"),
            }
            None
        }
    };
    let solve_ms = t_solve.elapsed().as_secs_f64() * 1e3;

    let t_verify = Instant::now();
    if report.status == Status::Ok {
        if let Some(point) = report.equilibrium {
            verify(config, &game, point, fp_trace.as_ref(), command, &mut report);
        }
    } else if report.status == Status::NotConverged {
        let reason = "solver did not converge";
        report.theorem1 = config.verify.theorem1.then(|| TheoremCheck::skipped(reason));
        report.theorem2 = config.verify.theorem2.then(|| TheoremCheck::skipped(reason));
    }
    let verify_ms = t_verify.elapsed().as_secs_f64() * 1e3;

    report.closed_form = closed_form(config, &report.solvers);
    if config.output.timings {
        report.timings = Some(Timings {
            solve_ms,
            verify_ms,
            total_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
    }
    report
}

fn solve(
    config: &RunConfig,
    game: &GroupedGame,
    options: &RunOptions,
    report: &mut RunReport,
) -> Option<FixedPointTrace> {
    let start = match config.start() {
        Ok(s) => s,
        Err(e) => {
            report.fail(e.to_string());
            return None;
        }
    };
    let settings = config.iteration_settings();
    let opt = config.opt_settings();
    let method = config.solver.method;
    let mut fp_trace = None;
    for (name, enabled) in [
        ("maximin-fp", method.runs_fixed_point()),
        ("best-response", method.runs_best_response()),
    ] {
        if !enabled {
            continue;
        }
        let mut residuals = Vec::new();
        let observe = |k: usize, p: SymmetricPoint, r: f64| {
            residuals.push(r);
            if options.verbose {
                eprintln!("{name} iter {k}: residual {r:.3e} at ({:.9}, {:.9})", p.s1, p.s2);
            }
        };
        let result = if name == "maximin-fp" {
            solve_fixed_point_observed(game, start, &settings, &opt, observe)
        } else {
            solve_best_response_observed(game, start, &settings, &opt, observe)
        };
        let trace = match result {
            Ok(t) => t,
            Err(e) => {
                report.fail(format!("{name}: {e}"));
                return None;
            }
        };
        if !trace.converged {
            report.errors.push(format!(
                "{name} did not converge: residual {:e} after {} iterations",
                trace.residual, trace.iterations
            ));
            report.escalate(Status::NotConverged);
        }
        report.solvers.push(TraceSummary {
            method: name,
            start,
            point: trace.last(),
            converged: trace.converged,
            iterations: trace.iterations,
            residual: trace.residual,
            residuals,
        });
        if name == "maximin-fp" {
            fp_trace = Some(trace);
        }
    }
    if let [a, b] = report.solvers.as_slice() {
        report.solver_agreement = Some(a.point.distance(&b.point));
    }
    report.equilibrium = report.solvers.last().map(|t| t.point);
    fp_trace
}

fn theorem_check(
    result: Result<EquilibriumReport, EquilibriumError>,
    report: &mut RunReport,
    name: &str,
) -> TheoremCheck {
    let check = match result {
        Ok(r) => TheoremCheck {
            status: if r.verified == Some(true) {
                CheckStatus::Verified
            } else {
                CheckStatus::NotVerified
            },
            detail: None,
            report: Some(r),
        },
        Err(e @ EquilibriumError::HypothesisNotSatisfied { .. }) => TheoremCheck {
            status: CheckStatus::HypothesisNotSatisfied,
            detail: Some(e.to_string()),
            report: None,
        },
        Err(e @ EquilibriumError::CoincidenceFailed { .. }) => TheoremCheck {
            status: CheckStatus::CoincidenceFailed,
            detail: Some(e.to_string()),
            report: None,
        },
        Err(e) => {
            report.fail(format!("{name}: {e}"));
            TheoremCheck {
                status: CheckStatus::Error,
                detail: Some(e.to_string()),
                report: None,
            }
        }
    };
    if !check.passed() && check.status != CheckStatus::Error {
        report.errors.push(format!(
            "{name}: {}",
            check.detail.clone().unwrap_or_else(|| "conclusion not verified".to_string())
        ));
        report.escalate(Status::VerificationFailed);
    }
    check
}

fn verify(
    config: &RunConfig,
    game: &GroupedGame,
    point: SymmetricPoint,
    fp_trace: Option<&FixedPointTrace>,
    command: Command,
    report: &mut RunReport,
) {
    let v = &config.verify;
    let settings = config.verify_settings();
    if command == Command::Verify || v.theorem1 || v.theorem2 {
        match nash_check(game, point, &settings) {
            Ok(n) => {
                if !n.is_nash {
                    report.errors.push(format!(
                        "not a Nash equilibrium: max deviation gain {:e} exceeds {:e}",
                        n.max_gap, settings.dev_tol
                    ));
                    report.escalate(Status::VerificationFailed);
                }
                report.nash = Some(n);
            }
            Err(e) => report.fail(format!("nash check: {e}")),
        }
    }
    if v.theorem1 {
        let r = verify_theorem1(game, point, &settings);
        report.theorem1 = Some(theorem_check(r, report, "theorem1"));
    }
    if v.theorem2 {
        report.theorem2 = Some(match fp_trace {
            Some(trace) => {
                let r = verify_theorem2(game, trace, &settings);
                theorem_check(r, report, "theorem2")
            }
            None if command == Command::Verify => {
                TheoremCheck::skipped("needs a maximin fixed-point trace; run solve")
            }
            None => TheoremCheck::skipped("method best-response produces no maximin fixed-point trace"),
        });
    }
    if v.diagnostics {
        let base = point.profile(game.groups());
        for (k, slice) in [Slice::G1, Slice::G2].into_iter().enumerate() {
            let space = game.space(slice.x.group);
            let r = quasiconcavity_diagnostic(
                slice_fn(game, slice, &base),
                space,
                space,
                v.diagnostic_samples,
                config.seed.wrapping_add(k as u64),
            );
            report.diagnostics.push(Diagnostic {
                slice: slice.label(game.groups()),
                report: r,
            });
        }
    }
}

fn closed_form(config: &RunConfig, solvers: &[TraceSummary]) -> Option<ClosedFormComparison> {
    let (source, point, prices, costs, saddle) = match &config.family {
        FamilyParams::Oligopoly(o) => {
            let params = config.oligopoly_params()?;
            let cf = closed_form_equilibrium(&params).ok()?;
            let saddle = closed_form_saddle_strategies(&params).ok()?;
            (
                "oligopoly_closed_form",
                cf.point,
                Some([cf.price1, cf.price2]),
                Some([o.c_a, o.c_c]),
                saddle,
            )
        }
        FamilyParams::QuadraticSaddle(_) => {
            let point = config.quadratic_params()?.analytic_equilibrium().ok()?;
            ("quadratic_linear_system", point, None, None, Vec::new())
        }
        FamilyParams::CustomExpr(_) => return None,
    };
    let solver_errors: Vec<SolverError> = solvers
        .iter()
        .map(|t| SolverError {
            method: t.method,
            max_abs_error: t.point.distance(&point),
        })
        .collect();
    let max_abs_error = solver_errors.iter().map(|e| e.max_abs_error).reduce(f64::max);
    Some(ClosedFormComparison {
        source,
        point,
        prices,
        marginal_costs: costs,
        saddle_strategies: saddle,
        solver_errors,
        max_abs_error,
        tolerance: CLOSED_FORM_TOL,
        within_tolerance: max_abs_error.map(|e| e <= CLOSED_FORM_TOL),
    })
}
