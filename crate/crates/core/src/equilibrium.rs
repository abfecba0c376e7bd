//! Symmetric-in-group equilibria.
//!
//! Two iterations are provided on the reduced space of symmetric points
//! `(s1, s2)`, where every group-one player plays `s1` and every group-two
//! player plays `s2`:
//!
//! * the maximin map, sending `(s1, s2)` to the maximin strategy of the first
//!   player of each group against the second player of the same group, with
//!   everybody else held at the symmetric point;
//! * the best-response map, sending `(s1, s2)` to each group representative's
//!   payoff-maximizing strategy.
//!
//! Both are iterated with damping. Their limits are then checked against each
//! other: at a symmetric Nash equilibrium the `(A, B)` and `(C, D)` slices are
//! saddle points whose maximin and minimax strategies equal the equilibrium
//! strategy ([`verify_theorem1`]), and a maximin fixed point whose slices are
//! saddle points is a Nash equilibrium ([`verify_theorem2`]).

use std::cell::RefCell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, Group, GroupSpec, GroupedGame, PlayerId, StrategyProfile};
use crate::opt::{self, OptError, OptSettings, SaddleResult, DEFAULT_COINCIDENCE_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("point is not a Nash equilibrium: largest deviation gain {max_gap} exceeds {dev_tol}")]
    HypothesisNotSatisfied { max_gap: f64, dev_tol: f64 },
    #[error("maximin and minimax strategies differ on slice {slice}: {maximin_arg} vs {minimax_arg}")]
    CoincidenceFailed {
        slice: String,
        maximin_arg: f64,
        minimax_arg: f64,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Common strategy of each group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPoint {
    pub s1: f64,
    pub s2: f64,
}

impl SymmetricPoint {
    pub fn new(s1: f64, s2: f64) -> Self {
        SymmetricPoint { s1, s2 }
    }

    pub fn midpoint(game: &GroupedGame) -> Self {
        SymmetricPoint::new(game.space1().midpoint(), game.space2().midpoint())
    }

    pub fn profile(&self, groups: GroupSpec) -> StrategyProfile {
        StrategyProfile::symmetric(groups, self.s1, self.s2)
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &SymmetricPoint) -> f64 {
        (self.s1 - other.s1).abs().max((self.s2 - other.s2).abs())
    }

    pub fn get(&self, group: Group) -> f64 {
        match group {
            Group::One => self.s1,
            Group::Two => self.s2,
        }
    }

    fn validate(&self, game: &GroupedGame) -> Result<(), GameError> {
        game.check_profile(&self.profile(game.groups()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationSettings {
    /// Weight of the new map value, in `(0, 1]`.
    pub damping: f64,
    pub fp_tol: f64,
    pub max_iter: usize,
}

impl Default for IterationSettings {
    fn default() -> Self {
        IterationSettings {
            damping: 0.5,
            fp_tol: 1e-6,
            max_iter: 500,
        }
    }
}

impl IterationSettings {
    pub fn validate(&self) -> Result<(), EquilibriumError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(EquilibriumError::InvalidInput(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.fp_tol.is_finite() && self.fp_tol > 0.0) {
            return Err(EquilibriumError::InvalidInput(format!(
                "fp_tol must be positive, got {}",
                self.fp_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(EquilibriumError::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointTrace {
    /// Start point first; one entry per damped step.
    pub iterates: Vec<SymmetricPoint>,
    pub converged: bool,
    /// Sup-norm of `map(p) - p` at the final iterate.
    pub residual: f64,
    pub iterations: usize,
}

impl FixedPointTrace {
    pub fn last(&self) -> SymmetricPoint {
        *self.iterates.last().expect("trace holds the start point")
    }
}

/// Payoff of one player as a function of two players' strategies, everyone
/// else fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub payoff: PlayerId,
    /// Maximizing player.
    pub x: PlayerId,
    /// Minimizing player.
    pub y: PlayerId,
}

impl Slice {
    pub const fn new(payoff: PlayerId, x: PlayerId, y: PlayerId) -> Self {
        Slice { payoff, x, y }
    }

    /// `u_A` over `(s_A, s_B)`.
    pub const G1: Slice = Slice::new(PlayerId::A, PlayerId::A, PlayerId::B);
    /// `u_C` over `(s_C, s_D)`.
    pub const G2: Slice = Slice::new(PlayerId::C, PlayerId::C, PlayerId::D);

    pub fn label(&self, groups: GroupSpec) -> String {
        format!(
            "u_{}(s_{}, s_{})",
            groups.player_name(self.payoff),
            groups.player_name(self.x),
            groups.player_name(self.y)
        )
    }
}

/// `(x, y) -> u_payoff(base with x and y substituted)`.
pub fn slice_fn<'a>(
    game: &'a GroupedGame,
    slice: Slice,
    base: &StrategyProfile,
) -> impl Fn(f64, f64) -> f64 + 'a {
    let buf = RefCell::new(base.clone());
    move |x, y| {
        let mut p = buf.borrow_mut();
        p.set(slice.x, x);
        p.set(slice.y, y);
        game.payoff(slice.payoff, &p)
    }
}

fn unilateral_fn<'a>(
    game: &'a GroupedGame,
    player: PlayerId,
    base: &StrategyProfile,
) -> impl Fn(f64) -> f64 + 'a {
    let buf = RefCell::new(base.clone());
    move |t| {
        let mut p = buf.borrow_mut();
        p.set(player, t);
        game.payoff(player, &p)
    }
}

fn slice_saddle(
    game: &GroupedGame,
    slice: Slice,
    base: &StrategyProfile,
    opt_settings: &OptSettings,
    coincidence_tol: f64,
) -> Result<SaddleResult, OptError> {
    opt::saddle_check(
        slice_fn(game, slice, base),
        game.space(slice.x.group),
        game.space(slice.y.group),
        opt_settings,
        coincidence_tol,
    )
}

/// Maximin strategies of `A` against `B` and `C` against `D` at `p`.
pub fn maximin_map(
    game: &GroupedGame,
    p: SymmetricPoint,
    opt_settings: &OptSettings,
) -> Result<SymmetricPoint, EquilibriumError> {
    p.validate(game)?;
    let base = p.profile(game.groups());
    let solve = |slice: Slice| {
        opt::maximin(
            slice_fn(game, slice, &base),
            game.space(slice.x.group),
            game.space(slice.y.group),
            opt_settings,
        )
        .map(|r| r.arg)
    };
    Ok(SymmetricPoint::new(solve(Slice::G1)?, solve(Slice::G2)?))
}

/// Best responses of `A` and `C` when everybody else plays `p`.
pub fn best_response_map(
    game: &GroupedGame,
    p: SymmetricPoint,
    opt_settings: &OptSettings,
) -> Result<SymmetricPoint, EquilibriumError> {
    p.validate(game)?;
    let base = p.profile(game.groups());
    let solve = |player: PlayerId| {
        opt::argmax_interval(
            unilateral_fn(game, player, &base),
            game.space(player.group),
            opt_settings,
        )
        .map(|r| r.arg)
    };
    Ok(SymmetricPoint::new(solve(PlayerId::A)?, solve(PlayerId::C)?))
}

fn iterate(
    game: &GroupedGame,
    start: SymmetricPoint,
    settings: &IterationSettings,
    mut map: impl FnMut(SymmetricPoint) -> Result<SymmetricPoint, EquilibriumError>,
    mut observe: impl FnMut(usize, SymmetricPoint, f64),
) -> Result<FixedPointTrace, EquilibriumError> {
    settings.validate()?;
    start.validate(game)?;
    let d = settings.damping;
    let (space1, space2) = (game.space1(), game.space2());
    let mut p = start;
    let mut iterates = vec![p];
    for k in 0..settings.max_iter {
        let t = map(p)?;
        let residual = t.distance(&p);
        observe(k, p, residual);
        if residual <= settings.fp_tol {
            return Ok(FixedPointTrace {
                iterates,
                converged: true,
                residual,
                iterations: k,
            });
        }
        p = SymmetricPoint::new(
            space1.clamp((1.0 - d) * p.s1 + d * t.s1),
            space2.clamp((1.0 - d) * p.s2 + d * t.s2),
        );
        iterates.push(p);
    }
    let residual = map(p)?.distance(&p);
    observe(settings.max_iter, p, residual);
    Ok(FixedPointTrace {
        iterates,
        converged: residual <= settings.fp_tol,
        residual,
        iterations: settings.max_iter,
    })
}

/// Damped iteration of [`maximin_map`]. Running out of iterations is reported
/// through `converged = false`, not as an error.
pub fn solve_fixed_point(
    game: &GroupedGame,
    start: SymmetricPoint,
    settings: &IterationSettings,
    opt_settings: &OptSettings,
) -> Result<FixedPointTrace, EquilibriumError> {
    solve_fixed_point_observed(game, start, settings, opt_settings, |_, _, _| {})
}

/// [`solve_fixed_point`] with a callback receiving `(iteration, point, residual)`.
pub fn solve_fixed_point_observed(
    game: &GroupedGame,
    start: SymmetricPoint,
    settings: &IterationSettings,
    opt_settings: &OptSettings,
    observe: impl FnMut(usize, SymmetricPoint, f64),
) -> Result<FixedPointTrace, EquilibriumError> {
    iterate(game, start, settings, |p| maximin_map(game, p, opt_settings), observe)
}

/// Damped best-response (Cournot) iteration.
pub fn solve_best_response(
    game: &GroupedGame,
    start: SymmetricPoint,
    settings: &IterationSettings,
    opt_settings: &OptSettings,
) -> Result<FixedPointTrace, EquilibriumError> {
    solve_best_response_observed(game, start, settings, opt_settings, |_, _, _| {})
}

pub fn solve_best_response_observed(
    game: &GroupedGame,
    start: SymmetricPoint,
    settings: &IterationSettings,
    opt_settings: &OptSettings,
    observe: impl FnMut(usize, SymmetricPoint, f64),
) -> Result<FixedPointTrace, EquilibriumError> {
    iterate(game, start, settings, |p| best_response_map(game, p, opt_settings), observe)
}

/// Largest gain each player can obtain by deviating alone from `profile`,
/// in [`GroupSpec::players`] order.
pub fn deviation_gaps(
    game: &GroupedGame,
    profile: &StrategyProfile,
    opt_settings: &OptSettings,
) -> Result<Vec<f64>, EquilibriumError> {
    game.check_profile(profile)?;
    game.groups()
        .players()
        .map(|player| deviation_gap(game, profile, player, opt_settings))
        .collect()
}

fn deviation_gap(
    game: &GroupedGame,
    profile: &StrategyProfile,
    player: PlayerId,
    opt_settings: &OptSettings,
) -> Result<f64, EquilibriumError> {
    let current = game.payoff(player, profile);
    let best = opt::argmax_interval(
        unilateral_fn(game, player, profile),
        game.space(player.group),
        opt_settings,
    )?;
    Ok((best.value - current).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub opt: OptSettings,
    /// Nash tolerance on deviation gains, in payoff units.
    pub dev_tol: f64,
    /// Tolerance on `minimax - maximin` for the required slices.
    pub gap_tol: f64,
    /// Tolerance between slice args and the equilibrium strategy.
    pub arg_tol: f64,
    /// Tolerance between the maximin and minimax args of one slice.
    pub coincidence_tol: f64,
    /// Optimize every player's deviation instead of one per group.
    pub all_players: bool,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            opt: OptSettings::default(),
            dev_tol: 1e-4,
            gap_tol: 1e-5,
            arg_tol: 1e-4,
            coincidence_tol: DEFAULT_COINCIDENCE_TOL,
            all_players: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSaddle {
    pub label: String,
    pub saddle: SaddleResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub point: SymmetricPoint,
    pub players: Vec<String>,
    /// Payoff of each player at the point.
    pub payoffs: Vec<f64>,
    pub deviation_gaps: Vec<f64>,
    pub max_gap: f64,
    pub all_players_checked: bool,
    pub is_nash: bool,
    /// `u_A` over `(s_A, s_B)`.
    pub sion_g1: Option<SaddleResult>,
    /// `u_C` over `(s_C, s_D)`.
    pub sion_g2: Option<SaddleResult>,
    /// Both `sion_g1` args within `arg_tol` of `point.s1`.
    pub coincidence_g1: Option<bool>,
    /// Both `sion_g2` args within `arg_tol` of `point.s2`.
    pub coincidence_g2: Option<bool>,
    /// Saddle checks on the remaining same-group pairs; reported, never asserted.
    pub other_slices: Vec<LabeledSaddle>,
    /// Whether the checked theorem's conclusion holds at `point`.
    pub verified: Option<bool>,
}

/// Deviation gaps at a symmetric point.
pub fn nash_check(
    game: &GroupedGame,
    p: SymmetricPoint,
    settings: &VerifySettings,
) -> Result<EquilibriumReport, EquilibriumError> {
    p.validate(game)?;
    let groups = game.groups();
    let profile = p.profile(groups);
    let deviation_gaps = if settings.all_players {
        deviation_gaps(game, &profile, &settings.opt)?
    } else {
        // Every player of a group faces the same problem at a symmetric point.
        let g1 = deviation_gap(game, &profile, PlayerId::A, &settings.opt)?;
        let g2 = deviation_gap(game, &profile, PlayerId::C, &settings.opt)?;
        groups
            .players()
            .map(|q| if q.group == Group::One { g1 } else { g2 })
            .collect()
    };
    let max_gap = deviation_gaps.iter().copied().fold(0.0, f64::max);
    Ok(EquilibriumReport {
        point: p,
        players: groups.players().map(|q| groups.player_name(q)).collect(),
        payoffs: groups.players().map(|q| game.payoff(q, &profile)).collect(),
        deviation_gaps,
        max_gap,
        all_players_checked: settings.all_players,
        is_nash: max_gap <= settings.dev_tol,
        sion_g1: None,
        sion_g2: None,
        coincidence_g1: None,
        coincidence_g2: None,
        other_slices: Vec::new(),
        verified: None,
    })
}

/// Same-group slices beyond `(A, B)` and `(C, D)`.
pub fn other_slices(groups: GroupSpec) -> Vec<Slice> {
    let (a, b, c, d) = (PlayerId::A, PlayerId::B, PlayerId::C, PlayerId::D);
    let mut out = vec![Slice::new(b, b, a)];
    if groups.m() >= 3 {
        let e = PlayerId::E;
        out.extend([
            Slice::new(e, e, b),
            Slice::new(a, a, e),
            Slice::new(e, e, a),
            Slice::new(b, b, e),
        ]);
    }
    out.push(Slice::new(d, d, c));
    out
}

struct SliceChecks {
    g1: SaddleResult,
    g2: SaddleResult,
    others: Vec<LabeledSaddle>,
}

fn slice_checks(
    game: &GroupedGame,
    p: SymmetricPoint,
    settings: &VerifySettings,
) -> Result<SliceChecks, EquilibriumError> {
    let groups = game.groups();
    let base = p.profile(groups);
    let check = |slice| slice_saddle(game, slice, &base, &settings.opt, settings.coincidence_tol);
    let g1 = check(Slice::G1)?;
    let g2 = check(Slice::G2)?;
    let others = other_slices(groups)
        .into_iter()
        .map(|slice| {
            Ok(LabeledSaddle {
                label: slice.label(groups),
                saddle: check(slice)?,
            })
        })
        .collect::<Result<Vec<_>, EquilibriumError>>()?;
    Ok(SliceChecks { g1, g2, others })
}

fn args_match(s: &SaddleResult, target: f64, tol: f64) -> bool {
    (s.maximin_arg - target).abs() <= tol && (s.minimax_arg - target).abs() <= tol
}

/// Checks that a symmetric Nash equilibrium makes the `(A, B)` and `(C, D)`
/// slices saddle points with maximin and minimax strategies equal to the
/// equilibrium strategies.
pub fn verify_theorem1(
    game: &GroupedGame,
    p: SymmetricPoint,
    settings: &VerifySettings,
) -> Result<EquilibriumReport, EquilibriumError> {
    let mut report = nash_check(game, p, settings)?;
    if !report.is_nash {
        return Err(EquilibriumError::HypothesisNotSatisfied {
            max_gap: report.max_gap,
            dev_tol: settings.dev_tol,
        });
    }
    let checks = slice_checks(game, p, settings)?;
    let c1 = args_match(&checks.g1, p.s1, settings.arg_tol);
    let c2 = args_match(&checks.g2, p.s2, settings.arg_tol);
    let gaps_ok =
        checks.g1.gap.abs() <= settings.gap_tol && checks.g2.gap.abs() <= settings.gap_tol;
    report.sion_g1 = Some(checks.g1);
    report.sion_g2 = Some(checks.g2);
    report.coincidence_g1 = Some(c1);
    report.coincidence_g2 = Some(c2);
    report.other_slices = checks.others;
    report.verified = Some(gaps_ok && c1 && c2);
    Ok(report)
}

/// Checks that the limit of a converged maximin fixed-point iteration, whose
/// slices have coinciding maximin and minimax strategies, is a Nash
/// equilibrium.
pub fn verify_theorem2(
    game: &GroupedGame,
    trace: &FixedPointTrace,
    settings: &VerifySettings,
) -> Result<EquilibriumReport, EquilibriumError> {
    if !trace.converged {
        return Err(EquilibriumError::InvalidInput(format!(
            "fixed-point trace did not converge (residual {} after {} iterations)",
            trace.residual, trace.iterations
        )));
    }
    let p = trace.last();
    let groups = game.groups();
    let checks = slice_checks(game, p, settings)?;
    for (slice, s) in [(Slice::G1, &checks.g1), (Slice::G2, &checks.g2)] {
        if s.coincident != Some(true) {
            return Err(EquilibriumError::CoincidenceFailed {
                slice: slice.label(groups),
                maximin_arg: s.maximin_arg,
                minimax_arg: s.minimax_arg,
            });
        }
    }
    let mut report = nash_check(game, p, settings)?;
    report.coincidence_g1 = Some(args_match(&checks.g1, p.s1, settings.arg_tol));
    report.coincidence_g2 = Some(args_match(&checks.g2, p.s2, settings.arg_tol));
    report.sion_g1 = Some(checks.g1);
    report.sion_g2 = Some(checks.g2);
    report.other_slices = checks.others;
    report.verified = Some(report.is_nash);
    Ok(report)
}
