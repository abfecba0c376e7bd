use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sion_core::custom::{self, TemplatePayoffs};
use sion_core::equilibrium::*;
use sion_core::expr::parse;
use sion_core::oligopoly::{self, closed_form_equilibrium, OligopolyParams};
use sion_core::quadratic::{self, QuadraticSaddleParams};
use sion_core::{GroupSpec, GroupedGame, Interval, OptSettings, PlayerId, StrategyProfile};

const S1: f64 = 14.0 / 9.0;
const S2: f64 = 10.0 / 3.0;

fn reference() -> OligopolyParams {
    OligopolyParams::new(10.0, 0.5, 2.0, 1.0)
}

fn game_for(params: &OligopolyParams) -> GroupedGame {
    oligopoly::build_game(params, None).unwrap()
}

fn opt() -> OptSettings {
    OptSettings::default()
}

fn constant_game() -> GroupedGame {
    let groups = GroupSpec::five_player();
    let none = BTreeMap::new();
    let templates = TemplatePayoffs {
        group1: parse("5", groups, &none).unwrap(),
        group2: parse("5", groups, &none).unwrap(),
    };
    let space1 = Interval::new(0.0, 1.0).unwrap();
    let space2 = Interval::new(-2.0, 3.0).unwrap();
    custom::build_game(groups, space1, space2, templates, 0).unwrap()
}

/// Parameter draws with strictly positive closed-form outputs.
fn draws(seed: u64, count: usize) -> Vec<OligopolyParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let a = rng.gen_range(5.0..15.0);
        let b = rng.gen_range(0.0..0.9f64).max(1e-3);
        let p = OligopolyParams::new(a, b, rng.gen_range(0.0..a), rng.gen_range(0.0..a));
        if let Ok(cf) = closed_form_equilibrium(&p) {
            if cf.point.s1 > 0.05 && cf.point.s2 > 0.05 {
                out.push(p);
            }
        }
    }
    out
}

/// Dense-grid argmax of a one-dimensional function.
fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .fold((f64::NAN, f64::NEG_INFINITY), |best, x| {
            let v = f(x);
            if v > best.1 {
                (x, v)
            } else {
                best
            }
        })
        .0
}

#[test]
fn maximin_map_fixes_the_equilibrium() {
    let game = game_for(&reference());
    let t = maximin_map(&game, SymmetricPoint::new(S1, S2), &opt()).unwrap();
    assert!((t.s1 - S1).abs() <= 1e-4 && (t.s2 - S2).abs() <= 1e-4, "{t:?}");
    let tt = maximin_map(&game, t, &opt()).unwrap();
    assert!(tt.distance(&t) <= 2.0 * opt().tol.max(1e-6));
}

#[test]
fn maximin_map_at_origin_matches_grid_oracle() {
    let game = game_for(&reference());
    let t = maximin_map(&game, SymmetricPoint::new(0.0, 0.0), &opt()).unwrap();
    assert!(t.s1 > 0.0 && t.s2 > 0.0);

    let base = SymmetricPoint::new(0.0, 0.0).profile(game.groups());
    let n = 801;
    let at = |i: usize| 10.0 * i as f64 / (n - 1) as f64;
    for (slice, got) in [(Slice::G1, t.s1), (Slice::G2, t.s2)] {
        let f = slice_fn(&game, slice, &base);
        let worst = |x: f64| (0..n).map(|j| f(x, at(j))).fold(f64::INFINITY, f64::min);
        let oracle = grid_argmax(worst, 0.0, 10.0, n);
        assert!((got - oracle).abs() <= 10.0 / (n - 1) as f64, "{got} vs {oracle}");
    }
}

#[test]
fn best_response_map_at_equilibrium_and_origin() {
    let game = game_for(&reference());
    let t = best_response_map(&game, SymmetricPoint::new(S1, S2), &opt()).unwrap();
    assert!((t.s1 - S1).abs() <= 1e-4 && (t.s2 - S2).abs() <= 1e-4, "{t:?}");

    // With all rivals at zero, d/dx of the relative profit is a - 2x - c.
    let t = best_response_map(&game, SymmetricPoint::new(0.0, 0.0), &opt()).unwrap();
    assert!((t.s1 - 4.0).abs() <= 1e-6 && (t.s2 - 4.5).abs() <= 1e-6, "{t:?}");
    let zero = SymmetricPoint::new(0.0, 0.0).profile(game.groups());
    let oracle = grid_argmax(
        |x| {
            let mut p = zero.clone();
            p.set(PlayerId::A, x);
            game.payoff(PlayerId::A, &p)
        },
        0.0,
        10.0,
        100_001,
    );
    assert!((t.s1 - oracle).abs() <= 1e-4);
}

#[test]
fn constant_game_breaks_ties_low() {
    let game = constant_game();
    let t = best_response_map(&game, SymmetricPoint::new(0.5, 0.5), &opt()).unwrap();
    assert_eq!(t, SymmetricPoint::new(0.0, -2.0));
    let r = nash_check(&game, SymmetricPoint::new(0.3, 1.0), &VerifySettings::default()).unwrap();
    assert!(r.is_nash);
    assert!(r.deviation_gaps.iter().all(|&g| g == 0.0));
}

#[test]
fn both_solvers_reach_the_closed_form() {
    let game = game_for(&reference());
    let start = SymmetricPoint::new(1.0, 1.0);
    for trace in [
        solve_fixed_point(&game, start, &IterationSettings::default(), &opt()).unwrap(),
        solve_best_response(&game, start, &IterationSettings::default(), &opt()).unwrap(),
    ] {
        assert!(trace.converged);
        assert!(trace.residual <= 1e-6);
        assert_eq!(trace.iterates.len(), trace.iterations + 1);
        let p = trace.last();
        assert!((p.s1 - S1).abs() <= 1e-4 && (p.s2 - S2).abs() <= 1e-4, "{p:?}");
    }
}

#[test]
fn start_at_fixed_point_converges_immediately() {
    let game = game_for(&reference());
    let start = SymmetricPoint::new(S1, S2);
    let settings = IterationSettings { damping: 1.0, ..Default::default() };
    let trace = solve_fixed_point(&game, start, &settings, &opt()).unwrap();
    assert!(trace.converged && trace.iterations <= 1);
    let trace = solve_best_response(&game, start, &settings, &opt()).unwrap();
    assert!(trace.converged && trace.iterations <= 1);
}

#[test]
fn single_iteration_from_far_start_does_not_converge() {
    let game = game_for(&reference());
    let settings = IterationSettings { max_iter: 1, ..Default::default() };
    let trace = solve_fixed_point(&game, SymmetricPoint::new(9.0, 0.0), &settings, &opt()).unwrap();
    assert!(!trace.converged);
    assert_eq!(trace.iterates.len(), 2);
    assert!(trace.residual > settings.fp_tol);
}

#[test]
fn invalid_iteration_settings() {
    let game = game_for(&reference());
    let start = SymmetricPoint::new(1.0, 1.0);
    for bad in [
        IterationSettings { damping: 0.0, ..Default::default() },
        IterationSettings { damping: 1.5, ..Default::default() },
        IterationSettings { max_iter: 0, ..Default::default() },
        IterationSettings { fp_tol: -1.0, ..Default::default() },
    ] {
        assert!(matches!(
            solve_fixed_point(&game, start, &bad, &opt()),
            Err(EquilibriumError::InvalidInput(_))
        ));
    }
    assert!(matches!(
        solve_fixed_point(&game, SymmetricPoint::new(11.0, 1.0), &Default::default(), &opt()),
        Err(EquilibriumError::Game(_))
    ));
}

#[test]
fn decoupled_best_response_limit() {
    let params = OligopolyParams::new(10.0, 0.0, 2.0, 1.0);
    let game = game_for(&params);
    let trace = solve_best_response(
        &game,
        SymmetricPoint::new(1.0, 1.0),
        &IterationSettings::default(),
        &opt(),
    )
    .unwrap();
    let p = trace.last();
    assert!((p.s1 - 8.0 / 3.0).abs() <= 1e-4 && (p.s2 - 4.5).abs() <= 1e-4, "{p:?}");
}

#[test]
fn nash_check_at_and_off_equilibrium() {
    let game = game_for(&reference());
    let r = nash_check(&game, SymmetricPoint::new(S1, S2), &VerifySettings::default()).unwrap();
    assert!(r.is_nash, "{r:?}");
    assert!(r.deviation_gaps.iter().all(|&g| g <= 1e-4));
    assert_eq!(r.players, ["A", "B", "E", "C", "D"]);

    let off = SymmetricPoint::new(S1 + 0.5, S2);
    let r = nash_check(&game, off, &VerifySettings::default()).unwrap();
    assert!(!r.is_nash);
    assert!(r.deviation_gaps[..3].iter().all(|&g| g > 0.0));

    // Perturbation oracle: a grid search over A's deviations finds a gain.
    let profile = off.profile(game.groups());
    let now = game.payoff(PlayerId::A, &profile);
    let best = (0..=10_000)
        .map(|i| {
            let mut p = profile.clone();
            p.set(PlayerId::A, i as f64 * 1e-3);
            game.payoff(PlayerId::A, &p)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best - now > 1e-3);
    assert!((r.deviation_gaps[0] - (best - now)).abs() < 1e-5);
}

#[test]
fn all_player_mode_agrees_with_representatives() {
    let game = game_for(&reference());
    let p = SymmetricPoint::new(S1 + 0.2, S2 - 0.3);
    let fast = nash_check(&game, p, &VerifySettings::default()).unwrap();
    let full = nash_check(&game, p, &VerifySettings { all_players: true, ..Default::default() }).unwrap();
    assert!(full.all_players_checked && !fast.all_players_checked);
    for (a, b) in fast.deviation_gaps.iter().zip(&full.deviation_gaps) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn deviation_gaps_on_asymmetric_profile() {
    let game = game_for(&reference());
    let p = StrategyProfile::new(vec![1.0, 2.0, 1.5], vec![3.0, 3.5]);
    let gaps = deviation_gaps(&game, &p, &opt()).unwrap();
    assert_eq!(gaps.len(), 5);
    assert!(gaps.iter().all(|&g| g >= 0.0));
    assert!(gaps.iter().any(|&g| g > 1e-3));
}

#[test]
fn theorem1_at_equilibrium() {
    let game = game_for(&reference());
    let r = verify_theorem1(&game, SymmetricPoint::new(S1, S2), &VerifySettings::default()).unwrap();
    assert_eq!(r.verified, Some(true));
    let (g1, g2) = (r.sion_g1.unwrap(), r.sion_g2.unwrap());
    assert!(g1.gap.abs() <= 1e-5 && g2.gap.abs() <= 1e-5);
    for arg in [g1.maximin_arg, g1.minimax_arg] {
        assert!((arg - S1).abs() <= 1e-4);
    }
    for arg in [g2.maximin_arg, g2.minimax_arg] {
        assert!((arg - S2).abs() <= 1e-4);
    }
    let labels: Vec<_> = r.other_slices.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(
        labels,
        [
            "u_B(s_B, s_A)",
            "u_E(s_E, s_B)",
            "u_A(s_A, s_E)",
            "u_E(s_E, s_A)",
            "u_B(s_B, s_E)",
            "u_D(s_D, s_C)"
        ]
    );
    for p in &r.payoffs {
        assert!(p.abs() <= 1e-6);
    }
}

#[test]
fn theorem1_on_quadratic_family() {
    let params = QuadraticSaddleParams::default();
    let space = Interval::new(0.0, 5.0).unwrap();
    let game = quadratic::build_game(&params, space, space).unwrap();
    let eq = params.analytic_equilibrium().unwrap();
    let r = verify_theorem1(&game, eq, &VerifySettings::default()).unwrap();
    assert_eq!(r.verified, Some(true), "{r:?}");
    assert_eq!(r.coincidence_g1, Some(true));
    assert_eq!(r.coincidence_g2, Some(true));
}

#[test]
fn theorem1_rejects_non_equilibrium() {
    let game = game_for(&reference());
    let err = verify_theorem1(&game, SymmetricPoint::new(5.0, 1.0), &VerifySettings::default());
    assert!(matches!(err, Err(EquilibriumError::HypothesisNotSatisfied { .. })));
}

#[test]
fn theorem2_on_fixed_point_trace() {
    let game = game_for(&reference());
    let trace = solve_fixed_point(
        &game,
        SymmetricPoint::new(1.0, 1.0),
        &IterationSettings::default(),
        &opt(),
    )
    .unwrap();
    let r = verify_theorem2(&game, &trace, &VerifySettings::default()).unwrap();
    assert!(r.is_nash);
    assert_eq!(r.verified, Some(true));
    assert_eq!(r.sion_g1.unwrap().coincident, Some(true));
}

#[test]
fn theorem2_rejects_unconverged_trace() {
    let game = game_for(&reference());
    let settings = IterationSettings { max_iter: 2, ..Default::default() };
    let trace = solve_fixed_point(&game, SymmetricPoint::new(9.0, 9.0), &settings, &opt()).unwrap();
    assert!(!trace.converged);
    assert!(matches!(
        verify_theorem2(&game, &trace, &VerifySettings::default()),
        Err(EquilibriumError::InvalidInput(_))
    ));
}

#[test]
fn theorem2_detects_failed_coincidence() {
    // Not a symmetric zero-sum game: A's maximin strategy is 0.3 whatever B
    // does, but B's minimax strategy against u_A is 0.7.
    let space = Interval::new(0.0, 1.0).unwrap();
    let game = GroupedGame::new(
        GroupSpec::five_player(),
        space,
        space,
        |player: PlayerId, p: &StrategyProfile| {
            if player.group == sion_core::Group::One {
                -(p.g1[player.slot] - 0.3).powi(2) + (p.g1[(player.slot + 1) % 3] - 0.7).powi(2)
            } else {
                -(p.g2[player.slot] - 0.5).powi(2) + (p.g2[1 - player.slot] - 0.5).powi(2)
            }
        },
    );
    let trace = solve_fixed_point(
        &game,
        SymmetricPoint::new(0.5, 0.5),
        &IterationSettings::default(),
        &opt(),
    )
    .unwrap();
    assert!(trace.converged);
    let err = verify_theorem2(&game, &trace, &VerifySettings::default()).unwrap_err();
    assert!(matches!(err, EquilibriumError::CoincidenceFailed { ref slice, .. } if slice == "u_A(s_A, s_B)"));
}

#[test]
fn random_draws_satisfy_both_theorems() {
    for params in draws(20240517, 20) {
        let game = game_for(&params);
        let cf = closed_form_equilibrium(&params).unwrap().point;
        let start = SymmetricPoint::midpoint(&game);
        let fp = solve_fixed_point(&game, start, &IterationSettings::default(), &opt()).unwrap();
        let br = solve_best_response(&game, start, &IterationSettings::default(), &opt()).unwrap();
        assert!(fp.converged && br.converged, "{params:?}");
        assert!(fp.last().distance(&cf) <= 1e-4, "{params:?}: {:?} vs {cf:?}", fp.last());
        assert!(br.last().distance(&cf) <= 1e-4, "{params:?}: {:?} vs {cf:?}", br.last());
        assert!(fp.last().distance(&br.last()) <= 1e-4);

        let t2 = verify_theorem2(&game, &fp, &VerifySettings::default()).unwrap();
        assert_eq!(t2.verified, Some(true), "{params:?}");
        let t1 = verify_theorem1(&game, br.last(), &VerifySettings::default()).unwrap();
        assert_eq!(t1.verified, Some(true), "{params:?}");
        assert!(t1.payoffs.iter().all(|u| u.abs() <= 1e-6));
    }
}

#[test]
fn damping_does_not_change_the_limit() {
    let game = game_for(&reference());
    let start = SymmetricPoint::new(0.5, 8.0);
    let limits: Vec<_> = [0.3, 0.5, 1.0]
        .into_iter()
        .map(|damping| {
            let s = IterationSettings { damping, ..Default::default() };
            solve_fixed_point(&game, start, &s, &opt()).unwrap()
        })
        .filter(|t| t.converged)
        .map(|t| t.last())
        .collect();
    assert_eq!(limits.len(), 3);
    for p in &limits {
        assert!(p.distance(&limits[0]) <= 1e-4);
    }
}

#[test]
fn maps_agree_with_identity_at_the_limit() {
    let game = game_for(&reference());
    let s = IterationSettings::default();
    let trace = solve_fixed_point(&game, SymmetricPoint::new(1.0, 1.0), &s, &opt()).unwrap();
    let p = trace.last();
    assert!(maximin_map(&game, p, &opt()).unwrap().distance(&p) <= 2.0 * s.fp_tol);
    assert!(best_response_map(&game, p, &opt()).unwrap().distance(&p) <= 2.0 * s.fp_tol);
}

#[test]
fn larger_groups_reach_generalized_closed_form() {
    let params = reference().with_groups(GroupSpec::new(4, 3).unwrap());
    let game = game_for(&params);
    let cf = closed_form_equilibrium(&params).unwrap().point;
    let start = SymmetricPoint::new(1.0, 1.0);
    let fp = solve_fixed_point(&game, start, &IterationSettings::default(), &opt()).unwrap();
    let br = solve_best_response(&game, start, &IterationSettings::default(), &opt()).unwrap();
    assert!(fp.converged && br.converged);
    assert!(fp.last().distance(&cf) <= 1e-4, "{:?} vs {cf:?}", fp.last());
    assert!(br.last().distance(&cf) <= 1e-4, "{:?} vs {cf:?}", br.last());
    let r = verify_theorem2(&game, &fp, &VerifySettings { all_players: true, ..Default::default() }).unwrap();
    assert_eq!(r.verified, Some(true));
    assert_eq!(r.deviation_gaps.len(), 7);
}
