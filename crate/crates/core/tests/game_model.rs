use std::collections::BTreeMap;

use proptest::prelude::*;
use sion_core::custom::{self, TemplatePayoffs};
use sion_core::expr::parse;
use sion_core::oligopoly::{self, CournotProfits, OligopolyParams};
use sion_core::quadratic::{self, QuadraticGroupParams};
use sion_core::{
    GameError, Group, GroupSpec, GroupedGame, Interval, PlayerId, QuadraticSaddleParams,
    Relativized, StrategyProfile,
};

fn sizes() -> impl Strategy<Value = GroupSpec> {
    (2usize..6, 2usize..5).prop_map(|(m, n)| GroupSpec::new(m, n).unwrap())
}

/// A game together with a random in-domain profile.
fn oligopoly_case() -> impl Strategy<Value = (GroupedGame, StrategyProfile)> {
    (sizes(), 0.0..0.95f64, 0.0..1.0f64).prop_flat_map(|(groups, b, seed)| {
        let params = OligopolyParams::new(10.0, b, 1.0 + seed, 2.0 - seed).with_groups(groups);
        // Built directly: zero-sum and symmetry hold whether or not the
        // equilibrium outputs are positive.
        let space = Interval::new(0.0, 20.0).unwrap();
        profile_in(GroupedGame::new(groups, space, space, Relativized(CournotProfits(params))))
    })
}

fn quadratic_case() -> impl Strategy<Value = (GroupedGame, StrategyProfile)> {
    let group = (0.1..3.0f64, -1.0..1.0f64, -1.0..1.0f64, -5.0..5.0f64).prop_map(
        |(curvature, rival, cross, intercept)| QuadraticGroupParams {
            curvature,
            rival,
            cross,
            intercept,
        },
    );
    (sizes(), group.clone(), group).prop_flat_map(|(groups, group1, group2)| {
        let params = QuadraticSaddleParams { group1, group2, groups };
        let space = Interval::new(-2.0, 4.0).unwrap();
        profile_in(quadratic::build_game(&params, space, space).unwrap())
    })
}

fn profile_in(game: GroupedGame) -> impl Strategy<Value = (GroupedGame, StrategyProfile)> {
    let g = game.groups();
    let (s1, s2) = (game.space1(), game.space2());
    (
        prop::collection::vec(s1.lo()..=s1.hi(), g.m()),
        prop::collection::vec(s2.lo()..=s2.hi(), g.n()),
    )
        .prop_map(move |(x, y)| (game.clone(), StrategyProfile::new(x, y)))
}

fn scale(game: &GroupedGame, p: &StrategyProfile) -> f64 {
    game.groups().players().map(|q| game.payoff(q, p).abs()).fold(1.0, f64::max)
}

fn pair_in(groups: GroupSpec, group: Group, i: usize, j: usize) -> (PlayerId, PlayerId) {
    let k = groups.size(group);
    let (i, j) = (i % k, j % k);
    let j = if i == j { (j + 1) % k } else { j };
    (PlayerId { group, slot: i }, PlayerId { group, slot: j })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oligopoly_is_group_zero_sum((game, p) in oligopoly_case()) {
        let tol = 1e-9 * scale(&game, &p);
        let check = game.check_group_zero_sum(&p, tol).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }

    #[test]
    fn quadratic_is_group_zero_sum((game, p) in quadratic_case()) {
        let tol = 1e-9 * scale(&game, &p);
        let check = game.check_group_zero_sum(&p, tol).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }

    #[test]
    fn oligopoly_is_symmetric_within_groups(
        (game, p) in oligopoly_case(),
        two in any::<bool>(),
        i in 0usize..8,
        j in 0usize..8,
    ) {
        let group = if two { Group::Two } else { Group::One };
        let (a, b) = pair_in(game.groups(), group, i, j);
        let tol = 1e-9 * scale(&game, &p);
        prop_assert!(game.check_group_symmetry(&p, a, b, tol).unwrap());
    }

    #[test]
    fn quadratic_is_symmetric_within_groups(
        (game, p) in quadratic_case(),
        two in any::<bool>(),
        i in 0usize..8,
        j in 0usize..8,
    ) {
        let group = if two { Group::Two } else { Group::One };
        let (a, b) = pair_in(game.groups(), group, i, j);
        let tol = 1e-9 * scale(&game, &p);
        prop_assert!(game.check_group_symmetry(&p, a, b, tol).unwrap());
    }

    #[test]
    fn payoffs_are_pure((game, p) in oligopoly_case()) {
        for q in game.groups().players() {
            let first = game.evaluate_payoff(q, &p).unwrap();
            let again = game.evaluate_payoff(q, &p).unwrap();
            prop_assert_eq!(first.to_bits(), again.to_bits());
        }
    }
}

#[test]
fn relative_profit_matches_hand_computation() {
    let game = oligopoly::build_game(&OligopolyParams::new(10.0, 0.5, 2.0, 1.0), None).unwrap();
    let p = StrategyProfile::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0]);
    // Group-one price 10 - 6 - 1.5 = 2.5, group-two price 10 - 3 - 3 = 4.
    let profit1 = |x: f64| (2.5 - 2.0) * x;
    let profit2 = |y: f64| (4.0 - 1.0) * y;
    let want_a = profit1(1.0) - (profit1(2.0) + profit1(3.0)) / 2.0;
    let want_d = profit2(2.0) - profit2(1.0);
    assert!((game.payoff(PlayerId::A, &p) - want_a).abs() < 1e-12);
    assert!((game.payoff(PlayerId::D, &p) - want_d).abs() < 1e-12);
}

#[test]
fn checks_reject_malformed_input() {
    let game = oligopoly::build_game(&OligopolyParams::new(10.0, 0.5, 2.0, 1.0), None).unwrap();
    let ok = StrategyProfile::symmetric(game.groups(), 1.0, 1.0);
    let short = StrategyProfile::new(vec![1.0, 1.0], vec![1.0, 1.0]);
    let outside = StrategyProfile::new(vec![1.0, 1.0, 11.0], vec![1.0, 1.0]);
    assert!(matches!(
        game.evaluate_payoff(PlayerId::A, &short),
        Err(GameError::DimensionMismatch { .. })
    ));
    assert!(matches!(
        game.evaluate_payoff(PlayerId::E, &outside),
        Err(GameError::OutOfDomain { .. })
    ));
    assert!(matches!(
        game.evaluate_payoff(PlayerId::g2(2), &ok),
        Err(GameError::InvalidPlayer { .. })
    ));
    assert!(matches!(
        game.check_group_symmetry(&ok, PlayerId::A, PlayerId::C, 1e-9),
        Err(GameError::InvalidPair(..))
    ));
    assert!(GroupSpec::new(1, 2).is_err());
    assert!(Interval::new(1.0, 1.0).is_err());
    assert!(Interval::new(0.0, f64::INFINITY).is_err());
}

#[test]
fn non_zero_sum_oracle_is_detected() {
    let space = Interval::new(0.0, 1.0).unwrap();
    let game = GroupedGame::new(
        GroupSpec::five_player(),
        space,
        space,
        |q: PlayerId, p: &StrategyProfile| p.get(q),
    );
    let p = StrategyProfile::symmetric(game.groups(), 0.5, 0.25);
    let check = game.check_group_zero_sum(&p, 1e-9).unwrap();
    assert!(!check.holds);
    assert!((check.residual_g1 - 1.5).abs() < 1e-15);
    assert!((check.residual_g2 - 0.5).abs() < 1e-15);
}

#[test]
fn template_game_is_zero_sum_and_symmetric() {
    let groups = GroupSpec::new(3, 3).unwrap();
    let params: BTreeMap<String, f64> = [("k".to_string(), 2.0)].into();
    let templates = TemplatePayoffs {
        group1: parse("x1*(k - x1 - x2 - x3) + x1*y1*y2*y3", groups, &params).unwrap(),
        group2: parse("-y1^2 + y1*(y2 + y3)*(x1 + x2 + x3)", groups, &params).unwrap(),
    };
    let space = Interval::new(0.0, 2.0).unwrap();
    let game = custom::build_game(groups, space, space, templates, 9).unwrap();
    let p = StrategyProfile::new(vec![0.1, 0.7, 1.9], vec![1.2, 0.4, 0.0]);
    assert!(game.check_group_zero_sum(&p, 1e-12).unwrap().holds);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for group in [Group::One, Group::Two] {
            let (a, b) = (PlayerId { group, slot: i }, PlayerId { group, slot: j });
            assert!(game.check_group_symmetry(&p, a, b, 1e-12).unwrap());
        }
    }
}
