//! Relative-profit Cournot oligopoly with two groups of firms.
//!
//! Group-one firms face inverse demand `a - X1 - b*X2` and group-two firms
//! `a - X2 - b*X1`, where `X1`, `X2` are the group output totals. Costs are
//! linear (`c_A` and `c_C` per unit) and each firm maximizes its profit minus
//! the average profit of its in-group rivals.
//!
//! At the symmetric equilibrium each group's price equals its marginal cost,
//! which gives the linear system
//!
//! ```text
//! a - m*s1 - n*b*s2 = c_A
//! a - n*s2 - m*b*s1 = c_C
//! ```
//!
//! solved in closed form by [`closed_form_equilibrium`]. The maximin and minimax
//! strategies of every same-group pair equal the equilibrium output of that
//! group. Symmetry inside a group forces equal outputs, so every group-one
//! firm (including `E`) produces `s1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{Slice, SymmetricPoint};
use crate::game::{
    AbsolutePayoff, GameError, Group, GroupSpec, GroupedGame, Interval, PlayerId, Relativized,
    StrategyProfile,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OligopolyError {
    #[error("invalid oligopoly parameter '{field}': {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Game(#[from] GameError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> OligopolyError {
    OligopolyError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OligopolyParams {
    /// Demand intercept.
    pub a: f64,
    /// Cross-group substitutability, `0 <= b < 1`.
    pub b: f64,
    /// Marginal cost of group-one firms.
    pub c_a: f64,
    /// Marginal cost of group-two firms.
    pub c_c: f64,
    pub groups: GroupSpec,
}

impl OligopolyParams {
    /// Five firms: `A, B, E` in group one, `C, D` in group two.
    pub fn new(a: f64, b: f64, c_a: f64, c_c: f64) -> Self {
        OligopolyParams {
            a,
            b,
            c_a,
            c_c,
            groups: GroupSpec::five_player(),
        }
    }

    pub fn with_groups(self, groups: GroupSpec) -> Self {
        OligopolyParams { groups, ..self }
    }

    pub fn validate(&self) -> Result<(), OligopolyError> {
        for (field, v) in [("a", self.a), ("b", self.b), ("cA", self.c_a), ("cC", self.c_c)] {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.b) {
            return Err(invalid("b", format!("must satisfy 0 <= b < 1, got {}", self.b)));
        }
        if self.c_a >= self.a {
            return Err(invalid("cA", format!("must be below a = {}, got {}", self.a, self.c_a)));
        }
        if self.c_c >= self.a {
            return Err(invalid("cC", format!("must be below a = {}, got {}", self.a, self.c_c)));
        }
        let p = self.solve_unchecked();
        if p.s1 < 0.0 {
            return Err(invalid(
                "cA",
                format!("equilibrium group-one output {} is negative", p.s1),
            ));
        }
        if p.s2 < 0.0 {
            return Err(invalid(
                "cC",
                format!("equilibrium group-two output {} is negative", p.s2),
            ));
        }
        Ok(())
    }

    fn solve_unchecked(&self) -> SymmetricPoint {
        let (m, n) = (self.groups.m() as f64, self.groups.n() as f64);
        let det = (1.0 - self.b) * (1.0 + self.b);
        SymmetricPoint::new(
            (self.b * self.c_c - self.c_a - self.a * self.b + self.a) / (m * det),
            (self.b * self.c_a - self.c_c - self.a * self.b + self.a) / (n * det),
        )
    }

    /// Inverse demand faced by `group` when the group outputs total `x1`, `x2`.
    pub fn inverse_demand(&self, group: Group, x1: f64, x2: f64) -> f64 {
        match group {
            Group::One => self.a - x1 - self.b * x2,
            Group::Two => self.a - x2 - self.b * x1,
        }
    }

    /// Residuals of the price-equals-marginal-cost conditions at a symmetric point.
    pub fn foc_residuals(&self, p: SymmetricPoint) -> (f64, f64) {
        let (m, n) = (self.groups.m() as f64, self.groups.n() as f64);
        (
            self.a - m * p.s1 - n * self.b * p.s2 - self.c_a,
            self.a - n * p.s2 - m * self.b * p.s1 - self.c_c,
        )
    }
}

/// Absolute Cournot profits.
#[derive(Debug, Clone, Copy)]
pub struct CournotProfits(pub OligopolyParams);

impl AbsolutePayoff for CournotProfits {
    fn absolute(&self, player: PlayerId, profile: &StrategyProfile) -> f64 {
        let params = &self.0;
        let x1: f64 = profile.g1.iter().sum();
        let x2: f64 = profile.g2.iter().sum();
        let cost = match player.group {
            Group::One => params.c_a,
            Group::Two => params.c_c,
        };
        (params.inverse_demand(player.group, x1, x2) - cost) * profile.get(player)
    }
}

/// Strategy interval `[0, cap]` for both groups; the default cap is `a`.
pub fn build_game(params: &OligopolyParams, cap: Option<f64>) -> Result<GroupedGame, OligopolyError> {
    params.validate()?;
    let cap = cap.unwrap_or(params.a);
    let eq = params.solve_unchecked();
    if !(cap > eq.s1 && cap > eq.s2) {
        return Err(invalid(
            "cap",
            format!("must exceed the equilibrium outputs {} and {}, got {cap}", eq.s1, eq.s2),
        ));
    }
    let space = Interval::new(0.0, cap)?;
    Ok(GroupedGame::new(
        params.groups,
        space,
        space,
        Relativized(CournotProfits(*params)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub point: SymmetricPoint,
    pub price1: f64,
    pub price2: f64,
}

pub fn closed_form_equilibrium(params: &OligopolyParams) -> Result<ClosedForm, OligopolyError> {
    params.validate()?;
    let point = params.solve_unchecked();
    let (m, n) = (params.groups.m() as f64, params.groups.n() as f64);
    let (x1, x2) = (m * point.s1, n * point.s2);
    Ok(ClosedForm {
        point,
        price1: params.inverse_demand(Group::One, x1, x2),
        price2: params.inverse_demand(Group::Two, x1, x2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStrategies {
    pub label: String,
    pub slice: Slice,
    pub maximin: f64,
    pub minimax: f64,
}

/// Closed-form maximin and minimax strategies for the `(A, B)`, `(A, E)` and
/// `(C, D)` pairs; `(A, E)` is omitted when group one has two firms.
pub fn closed_form_saddle_strategies(
    params: &OligopolyParams,
) -> Result<Vec<PairStrategies>, OligopolyError> {
    let eq = closed_form_equilibrium(params)?.point;
    let groups = params.groups;
    let mut slices = vec![Slice::G1];
    if groups.m() >= 3 {
        slices.push(Slice::new(PlayerId::A, PlayerId::A, PlayerId::E));
    }
    slices.push(Slice::G2);
    Ok(slices
        .into_iter()
        .map(|slice| {
            let s = eq.get(slice.x.group);
            PairStrategies {
                label: slice.label(groups),
                slice,
                maximin: s,
                minimax: s,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference() -> OligopolyParams {
        OligopolyParams::new(10.0, 0.5, 2.0, 1.0)
    }

    #[test]
    fn reference_closed_form() {
        let cf = closed_form_equilibrium(&reference()).unwrap();
        assert_abs_diff_eq!(cf.point.s1, 14.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.point.s2, 10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.price1, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.price2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decoupled_closed_form() {
        let cf = closed_form_equilibrium(&OligopolyParams::new(10.0, 0.0, 2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(cf.point.s1, 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.point.s2, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn equal_costs_ratio() {
        let cf = closed_form_equilibrium(&OligopolyParams::new(10.0, 0.5, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(cf.point.s1 / cf.point.s2, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_params_name_the_field() {
        let err = OligopolyParams::new(10.0, 1.5, 2.0, 1.0).validate().unwrap_err();
        assert!(matches!(err, OligopolyError::Invalid { field: "b", .. }));
        let err = OligopolyParams::new(10.0, -0.1, 2.0, 1.0).validate().unwrap_err();
        assert!(matches!(err, OligopolyError::Invalid { field: "b", .. }));
        let err = OligopolyParams::new(10.0, 0.5, 12.0, 1.0).validate().unwrap_err();
        assert!(matches!(err, OligopolyError::Invalid { field: "cA", .. }));
        // Strong group-two cost advantage drives group-one output negative.
        let err = OligopolyParams::new(10.0, 0.9, 9.0, 0.0).validate().unwrap_err();
        assert!(matches!(err, OligopolyError::Invalid { field: "cA", .. }));
    }

    #[test]
    fn cap_must_cover_equilibrium() {
        assert!(matches!(
            build_game(&reference(), Some(2.0)),
            Err(OligopolyError::Invalid { field: "cap", .. })
        ));
    }

    #[test]
    fn payoffs_match_hand_formula() {
        let params = reference();
        let game = build_game(&params, None).unwrap();
        let p = StrategyProfile::new(vec![1.0, 2.0, 0.5], vec![3.0, 1.5]);
        // group-one price 10 - 3.5 - 0.5*4.5 = 4.25, margin 2.25
        let (pa, pb, pe) = (2.25 * 1.0, 2.25 * 2.0, 2.25 * 0.5);
        let expected_a = pa - 0.5 * (pb + pe);
        assert_abs_diff_eq!(game.payoff(PlayerId::A, &p), expected_a, epsilon = 1e-12);
        // group-two price 10 - 4.5 - 0.5*3.5 = 3.75, margin 2.75
        let (pc, pd) = (2.75 * 3.0, 2.75 * 1.5);
        assert_abs_diff_eq!(game.payoff(PlayerId::C, &p), pc - pd, epsilon = 1e-12);
    }

    #[test]
    fn zero_at_symmetric_profiles() {
        let game = build_game(&reference(), None).unwrap();
        for (s1, s2) in [(1.0, 1.0), (14.0 / 9.0, 10.0 / 3.0)] {
            let p = StrategyProfile::symmetric(game.groups(), s1, s2);
            for q in game.groups().players() {
                assert_abs_diff_eq!(game.evaluate_payoff(q, &p).unwrap(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn decoupled_groups_ignore_each_other() {
        let game = build_game(&OligopolyParams::new(10.0, 0.0, 2.0, 1.0), None).unwrap();
        let p = StrategyProfile::new(vec![1.0, 2.0, 0.5], vec![3.0, 1.5]);
        let q = StrategyProfile::new(vec![1.0, 2.0, 0.5], vec![7.0, 0.2]);
        for i in 0..3 {
            assert_eq!(
                game.payoff(PlayerId::g1(i), &p),
                game.payoff(PlayerId::g1(i), &q)
            );
        }
    }

    #[test]
    fn saddle_strategies_equal_equilibrium() {
        let pairs = closed_form_saddle_strategies(&reference()).unwrap();
        let labels: Vec<_> = pairs.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["u_A(s_A, s_B)", "u_A(s_A, s_E)", "u_C(s_C, s_D)"]);
        assert_abs_diff_eq!(pairs[0].maximin, 14.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairs[1].minimax, 14.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairs[2].maximin, 10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairs[2].minimax, 10.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn general_group_sizes_satisfy_focs() {
        let params = reference().with_groups(GroupSpec::new(4, 3).unwrap());
        let cf = closed_form_equilibrium(&params).unwrap();
        let (r1, r2) = params.foc_residuals(cf.point);
        assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
    }
}
