//! Quadratic two-group family with an analytic symmetric equilibrium.
//!
//! A player `i` of group `g` with strategy `x_i` has absolute payoff
//!
//! ```text
//! v_i = -p_g * x_i^2 + x_i * (r_g - u_g * S_-i - w_g * T)
//! ```
//!
//! where `S_-i` is the sum of the in-group rivals' strategies and `T` the sum
//! over the other group. Payoffs are relativized inside each group, so the
//! game is group-zero-sum. Each slice `(x_i, x_j)` of `u_i` is strictly
//! concave in `x_i` (curvature `-2p`) and strictly convex in a rival `x_j`
//! (curvature `2p / (k - 1)`).
//!
//! With group sizes `m`, `n` the symmetric equilibrium solves
//!
//! ```text
//! (2 p1 + u1 (m - 2)) s1 + w1 n s2 = r1
//! w2 m s1 + (2 p2 + u2 (n - 2)) s2 = r2
//! ```
//!
//! The relative-profit oligopoly is the member `p = 1`, `u = 1`, `w = b`,
//! `r = a - c`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::SymmetricPoint;
use crate::game::{
    AbsolutePayoff, GameError, Group, GroupSpec, GroupedGame, Interval, PlayerId, Relativized,
    StrategyProfile,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadraticError {
    #[error("invalid quadratic parameter '{field}': {reason}")]
    Invalid { field: String, reason: String },
    #[error("equilibrium system is singular")]
    Singular,
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticGroupParams {
    /// `p > 0`.
    pub curvature: f64,
    /// Weight `u` of in-group rival strategies.
    pub rival: f64,
    /// Weight `w` of the other group's strategies.
    pub cross: f64,
    /// Linear coefficient `r`.
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSaddleParams {
    pub group1: QuadraticGroupParams,
    pub group2: QuadraticGroupParams,
    pub groups: GroupSpec,
}

impl Default for QuadraticSaddleParams {
    fn default() -> Self {
        QuadraticSaddleParams {
            group1: QuadraticGroupParams {
                curvature: 1.0,
                rival: 0.5,
                cross: 0.25,
                intercept: 4.0,
            },
            group2: QuadraticGroupParams {
                curvature: 1.5,
                rival: 0.5,
                cross: 0.3,
                intercept: 5.0,
            },
            groups: GroupSpec::five_player(),
        }
    }
}

impl QuadraticSaddleParams {
    pub fn group(&self, group: Group) -> &QuadraticGroupParams {
        match group {
            Group::One => &self.group1,
            Group::Two => &self.group2,
        }
    }

    pub fn validate(&self) -> Result<(), QuadraticError> {
        for (name, g) in [("group1", &self.group1), ("group2", &self.group2)] {
            let fields = [
                ("curvature", g.curvature),
                ("rival", g.rival),
                ("cross", g.cross),
                ("intercept", g.intercept),
            ];
            for (field, v) in fields {
                if !v.is_finite() {
                    return Err(QuadraticError::Invalid {
                        field: format!("{name}.{field}"),
                        reason: format!("must be finite, got {v}"),
                    });
                }
            }
            if g.curvature <= 0.0 {
                return Err(QuadraticError::Invalid {
                    field: format!("{name}.curvature"),
                    reason: format!("must be positive, got {}", g.curvature),
                });
            }
        }
        Ok(())
    }

    /// Coefficients `[[k11, k12], [k21, k22]]` and right-hand side of the
    /// symmetric first-order conditions.
    pub fn equilibrium_system(&self) -> ([[f64; 2]; 2], [f64; 2]) {
        let (m, n) = (self.groups.m() as f64, self.groups.n() as f64);
        let (g1, g2) = (&self.group1, &self.group2);
        (
            [
                [2.0 * g1.curvature + g1.rival * (m - 2.0), g1.cross * n],
                [g2.cross * m, 2.0 * g2.curvature + g2.rival * (n - 2.0)],
            ],
            [g1.intercept, g2.intercept],
        )
    }

    /// Solution of [`Self::equilibrium_system`] by Cramer's rule.
    pub fn analytic_equilibrium(&self) -> Result<SymmetricPoint, QuadraticError> {
        self.validate()?;
        let ([[a, b], [c, d]], [r1, r2]) = self.equilibrium_system();
        let det = a * d - b * c;
        if det.abs() < 1e-12 * (a.abs() * d.abs()).max(b.abs() * c.abs()).max(1.0) {
            return Err(QuadraticError::Singular);
        }
        Ok(SymmetricPoint::new((r1 * d - b * r2) / det, (a * r2 - c * r1) / det))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadraticPayoffs(pub QuadraticSaddleParams);

impl AbsolutePayoff for QuadraticPayoffs {
    fn absolute(&self, player: PlayerId, profile: &StrategyProfile) -> f64 {
        let g = self.0.group(player.group);
        let own = profile.get(player);
        let rivals: f64 = profile.group(player.group).iter().sum::<f64>() - own;
        let others: f64 = profile.group(player.group.other()).iter().sum();
        -g.curvature * own * own + own * (g.intercept - g.rival * rivals - g.cross * others)
    }
}

pub fn build_game(
    params: &QuadraticSaddleParams,
    space1: Interval,
    space2: Interval,
) -> Result<GroupedGame, QuadraticError> {
    params.validate()?;
    Ok(GroupedGame::new(
        params.groups,
        space1,
        space2,
        Relativized(QuadraticPayoffs(*params)),
    ))
}
