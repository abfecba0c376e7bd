//! Games declared by absolute-payoff expression templates.
//!
//! One template per group is written for the group's first player, in terms of
//! `x1..xm` and `y1..yn`. Player `k` of the group evaluates the template with
//! its own strategy exchanged into the first slot. Templates must be
//! symmetric in the rivals' variables; [`build_game`] rejects templates whose
//! instantiation breaks within-group symmetry on sampled profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{Expr, Var};
use crate::game::{
    AbsolutePayoff, GameError, Group, GroupSpec, GroupedGame, Interval, PlayerId, Relativized,
    StrategyProfile,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CustomGameError {
    #[error(
        "payoff templates are not symmetric within groups: swapping {i} and {j} at {profile:?} changes payoffs"
    )]
    Asymmetric {
        i: PlayerId,
        j: PlayerId,
        profile: StrategyProfile,
    },
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone)]
pub struct TemplatePayoffs {
    pub group1: Expr,
    pub group2: Expr,
}

impl AbsolutePayoff for TemplatePayoffs {
    /// Evaluation errors (division by zero) become NaN, which the optimizers
    /// report as a non-finite objective.
    fn absolute(&self, player: PlayerId, profile: &StrategyProfile) -> f64 {
        let slot = player.slot;
        let swap = |k: usize| {
            if k == 0 {
                slot
            } else if k == slot {
                0
            } else {
                k
            }
        };
        let template = match player.group {
            Group::One => &self.group1,
            Group::Two => &self.group2,
        };
        let lookup = |v| match (v, player.group) {
            (Var::X(k), Group::One) => profile.g1.get(swap(k)).copied(),
            (Var::X(k), Group::Two) => profile.g1.get(k).copied(),
            (Var::Y(k), Group::One) => profile.g2.get(k).copied(),
            (Var::Y(k), Group::Two) => profile.g2.get(swap(k)).copied(),
        };
        template.evaluate_with(&lookup).unwrap_or(f64::NAN)
    }
}

const SYMMETRY_SAMPLES: usize = 32;

pub fn build_game(
    groups: GroupSpec,
    space1: Interval,
    space2: Interval,
    templates: TemplatePayoffs,
    seed: u64,
) -> Result<GroupedGame, CustomGameError> {
    let game = GroupedGame::new(groups, space1, space2, Relativized(templates));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(PlayerId, PlayerId)> = [Group::One, Group::Two]
        .into_iter()
        .flat_map(|group| {
            let k = groups.size(group);
            (0..k).flat_map(move |i| {
                (i + 1..k).map(move |j| (PlayerId { group, slot: i }, PlayerId { group, slot: j }))
            })
        })
        .collect();
    for _ in 0..SYMMETRY_SAMPLES {
        let profile = StrategyProfile::new(
            (0..groups.m()).map(|_| rng.gen_range(space1.lo()..=space1.hi())).collect(),
            (0..groups.n()).map(|_| rng.gen_range(space2.lo()..=space2.hi())).collect(),
        );
        let scale = groups
            .players()
            .map(|q| game.payoff(q, &profile).abs())
            .filter(|v| v.is_finite())
            .fold(1.0, f64::max);
        for &(i, j) in &pairs {
            if !game.check_group_symmetry(&profile, i, j, 1e-9 * scale)? {
                // NaN payoffs from a division by zero also land here; skip those.
                let finite = groups.players().all(|q| {
                    game.payoff(q, &profile).is_finite()
                        && game.payoff(q, &profile.swapped(i, j)).is_finite()
                });
                if finite {
                    return Err(CustomGameError::Asymmetric { i, j, profile });
                }
            }
        }
    }
    Ok(game)
}
