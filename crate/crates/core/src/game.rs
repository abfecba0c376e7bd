//! Two-group game structure.
//!
//! A [`GroupedGame`] has `m` players in group one and `n` players in group two.
//! Each group shares a strategy interval, and the game is zero-sum inside each
//! group and symmetric under exchange of two players of the same group.
//!
//! Player order is fixed: group one is `A, B, E`, group two is `C, D` for the
//! five-player configuration `(m, n) = (3, 2)`. Larger groups fall back to
//! positional names (`g1[3]`, `g2[2]`, ...).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("group sizes must both be at least 2 (got m = {m}, n = {n})")]
    InvalidGroups { m: usize, n: usize },
    #[error("strategy interval must satisfy lo < hi with finite bounds (got [{lo}, {hi}])")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("player {player} does not exist in a game with m = {m}, n = {n}")]
    InvalidPlayer { player: PlayerId, m: usize, n: usize },
    #[error("strategy {value} of player {player} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        player: PlayerId,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("profile has {g1} + {g2} strategies, game expects {m} + {n}")]
    DimensionMismatch { g1: usize, g2: usize, m: usize, n: usize },
    #[error("players {0} and {1} are not in the same group")]
    InvalidPair(PlayerId, PlayerId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    One,
    Two,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::One => Group::Two,
            Group::Two => Group::One,
        }
    }
}

/// A player, addressed by group and position inside the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerId {
    pub group: Group,
    pub slot: usize,
}

impl PlayerId {
    pub const fn g1(slot: usize) -> Self {
        PlayerId {
            group: Group::One,
            slot,
        }
    }

    pub const fn g2(slot: usize) -> Self {
        PlayerId {
            group: Group::Two,
            slot,
        }
    }

    pub const A: PlayerId = PlayerId::g1(0);
    pub const B: PlayerId = PlayerId::g1(1);
    pub const E: PlayerId = PlayerId::g1(2);
    pub const C: PlayerId = PlayerId::g2(0);
    pub const D: PlayerId = PlayerId::g2(1);
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.group {
            Group::One => write!(f, "g1[{}]", self.slot),
            Group::Two => write!(f, "g2[{}]", self.slot),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    m: usize,
    n: usize,
}

impl GroupSpec {
    pub fn new(m: usize, n: usize) -> Result<Self, GameError> {
        if m < 2 || n < 2 {
            return Err(GameError::InvalidGroups { m, n });
        }
        Ok(GroupSpec { m, n })
    }

    /// The five-player layout: `A, B, E` against `C, D`.
    pub fn five_player() -> Self {
        GroupSpec { m: 3, n: 2 }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self, group: Group) -> usize {
        match group {
            Group::One => self.m,
            Group::Two => self.n,
        }
    }

    pub fn contains(&self, player: PlayerId) -> bool {
        player.slot < self.size(player.group)
    }

    /// All players, group one first.
    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        let (m, n) = (self.m, self.n);
        (0..m).map(PlayerId::g1).chain((0..n).map(PlayerId::g2))
    }

    pub fn player_name(&self, player: PlayerId) -> String {
        if self.m == 3 && self.n == 2 {
            let name = match (player.group, player.slot) {
                (Group::One, 0) => "A",
                (Group::One, 1) => "B",
                (Group::One, 2) => "E",
                (Group::Two, 0) => "C",
                (Group::Two, 1) => "D",
                _ => return player.to_string(),
            };
            name.to_string()
        } else {
            player.to_string()
        }
    }
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec::five_player()
    }
}

/// A compact strategy interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, GameError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GameError::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// One scalar strategy per player, partitioned by group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(g1: Vec<f64>, g2: Vec<f64>) -> Self {
        StrategyProfile { g1, g2 }
    }

    /// Every group-one player at `s1`, every group-two player at `s2`.
    pub fn symmetric(groups: GroupSpec, s1: f64, s2: f64) -> Self {
        StrategyProfile {
            g1: vec![s1; groups.m()],
            g2: vec![s2; groups.n()],
        }
    }

    pub fn group(&self, group: Group) -> &[f64] {
        match group {
            Group::One => &self.g1,
            Group::Two => &self.g2,
        }
    }

    /// Panics if the player is not part of the profile.
    pub fn get(&self, player: PlayerId) -> f64 {
        self.group(player.group)[player.slot]
    }

    pub fn set(&mut self, player: PlayerId, value: f64) {
        match player.group {
            Group::One => self.g1[player.slot] = value,
            Group::Two => self.g2[player.slot] = value,
        }
    }

    /// Exchanges the strategies of two players of the same group.
    pub fn swapped(&self, i: PlayerId, j: PlayerId) -> Self {
        let mut out = self.clone();
        let (si, sj) = (self.get(i), self.get(j));
        out.set(i, sj);
        out.set(j, si);
        out
    }
}

/// Payoff oracle `u_i(profile)`.
///
/// Implementations must be deterministic and free of interior mutability so a
/// game can be shared across threads. Callers guarantee that `player` and
/// `profile` match the game dimensions.
pub trait PayoffOracle: Send + Sync {
    fn payoff(&self, player: PlayerId, profile: &StrategyProfile) -> f64;
}

impl<F> PayoffOracle for F
where
    F: Fn(PlayerId, &StrategyProfile) -> f64 + Send + Sync,
{
    fn payoff(&self, player: PlayerId, profile: &StrategyProfile) -> f64 {
        self(player, profile)
    }
}

/// Absolute (non-relativized) payoff of a player, e.g. a firm's profit.
pub trait AbsolutePayoff: Send + Sync {
    fn absolute(&self, player: PlayerId, profile: &StrategyProfile) -> f64;
}

/// Turns absolute payoffs into in-group relative payoffs
/// `u_i = v_i - (1 / (k - 1)) * sum_{j != i, same group} v_j`,
/// which sum to zero inside each group.
#[derive(Debug, Clone)]
pub struct Relativized<P>(pub P);

impl<P: AbsolutePayoff> PayoffOracle for Relativized<P> {
    fn payoff(&self, player: PlayerId, profile: &StrategyProfile) -> f64 {
        let k = profile.group(player.group).len();
        let mut own = 0.0;
        let mut rivals = 0.0;
        for slot in 0..k {
            let other = PlayerId {
                group: player.group,
                slot,
            };
            let v = self.0.absolute(other, profile);
            if slot == player.slot {
                own = v;
            } else {
                rivals += v;
            }
        }
        own - rivals / (k - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroSumCheck {
    pub holds: bool,
    pub residual_g1: f64,
    pub residual_g2: f64,
}

#[derive(Clone)]
pub struct GroupedGame {
    groups: GroupSpec,
    space1: Interval,
    space2: Interval,
    oracle: Arc<dyn PayoffOracle>,
}

impl fmt::Debug for GroupedGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupedGame")
            .field("groups", &self.groups)
            .field("space1", &self.space1)
            .field("space2", &self.space2)
            .finish_non_exhaustive()
    }
}

impl GroupedGame {
    pub fn new(
        groups: GroupSpec,
        space1: Interval,
        space2: Interval,
        oracle: impl PayoffOracle + 'static,
    ) -> Self {
        GroupedGame {
            groups,
            space1,
            space2,
            oracle: Arc::new(oracle),
        }
    }

    pub fn groups(&self) -> GroupSpec {
        self.groups
    }

    pub fn space(&self, group: Group) -> Interval {
        match group {
            Group::One => self.space1,
            Group::Two => self.space2,
        }
    }

    pub fn space1(&self) -> Interval {
        self.space1
    }

    pub fn space2(&self) -> Interval {
        self.space2
    }

    /// Checked payoff evaluation.
    pub fn evaluate_payoff(
        &self,
        player: PlayerId,
        profile: &StrategyProfile,
    ) -> Result<f64, GameError> {
        self.check_player(player)?;
        self.check_profile(profile)?;
        Ok(self.oracle.payoff(player, profile))
    }

    /// Payoff evaluation without validation, for optimizer inner loops that
    /// only ever produce in-domain profiles.
    #[inline]
    pub fn payoff(&self, player: PlayerId, profile: &StrategyProfile) -> f64 {
        self.oracle.payoff(player, profile)
    }

    pub fn check_player(&self, player: PlayerId) -> Result<(), GameError> {
        if self.groups.contains(player) {
            Ok(())
        } else {
            Err(GameError::InvalidPlayer {
                player,
                m: self.groups.m(),
                n: self.groups.n(),
            })
        }
    }

    pub fn check_profile(&self, profile: &StrategyProfile) -> Result<(), GameError> {
        let (m, n) = (self.groups.m(), self.groups.n());
        if profile.g1.len() != m || profile.g2.len() != n {
            return Err(GameError::DimensionMismatch {
                g1: profile.g1.len(),
                g2: profile.g2.len(),
                m,
                n,
            });
        }
        for player in self.groups.players() {
            let space = self.space(player.group);
            let value = profile.get(player);
            if !space.contains(value) {
                return Err(GameError::OutOfDomain {
                    player,
                    value,
                    lo: space.lo(),
                    hi: space.hi(),
                });
            }
        }
        Ok(())
    }

    /// Sum of payoffs inside each group, reported as residuals.
    pub fn check_group_zero_sum(
        &self,
        profile: &StrategyProfile,
        tol: f64,
    ) -> Result<ZeroSumCheck, GameError> {
        self.check_profile(profile)?;
        let residual = |group: Group| -> f64 {
            (0..self.groups.size(group))
                .map(|slot| self.payoff(PlayerId { group, slot }, profile))
                .sum()
        };
        let residual_g1 = residual(Group::One);
        let residual_g2 = residual(Group::Two);
        Ok(ZeroSumCheck {
            holds: residual_g1.abs() <= tol && residual_g2.abs() <= tol,
            residual_g1,
            residual_g2,
        })
    }

    /// True iff swapping the strategies of `i` and `j` swaps their payoffs and
    /// leaves every other payoff unchanged, within `tol`.
    pub fn check_group_symmetry(
        &self,
        profile: &StrategyProfile,
        i: PlayerId,
        j: PlayerId,
        tol: f64,
    ) -> Result<bool, GameError> {
        self.check_player(i)?;
        self.check_player(j)?;
        if i.group != j.group {
            return Err(GameError::InvalidPair(i, j));
        }
        self.check_profile(profile)?;
        let swapped = profile.swapped(i, j);
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        let ok = self.groups.players().all(|k| {
            let before = self.payoff(k, profile);
            let after = if k == i {
                self.payoff(j, &swapped)
            } else if k == j {
                self.payoff(i, &swapped)
            } else {
                self.payoff(k, &swapped)
            };
            close(before, after)
        });
        Ok(ok)
    }
}
