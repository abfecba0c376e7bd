//! Solvers for two-group games that are zero-sum and symmetric inside each
//! group: nested maximin/minimax on compact intervals, the symmetric maximin
//! fixed point, best-response iteration, and numerical checks that saddle
//! points and symmetric-in-group Nash equilibria coincide.

pub mod custom;
pub mod equilibrium;
pub mod expr;
pub mod game;
pub mod oligopoly;
pub mod opt;
pub mod quadratic;

pub use equilibrium::{
    EquilibriumError, EquilibriumReport, FixedPointTrace, IterationSettings, Slice,
    SymmetricPoint, VerifySettings,
};
pub use expr::{Expr, ExprError};
pub use game::{
    AbsolutePayoff, GameError, Group, GroupSpec, GroupedGame, Interval, PayoffOracle, PlayerId,
    Relativized, StrategyProfile, ZeroSumCheck,
};
pub use oligopoly::{ClosedForm, OligopolyParams};
pub use opt::{OptError, OptResult, OptSettings, SaddleResult};
pub use quadratic::{QuadraticGroupParams, QuadraticSaddleParams};
