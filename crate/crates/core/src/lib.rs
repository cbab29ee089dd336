//! Stochastic gradient descent-ascent with shuffling-based component sampling
//! for finite-sum minimax problems, plus a quadratic-game testbed,
//! assumption validators and worst-case lower-bound instances.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod lowerbound;
pub mod optimizer;
pub mod problem;
pub mod quadgame;
pub mod sampling;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SymEigen};
pub use optimizer::{
    Algorithm, EpochDiagnostics, RunConfig, RunOutcome, RunStatus, Step, TrajectoryRecord, TunedConstants,
};
pub use problem::{Component, MinimaxProblem, Point, ProblemConstants, SaddleProblem, StepSizes};
pub use quadgame::{GameConstants, GameGenConfig, QuadraticGame, ValidationReport, VarianceConstants};
pub use sampling::{BatchSchedule, ComponentSpread, Permutation, Scheme};
pub use lowerbound::{CaseId, LowerBoundInstance};
