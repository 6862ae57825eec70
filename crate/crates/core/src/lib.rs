//! Stochastic model checking of fictitious-play learning dynamics.
//!
//! The crate explores every joint-strategy state a learning algorithm can
//! reach on a strategic-form game, merging states whose futures coincide.
//! Analysing the resulting discrete-time Markov chain shows where learning
//! ends up and with what probability.

pub mod analysis;
pub mod catalog;
pub mod dot;
pub mod error;
pub mod explorer;
pub mod game;
pub mod io;
pub mod learners;
pub mod report;
pub mod similarity;
pub mod simulator;

pub use analysis::{analyze, AnalysisReport, BsccReport, Classification, Scc};
pub use error::{Error, Result};
pub use explorer::{explore, Dtmc, ExplorationState, ExploreConfig};
pub use game::{ActionDistribution, DecisionRule, Game, JointAction, OpponentEstimates};
pub use learners::{Algorithm, LambdaGradient, LearnerParams, LearnerState, PairVectors};
pub use report::{run_check, Report, RunConfig};
pub use simulator::{empirical_convergence, simulate, EmpiricalResult, Trace};
