//! Connection-tableau theorem proving guided by Monte Carlo tree search, with
//! policies trained by expert iteration on partial label learning losses.
//!
//! The numeric core is generic over [`scalar::Scalar`]; the aliases below fix
//! the scalar for everyday use.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod logic;
pub mod losses;
pub mod model;
pub mod scalar;
pub mod search;
pub mod tableau;

/// Policy and value model in double precision.
pub type Model = model::PolicyModel<f64>;
/// Policy and value model in single precision.
pub type Model32 = model::PolicyModel<f32>;
/// Sparse parameter gradient in double precision.
pub type Gradient = model::SparseGrad<f64>;

pub use experiment::{expert_iteration, run_iteration, ExperimentConfig, IterationReport};
pub use logic::Problem;
pub use losses::LossKind;
pub use search::{run_mcts, MctsConfig};
pub use tableau::{check_proof, TableauState};
