//! Learning functions through their Jacobians.
//!
//! A small network predicts the Jacobian of the target function at every
//! point; predictions come from integrating that Jacobian along a straight
//! path from an anchor point. Structuring the network's output activation
//! gives the integrated function guarantees that survive training:
//! invertibility (symmetric positive-definite Jacobians), k-Lipschitz bounds
//! (scaled `tanh`), or complex differentiability (Cauchy–Riemann form).
//!
//! Modules, bottom-up: [`linalg`], [`field`], [`integrate`], [`model`],
//! [`train`], [`experiment`] for whole runs, and [`checks`] for gradient and conservativity diagnostics.

pub mod checks;
pub mod error;
pub mod experiment;
pub mod field;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod train;

pub use error::{JacError, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
pub use field::{Activation, FnField, JacobianField, JacobianFn, MlpParams};
pub use integrate::{
    line_integrate, line_integrate_grad, solve_ivp, IntegrationResult, IntegratorConfig,
    LinearPath, QuadNode, Scheme,
};
pub use linalg::{Matrix, Vector};
pub use model::{conservativity_diagnostic, invert_with, predict_with, JacNetModel};
pub use train::{
    adam_step, empirical_risk, empirical_risk_and_grad, l1_loss, sample_dataset, train,
    train_observed, AdamConfig, AnnealConfig, Dataset, DatasetSpec, HistoryRow, Target,
    TrainConfig, TrainState,
};
