//! Gaussian-process displacement models.
//!
//! Three independent scalar processes — one per displacement component —
//! share the wheel-tick inputs. [`mean`] and [`kernel`] define the prior,
//! [`model`] trains and predicts, and [`fit`] tunes hyperparameters by
//! maximizing the log marginal likelihood.

pub mod fit;
pub mod kernel;
pub mod mean;
pub mod model;

pub use fit::{fit_hyperparameters, FitOptions, FitOutcome};
pub use kernel::{KernelKind, KernelSpec, RbfParams};
pub use mean::{MeanKind, MeanSpec};
pub use model::{lml_with_gradients, log_marginal_likelihood, train, GpModel, OutputGradient};
