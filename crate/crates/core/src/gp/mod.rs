//! Gaussian-process regression of the lumped model uncertainty: exact GP,
//! FITC sparse GP, and the recursive online update of the sparse weights.

mod dataset;
mod full;
mod kernel;
mod optimizer;
mod rosgp;
mod sparse;

pub use dataset::Dataset;
pub use full::{
    beta_bound, gp_fit, initial_hyperparams, log_marginal_likelihood, log_marginal_likelihood_value,
    FitDiagnostics, FitOptions, FullGp, GpModel,
};
pub use kernel::{cross_kernel, gram, kernel_seard, kernel_vector, Hyperparams};
pub use optimizer::{minimize_bounded, OptimizeResult, OptimizerOptions, Termination};
pub use rosgp::{rls_step, rosgp_init, FeatureScale, RosgpDim, RosgpOptions, RosgpState};
pub use sparse::{
    fitc_log_likelihood, fitc_log_likelihood_grad, random_subset, spgp_fit, InducingMode, SparseGp,
    SparseOptions, SpgpModel,
};
