//! Penalized linear regression: Lasso, elastic net, MCP and SCAD paths by
//! coordinate descent, plus least-squares and ridge refits.

pub mod cv;
pub mod ols;
pub mod path;
pub mod penalty;

pub use cv::{fold_assignment, kfold_cv_default, kfold_cv_tune, CvTune};
pub use ols::{ols_fit, ridge_cv_fit, ridge_fit, RidgeCv};
pub use path::{
    fit_path, fit_path_partial, fit_single, kkt_violation, lambda_max, objective, LambdaPath, PathFit, PathSpec,
    SolverOptions,
};
pub use penalty::{soft_threshold, PenaltyFamily, PenaltySpec};
