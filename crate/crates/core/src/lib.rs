//! Ensemble variable selection for high-dimensional linear regression.
//!
//! Many subsamples of the data are fit with several penalized regressions
//! (Lasso, MCP, SCAD); the best models of each subsample are pooled and a
//! covariate is selected by how often the pooled models estimate it with
//! the same sign. The pooled estimates also drive an uncertainty plot,
//! exported as a JSON bundle.
//!
//! ```
//! use csuv::prelude::*;
//!
//! let data = generate(&ModelSpec::model1(60, 1.0), 0, 7).unwrap();
//! let config = CsuvConfig { repetitions: 20, seed: 3, ..CsuvConfig::default() };
//! let run = run_csuv(&data.design, &config).unwrap();
//! assert!(run.result.selected_m.contains(&0));
//! ```

pub mod baselines;
pub mod design;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod simgen;
pub mod solvers;
pub mod study;

pub use error::{CsuvError, Result};

pub mod prelude {
    pub use crate::baselines::{delete_half_cv_select, select_by_ebic, score_ebic};
    pub use crate::design::{standardize, StandardizedDesign};
    pub use crate::engine::{
        build_bundle, run_csuv, BundleOptions, CsuvConfig, CsuvResult, CsuvRun, RetainedCollection,
        UncertaintyBundle,
    };
    pub use crate::error::{CsuvError, Result};
    pub use crate::metrics::{hamming, jaccard, selection_score};
    pub use crate::model::LinearModel;
    pub use crate::simgen::{generate, ModelKind, ModelSpec};
    pub use crate::solvers::{fit_path, LambdaPath, PathSpec, PenaltySpec, SolverOptions};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/bundle.md")]
    mod bundle {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
