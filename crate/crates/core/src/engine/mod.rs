//! The subsampling ensemble.
//!
//! Each repetition splits the rows into a training and a test part, fits
//! every constituent penalty over its whole lambda grid on the training
//! part, drops supports repeated within a method, refits each remaining
//! support by least squares, ranks the refits by test error and keeps the
//! best `q` percent. The pooled survivors of all repetitions form the
//! [`RetainedCollection`], from which the sign frequencies, the solution
//! path and both selections are computed.
//!
//! Repetitions run in parallel. Repetition `b` draws from stream `b` of the
//! configured seed and results are merged in repetition order, so the output
//! is identical for any thread count.

pub mod aggregate;
pub mod bundle;

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::StandardizedDesign;
use crate::error::{CsuvError, Result};
use crate::model::LinearModel;
use crate::rng;
use crate::solvers::{
    fit_path_partial, ols_fit, ridge_cv_fit, LambdaPath, PathSpec, PenaltySpec, SolverOptions,
};

pub use aggregate::{
    compute_tau, csuv_s_select, lower_median, mean_coefficients, quantile_sorted, ranks_from_order,
    select_by_threshold, signed_selection, solution_path, SignFrequencies,
};
pub use bundle::{
    build_bundle, dataset_digest, summarize_covariate, whisker_zero_diagnostic, BundleOptions,
    Comparison, CovariateSummary, UncertaintyBundle, BUNDLE_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceMeasure {
    #[default]
    TestMse,
}

/// Parameters of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsuvConfig {
    /// Number of subsample repetitions `B`.
    pub repetitions: usize,
    /// Percentage `q` of ranked models kept per repetition; 0 keeps the best one.
    pub retention_pct: f64,
    /// Percentage `w` of rows used for fitting.
    pub train_pct: f64,
    /// Frequency threshold `t` of the threshold rule.
    pub threshold: f64,
    pub methods: Vec<PenaltySpec>,
    pub seed: u64,
    pub performance_measure: PerformanceMeasure,
    pub path: PathSpec,
    pub solver: SolverOptions,
    /// Folds for the ridge fallback of the final estimate.
    pub ridge_folds: usize,
}

impl Default for CsuvConfig {
    fn default() -> Self {
        Self {
            repetitions: 100,
            retention_pct: 0.0,
            train_pct: 50.0,
            threshold: 0.5,
            methods: PenaltySpec::default_constituents(),
            seed: 0,
            performance_measure: PerformanceMeasure::TestMse,
            path: PathSpec::default(),
            solver: SolverOptions::default(),
            ridge_folds: 10,
        }
    }
}

impl CsuvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CsuvError::InvalidConfig(msg));
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if !(0.0..=50.0).contains(&self.retention_pct) {
            return bad(format!("q must lie in [0, 50], got {}", self.retention_pct));
        }
        if !(self.train_pct > 0.0 && self.train_pct < 100.0) {
            return bad(format!("w must lie in (0, 100), got {}", self.train_pct));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("t must lie in (0, 1], got {}", self.threshold));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        for m in &self.methods {
            m.validate()?;
        }
        if self.ridge_folds < 2 {
            return bad("ridge_folds must be at least 2".into());
        }
        Ok(())
    }
}

/// One retained fitted model with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub model: LinearModel,
    pub test_mse: f64,
    /// Position of the method in the configured method list.
    pub method: usize,
    pub repetition: usize,
    pub lambda_index: usize,
    /// True when the coefficients are a least-squares refit, false when the
    /// penalized coefficients were kept.
    pub refit: bool,
}

/// The pooled best models of every repetition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetainedCollection {
    pub models: Vec<FittedModel>,
    /// Distinct candidates `K^b` ranked in each repetition.
    pub candidates_per_repetition: Vec<usize>,
    /// Models kept `K_q^b` from each repetition.
    pub retained_per_repetition: Vec<usize>,
}

impl RetainedCollection {
    /// Collection built directly from models (one repetition each).
    pub fn from_models(models: Vec<FittedModel>) -> Self {
        let k = models.len();
        Self {
            models,
            candidates_per_repetition: vec![1; k],
            retained_per_repetition: vec![1; k],
        }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn support_sizes(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.model.len()).collect()
    }
}

/// Everything derived from the collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsuvResult {
    pub tau: Vec<f64>,
    pub tau_pos: Vec<f64>,
    pub tau_neg: Vec<f64>,
    pub mean_coefficients: Vec<f64>,
    /// Covariates in solution-path order.
    pub path_order: Vec<usize>,
    /// One-based path position of each covariate.
    pub ranks: Vec<usize>,
    pub threshold: f64,
    /// Threshold-rule selection `{ j : tau_j >= t }`.
    pub selected_m: Vec<usize>,
    /// Size-rule selection.
    pub selected_s: Vec<usize>,
    pub size_threshold_s: usize,
    /// Full-data estimate on `selected_m`.
    pub final_m: LinearModel,
    /// Full-data estimate on `selected_s`.
    pub final_s: LinearModel,
    /// Conditional coefficient summaries for every covariate with `tau > 0`.
    pub summaries: Vec<CovariateSummary>,
}

impl CsuvResult {
    pub fn summary(&self, j: usize) -> Option<&CovariateSummary> {
        self.summaries.iter().find(|s| s.index == j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsuvRun {
    pub collection: RetainedCollection,
    pub result: CsuvResult,
}

/// `K_q = max(1, round(K * q / 100))`, halves rounded to even.
pub fn retained_count(candidates: usize, retention_pct: f64) -> usize {
    let k = (candidates as f64 * retention_pct / 100.0).round_ties_even() as usize;
    k.clamp(1, candidates.max(1))
}

/// Runs the ensemble on a standardized design.
pub fn run_csuv(design: &StandardizedDesign, config: &CsuvConfig) -> Result<CsuvRun> {
    config.validate()?;
    let (n, p) = (design.n(), design.p());
    if n < 4 {
        return Err(CsuvError::TooSmall {
            rows: n,
            cols: p,
            min_rows: 4,
        });
    }
    let collection = collect_retained(design.x(), design.y(), config)?;
    let result = summarize(design, &collection, config)?;
    Ok(CsuvRun { collection, result })
}

/// Steps one to eight: the pooled collection of retained models.
pub fn collect_retained(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &CsuvConfig,
) -> Result<RetainedCollection> {
    let outcomes = (0..config.repetitions)
        .into_par_iter()
        .map(|b| run_repetition(x, y, config, b))
        .collect::<Result<Vec<_>>>()?;
    let mut collection = RetainedCollection::default();
    for (candidates, retained) in outcomes {
        collection.candidates_per_repetition.push(candidates);
        collection.retained_per_repetition.push(retained.len());
        collection.models.extend(retained);
    }
    Ok(collection)
}

/// Derives frequencies, path, selections, final estimates and summaries.
pub fn summarize(
    design: &StandardizedDesign,
    collection: &RetainedCollection,
    config: &CsuvConfig,
) -> Result<CsuvResult> {
    let p = design.p();
    let freq = compute_tau(collection, p);
    let means = mean_coefficients(collection, p);
    let order = solution_path(&freq.tau, &means);
    let ranks = ranks_from_order(&order);
    let selected_m = select_by_threshold(&freq.tau, config.threshold);
    let (selected_s, size_threshold_s) =
        csuv_s_select(&order, &collection.support_sizes(), &freq.tau);
    let final_seed = rng::child_seed(&mut rng::stream(config.seed, u64::MAX));
    let final_m = estimate_final_coefficients(design, &selected_m, config.ridge_folds, final_seed)?;
    let final_s = estimate_final_coefficients(design, &selected_s, config.ridge_folds, final_seed)?;
    let summaries = (0..p)
        .filter(|&j| freq.tau[j] > 0.0)
        .map(|j| summarize_covariate(collection, j, &freq, means[j]))
        .collect();
    Ok(CsuvResult {
        tau: freq.tau,
        tau_pos: freq.tau_pos,
        tau_neg: freq.tau_neg,
        mean_coefficients: means,
        path_order: order,
        ranks,
        threshold: config.threshold,
        selected_m,
        selected_s,
        size_threshold_s,
        final_m,
        final_s,
        summaries,
    })
}

struct Candidate {
    fitted: FittedModel,
    size: usize,
}

/// One repetition: returns `(K^b, retained models)`.
fn run_repetition(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &CsuvConfig,
    b: usize,
) -> Result<(usize, Vec<FittedModel>)> {
    let n = x.nrows();
    let mut stream = rng::stream(config.seed, b as u64);
    let (train, test) = rng::train_test_split(n, config.train_pct, &mut stream);
    if train.len() < 2 || test.is_empty() {
        return Err(CsuvError::InvalidConfig(format!(
            "split of {n} rows at w = {} leaves {} training and {} test rows",
            config.train_pct,
            train.len(),
            test.len()
        )));
    }
    let x_train = x.select_rows(&train);
    let y_train = y.select_rows(&train);

    let mut candidates = Vec::new();
    for (method, penalty) in config.methods.iter().enumerate() {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        for (lambda_index, penalized) in path_models(&x_train, &y_train, penalty, config)? {
            let support = penalized.support();
            if !seen.insert(support.clone()) {
                continue;
            }
            let (model, refit) = if support.len() < train.len() {
                match ols_fit(&x_train, &y_train, &support) {
                    Ok(m) => (m, true),
                    Err(CsuvError::RankDeficient { .. }) => (penalized, false),
                    Err(e) => return Err(e),
                }
            } else {
                (penalized, false)
            };
            let test_mse = model.mse_on_rows(x, y, &test);
            candidates.push(Candidate {
                size: support.len(),
                fitted: FittedModel {
                    model,
                    test_mse,
                    method,
                    repetition: b,
                    lambda_index,
                    refit,
                },
            });
        }
    }

    candidates.sort_by(|a, b| {
        a.fitted
            .test_mse
            .total_cmp(&b.fitted.test_mse)
            .then(a.size.cmp(&b.size))
            .then(a.fitted.method.cmp(&b.fitted.method))
            .then(a.fitted.lambda_index.cmp(&b.fitted.lambda_index))
    });
    let total = candidates.len();
    let keep = retained_count(total, config.retention_pct);
    let retained = candidates.into_iter().take(keep).map(|c| c.fitted).collect();
    Ok((total, retained))
}

/// Penalized path fits on the training rows. A response that is constant on
/// these rows only admits the empty model. A grid value that does not
/// converge ends the path there.
fn path_models(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    config: &CsuvConfig,
) -> Result<Vec<(usize, LinearModel)>> {
    let path = match LambdaPath::for_problem(x, y, penalty, &config.path) {
        Ok(path) => path,
        Err(CsuvError::DegenerateResponse) => {
            return Ok(vec![(0, LinearModel::intercept_only(y.mean()))])
        }
        Err(e) => return Err(e),
    };
    let (fit, failure) = fit_path_partial(x, y, penalty, &path, &config.solver)?;
    if let (Some(e), true) = (failure, fit.is_empty()) {
        return Err(e);
    }
    Ok(fit.models.into_iter().enumerate().collect())
}

/// Full-data coefficients on a selected set: least squares when the set is
/// smaller than the number of rows (and not collinear), cross-validated
/// ridge otherwise. The empty set gives the intercept-only model.
pub fn estimate_final_coefficients(
    design: &StandardizedDesign,
    selected: &[usize],
    folds: usize,
    seed: u64,
) -> Result<LinearModel> {
    let (x, y) = (design.x(), design.y());
    if selected.is_empty() {
        return Ok(LinearModel::intercept_only(y.mean()));
    }
    if selected.len() < design.n() {
        match ols_fit(x, y, selected) {
            Ok(m) => return Ok(m),
            Err(CsuvError::RankDeficient { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let path = LambdaPath::ridge_default(x, y, selected)?;
    let folds = folds.min(design.n());
    Ok(ridge_cv_fit(x, y, selected, &path, folds, seed)?.model)
}
