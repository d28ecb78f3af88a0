//! Final-model selection baselines: BIC, extended BIC and delete-n/2
//! cross-validation over a set of penalized methods.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{CsuvError, Result};
use crate::model::LinearModel;
use crate::rng;
use crate::solvers::{kfold_cv_default, ols_fit, CvTune, PathSpec, PenaltySpec, SolverOptions};

/// Residual sums of squares at or below this fraction of the total sum of
/// squares count as an exact fit.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Bic,
    Ebic,
}

/// A least-squares refit on a method's selected support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub method: usize,
    pub model: LinearModel,
    pub rss: f64,
}

impl CandidateFit {
    pub fn k(&self) -> usize {
        self.model.len()
    }

    /// Refits `support` by least squares on `(x, y)`. An RSS that is
    /// negligible against the total sum of squares is stored as zero.
    pub fn refit(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        support: &[usize],
        method: usize,
    ) -> Result<Self> {
        let model = ols_fit(x, y, support)?;
        let resid = y - model.predict(x);
        let mut rss = resid.norm_squared();
        let tss = y.add_scalar(-y.mean()).norm_squared();
        if rss <= EXACT_FIT_TOLERANCE * tss {
            rss = 0.0;
        }
        Ok(Self { method, model, rss })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub candidate: usize,
    pub score: f64,
    pub criterion: Criterion,
}

/// `n ln(RSS / n) + k ln n + 2 gamma ln C(p, k)`; plain BIC at `gamma = 0`.
///
/// An exact fit (`RSS = 0`) scores negative infinity. Supports with `k >= n`
/// are rejected.
pub fn score_ebic(rss: f64, n: usize, p: usize, k: usize, gamma: f64) -> Result<f64> {
    if k >= n {
        return Err(CsuvError::SupportTooLarge { support: k, rows: n });
    }
    if k > p {
        return Err(CsuvError::DimensionMismatch(format!("support {k} exceeds p = {p}")));
    }
    if !(rss >= 0.0) || !(gamma >= 0.0) {
        return Err(CsuvError::InvalidConfig(format!(
            "need rss >= 0 and gamma >= 0, got {rss}, {gamma}"
        )));
    }
    if rss == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let mut score = nf * (rss / nf).ln() + k as f64 * nf.ln();
    if gamma > 0.0 {
        score += 2.0 * gamma * ln_binomial(p as u64, k as u64);
    }
    Ok(score)
}

pub fn score_bic(rss: f64, n: usize, p: usize, k: usize) -> Result<f64> {
    score_ebic(rss, n, p, k, 0.0)
}

/// Outcome of picking the best candidate by an information criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionChoice {
    pub chosen: CandidateFit,
    /// Score per candidate, `None` for rejected ones (`k >= n`).
    pub scores: Vec<Option<f64>>,
}

/// Lowest score wins; ties go to the smaller support, then the earlier
/// candidate.
pub fn select_from_candidates(
    candidates: &[CandidateFit],
    n: usize,
    p: usize,
    gamma: f64,
) -> Result<CriterionChoice> {
    let scores: Vec<Option<f64>> = candidates
        .iter()
        .map(|c| score_ebic(c.rss, n, p, c.k(), gamma).ok())
        .collect();
    let best = (0..candidates.len())
        .filter(|&i| scores[i].is_some())
        .min_by(|&a, &b| {
            scores[a]
                .unwrap()
                .total_cmp(&scores[b].unwrap())
                .then(candidates[a].k().cmp(&candidates[b].k()))
                .then(a.cmp(&b))
        })
        .ok_or_else(|| CsuvError::NoCandidate("every candidate has k >= n".into()))?;
    Ok(CriterionChoice {
        chosen: candidates[best].clone(),
        scores,
    })
}

/// Tuning shared by the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub folds: usize,
    pub path: PathSpec,
    pub solver: SolverOptions,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            path: PathSpec::default(),
            solver: SolverOptions::default(),
        }
    }
}

/// Cross-validated full-data fit of every method.
pub fn cv_tuned_fits(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    methods: &[PenaltySpec],
    seed: u64,
    options: &BaselineOptions,
) -> Result<Vec<CvTune>> {
    methods
        .iter()
        .map(|m| kfold_cv_default(x, y, m, &options.path, options.folds, seed, &options.solver))
        .collect()
}

/// Least-squares candidates from cross-validated fits. Supports that cannot
/// be refit (too large or collinear) are left out.
pub fn candidates_from_fits(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    fits: &[CvTune],
) -> Vec<CandidateFit> {
    fits.iter()
        .enumerate()
        .filter_map(|(method, fit)| CandidateFit::refit(x, y, &fit.model.support(), method).ok())
        .collect()
}

/// Cross-validates every method on the full data, refits each selected
/// support by least squares and returns the candidate with the lowest eBIC.
pub fn select_by_ebic(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    methods: &[PenaltySpec],
    gamma: f64,
    seed: u64,
    options: &BaselineOptions,
) -> Result<CriterionChoice> {
    if methods.is_empty() {
        return Err(CsuvError::InvalidConfig("no methods".into()));
    }
    let fits = cv_tuned_fits(x, y, methods, seed, options)?;
    let candidates = candidates_from_fits(x, y, &fits);
    select_from_candidates(&candidates, x.nrows(), x.ncols(), gamma)
}

/// Outcome of delete-n/2 cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeleteHalfCv {
    pub chosen: usize,
    /// `errors[b][m]`: evaluation-half mean squared error of method `m` in
    /// repetition `b`.
    pub errors: Vec<Vec<f64>>,
    pub mean_errors: Vec<f64>,
    /// Full-data cross-validated fit of the chosen method.
    pub fit: CvTune,
}

/// Repeats `repetitions` times: split the rows in half, tune every method by
/// cross-validation on one half and score it on the other. The method with
/// the lowest mean error wins (earliest on ties).
///
/// Repetition `b` splits with stream `b` of `seed`, the same rows the
/// ensemble uses at `w = 50` with that seed.
pub fn delete_half_cv_select(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    methods: &[PenaltySpec],
    repetitions: usize,
    seed: u64,
    options: &BaselineOptions,
) -> Result<DeleteHalfCv> {
    let n = x.nrows();
    if n < 4 {
        return Err(CsuvError::TooSmall {
            rows: n,
            cols: x.ncols(),
            min_rows: 4,
        });
    }
    if methods.is_empty() || repetitions == 0 {
        return Err(CsuvError::InvalidConfig(
            "need at least one method and one repetition".into(),
        ));
    }
    let errors = (0..repetitions)
        .into_par_iter()
        .map(|b| {
            let mut stream = rng::stream(seed, b as u64);
            let (train, test) = rng::train_test_split(n, 50.0, &mut stream);
            let fold_seed = rng::child_seed(&mut stream);
            let xt = x.select_rows(&train);
            let yt = y.select_rows(&train);
            let folds = options.folds.min(train.len());
            methods
                .iter()
                .map(|m| {
                    let fit = kfold_cv_default(&xt, &yt, m, &options.path, folds, fold_seed, &options.solver);
                    let model = match fit {
                        Ok(fit) => fit.model,
                        Err(CsuvError::DegenerateResponse) => LinearModel::intercept_only(yt.mean()),
                        Err(e) => return Err(e),
                    };
                    Ok(model.mse_on_rows(x, y, &test))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_errors = mean_columns(&errors, methods.len());
    let chosen = crate::solvers::ols::argmin_first(&mean_errors);
    let fit = kfold_cv_default(
        x,
        y,
        &methods[chosen],
        &options.path,
        options.folds.min(n),
        seed,
        &options.solver,
    )?;
    Ok(DeleteHalfCv {
        chosen,
        errors,
        mean_errors,
        fit,
    })
}

fn mean_columns(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut sums = vec![0.0; width];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.into_iter().map(|s| s / rows.len() as f64).collect()
}
