//! K-fold cross-validation over a lambda grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{CsuvError, Result};
use crate::model::LinearModel;
use crate::rng;
use crate::solvers::ols::argmin_first;
use crate::solvers::path::{fit_path_partial, LambdaPath, PathFit, PathSpec, SolverOptions};
use crate::solvers::penalty::PenaltySpec;

/// Fold label for every row: a seeded permutation cut into contiguous
/// blocks whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || n < folds {
        return Err(CsuvError::InvalidFolds { n, folds });
    }
    let perm = rng::permutation(n, &mut rng::stream(seed, 0));
    let base = n / folds;
    let extra = n % folds;
    let mut labels = vec![0; n];
    let mut pos = 0;
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        for &row in &perm[pos..pos + size] {
            labels[row] = fold;
        }
        pos += size;
    }
    Ok(labels)
}

/// Outcome of tuning lambda by cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvTune {
    pub lambda: f64,
    pub lambda_index: usize,
    /// Mean out-of-fold squared error per grid value that every fit reached.
    pub cv_errors: Vec<f64>,
    /// Full-data fit at the chosen lambda.
    pub model: LinearModel,
}

/// Chooses the grid value with the lowest mean out-of-fold squared error.
///
/// Every fold is fit over the same grid. When a fit stops early (saturated
/// path or a grid value that does not converge), only the grid prefix
/// reached by all fits is considered. Ties go to
/// the larger lambda.
pub fn kfold_cv_tune(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    path: &LambdaPath,
    folds: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvTune> {
    let n = x.nrows();
    let labels = fold_assignment(n, folds, seed)?;
    let full = usable_prefix(fit_path_partial(x, y, penalty, path, opts)?)?;
    let mut reached = full.len();
    let mut sse = vec![0.0; path.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| labels[i] != fold).collect();
        let held: Vec<usize> = (0..n).filter(|&i| labels[i] == fold).collect();
        let fit = usable_prefix(fit_path_partial(
            &x.select_rows(&train),
            &y.select_rows(&train),
            penalty,
            path,
            opts,
        )?)?;
        reached = reached.min(fit.len());
        for (k, m) in fit.models.iter().enumerate() {
            sse[k] += held
                .iter()
                .map(|&i| {
                    let e = y[i] - m.predict_row(x, i);
                    e * e
                })
                .sum::<f64>();
        }
    }
    let cv_errors: Vec<f64> = sse[..reached].iter().map(|s| s / n as f64).collect();
    let lambda_index = argmin_first(&cv_errors);
    Ok(CvTune {
        lambda: path.values()[lambda_index],
        lambda_index,
        cv_errors,
        model: full.models[lambda_index].clone(),
    })
}

/// Fits that stopped for lack of convergence still contribute the grid
/// values they reached.
fn usable_prefix((fit, failure): (PathFit, Option<CsuvError>)) -> Result<PathFit> {
    match failure {
        Some(e) if fit.is_empty() => Err(e),
        _ => Ok(fit),
    }
}

/// [`kfold_cv_tune`] on the default grid for this data.
pub fn kfold_cv_default(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    spec: &PathSpec,
    folds: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvTune> {
    let path = LambdaPath::for_problem(x, y, penalty, spec)?;
    kfold_cv_tune(x, y, penalty, &path, folds, seed, opts)
}
