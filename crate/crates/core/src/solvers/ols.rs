//! Unpenalized and ridge refits on a fixed support.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{CsuvError, Result};
use crate::model::LinearModel;
use crate::solvers::cv::fold_assignment;
use crate::solvers::path::{LambdaPath, Standardized};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least squares with intercept on the columns in `support`.
///
/// Requires `support.len() < n` and a restricted design of full column rank.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<LinearModel> {
    let n = x.nrows();
    let y_mean = y.mean();
    if support.is_empty() {
        return Ok(LinearModel::intercept_only(y_mean));
    }
    if support.len() >= n {
        return Err(CsuvError::SupportTooLarge {
            support: support.len(),
            rows: n,
        });
    }
    let mut xs = x.select_columns(support);
    let means: Vec<f64> = xs.column_iter().map(|c| c.mean()).collect();
    for (mut col, m) in xs.column_iter_mut().zip(&means) {
        col.add_scalar_mut(-m);
    }
    let yc = y.add_scalar(-y_mean);

    let svd = SVD::new(xs, true, true);
    let largest = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * largest;
    if largest == 0.0 || svd.singular_values.iter().any(|&s| s <= cutoff) {
        return Err(rank_error(&svd, support, cutoff));
    }
    let beta = svd
        .solve(&yc, 0.0)
        .map_err(|e| CsuvError::DimensionMismatch(e.to_string()))?;

    let mut model = LinearModel::intercept_only(y_mean);
    for ((&j, &b), m) in support.iter().zip(beta.iter()).zip(&means) {
        model.intercept -= b * m;
        model.coefficients.insert(j, b);
    }
    Ok(model)
}

fn rank_error(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, support: &[usize], cutoff: f64) -> CsuvError {
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut columns: Vec<usize> = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            let row = v_t.row(k);
            let scale = row.amax();
            for (i, v) in row.iter().enumerate() {
                if v.abs() > 1e-6 * scale && !columns.contains(&support[i]) {
                    columns.push(support[i]);
                }
            }
        }
    }
    columns.sort_unstable();
    CsuvError::RankDeficient { columns }
}

/// Ridge solutions for every value of a grid, sharing one decomposition.
struct RidgeSolver {
    prob: Standardized,
    u_t_y: DVector<f64>,
    singular: DVector<f64>,
    v: DMatrix<f64>,
}

impl RidgeSolver {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let prob = Standardized::new(x, y);
        let svd = SVD::new(prob.xs.clone(), true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v = svd.v_t.expect("right singular vectors requested").transpose();
        let u_t_y = u.transpose() * &prob.yc;
        Self {
            prob,
            u_t_y,
            singular: svd.singular_values,
            v,
        }
    }

    /// Minimizer of `|y - X b|^2 / (2n) + lambda / 2 * |b|^2` on the
    /// standardized columns, mapped back to the input scale.
    fn solve(&self, lambda: f64) -> LinearModel {
        let n = self.prob.n() as f64;
        let shrunk = DVector::from_fn(self.singular.len(), |k, _| {
            let d = self.singular[k];
            d * self.u_t_y[k] / (d * d + n * lambda)
        });
        let beta = &self.v * shrunk;
        self.prob.to_model(&beta)
    }
}

/// Ridge fit on `support` at a single lambda.
pub fn ridge_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
    lambda: f64,
) -> Result<LinearModel> {
    if support.is_empty() {
        return Err(CsuvError::EmptySupport);
    }
    let local = RidgeSolver::new(&x.select_columns(support), y).solve(lambda);
    Ok(relabel(&local, support))
}

fn relabel(local: &LinearModel, support: &[usize]) -> LinearModel {
    LinearModel {
        intercept: local.intercept,
        coefficients: local
            .coefficients
            .iter()
            .map(|(&k, &b)| (support[k], b))
            .collect(),
    }
}

impl LambdaPath {
    /// Default ridge grid on `support`: 100 log-spaced values from
    /// `1000 * max |x_j' y| / n`, down by a factor of 1e-4 (1e-2 when the
    /// support has at least as many columns as there are rows).
    pub fn ridge_default(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(CsuvError::EmptySupport);
        }
        let prob = Standardized::new(&x.select_columns(support), y);
        let ratio = if x.nrows() < support.len() { 1e-2 } else { 1e-4 };
        Self::geometric(prob.max_correlation() * 1e3, 100, ratio)
    }
}

/// Result of a cross-validated ridge fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeCv {
    pub lambda: f64,
    pub lambda_index: usize,
    pub cv_errors: Vec<f64>,
    pub model: LinearModel,
}

/// Ridge on `support` with lambda chosen by `folds`-fold cross-validation.
pub fn ridge_cv_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
    path: &LambdaPath,
    folds: usize,
    seed: u64,
) -> Result<RidgeCv> {
    if support.is_empty() {
        return Err(CsuvError::EmptySupport);
    }
    let n = x.nrows();
    let xs = x.select_columns(support);
    let assignment = fold_assignment(n, folds, seed)?;
    let mut sse = vec![0.0; path.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let held: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        let solver = RidgeSolver::new(&xs.select_rows(&train), &y.select_rows(&train));
        for (k, &lambda) in path.values().iter().enumerate() {
            let m = solver.solve(lambda);
            sse[k] += held
                .iter()
                .map(|&i| {
                    let e = y[i] - m.predict_row(&xs, i);
                    e * e
                })
                .sum::<f64>();
        }
    }
    let cv_errors: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let lambda_index = argmin_first(&cv_errors);
    let lambda = path.values()[lambda_index];
    let model = relabel(&RidgeSolver::new(&xs, y).solve(lambda), support);
    Ok(RidgeCv {
        lambda,
        lambda_index,
        cv_errors,
        model,
    })
}

/// Index of the smallest value; the earliest wins ties.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if v.total_cmp(&values[best]).is_lt() {
            best = k;
        }
    }
    best
}
