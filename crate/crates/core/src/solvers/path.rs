//! Coordinate descent over a decreasing grid of regularization values.
//!
//! The solver standardizes whatever design it is handed (column mean 0, mean
//! square 1, divisor `n`), centers the response, fits on that scale and maps
//! the coefficients back. The intercept is never penalized. On an
//! already-standardized design the internal transform is the identity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::mean_and_scale;
use crate::error::{CsuvError, Result};
use crate::model::LinearModel;
use crate::solvers::penalty::PenaltySpec;

/// Shape of a default regularization grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub len: usize,
    pub min_ratio: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            len: 100,
            min_ratio: 0.001,
        }
    }
}

/// Convergence controls for coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// A fit is converged once a full sweep moves no standardized coefficient
    /// by more than this.
    pub tol: f64,
    /// Maximum number of sweeps (full or active-set) per grid value. Fits
    /// whose objective stops decreasing give up earlier.
    pub max_sweeps: usize,
    /// Stop the path after the first fit whose fraction of explained
    /// variance reaches this value. `None` fits the whole grid.
    pub saturation: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            saturation: Some(0.999),
        }
    }
}

/// A strictly decreasing sequence of positive regularization values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    values: Vec<f64>,
}

impl LambdaPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CsuvError::InvalidPath("empty path".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CsuvError::InvalidPath("values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CsuvError::InvalidPath("values must be strictly decreasing".into()));
        }
        Ok(Self { values })
    }

    /// `len` values from `lambda_max` down to `min_ratio * lambda_max`,
    /// equally spaced on the log scale.
    pub fn geometric(lambda_max: f64, len: usize, min_ratio: f64) -> Result<Self> {
        if !(lambda_max.is_finite() && lambda_max > 0.0) {
            return Err(CsuvError::DegenerateResponse);
        }
        if len == 0 || !(min_ratio > 0.0 && min_ratio < 1.0 || len == 1) {
            return Err(CsuvError::InvalidPath(format!(
                "need len >= 1 and min_ratio in (0, 1), got len {len}, ratio {min_ratio}"
            )));
        }
        if len == 1 {
            return Self::new(vec![lambda_max]);
        }
        let step = min_ratio.ln() / (len - 1) as f64;
        let mut values: Vec<f64> = (0..len).map(|k| lambda_max * (step * k as f64).exp()).collect();
        values[0] = lambda_max;
        values[len - 1] = lambda_max * min_ratio;
        Self::new(values)
    }

    /// The default grid for `penalty` on `(x, y)`, starting at the smallest
    /// value that zeroes every coefficient.
    pub fn for_problem(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        penalty: &PenaltySpec,
        spec: &PathSpec,
    ) -> Result<Self> {
        Self::geometric(lambda_max(x, y, penalty), spec.len, spec.min_ratio)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fits along a path: one model per grid value that was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFit {
    pub lambdas: Vec<f64>,
    pub models: Vec<LinearModel>,
    pub sweeps: Vec<usize>,
}

impl PathFit {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn supports(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.models.iter().map(LinearModel::support)
    }
}

/// Column-standardized copy of a problem plus the transform back.
#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    pub xs: DMatrix<f64>,
    pub yc: DVector<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub y_mean: f64,
    /// False for columns that are constant on these rows; they stay at zero.
    pub usable: Vec<bool>,
}

impl Standardized {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let mut xs = x.clone();
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        let mut usable = vec![true; p];
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            let (m, s) = mean_and_scale(col.as_slice());
            means[j] = m;
            if s <= 1e-12 * m.abs().max(1.0) {
                usable[j] = false;
                col.fill(0.0);
            } else {
                scales[j] = s;
                col.iter_mut().for_each(|v| *v = (*v - m) / s);
            }
        }
        let y_mean = y.sum() / n as f64;
        let yc = y.map(|v| v - y_mean);
        Self {
            xs,
            yc,
            means,
            scales,
            y_mean,
            usable,
        }
    }

    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn p(&self) -> usize {
        self.xs.ncols()
    }

    /// Standardized coefficients of a model expressed on the input scale.
    pub fn to_standardized(&self, model: &LinearModel) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p());
        for (&j, &b) in &model.coefficients {
            beta[j] = b * self.scales[j];
        }
        beta
    }

    pub fn to_model(&self, beta: &DVector<f64>) -> LinearModel {
        let mut intercept = self.y_mean;
        let mut coefficients = std::collections::BTreeMap::new();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let raw = b / self.scales[j];
                intercept -= raw * self.means[j];
                coefficients.insert(j, raw);
            }
        }
        LinearModel {
            intercept,
            coefficients,
        }
    }

    /// Largest `|x_j' y| / n`.
    pub fn max_correlation(&self) -> f64 {
        let n = self.n() as f64;
        self.xs
            .column_iter()
            .map(|c| (c.dot(&self.yc) * (1.0 / n)).abs())
            .fold(0.0, f64::max)
    }
}

/// Smallest lambda at which every coefficient is zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, penalty: &PenaltySpec) -> f64 {
    let score = Standardized::new(x, y).max_correlation();
    let mut lambda = score * penalty.lambda_max_factor();
    while penalty.zero_bound(lambda) < score {
        lambda = lambda.next_up();
    }
    lambda
}

/// Active-set sweeps before the first attempt to jump to the stationary
/// point of the current piece, and between later attempts.
const NEWTON_FIRST: usize = 25;
const NEWTON_EVERY: usize = 100;

/// Active-set sweeps between progress checks.
const STALL_WINDOW: usize = 100;

/// A window of sweeps that lowers the objective by less than this fraction
/// counts as stalled: the iterates drift along a flat direction of a
/// nonconvex objective and will not meet the tolerance.
const STALL_RELATIVE_DECREASE: f64 = 1e-13;

struct Descent<'a> {
    prob: &'a Standardized,
    penalty: PenaltySpec,
    beta: DVector<f64>,
    resid: DVector<f64>,
    inv_n: f64,
}

impl<'a> Descent<'a> {
    fn new(prob: &'a Standardized, penalty: PenaltySpec, start: DVector<f64>) -> Self {
        let resid = &prob.yc - &prob.xs * &start;
        Self {
            prob,
            penalty,
            beta: start,
            resid,
            inv_n: 1.0 / prob.n() as f64,
        }
    }

    #[inline]
    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let col = self.prob.xs.column(j);
        let old = self.beta[j];
        let z = col.dot(&self.resid) * self.inv_n + old;
        let new = self.penalty.threshold(z, lambda);
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            self.resid.axpy(-delta, &col, 1.0);
        }
        delta.abs()
    }

    fn full_sweep(&mut self, lambda: f64) -> f64 {
        let mut max_change = 0.0f64;
        for j in 0..self.prob.p() {
            if self.prob.usable[j] {
                max_change = max_change.max(self.update(j, lambda));
            }
        }
        max_change
    }

    fn active_sweep(&mut self, active: &[usize], lambda: f64) -> f64 {
        let mut max_change = 0.0f64;
        for &j in active {
            max_change = max_change.max(self.update(j, lambda));
        }
        max_change
    }

    /// Runs to convergence at one lambda. Returns the number of sweeps.
    fn solve(&mut self, lambda: f64, lambda_index: usize, opts: &SolverOptions) -> Result<usize> {
        let mut sweeps = 0usize;
        let mut active = Vec::new();
        loop {
            let change = self.full_sweep(lambda);
            sweeps += 1;
            if change <= opts.tol {
                return Ok(sweeps);
            }
            if sweeps >= opts.max_sweeps {
                return Err(CsuvError::NoConvergence {
                    lambda_index,
                    sweeps,
                    max_change: change,
                });
            }
            active.clear();
            active.extend((0..self.prob.p()).filter(|&j| self.beta[j] != 0.0));
            let mut checkpoint = self.objective(lambda);
            let mut inner = 0usize;
            loop {
                let change = self.active_sweep(&active, lambda);
                sweeps += 1;
                inner += 1;
                if change <= opts.tol {
                    break;
                }
                if inner % NEWTON_EVERY == NEWTON_FIRST {
                    self.newton_step(lambda);
                }
                let stalled = sweeps % STALL_WINDOW == 0 && {
                    let now = self.objective(lambda);
                    let flat = checkpoint - now <= STALL_RELATIVE_DECREASE * now.abs();
                    checkpoint = now;
                    flat
                };
                if stalled || sweeps >= opts.max_sweeps {
                    return Err(CsuvError::NoConvergence {
                        lambda_index,
                        sweeps,
                        max_change: change,
                    });
                }
            }
        }
    }

    /// On the set of nonzero coefficients, with their signs and the pieces of
    /// the penalty they lie on held fixed, the objective is quadratic. When
    /// that quadratic is strictly convex and its minimizer keeps every sign
    /// and piece, the minimizer is the exact solution of the piece and
    /// replaces the iterate. Otherwise nothing changes.
    fn newton_step(&mut self, lambda: f64) -> bool {
        let active: Vec<usize> = (0..self.prob.p()).filter(|&j| self.beta[j] != 0.0).collect();
        let k = active.len();
        if k == 0 || k >= self.prob.n() {
            return false;
        }
        let xa = self.prob.xs.select_columns(&active);
        let mut h = xa.tr_mul(&xa) * self.inv_n;
        let mut rhs = xa.tr_mul(&self.prob.yc) * self.inv_n;
        let mut bounds = Vec::with_capacity(k);
        for (i, &j) in active.iter().enumerate() {
            let b = self.beta[j];
            let (slope, offset, lo, hi) = self.penalty.linearization(b.abs(), lambda);
            h[(i, i)] -= slope;
            rhs[i] -= b.signum() * offset;
            bounds.push((b.signum(), lo, hi));
        }
        let Some(chol) = h.cholesky() else {
            return false;
        };
        let sol = chol.solve(&rhs);
        let consistent = sol.iter().zip(&bounds).all(|(&v, &(sign, lo, hi))| {
            v.signum() == sign && v.abs() > lo && v.abs() <= hi
        });
        if !consistent {
            return false;
        }
        for (i, &j) in active.iter().enumerate() {
            self.beta[j] = sol[i];
        }
        self.resid = &self.prob.yc - &xa * &sol;
        true
    }

    fn objective(&self, lambda: f64) -> f64 {
        self.resid.norm_squared() * 0.5 * self.inv_n
            + self.beta.iter().map(|&b| self.penalty.value(b, lambda)).sum::<f64>()
    }

    fn explained_variance(&self) -> f64 {
        let tss = self.prob.yc.norm_squared();
        if tss == 0.0 {
            return 1.0;
        }
        1.0 - self.resid.norm_squared() / tss
    }
}

/// Fits `penalty` at every value of `path`, warm-starting each fit from the
/// previous one.
pub fn fit_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    path: &LambdaPath,
    opts: &SolverOptions,
) -> Result<PathFit> {
    let (fit, failure) = fit_path_partial(x, y, penalty, path, opts)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(fit),
    }
}

/// Like [`fit_path`], but a grid value that fails to converge ends the path
/// instead of discarding it: the fits before it are returned together with
/// the convergence error.
pub fn fit_path_partial(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    path: &LambdaPath,
    opts: &SolverOptions,
) -> Result<(PathFit, Option<CsuvError>)> {
    penalty.validate()?;
    if x.nrows() != y.len() {
        return Err(CsuvError::DimensionMismatch(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let prob = Standardized::new(x, y);
    let mut cd = Descent::new(&prob, *penalty, DVector::zeros(prob.p()));
    let mut fit = PathFit {
        lambdas: Vec::with_capacity(path.len()),
        models: Vec::with_capacity(path.len()),
        sweeps: Vec::with_capacity(path.len()),
    };
    for (k, &lambda) in path.values().iter().enumerate() {
        let sweeps = match cd.solve(lambda, k, opts) {
            Ok(sweeps) => sweeps,
            Err(e) => return Ok((fit, Some(e))),
        };
        fit.lambdas.push(lambda);
        fit.models.push(prob.to_model(&cd.beta));
        fit.sweeps.push(sweeps);
        if let Some(level) = opts.saturation {
            if cd.explained_variance() >= level {
                break;
            }
        }
    }
    Ok((fit, None))
}

/// Fits a single lambda, starting from `start` (input scale) or from zero.
pub fn fit_single(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    lambda: f64,
    start: Option<&LinearModel>,
    opts: &SolverOptions,
) -> Result<LinearModel> {
    penalty.validate()?;
    let prob = Standardized::new(x, y);
    let init = start.map_or_else(|| DVector::zeros(prob.p()), |m| prob.to_standardized(m));
    let mut cd = Descent::new(&prob, *penalty, init);
    cd.solve(lambda, 0, opts)?;
    Ok(prob.to_model(&cd.beta))
}

/// Penalized least-squares objective `|y - X b|^2 / (2n) + sum pen(|b_j|)`,
/// evaluated on the standardized scale the solver works on.
pub fn objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    lambda: f64,
    model: &LinearModel,
) -> f64 {
    let prob = Standardized::new(x, y);
    standardized_objective(&prob, penalty, lambda, &prob.to_standardized(model))
}

pub(crate) fn standardized_objective(
    prob: &Standardized,
    penalty: &PenaltySpec,
    lambda: f64,
    beta: &DVector<f64>,
) -> f64 {
    let resid = &prob.yc - &prob.xs * beta;
    resid.norm_squared() / (2.0 * prob.n() as f64)
        + beta.iter().map(|&b| penalty.value(b, lambda)).sum::<f64>()
}

/// Largest violation of the stationarity conditions at `model`.
///
/// For a zero coefficient the score `x_j' r / n` must lie within the
/// subgradient interval at zero; for a nonzero one it must equal the signed
/// penalty derivative.
pub fn kkt_violation(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    lambda: f64,
    model: &LinearModel,
) -> f64 {
    let prob = Standardized::new(x, y);
    let beta = prob.to_standardized(model);
    let resid = &prob.yc - &prob.xs * &beta;
    let n = prob.n() as f64;
    (0..prob.p())
        .filter(|&j| prob.usable[j])
        .map(|j| {
            let score = prob.xs.column(j).dot(&resid) / n;
            let b = beta[j];
            if b == 0.0 {
                (score.abs() - penalty.zero_bound(lambda)).max(0.0)
            } else {
                (score - b.signum() * penalty.derivative(b.abs(), lambda)).abs()
            }
        })
        .fold(0.0, f64::max)
}
