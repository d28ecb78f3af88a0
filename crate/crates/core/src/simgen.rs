//! Synthetic regression data: five Gaussian design laws with sparse
//! coefficient vectors, and the covariate-permutation protocol used to
//! plant known-null covariates in real data.
//!
//! Randomness comes from [`crate::rng`]. Stream 0 of the seed draws the
//! coefficient vector, stream `1 + r` draws realization `r`, so the same
//! coefficients are shared by every realization.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::design::{mean_and_scale, StandardizedDesign};
use crate::error::{CsuvError, Result};
use crate::model::LinearModel;
use crate::rng::{self, ChaCha8Rng};

/// Design law of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    /// `p = 8`, `beta = (3, 1.5, 0, 0, 2, 0, 0, 0)`, `Sigma_km = 0.5^|k - m|`.
    M1,
    /// `Sigma_km = rho^|k - m|`.
    M2Toeplitz { rho: f64 },
    /// Unit diagonal; `corr` between columns whose one-based indices agree
    /// modulo 10, zero elsewhere.
    M3Block { corr: f64 },
    /// `X_k = sum_j f_kj phi_j + eta_k` with standard normal loadings,
    /// factors and noise.
    M4Factor { factors: usize },
    /// `Sigma_km = rho^|k - m|`, `beta_j = 6 / j` on the first `s` columns.
    M5Decay { rho: f64 },
}

/// A generator: design law, sizes and noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma: f64,
    /// Extra rows drawn from the same law for measuring prediction error.
    pub test_rows: usize,
}

pub const DEFAULT_TEST_ROWS: usize = 1000;

impl ModelSpec {
    pub fn model1(n: usize, sigma: f64) -> Self {
        Self {
            kind: ModelKind::M1,
            n,
            p: 8,
            s: 3,
            sigma,
            test_rows: DEFAULT_TEST_ROWS,
        }
    }

    pub fn model2(n: usize, p: usize, s: usize, rho: f64) -> Self {
        Self::with_kind(ModelKind::M2Toeplitz { rho }, n, p, s)
    }

    pub fn model3(n: usize, p: usize, s: usize, corr: f64) -> Self {
        Self::with_kind(ModelKind::M3Block { corr }, n, p, s)
    }

    pub fn model4(n: usize, p: usize, s: usize, factors: usize) -> Self {
        Self::with_kind(ModelKind::M4Factor { factors }, n, p, s)
    }

    pub fn model5(n: usize, p: usize, s: usize, rho: f64) -> Self {
        Self::with_kind(ModelKind::M5Decay { rho }, n, p, s)
    }

    fn with_kind(kind: ModelKind, n: usize, p: usize, s: usize) -> Self {
        Self {
            kind,
            n,
            p,
            s,
            sigma: 1.0,
            test_rows: DEFAULT_TEST_ROWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CsuvError::InvalidConfig(msg));
        if self.n < 2 || self.p < 1 {
            return bad(format!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p));
        }
        if self.s > self.p {
            return bad(format!("s = {} exceeds p = {}", self.s, self.p));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be finite and nonnegative, got {}", self.sigma));
        }
        match self.kind {
            ModelKind::M1 if self.p != 8 || self.s != 3 => {
                bad("model 1 has p = 8 and s = 3".into())
            }
            ModelKind::M2Toeplitz { rho } | ModelKind::M5Decay { rho } if !(rho.abs() < 1.0) => {
                bad(format!("rho must lie in (-1, 1), got {rho}"))
            }
            // the compound-symmetric blocks are positive definite for
            // -1 / (size - 1) < corr < 1
            ModelKind::M3Block { corr } if !(corr < 1.0 && corr > -1.0 / (self.p.div_ceil(10).max(2) - 1) as f64) => {
                bad(format!("block correlation {corr} gives a singular covariance"))
            }
            ModelKind::M4Factor { factors: 0 } => bad("factor model needs at least one factor".into()),
            _ => Ok(()),
        }
    }

    /// Population covariance for the Gaussian laws; the factor model needs
    /// its loadings, see [`factor_covariance`].
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let p = self.p;
        match self.kind {
            ModelKind::M1 => Some(toeplitz(p, 0.5)),
            ModelKind::M2Toeplitz { rho } | ModelKind::M5Decay { rho } => Some(toeplitz(p, rho)),
            ModelKind::M3Block { corr } => Some(DMatrix::from_fn(p, p, |k, m| {
                if k == m {
                    1.0
                } else if (k + 1) % 10 == (m + 1) % 10 {
                    corr
                } else {
                    0.0
                }
            })),
            ModelKind::M4Factor { .. } => None,
        }
    }
}

pub fn toeplitz(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |k, m| rho.powi(k.abs_diff(m) as i32))
}

/// `F F' + I` for loadings `F` (p x J).
pub fn factor_covariance(loadings: &DMatrix<f64>) -> DMatrix<f64> {
    let p = loadings.nrows();
    loadings * loadings.transpose() + DMatrix::identity(p, p)
}

/// Correlation matrix of a covariance matrix.
pub fn correlation(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |k, m| cov[(k, m)] / (d[k] * d[m]))
}

/// The coefficient vector of a generator. Depends on `seed` only through
/// stream 0, never on the realization.
pub fn generate_beta(spec: &ModelSpec, seed: u64) -> Result<DVector<f64>> {
    spec.validate()?;
    let (p, s) = (spec.p, spec.s);
    let mut beta = DVector::zeros(p);
    match spec.kind {
        ModelKind::M1 => {
            beta[0] = 3.0;
            beta[1] = 1.5;
            beta[4] = 2.0;
        }
        ModelKind::M5Decay { .. } => {
            for j in 0..s {
                beta[j] = 6.0 / (j + 1) as f64;
            }
        }
        _ => {
            let mut rng = rng::stream(seed, 0);
            let support = index::sample(&mut rng, p, s).into_vec();
            let magnitude = Uniform::new_inclusive(0.5, 1.5).expect("valid range");
            for (k, &j) in support.iter().enumerate() {
                let sign = if k < s / 2 { 1.0 } else { -1.0 };
                beta[j] = sign * magnitude.sample(&mut rng);
            }
        }
    }
    Ok(beta)
}

/// Rows i.i.d. `N(0, sigma)` as `Z L'` with `L L' = sigma`.
pub fn cholesky_gaussian<R: Rng + ?Sized>(
    sigma: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let l = cholesky_factor(sigma)?;
    let z = standard_normal(n, sigma.nrows(), rng);
    Ok(z * l.transpose())
}

/// Lower Cholesky factor, or the order of the first leading minor that is
/// not positive definite.
pub fn cholesky_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.l());
    }
    let order = (1..=sigma.nrows())
        .find(|&k| sigma.view((0, 0), (k, k)).clone_owned().cholesky().is_none())
        .unwrap_or(sigma.nrows());
    Err(CsuvError::NotPositiveDefinite { order })
}

fn standard_normal<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    // fill row by row so a prefix of rows does not depend on n
    DMatrix::from_row_iterator(n, p, (0..n * p).map(|_| StandardNormal.sample(rng)))
}

/// One simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub design: StandardizedDesign,
    /// Unknown for permuted real data.
    pub true_beta: Option<DVector<f64>>,
    pub true_support: Vec<usize>,
    /// Held-out rows, standardized with the training columns' transform.
    pub test_x: DMatrix<f64>,
    pub test_y: DVector<f64>,
    /// Covariance the raw rows were drawn from, when there is one.
    pub population_covariance: Option<DMatrix<f64>>,
}

impl GeneratedDataset {
    pub fn test_mse(&self, model: &LinearModel) -> f64 {
        model.mse(&self.test_x, &self.test_y)
    }
}

/// Raw (unstandardized) rows of realization `realization`, with the
/// population covariance they were drawn from.
pub fn raw_rows(
    spec: &ModelSpec,
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    match spec.kind {
        ModelKind::M4Factor { factors } => {
            let loadings = standard_normal(spec.p, factors, rng);
            let phi = standard_normal(rows, factors, rng);
            let eta = standard_normal(rows, spec.p, rng);
            Ok((phi * loadings.transpose() + eta, factor_covariance(&loadings)))
        }
        _ => {
            let cov = spec.covariance().expect("gaussian law");
            Ok((cholesky_gaussian(&cov, rows, rng)?, cov))
        }
    }
}

/// Realization `realization` of `spec`: `n` training rows and
/// `spec.test_rows` test rows. Columns are standardized with the training
/// rows' means and scales, then `y = X beta + eps` on both parts.
pub fn generate(spec: &ModelSpec, realization: u64, seed: u64) -> Result<GeneratedDataset> {
    let beta = generate_beta(spec, seed)?;
    let mut rng = rng::stream(seed, 1 + realization);
    let total = spec.n + spec.test_rows;
    let (mut raw, population_covariance) = raw_rows(spec, total, &mut rng)?;
    for (j, mut col) in raw.column_iter_mut().enumerate() {
        let (mean, scale) = mean_and_scale(&col.as_slice()[..spec.n]);
        if scale == 0.0 {
            return Err(CsuvError::ConstantColumn { column: j });
        }
        col.iter_mut().for_each(|v| *v = (*v - mean) / scale);
    }
    let noise = DVector::from_fn(total, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        spec.sigma * z
    });
    let y = &raw * &beta + noise;
    let train_x = raw.rows(0, spec.n).clone_owned();
    let design = StandardizedDesign::new(&train_x, &y.rows(0, spec.n).clone_owned())?;
    let true_support = (0..spec.p).filter(|&j| beta[j] != 0.0).collect();
    Ok(GeneratedDataset {
        design,
        true_support,
        test_x: raw.rows(spec.n, spec.test_rows).clone_owned(),
        test_y: y.rows(spec.n, spec.test_rows).clone_owned(),
        true_beta: Some(beta),
        population_covariance: Some(population_covariance),
    })
}

/// Covariate-permutation protocol for real data: keep `keep` columns drawn
/// from the `pool` most correlated with the response, permute every other
/// column with one common row permutation, then split the rows into a
/// training part and a test part of `test_pct` percent. The kept columns
/// play the true covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationProtocol {
    pub pool: usize,
    pub keep: usize,
    pub test_pct: f64,
}

impl Default for PermutationProtocol {
    fn default() -> Self {
        Self {
            pool: 200,
            keep: 10,
            test_pct: 50.0,
        }
    }
}

/// Realization `realization` of the permutation protocol on raw data.
/// Draws from stream `1 + realization` of `seed`.
pub fn permuted_realization(
    raw_x: &DMatrix<f64>,
    y: &DVector<f64>,
    protocol: &PermutationProtocol,
    realization: u64,
    seed: u64,
) -> Result<GeneratedDataset> {
    let (n, p) = raw_x.shape();
    if y.len() != n {
        return Err(CsuvError::DimensionMismatch(format!(
            "design has {n} rows but response has {} entries",
            y.len()
        )));
    }
    if !(protocol.test_pct >= 0.0 && protocol.test_pct < 100.0) {
        return Err(CsuvError::InvalidConfig(format!(
            "test_pct must lie in [0, 100), got {}",
            protocol.test_pct
        )));
    }
    let mut rng = rng::stream(seed, 1 + realization);
    let pool = protocol.pool.min(p);
    let keep = select_keep_by_marginal_correlation(raw_x, y, pool, protocol.keep, &mut rng)?;
    let permuted = permute_covariates(raw_x, &keep, &mut rng);
    let (train, test) = if protocol.test_pct == 0.0 {
        ((0..n).collect(), Vec::new())
    } else {
        rng::train_test_split(n, 100.0 - protocol.test_pct, &mut rng)
    };
    let design = StandardizedDesign::new(&permuted.select_rows(&train), &y.select_rows(&train))?;
    let test_x = design.transform(&permuted.select_rows(&test))?;
    Ok(GeneratedDataset {
        design,
        true_beta: None,
        true_support: keep,
        test_x,
        test_y: y.select_rows(&test),
        population_covariance: None,
    })
}

/// Applies one random row permutation to every column not in `keep`.
pub fn permute_covariates<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    keep: &[usize],
    rng: &mut R,
) -> DMatrix<f64> {
    let perm = rng::permutation(x.nrows(), rng);
    let mut out = x.clone();
    for j in 0..x.ncols() {
        if keep.contains(&j) {
            continue;
        }
        for (i, &src) in perm.iter().enumerate() {
            out[(i, j)] = x[(src, j)];
        }
    }
    out
}

/// Columns ordered by absolute correlation with `y`, strongest first (ties
/// by index).
pub fn marginal_correlation_order(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<usize> {
    let yc = y.add_scalar(-y.mean());
    let ynorm = yc.norm();
    let corr: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let cc = c.add_scalar(-c.mean());
            let denom = cc.norm() * ynorm;
            if denom > 0.0 {
                (cc.dot(&yc) / denom).abs()
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    order.sort_by(|&a, &b| corr[b].total_cmp(&corr[a]).then(a.cmp(&b)));
    order
}

/// Draws `keep_count` columns uniformly from the `pool_size` columns most
/// correlated with `y`. Returned sorted.
pub fn select_keep_by_marginal_correlation<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    pool_size: usize,
    keep_count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(keep_count <= pool_size && pool_size <= x.ncols()) {
        return Err(CsuvError::InvalidConfig(format!(
            "need keep {keep_count} <= pool {pool_size} <= p {}",
            x.ncols()
        )));
    }
    let pool = &marginal_correlation_order(x, y)[..pool_size];
    let mut keep: Vec<usize> = index::sample(rng, pool_size, keep_count)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    keep.sort_unstable();
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model1_coefficients() {
        let beta = generate_beta(&ModelSpec::model1(50, 1.0), 0).unwrap();
        assert_eq!(beta.as_slice(), &[3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn model5_coefficients() {
        let beta = generate_beta(&ModelSpec::model5(100, 100, 5, 0.5), 9).unwrap();
        assert_eq!(&beta.as_slice()[..6], &[6.0, 3.0, 2.0, 1.5, 1.2, 0.0]);
    }

    #[test]
    fn random_beta_signs_and_magnitudes() {
        let beta = generate_beta(&ModelSpec::model2(100, 100, 5, 0.0), 4).unwrap();
        let pos = beta.iter().filter(|&&b| b > 0.0).count();
        let neg = beta.iter().filter(|&&b| b < 0.0).count();
        assert_eq!((pos, neg), (2, 3));
        assert!(beta.iter().filter(|b| **b != 0.0).all(|b| (0.5..=1.5).contains(&b.abs())));
    }

    #[test]
    fn toeplitz_factor_reproduces_covariance() {
        let sigma = toeplitz(3, 0.9);
        let l = cholesky_factor(&sigma).unwrap();
        let diff = (&l * l.transpose() - &sigma).amax();
        assert!(diff <= 1e-12);
    }

    #[test]
    fn non_positive_definite_reports_minor() {
        let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        assert_eq!(cholesky_factor(&sigma).unwrap_err(), CsuvError::NotPositiveDefinite { order: 3 });
    }

    #[test]
    fn generated_design_is_standardized() {
        let data = generate(&ModelSpec::model3(100, 30, 5, 0.5), 2, 1).unwrap();
        for col in data.design.x().column_iter() {
            assert!((col.sum() / 100.0).abs() <= 1e-10);
            assert!((col.norm_squared() / 100.0 - 1.0).abs() <= 1e-8);
        }
        assert_eq!(data.true_support.len(), 5);
        assert_eq!(data.test_x.nrows(), DEFAULT_TEST_ROWS);
    }

    #[test]
    fn keep_set_is_top_pool_when_sizes_match() {
        let mut r = rng::stream(0, 0);
        let x = DMatrix::from_fn(30, 6, |i, j| ((i * (j + 3)) % 11) as f64 + (i as f64) * (j as f64) * 0.01);
        let y = x.column(4) * 2.0 + x.column(1) * 0.1;
        let order = marginal_correlation_order(&x, &y);
        let keep = select_keep_by_marginal_correlation(&x, &y, 2, 2, &mut r).unwrap();
        let mut top: Vec<usize> = order[..2].to_vec();
        top.sort_unstable();
        assert_eq!(keep, top);
    }

    #[test]
    fn permutation_protocol_keeps_and_splits() {
        let spec = ModelSpec::model2(40, 30, 4, 0.3);
        let mut r = rng::stream(5, 9);
        let (x, _) = raw_rows(&spec, 40, &mut r).unwrap();
        let y = x.column(3) * 2.0 - x.column(7);
        let protocol = PermutationProtocol {
            pool: 10,
            keep: 3,
            test_pct: 25.0,
        };
        let data = permuted_realization(&x, &y, &protocol, 2, 11).unwrap();
        assert_eq!(data.true_support.len(), 3);
        assert_eq!(data.design.n(), 30);
        assert_eq!(data.test_x.nrows(), 10);
        assert!(data.true_beta.is_none());
        let again = permuted_realization(&x, &y, &protocol, 2, 11).unwrap();
        assert_eq!(data, again);
    }
}
