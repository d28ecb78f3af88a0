use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Sparse linear predictor `intercept + sum_j coefficients[j] * x_j`.
///
/// The key set of `coefficients` is the model's support.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: BTreeMap<usize, f64>,
}

impl LinearModel {
    pub fn intercept_only(intercept: f64) -> Self {
        Self {
            intercept,
            coefficients: BTreeMap::new(),
        }
    }

    /// Builds a model from a dense coefficient vector, keeping the nonzeros.
    pub fn from_dense(intercept: f64, beta: &DVector<f64>) -> Self {
        let coefficients = beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, &b)| (j, b))
            .collect();
        Self {
            intercept,
            coefficients,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.coefficients.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficient(&self, j: usize) -> f64 {
        self.coefficients.get(&j).copied().unwrap_or(0.0)
    }

    pub fn dense(&self, p: usize) -> DVector<f64> {
        let mut out = DVector::zeros(p);
        for (&j, &b) in &self.coefficients {
            out[j] = b;
        }
        out
    }

    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        self.coefficients
            .iter()
            .fold(self.intercept, |acc, (&j, &b)| acc + b * x[(row, j)])
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::from_element(x.nrows(), self.intercept);
        for (&j, &b) in &self.coefficients {
            out.axpy(b, &x.column(j), 1.0);
        }
        out
    }

    /// Mean squared prediction error over all rows of `x`.
    pub fn mse(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let resid = y - self.predict(x);
        resid.norm_squared() / y.len() as f64
    }

    /// Mean squared prediction error over the listed rows.
    pub fn mse_on_rows(&self, x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize]) -> f64 {
        let ss: f64 = rows
            .iter()
            .map(|&i| {
                let e = y[i] - self.predict_row(x, i);
                e * e
            })
            .sum();
        ss / rows.len() as f64
    }
}
