//! Column standardization of the design matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{CsuvError, Result};
use crate::model::LinearModel;

/// A design whose columns have mean 0 and mean square 1 (divisor `n`),
/// together with the transform that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDesign {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_means: DVector<f64>,
    column_scales: DVector<f64>,
}

/// Standardizes `raw_x` column by column. The response is kept as is.
pub fn standardize(raw_x: &DMatrix<f64>, y: &DVector<f64>) -> Result<StandardizedDesign> {
    StandardizedDesign::new(raw_x, y)
}

impl StandardizedDesign {
    pub fn new(raw_x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let (n, p) = raw_x.shape();
        if n < 2 || p < 1 {
            return Err(CsuvError::TooSmall {
                rows: n,
                cols: p,
                min_rows: 2,
            });
        }
        if y.len() != n {
            return Err(CsuvError::DimensionMismatch(format!(
                "design has {n} rows but response has {} entries",
                y.len()
            )));
        }
        check_finite(raw_x)?;
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(CsuvError::NonFinite { row, col: p });
        }

        let mut x = raw_x.clone();
        let mut means = DVector::zeros(p);
        let mut scales = DVector::zeros(p);
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (mean, scale) = mean_and_scale(col.as_slice());
            if scale <= f64::EPSILON * mean.abs().max(1.0) {
                return Err(CsuvError::ConstantColumn { column: j });
            }
            col.iter_mut().for_each(|v| *v = (*v - mean) / scale);
            means[j] = mean;
            scales[j] = scale;
        }
        Ok(Self {
            x,
            y: y.clone(),
            column_means: means,
            column_scales: scales,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_means(&self) -> &DVector<f64> {
        &self.column_means
    }

    pub fn column_scales(&self) -> &DVector<f64> {
        &self.column_scales
    }

    /// Applies the stored column transform to raw rows from the same source.
    pub fn transform(&self, raw_rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw_rows.ncols() != self.p() {
            return Err(CsuvError::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.p(),
                raw_rows.ncols()
            )));
        }
        let mut out = raw_rows.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.column_means[j], self.column_scales[j]);
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    /// Maps a model fitted on the standardized columns back to raw units.
    pub fn to_original_scale(&self, model: &LinearModel) -> LinearModel {
        let mut intercept = model.intercept;
        let coefficients = model
            .coefficients
            .iter()
            .map(|(&j, &b)| {
                let raw = b / self.column_scales[j];
                intercept -= raw * self.column_means[j];
                (j, raw)
            })
            .collect();
        LinearModel {
            intercept,
            coefficients,
        }
    }

    /// Rows `rows` of the standardized design and the response.
    pub fn rows(&self, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        (self.x.select_rows(rows), self.y.select_rows(rows))
    }
}

pub(crate) fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    for (j, col) in x.column_iter().enumerate() {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(CsuvError::NonFinite { row: i, col: j });
        }
    }
    Ok(())
}

/// Mean and divisor-`n` standard deviation.
pub(crate) fn mean_and_scale(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / n).sqrt())
}
