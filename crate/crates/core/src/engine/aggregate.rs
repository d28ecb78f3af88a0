//! Frequencies, solution path and the two selection rules computed from the
//! pooled collection of retained models.

use std::cmp::Ordering;

use crate::engine::RetainedCollection;

/// Relative same-sign frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SignFrequencies {
    /// `max(tau_pos, tau_neg)` per covariate.
    pub tau: Vec<f64>,
    pub tau_pos: Vec<f64>,
    pub tau_neg: Vec<f64>,
    pub count_pos: Vec<usize>,
    pub count_neg: Vec<usize>,
}

/// Fraction of retained models giving each covariate a positive and a
/// negative coefficient, and the larger of the two. Zeros count for neither.
pub fn compute_tau(collection: &RetainedCollection, p: usize) -> SignFrequencies {
    let mut count_pos = vec![0usize; p];
    let mut count_neg = vec![0usize; p];
    for fitted in &collection.models {
        for (&j, &b) in &fitted.model.coefficients {
            if b > 0.0 {
                count_pos[j] += 1;
            } else if b < 0.0 {
                count_neg[j] += 1;
            }
        }
    }
    let total = collection.models.len().max(1) as f64;
    let tau_pos: Vec<f64> = count_pos.iter().map(|&c| c as f64 / total).collect();
    let tau_neg: Vec<f64> = count_neg.iter().map(|&c| c as f64 / total).collect();
    let tau = count_pos
        .iter()
        .zip(&count_neg)
        .map(|(&a, &b)| a.max(b) as f64 / total)
        .collect();
    SignFrequencies {
        tau,
        tau_pos,
        tau_neg,
        count_pos,
        count_neg,
    }
}

/// Mean of each coefficient over every retained model, zeros included.
pub fn mean_coefficients(collection: &RetainedCollection, p: usize) -> Vec<f64> {
    let mut sums = vec![0.0; p];
    for fitted in &collection.models {
        for (&j, &b) in &fitted.model.coefficients {
            sums[j] += b;
        }
    }
    let total = collection.models.len().max(1) as f64;
    sums.into_iter().map(|s| s / total).collect()
}

/// Covariates in solution-path order: by `tau` descending, then by the
/// magnitude of the mean coefficient descending, then by index.
pub fn solution_path(tau: &[f64], mean_coefficients: &[f64]) -> Vec<usize> {
    assert_eq!(tau.len(), mean_coefficients.len());
    let mut order: Vec<usize> = (0..tau.len()).collect();
    order.sort_by(|&a, &b| {
        tau[b]
            .total_cmp(&tau[a])
            .then_with(|| mean_coefficients[b].abs().total_cmp(&mean_coefficients[a].abs()))
            .then(a.cmp(&b))
    });
    order
}

/// One-based path positions `R_j` from a path order.
pub fn ranks_from_order(order: &[usize]) -> Vec<usize> {
    let mut ranks = vec![0; order.len()];
    for (pos, &j) in order.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    ranks
}

/// Lower median of a list of sizes.
pub fn lower_median(sizes: &[usize]) -> usize {
    assert!(!sizes.is_empty(), "median of an empty list");
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted[(sorted.len() - 1) / 2]
}

/// Size-thresholded selection: the first `s` covariates of the path, where
/// `s` is the lower median of the retained support sizes capped at the
/// number of covariates with positive `tau`. Returns the sorted set and `s`.
pub fn csuv_s_select(order: &[usize], retained_sizes: &[usize], tau: &[f64]) -> (Vec<usize>, usize) {
    let ever = tau.iter().filter(|&&t| t > 0.0).count();
    let s = lower_median(retained_sizes).min(ever);
    let mut selected = order[..s].to_vec();
    selected.sort_unstable();
    (selected, s)
}

/// Threshold rule `{ j : tau_j >= t }`.
pub fn select_by_threshold(tau: &[f64], threshold: f64) -> Vec<usize> {
    (0..tau.len()).filter(|&j| tau[j] >= threshold).collect()
}

/// Signed selection: `+1` when `tau_pos >= 1/2`, `-1` when `tau_neg >= 1/2`,
/// else `0`.
pub fn signed_selection(freq: &SignFrequencies) -> Vec<i8> {
    freq.tau_pos
        .iter()
        .zip(&freq.tau_neg)
        .map(|(&pos, &neg)| {
            if pos >= 0.5 {
                1
            } else if neg >= 0.5 {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Type-7 (inclusive linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sort_floats(values: &mut [f64]) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
}
