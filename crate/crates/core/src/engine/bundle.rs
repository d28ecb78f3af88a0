//! Per-covariate coefficient summaries and the serialized plot bundle.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::aggregate::{quantile_sorted, sort_floats, SignFrequencies};
use crate::engine::{CsuvConfig, CsuvResult, RetainedCollection};
use crate::error::{CsuvError, Result};

pub const BUNDLE_VERSION: &str = "csuv-bundle/1";

/// Smallest `tau` shown in the bundle.
pub const DISPLAY_FLOOR: f64 = 0.1;

/// Number of evaluation points of each violin density.
pub const VIOLIN_POINTS: usize = 64;

/// Box-plot quantiles at 5, 25, 50, 75 and 95 percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Quantiles {
    pub fn of_sorted(sorted: &[f64]) -> Self {
        Self {
            p5: quantile_sorted(sorted, 0.05),
            p25: quantile_sorted(sorted, 0.25),
            p50: quantile_sorted(sorted, 0.50),
            p75: quantile_sorted(sorted, 0.75),
            p95: quantile_sorted(sorted, 0.95),
        }
    }

    fn as_array(&self) -> [f64; 5] {
        [self.p5, self.p25, self.p50, self.p75, self.p95]
    }
}

/// Gaussian kernel density on an even grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Violin {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Silverman's rule of thumb (`0.9 min(sd, IQR / 1.34) n^(-1/5)`), with the
/// usual fallbacks when the spread is zero.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if !(lo > 0.0) {
        lo = if sd > 0.0 {
            sd
        } else if sorted[0] != 0.0 {
            sorted[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * n.powf(-0.2)
}

/// Kernel density estimate over `[min - 3 bw, max + 3 bw]`.
pub fn kernel_density(sorted: &[f64], points: usize) -> Violin {
    if sorted.is_empty() {
        return Violin::default();
    }
    let bw = silverman_bandwidth(sorted);
    let lo = sorted[0] - 3.0 * bw;
    let hi = sorted[sorted.len() - 1] + 3.0 * bw;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    let norm = 1.0 / (sorted.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
    let density = x
        .iter()
        .map(|&at| {
            norm * sorted
                .iter()
                .map(|&v| (-0.5 * ((at - v) / bw).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Violin {
        x,
        density,
        bandwidth: bw,
    }
}

/// Coefficient summary of one covariate over the collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSummary {
    pub index: usize,
    pub count_nonzero: usize,
    pub count_pos: usize,
    pub count_neg: usize,
    pub tau: f64,
    /// Mean over every retained model, zeros included.
    pub mean_coefficient: f64,
    /// Quantiles of the nonzero estimates.
    pub cond_quantiles: Quantiles,
    /// Quantiles of all estimates, zeros included.
    pub uncond_quantiles: Quantiles,
    pub violin: Violin,
}

/// Sorted nonzero estimates of covariate `j` across the collection.
pub fn conditional_samples(collection: &RetainedCollection, j: usize) -> Vec<f64> {
    let mut v: Vec<f64> = collection
        .models
        .iter()
        .filter_map(|m| m.model.coefficients.get(&j).copied())
        .filter(|b| *b != 0.0)
        .collect();
    sort_floats(&mut v);
    v
}

/// Summary of covariate `j`; requires at least one nonzero estimate.
pub fn summarize_covariate(
    collection: &RetainedCollection,
    j: usize,
    freq: &SignFrequencies,
    mean_coefficient: f64,
) -> CovariateSummary {
    let cond = conditional_samples(collection, j);
    assert!(!cond.is_empty(), "covariate {j} is never selected");
    let mut all = cond.clone();
    all.resize(collection.len(), 0.0);
    sort_floats(&mut all);
    CovariateSummary {
        index: j,
        count_nonzero: cond.len(),
        count_pos: freq.count_pos[j],
        count_neg: freq.count_neg[j],
        tau: freq.tau[j],
        mean_coefficient,
        cond_quantiles: Quantiles::of_sorted(&cond),
        uncond_quantiles: Quantiles::of_sorted(&all),
        violin: kernel_density(&cond, VIOLIN_POINTS),
    }
}

/// Coefficients of an outside method, drawn as circles over the boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub coefficients: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(rename = "B")]
    pub repetitions: usize,
    pub q: f64,
    pub w: f64,
    pub t: f64,
    pub methods: Vec<String>,
    pub seed: u64,
}

impl From<&CsuvConfig> for ConfigEcho {
    fn from(c: &CsuvConfig) -> Self {
        Self {
            repetitions: c.repetitions,
            q: c.retention_pct,
            w: c.train_pct,
            t: c.threshold,
            methods: c.methods.iter().map(|m| m.to_string()).collect(),
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Whiskers {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub index: usize,
    pub name: String,
    pub rank: usize,
    pub tau: f64,
    pub tau_pos: f64,
    pub tau_neg: f64,
    pub shade_decile: u8,
    pub count_nonzero: usize,
    pub cond_quantiles: Option<Quantiles>,
    /// Conditional quantiles at the bundle's whisker percentiles.
    pub whiskers: Option<Whiskers>,
    pub violin: Violin,
    pub uncond_quantiles: Quantiles,
    pub mean_coefficient: f64,
    pub csuv_m_coefficient: Option<f64>,
    pub in_csuv_s: bool,
    /// Percentage of comparison fits that select this covariate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group_selection_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoffs {
    /// Number of records left of the CSUV-m line.
    pub m_rank: usize,
    /// Number of records left of the CSUV-s line.
    pub s_rank: usize,
}

/// Everything the interactive plot needs, as one JSON document.
///
/// Coefficients are on the standardized scale of the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBundle {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated_at: Option<String>,
    pub dataset_digest: String,
    pub n: usize,
    pub p: usize,
    pub config: ConfigEcho,
    pub retained_models: usize,
    /// Whisker percentiles, e.g. `[5, 95]`.
    pub whisker_pct: [f64; 2],
    pub selected_m: Vec<usize>,
    pub selected_s: Vec<usize>,
    pub size_threshold_s: usize,
    pub records: Vec<BundleRecord>,
    pub cutoffs: Cutoffs,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
}

/// Inputs of [`build_bundle`] that are not part of the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleOptions {
    /// Column names; `x1, x2, ...` when empty.
    pub names: Vec<String>,
    pub dataset_digest: String,
    pub whisker_pct: [f64; 2],
    pub comparisons: Vec<Comparison>,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            dataset_digest: String::new(),
            whisker_pct: [5.0, 95.0],
            comparisons: Vec::new(),
        }
    }
}

/// SHA-256 over the dimensions, column names and values (little endian) of
/// a dataset.
pub fn dataset_digest(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> String {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for name in names {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
    }
    for v in x.iter().chain(y.iter()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Assembles the plot bundle. A covariate gets a record when its `tau` is at
/// least 0.1 or any comparison fit selects it.
pub fn build_bundle(
    collection: &RetainedCollection,
    result: &CsuvResult,
    config: &CsuvConfig,
    n: usize,
    options: &BundleOptions,
) -> Result<UncertaintyBundle> {
    let p = result.tau.len();
    let [lo_pct, hi_pct] = options.whisker_pct;
    if !(0.0..50.0).contains(&lo_pct) || !(hi_pct > 50.0 && hi_pct <= 100.0) {
        return Err(CsuvError::InvalidConfig(format!(
            "whisker percentiles must satisfy 0 <= low < 50 < high <= 100, got {lo_pct}, {hi_pct}"
        )));
    }
    if !options.names.is_empty() && options.names.len() != p {
        return Err(CsuvError::DimensionMismatch(format!(
            "{} names for {p} covariates",
            options.names.len()
        )));
    }
    for c in &options.comparisons {
        if let Some(&j) = c.coefficients.keys().find(|&&j| j >= p) {
            return Err(CsuvError::DimensionMismatch(format!(
                "comparison '{}' names covariate {j} but p = {p}",
                c.label
            )));
        }
    }
    let compared: BTreeSet<usize> = options
        .comparisons
        .iter()
        .flat_map(|c| c.coefficients.iter().filter(|(_, b)| **b != 0.0).map(|(j, _)| *j))
        .collect();
    let selected_m: BTreeSet<usize> = result.selected_m.iter().copied().collect();
    let selected_s: BTreeSet<usize> = result.selected_s.iter().copied().collect();
    let total = collection.len().max(1);

    let mut records = Vec::new();
    for &j in &result.path_order {
        if result.tau[j] < DISPLAY_FLOOR && !compared.contains(&j) {
            continue;
        }
        let cond = conditional_samples(collection, j);
        let mut all = cond.clone();
        all.resize(collection.len().max(1), 0.0);
        sort_floats(&mut all);
        let summary = result.summary(j);
        let majority = summary.map_or(0, |s| s.count_pos.max(s.count_neg));
        let group_selection_pct = (!options.comparisons.is_empty()).then(|| {
            let hits = options
                .comparisons
                .iter()
                .filter(|c| c.coefficients.get(&j).is_some_and(|b| *b != 0.0))
                .count();
            100.0 * hits as f64 / options.comparisons.len() as f64
        });
        records.push(BundleRecord {
            index: j,
            name: options
                .names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("x{}", j + 1)),
            rank: result.ranks[j],
            tau: result.tau[j],
            tau_pos: result.tau_pos[j],
            tau_neg: result.tau_neg[j],
            shade_decile: (10 * majority / total) as u8,
            count_nonzero: cond.len(),
            cond_quantiles: summary.map(|s| s.cond_quantiles),
            whiskers: (!cond.is_empty()).then(|| Whiskers {
                low: quantile_sorted(&cond, lo_pct / 100.0),
                high: quantile_sorted(&cond, hi_pct / 100.0),
            }),
            violin: summary.map(|s| s.violin.clone()).unwrap_or_default(),
            uncond_quantiles: Quantiles::of_sorted(&all),
            mean_coefficient: result.mean_coefficients[j],
            csuv_m_coefficient: selected_m
                .contains(&j)
                .then(|| result.final_m.coefficient(j)),
            in_csuv_s: selected_s.contains(&j),
            group_selection_pct,
        });
    }
    let m_rank = records.iter().filter(|r| r.rank <= result.selected_m.len()).count();
    let s_rank = records.iter().filter(|r| r.rank <= result.size_threshold_s).count();
    let bundle = UncertaintyBundle {
        version: BUNDLE_VERSION.to_string(),
        generated_at: None,
        dataset_digest: options.dataset_digest.clone(),
        n,
        p,
        config: ConfigEcho::from(config),
        retained_models: collection.len(),
        whisker_pct: options.whisker_pct,
        selected_m: result.selected_m.clone(),
        selected_s: result.selected_s.clone(),
        size_threshold_s: result.size_threshold_s,
        records,
        cutoffs: Cutoffs { m_rank, s_rank },
        comparisons: options.comparisons.clone(),
    };
    bundle.validate()?;
    Ok(bundle)
}

impl UncertaintyBundle {
    /// Checks the structural rules of the format.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CsuvError::InvalidBundle(msg));
        if self.version != BUNDLE_VERSION {
            return bad(format!("unsupported version '{}'", self.version));
        }
        let compared: BTreeSet<usize> = self
            .comparisons
            .iter()
            .flat_map(|c| c.coefficients.iter().filter(|(_, b)| **b != 0.0).map(|(j, _)| *j))
            .collect();
        for pair in self.records.windows(2) {
            if pair[0].rank >= pair[1].rank {
                return bad(format!(
                    "records not sorted by rank at covariate {}",
                    pair[1].index
                ));
            }
        }
        for r in &self.records {
            let ctx = |what: &str| format!("covariate {}: {what}", r.index);
            if r.index >= self.p || r.rank == 0 || r.rank > self.p {
                return bad(ctx("index or rank out of range"));
            }
            if !(0.0..=1.0).contains(&r.tau) || (r.tau - r.tau_pos.max(r.tau_neg)).abs() > 1e-12 {
                return bad(ctx("tau is not max(tau_pos, tau_neg) in [0, 1]"));
            }
            if r.tau < DISPLAY_FLOOR && !compared.contains(&r.index) {
                return bad(ctx("below the display floor"));
            }
            if f64::from(r.shade_decile) != (10.0 * r.tau + 1e-9).floor() {
                return bad(ctx("shade decile does not match tau"));
            }
            if let Some(q) = &r.cond_quantiles {
                let a = q.as_array();
                if a.iter().any(|v| !v.is_finite()) || a.windows(2).any(|w| w[0] > w[1]) {
                    return bad(ctx("conditional quantiles not finite and ordered"));
                }
            }
            if let Some(w) = &r.whiskers {
                if !(w.low.is_finite() && w.high.is_finite() && w.low <= w.high) {
                    return bad(ctx("whiskers not ordered"));
                }
            }
            if r.violin.x.len() != r.violin.density.len() {
                return bad(ctx("violin arrays differ in length"));
            }
        }
        let count = self.records.len();
        if self.cutoffs.m_rank > count || self.cutoffs.s_rank > count {
            return bad(format!("cutoffs {:?} exceed {count} records", self.cutoffs));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self =
            serde_json::from_str(text).map_err(|e| CsuvError::InvalidBundle(e.to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }
}

/// Whether the interval `[low, high]` contains zero.
pub fn whiskers_cross_zero(low: f64, high: f64) -> bool {
    low <= 0.0 && 0.0 <= high
}

/// `(covariate, whiskers contain zero)` for every record with whiskers.
pub fn whisker_zero_diagnostic(bundle: &UncertaintyBundle) -> Vec<(usize, bool)> {
    bundle
        .records
        .iter()
        .filter_map(|r| r.whiskers.map(|w| (r.index, whiskers_cross_zero(w.low, w.high))))
        .collect()
}
