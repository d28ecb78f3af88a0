//! Scores CSUV and the baselines on simulated realizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    candidates_from_fits, cv_tuned_fits, delete_half_cv_select, select_from_candidates,
    BaselineOptions,
};
use crate::engine::aggregate::quantile_sorted;
use crate::engine::bundle::{conditional_samples, whiskers_cross_zero};
use crate::engine::{run_csuv, CsuvConfig, CsuvRun};
use crate::error::Result;
use crate::metrics::{estimation_score, selection_score, EstimationScore};
use crate::model::LinearModel;
use crate::rng;
use crate::simgen::{generate, GeneratedDataset, ModelSpec};

/// Which competitors to score next to CSUV-m and CSUV-s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Competitors {
    pub constituents: bool,
    pub bic: bool,
    pub ebic: bool,
    pub delete_half_cv: bool,
}

impl Default for Competitors {
    fn default() -> Self {
        Self {
            constituents: true,
            bic: true,
            ebic: true,
            delete_half_cv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub csuv: CsuvConfig,
    pub baselines: BaselineOptions,
    pub competitors: Competitors,
    pub ebic_gamma: f64,
    pub delete_half_repetitions: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            csuv: CsuvConfig::default(),
            baselines: BaselineOptions::default(),
            competitors: Competitors::default(),
            ebic_gamma: 0.5,
            delete_half_repetitions: 100,
        }
    }
}

/// Scores of one method on one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub realization: u64,
    pub method: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f_measure: f64,
    pub test_mse: f64,
    pub l1: f64,
    pub l2: f64,
    pub size: usize,
    pub selected: Vec<usize>,
}

/// Everything computed for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub realization: u64,
    pub scores: Vec<MethodScore>,
    pub csuv: CsuvRun,
}

fn score(data: &GeneratedDataset, realization: u64, method: &str, model: &LinearModel) -> MethodScore {
    let selected = model.support();
    let sel = selection_score(&selected, &data.true_support);
    let test_mse = if data.test_y.is_empty() { f64::NAN } else { data.test_mse(model) };
    let est = match &data.true_beta {
        Some(beta) => estimation_score(&model.dense(data.design.p()), beta, test_mse),
        None => EstimationScore {
            l1: f64::NAN,
            l2: f64::NAN,
            test_mse,
        },
    };
    MethodScore {
        realization,
        method: method.to_string(),
        tp: sel.tp,
        fp: sel.fp,
        fn_: sel.fn_,
        f_measure: sel.f_measure,
        test_mse: est.test_mse,
        l1: est.l1,
        l2: est.l2,
        size: selected.len(),
        selected,
    }
}

/// Seeds for the ensemble and the tuning of realization `r`.
fn method_seeds(seed: u64, realization: u64) -> (u64, u64) {
    let mut s = rng::stream(seed.wrapping_add(0x9e37_79b9_7f4a_7c15), realization);
    (rng::child_seed(&mut s), rng::child_seed(&mut s))
}

/// Generates realization `r` of `spec` and scores every enabled method.
pub fn evaluate_realization(
    spec: &ModelSpec,
    config: &StudyConfig,
    seed: u64,
    realization: u64,
) -> Result<RealizationOutcome> {
    let data = generate(spec, realization, seed)?;
    evaluate_dataset(&data, config, seed, realization)
}

/// Scores every enabled method on a given dataset.
pub fn evaluate_dataset(
    data: &GeneratedDataset,
    config: &StudyConfig,
    seed: u64,
    realization: u64,
) -> Result<RealizationOutcome> {
    let (ensemble_seed, tuning_seed) = method_seeds(seed, realization);
    let csuv_config = CsuvConfig {
        seed: ensemble_seed,
        ..config.csuv.clone()
    };
    let run = run_csuv(&data.design, &csuv_config)?;
    let mut scores = vec![
        score(data, realization, "CSUV-m", &run.result.final_m),
        score(data, realization, "CSUV-s", &run.result.final_s),
    ];
    let (x, y) = (data.design.x(), data.design.y());
    let methods = &config.csuv.methods;
    let c = config.competitors;
    if c.constituents || c.bic || c.ebic {
        let fits = cv_tuned_fits(x, y, methods, tuning_seed, &config.baselines)?;
        if c.constituents {
            for (m, fit) in methods.iter().zip(&fits) {
                scores.push(score(data, realization, &m.to_string(), &fit.model));
            }
        }
        let candidates = candidates_from_fits(x, y, &fits);
        for (enabled, label, gamma) in [(c.bic, "BIC", 0.0), (c.ebic, "eBIC", config.ebic_gamma)] {
            if enabled {
                let choice = select_from_candidates(&candidates, data.design.n(), data.design.p(), gamma)?;
                scores.push(score(data, realization, label, &choice.chosen.model));
            }
        }
    }
    if c.delete_half_cv {
        let dh = delete_half_cv_select(
            x,
            y,
            methods,
            config.delete_half_repetitions,
            ensemble_seed,
            &config.baselines,
        )?;
        scores.push(score(data, realization, "delete-n/2 CV", &dh.fit.model));
    }
    Ok(RealizationOutcome {
        realization,
        scores,
        csuv: run,
    })
}

/// Realizations `0..realizations`, in parallel; results in realization
/// order, failures kept in place.
pub fn run_study(
    spec: &ModelSpec,
    config: &StudyConfig,
    seed: u64,
    realizations: u64,
) -> Vec<Result<RealizationOutcome>> {
    (0..realizations)
        .into_par_iter()
        .map(|r| evaluate_realization(spec, config, seed, r))
        .collect()
}

/// Mean and sample standard deviation of each score column for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub realizations: usize,
    pub fp: (f64, f64),
    pub fn_: (f64, f64),
    pub fp_plus_fn: (f64, f64),
    pub f_measure: (f64, f64),
    pub test_mse: (f64, f64),
    pub l1: (f64, f64),
    pub l2: (f64, f64),
    pub size: (f64, f64),
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// One row per method, in first-seen order.
pub fn summarize_scores(scores: &[MethodScore]) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = Vec::new();
    for s in scores {
        if !methods.contains(&s.method.as_str()) {
            methods.push(&s.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let rows: Vec<&MethodScore> = scores.iter().filter(|s| s.method == m).collect();
            let col = |f: &dyn Fn(&MethodScore) -> f64| mean_sd(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                method: m.to_string(),
                realizations: rows.len(),
                fp: col(&|r| r.fp as f64),
                fn_: col(&|r| r.fn_ as f64),
                fp_plus_fn: col(&|r| (r.fp + r.fn_) as f64),
                f_measure: col(&|r| r.f_measure),
                test_mse: col(&|r| r.test_mse),
                l1: col(&|r| r.l1),
                l2: col(&|r| r.l2),
                size: col(&|r| r.size as f64),
            }
        })
        .collect()
}

/// Among the CSUV-m selections of a run, how many have whiskers that cross
/// zero and how many of each kind are true covariates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WhiskerSplit {
    pub crossing: usize,
    pub crossing_true: usize,
    pub clear: usize,
    pub clear_true: usize,
}

pub fn whisker_split(run: &CsuvRun, truth: &[usize], whisker_pct: [f64; 2]) -> WhiskerSplit {
    let mut out = WhiskerSplit::default();
    for &j in &run.result.selected_m {
        let cond = conditional_samples(&run.collection, j);
        let lo = quantile_sorted(&cond, whisker_pct[0] / 100.0);
        let hi = quantile_sorted(&cond, whisker_pct[1] / 100.0);
        let is_true = truth.contains(&j);
        if whiskers_cross_zero(lo, hi) {
            out.crossing += 1;
            out.crossing_true += usize::from(is_true);
        } else {
            out.clear += 1;
            out.clear_true += usize::from(is_true);
        }
    }
    out
}
