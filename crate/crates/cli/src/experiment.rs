//! `csuv simulate` and its TOML experiment file.
//!
//! ```toml
//! realizations = 100
//! seed = 1
//! output_dir = "results"
//!
//! [source]
//! kind = "generator"
//! model = "m2"
//! n = 100
//! p = 100
//! s = 5
//! rho = 0.0
//!
//! [csuv]
//! methods = ["lasso", "mcp", "scad"]
//! B = 100
//! q = 0
//!
//! [baselines]
//! delete_half_repetitions = 100
//! ```
//!
//! A `kind = "csv"` source runs the covariate-permutation protocol on a
//! dataset instead (`path`, `response`, `pool`, `keep`, `test_pct`).
//!
//! Output files in the results directory:
//!
//! * `per_realization.csv`: `realization,method,tp,fp,fn,f_measure,test_mse,l1,l2,size,selected`,
//!   one row per realization and method; `selected` lists zero-based
//!   covariate indices separated by `;`,
//! * `summary.csv`: `method,realizations` then mean and standard deviation
//!   of `fp,fn,fp_plus_fn,f_measure,test_mse,l1,l2,size`,
//! * `disagreement.csv`: mean pairwise Jaccard distance between the
//!   methods' selections,
//! * `failures.csv`: `realization,error` for realizations that failed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use csuv::baselines::BaselineOptions;
use csuv::engine::CsuvConfig;
use csuv::metrics::disagreement_matrix;
use csuv::simgen::{generate, permuted_realization, ModelSpec, PermutationProtocol, DEFAULT_TEST_ROWS};
use csuv::study::{evaluate_dataset, summarize_scores, Competitors, MethodScore, RealizationOutcome, StudyConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::SimulateArgs;
use crate::data::{read_dataset, Dataset};
use crate::fit::{classify, parse_methods};
use crate::{input_error, with_jobs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of realizations `m`.
    pub realizations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub source: SourceConfig,
    #[serde(default)]
    pub csuv: CsuvSection,
    #[serde(default)]
    pub baselines: BaselineSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    M1,
    M2,
    M3,
    M4,
    M5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Generator {
        model: ModelName,
        n: usize,
        #[serde(default)]
        p: Option<usize>,
        #[serde(default)]
        s: Option<usize>,
        #[serde(default = "one")]
        sigma: f64,
        /// Models 2 and 5.
        #[serde(default)]
        rho: Option<f64>,
        /// Model 3.
        #[serde(default)]
        corr: Option<f64>,
        /// Model 4.
        #[serde(default)]
        factors: Option<usize>,
        #[serde(default = "default_test_rows")]
        test_rows: usize,
    },
    Csv {
        /// Relative paths are resolved against the experiment file.
        path: PathBuf,
        #[serde(default = "default_response")]
        response: String,
        #[serde(default = "default_pool")]
        pool: usize,
        #[serde(default = "default_keep")]
        keep: usize,
        #[serde(default = "default_test_pct")]
        test_pct: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn default_test_rows() -> usize {
    DEFAULT_TEST_ROWS
}
fn default_response() -> String {
    "y".into()
}
fn default_pool() -> usize {
    PermutationProtocol::default().pool
}
fn default_keep() -> usize {
    PermutationProtocol::default().keep
}
fn default_test_pct() -> f64 {
    PermutationProtocol::default().test_pct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsuvSection {
    pub methods: Vec<String>,
    #[serde(rename = "B")]
    pub repetitions: usize,
    pub q: f64,
    pub w: f64,
    pub t: f64,
}

impl Default for CsuvSection {
    fn default() -> Self {
        let c = CsuvConfig::default();
        Self {
            methods: c.methods.iter().map(|m| m.to_string()).collect(),
            repetitions: c.repetitions,
            q: c.retention_pct,
            w: c.train_pct,
            t: c.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub constituents: bool,
    pub bic: bool,
    pub ebic: bool,
    pub ebic_gamma: f64,
    pub delete_half_cv: bool,
    pub delete_half_repetitions: usize,
    pub folds: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let s = StudyConfig::default();
        Self {
            constituents: s.competitors.constituents,
            bic: s.competitors.bic,
            ebic: s.competitors.ebic,
            ebic_gamma: s.ebic_gamma,
            delete_half_cv: s.competitors.delete_half_cv,
            delete_half_repetitions: s.delete_half_repetitions,
            folds: s.baselines.folds,
        }
    }
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub realizations: u64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub source: Source,
    pub study: StudyConfig,
}

#[derive(Debug, Clone)]
pub enum Source {
    Generator(ModelSpec),
    Csv { data: Dataset, protocol: PermutationProtocol },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| input_error(format!("invalid experiment file: {e}")))
    }

    /// The generator's model spec, checked for the parameters its model needs.
    pub fn model_spec(&self) -> Result<Option<ModelSpec>> {
        let SourceConfig::Generator {
            model,
            n,
            p,
            s,
            sigma,
            rho,
            corr,
            factors,
            test_rows,
        } = self.source
        else {
            return Ok(None);
        };
        let given = [("rho", rho.is_some()), ("corr", corr.is_some()), ("factors", factors.is_some())];
        let wanted = match model {
            ModelName::M1 => None,
            ModelName::M2 | ModelName::M5 => Some("rho"),
            ModelName::M3 => Some("corr"),
            ModelName::M4 => Some("factors"),
        };
        if let Some((key, _)) = given.iter().find(|(key, present)| *present && Some(*key) != wanted) {
            return Err(input_error(format!("`{key}` does not apply to model {model:?}")));
        }
        if let Some((key, _)) = given.iter().find(|(key, present)| !*present && Some(*key) == wanted) {
            return Err(input_error(format!("model {model:?} needs `{key}`")));
        }
        let need = |v: Option<usize>, key: &str| v.ok_or_else(|| input_error(format!("model {model:?} needs `{key}`")));
        let mut spec = match model {
            ModelName::M1 => {
                if p.is_some_and(|p| p != 8) || s.is_some_and(|s| s != 3) {
                    return Err(input_error("model m1 has p = 8 and s = 3"));
                }
                ModelSpec::model1(n, sigma)
            }
            ModelName::M2 => ModelSpec::model2(n, need(p, "p")?, need(s, "s")?, rho.unwrap_or_default()),
            ModelName::M3 => ModelSpec::model3(n, need(p, "p")?, need(s, "s")?, corr.unwrap_or_default()),
            ModelName::M4 => ModelSpec::model4(n, need(p, "p")?, need(s, "s")?, factors.unwrap_or_default()),
            ModelName::M5 => ModelSpec::model5(n, need(p, "p")?, need(s, "s")?, rho.unwrap_or_default()),
        };
        spec.sigma = sigma;
        spec.test_rows = test_rows;
        spec.validate().map_err(classify)?;
        Ok(Some(spec))
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let c = &self.csuv;
        let csuv = CsuvConfig {
            repetitions: c.repetitions,
            retention_pct: c.q,
            train_pct: c.w,
            threshold: c.t,
            methods: parse_methods(&c.methods)?,
            ..CsuvConfig::default()
        };
        csuv.validate().map_err(classify)?;
        let b = &self.baselines;
        if !(b.ebic_gamma.is_finite() && b.ebic_gamma >= 0.0) {
            return Err(input_error(format!("ebic_gamma must be finite and >= 0, got {}", b.ebic_gamma)));
        }
        if b.delete_half_cv && b.delete_half_repetitions == 0 {
            return Err(input_error("delete_half_repetitions must be at least 1"));
        }
        if b.folds < 2 {
            return Err(input_error("folds must be at least 2"));
        }
        Ok(StudyConfig {
            csuv,
            baselines: BaselineOptions {
                folds: b.folds,
                ..BaselineOptions::default()
            },
            competitors: Competitors {
                constituents: b.constituents,
                bic: b.bic,
                ebic: b.ebic,
                delete_half_cv: b.delete_half_cv,
            },
            ebic_gamma: b.ebic_gamma,
            delete_half_repetitions: b.delete_half_repetitions,
        })
    }

    /// Checks everything and loads a CSV source. `base` resolves relative
    /// CSV paths.
    pub fn validate(&self, base: &Path) -> Result<Experiment> {
        if self.realizations == 0 {
            return Err(input_error("realizations must be at least 1"));
        }
        let study = self.study_config()?;
        let source = match &self.source {
            SourceConfig::Generator { .. } => Source::Generator(self.model_spec()?.expect("generator source")),
            SourceConfig::Csv {
                path,
                response,
                pool,
                keep,
                test_pct,
            } => {
                let data = read_dataset(&base.join(path), response)?;
                if *keep == 0 || keep > pool || *pool > data.p() {
                    return Err(input_error(format!(
                        "need 1 <= keep ({keep}) <= pool ({pool}) <= p ({})",
                        data.p()
                    )));
                }
                if !(0.0..100.0).contains(test_pct) {
                    return Err(input_error(format!("test_pct must lie in [0, 100), got {test_pct}")));
                }
                Source::Csv {
                    data,
                    protocol: PermutationProtocol {
                        pool: *pool,
                        keep: *keep,
                        test_pct: *test_pct,
                    },
                }
            }
        };
        Ok(Experiment {
            realizations: self.realizations,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            source,
            study,
        })
    }
}

impl Experiment {
    pub fn evaluate(&self, realization: u64) -> csuv::Result<RealizationOutcome> {
        let data = match &self.source {
            Source::Generator(spec) => generate(spec, realization, self.seed)?,
            Source::Csv { data, protocol } => permuted_realization(&data.x, &data.y, protocol, realization, self.seed)?,
        };
        evaluate_dataset(&data, &self.study, self.seed, realization)
    }

    /// Every realization, in parallel on the current rayon pool; results in
    /// realization order.
    pub fn run(&self) -> Vec<csuv::Result<RealizationOutcome>> {
        (0..self.realizations).into_par_iter().map(|r| self.evaluate(r)).collect()
    }
}

/// What `simulate` wrote.
pub struct SimulationOutcome {
    pub output_dir: PathBuf,
    pub scores: Vec<MethodScore>,
    pub failures: Vec<(u64, String)>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulationOutcome> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| input_error(format!("cannot read {}: {e}", args.config.display())))?;
    let config = ExperimentConfig::from_toml(&text)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let experiment = config.validate(base)?;
    let output_dir = match (&args.out, &experiment.output_dir) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => base.join(dir),
        (None, None) => return Err(input_error("no output directory: pass --out or set output_dir")),
    };
    std::fs::create_dir_all(&output_dir).with_context(|| format!("creating {}", output_dir.display()))?;

    let results = with_jobs(args.jobs, || experiment.run())?;
    let mut scores = Vec::new();
    let mut selections = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in results.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                selections.push(o.scores.iter().map(|s| s.selected.clone()).collect::<Vec<_>>());
                scores.extend(o.scores);
            }
            Err(e) => failures.push((r as u64, e.to_string())),
        }
    }
    write(&output_dir.join("per_realization.csv"), &per_realization_csv(&scores))?;
    write(&output_dir.join("summary.csv"), &summary_csv(&scores))?;
    let methods: Vec<String> = scores
        .iter()
        .take_while(|s| s.realization == scores[0].realization)
        .map(|s| s.method.clone())
        .collect();
    write(&output_dir.join("disagreement.csv"), &disagreement_csv(&methods, &selections))?;
    let mut failed = String::from("realization,error\n");
    for (r, e) in &failures {
        let _ = writeln!(failed, "{r},{}", quote(e));
    }
    write(&output_dir.join("failures.csv"), &failed)?;

    for (r, e) in &failures {
        eprintln!("realization {r} failed: {e}");
    }
    if failures.len() as u64 == experiment.realizations {
        anyhow::bail!("all {} realizations failed", experiment.realizations);
    }
    print!("{}", summary_csv(&scores));
    Ok(SimulationOutcome {
        output_dir,
        scores,
        failures,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn per_realization_csv(scores: &[MethodScore]) -> String {
    let mut out = String::from("realization,method,tp,fp,fn,f_measure,test_mse,l1,l2,size,selected\n");
    for s in scores {
        let selected: Vec<String> = s.selected.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.realization,
            quote(&s.method),
            s.tp,
            s.fp,
            s.fn_,
            s.f_measure,
            s.test_mse,
            s.l1,
            s.l2,
            s.size,
            selected.join(";")
        );
    }
    out
}

pub fn summary_csv(scores: &[MethodScore]) -> String {
    let mut out = String::from("method,realizations");
    for col in ["fp", "fn", "fp_plus_fn", "f_measure", "test_mse", "l1", "l2", "size"] {
        let _ = write!(out, ",{col}_mean,{col}_sd");
    }
    out.push('\n');
    for row in summarize_scores(scores) {
        let _ = write!(out, "{},{}", quote(&row.method), row.realizations);
        for (mean, sd) in [row.fp, row.fn_, row.fp_plus_fn, row.f_measure, row.test_mse, row.l1, row.l2, row.size] {
            let _ = write!(out, ",{mean},{sd}");
        }
        out.push('\n');
    }
    out
}

pub fn disagreement_csv(methods: &[String], selections: &[Vec<Vec<usize>>]) -> String {
    let matrix = disagreement_matrix(selections);
    let mut out = String::from("method");
    for m in methods {
        let _ = write!(out, ",{}", quote(m));
    }
    out.push('\n');
    for (m, row) in methods.iter().zip(&matrix) {
        out.push_str(&quote(m));
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
