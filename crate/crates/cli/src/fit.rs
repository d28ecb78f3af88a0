//! `csuv fit`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use csuv::baselines::{cv_tuned_fits, BaselineOptions};
use csuv::design::StandardizedDesign;
use csuv::engine::{
    build_bundle, dataset_digest, run_csuv, BundleOptions, Comparison, CsuvConfig, CsuvRun,
    UncertaintyBundle,
};
use csuv::model::LinearModel;
use csuv::rng;
use csuv::solvers::PenaltySpec;
use csuv::CsuvError;

use crate::args::FitArgs;
use crate::data::{read_dataset, Dataset};
use crate::{input_error, with_jobs};

/// Smallest dataset the ensemble accepts.
pub const MIN_ROWS: usize = 4;

pub struct FitOutcome {
    pub bundle: UncertaintyBundle,
    pub run: CsuvRun,
    pub report: String,
}

/// Library errors that stem from the input become exit status 2.
pub fn classify(err: CsuvError) -> anyhow::Error {
    match err {
        CsuvError::InvalidConfig(_)
        | CsuvError::InvalidPenalty(_)
        | CsuvError::TooSmall { .. }
        | CsuvError::DimensionMismatch(_)
        | CsuvError::NonFinite { .. }
        | CsuvError::ConstantColumn { .. }
        | CsuvError::InvalidBundle(_) => input_error(err.to_string()),
        other => other.into(),
    }
}

pub fn parse_methods(names: &[String]) -> Result<Vec<PenaltySpec>> {
    names.iter().map(|m| m.parse::<PenaltySpec>().map_err(classify)).collect()
}

pub fn csuv_config(args: &FitArgs) -> Result<CsuvConfig> {
    let config = CsuvConfig {
        repetitions: args.repetitions,
        retention_pct: args.retention_pct,
        train_pct: args.train_pct,
        threshold: args.threshold,
        methods: parse_methods(&args.methods)?,
        seed: args.seed,
        ..CsuvConfig::default()
    };
    config.validate().map_err(classify)?;
    Ok(config)
}

fn whisker_pct(values: &[f64]) -> Result<[f64; 2]> {
    match values {
        &[lo, hi] if (0.0..50.0).contains(&lo) && hi > 50.0 && hi <= 100.0 => Ok([lo, hi]),
        _ => Err(input_error(format!(
            "--whiskers needs two percentiles low,high with 0 <= low < 50 < high <= 100, got {values:?}"
        ))),
    }
}

fn standardize(data: &Dataset) -> Result<StandardizedDesign> {
    StandardizedDesign::new(&data.x, &data.y).map_err(|e| match e {
        CsuvError::ConstantColumn { column } => input_error(format!(
            "covariate `{}` is constant and cannot be standardized",
            data.names[column]
        )),
        other => classify(other),
    })
}

/// Reads long-format comparison coefficients `label,covariate,coefficient`
/// and converts them to the standardized scale. Labels keep file order.
pub fn read_comparisons(path: &Path, data: &Dataset, design: &StandardizedDesign) -> Result<Vec<Comparison>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| input_error(format!("cannot open {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| input_error(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| input_error(format!("{}: missing column `{name}`", path.display())))
    };
    let (label_col, cov_col, coef_col) = (col("label")?, col("covariate")?, col("coefficient")?);
    let mut out: Vec<Comparison> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record[label_col].trim();
        let cov = record[cov_col].trim();
        let Some(j) = data.names.iter().position(|n| n == cov) else {
            return Err(input_error(format!("{}: line {line}: unknown covariate `{cov}`", path.display())));
        };
        let raw: f64 = record[coef_col]
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| input_error(format!("{}: line {line}: bad coefficient `{}`", path.display(), &record[coef_col])))?;
        let idx = match out.iter().position(|c| c.label == label) {
            Some(i) => i,
            None => {
                out.push(Comparison {
                    label: label.to_string(),
                    coefficients: BTreeMap::new(),
                });
                out.len() - 1
            }
        };
        if raw != 0.0 {
            out[idx].coefficients.insert(j, raw * design.column_scales()[j]);
        }
    }
    Ok(out)
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitOutcome> {
    let start = Instant::now();
    let data = read_dataset(&args.data, &args.response)?;
    if data.n() < MIN_ROWS {
        return Err(input_error(format!("need at least {MIN_ROWS} rows, got {}", data.n())));
    }
    if data.p() == 0 {
        return Err(input_error("no covariate columns besides the response"));
    }
    let config = csuv_config(args)?;
    let whisker_pct = whisker_pct(&args.whiskers)?;
    let design = standardize(&data)?;
    let mut comparisons = match &args.compare {
        Some(path) => read_comparisons(path, &data, &design)?,
        None => Vec::new(),
    };

    let (run, constituents) = with_jobs(args.jobs, || -> Result<_> {
        let run = run_csuv(&design, &config).map_err(classify)?;
        let constituents = if args.with_constituents {
            let seed = rng::child_seed(&mut rng::stream(config.seed, u64::MAX - 1));
            cv_tuned_fits(design.x(), design.y(), &config.methods, seed, &BaselineOptions::default())?
        } else {
            Vec::new()
        };
        Ok((run, constituents))
    })??;
    for (m, fit) in config.methods.iter().zip(&constituents) {
        comparisons.push(Comparison {
            label: m.to_string(),
            coefficients: fit.model.coefficients.clone(),
        });
    }

    let options = BundleOptions {
        names: data.names.clone(),
        dataset_digest: dataset_digest(&data.x, &data.y, &data.names),
        whisker_pct,
        comparisons,
    };
    let mut bundle = build_bundle(&run.collection, &run.result, &config, data.n(), &options).map_err(classify)?;
    if !args.no_timestamp {
        bundle.generated_at = Some(Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));
    }
    write_file(&args.out, &(bundle.to_json() + "\n"))?;

    let mut report = render_report(args, &data, &design, &config, &run);
    writeln!(report, "runtime: {:.2} s", start.elapsed().as_secs_f64())?;
    print!("{report}");
    if let Some(path) = &args.report {
        write_file(path, &report)?;
    }
    Ok(FitOutcome { bundle, run, report })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn names_of(ids: &[usize], data: &Dataset) -> String {
    if ids.is_empty() {
        return "(none)".into();
    }
    ids.iter().map(|&j| data.names[j].as_str()).collect::<Vec<_>>().join(", ")
}

fn in_path_order(ids: &[usize], ranks: &[usize]) -> Vec<usize> {
    let mut v = ids.to_vec();
    v.sort_by_key(|&j| ranks[j]);
    v
}

fn coefficient_block(out: &mut String, title: &str, model: &LinearModel, order: &[usize], data: &Dataset) {
    let width = order.iter().map(|&j| data.names[j].len()).max().unwrap_or(0).max(11);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "  {:<width$}  {:>14}", "(intercept)", number(model.intercept));
    for &j in order {
        let _ = writeln!(out, "  {:<width$}  {:>14}", data.names[j], number(model.coefficient(j)));
    }
}

fn number(v: f64) -> String {
    if v == 0.0 || (1e-3..1e7).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

/// The text report, without the runtime line.
pub fn render_report(
    args: &FitArgs,
    data: &Dataset,
    design: &StandardizedDesign,
    config: &CsuvConfig,
    run: &CsuvRun,
) -> String {
    let r = &run.result;
    let methods: Vec<String> = config.methods.iter().map(|m| m.to_string()).collect();
    let m_order = in_path_order(&r.selected_m, &r.ranks);
    let s_order = in_path_order(&r.selected_s, &r.ranks);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "data: {} (n = {}, p = {}, response `{}`)",
        args.data.display(),
        data.n(),
        data.p(),
        args.response
    );
    let _ = writeln!(
        out,
        "methods: {}; B = {}, q = {}, w = {}, t = {}, seed = {}",
        methods.join(", "),
        config.repetitions,
        config.retention_pct,
        config.train_pct,
        config.threshold,
        config.seed
    );
    let _ = writeln!(out, "retained models: {}", run.collection.len());
    let _ = writeln!(out);
    let _ = writeln!(out, "CSUV-m ({} covariates, t = {}): {}", m_order.len(), r.threshold, names_of(&m_order, data));
    let _ = writeln!(
        out,
        "CSUV-s ({} covariates, median retained size {}): {}",
        s_order.len(),
        r.size_threshold_s,
        names_of(&s_order, data)
    );
    let _ = writeln!(out);
    coefficient_block(
        &mut out,
        "CSUV-m final coefficients (original units):",
        &design.to_original_scale(&r.final_m),
        &m_order,
        data,
    );
    coefficient_block(
        &mut out,
        "CSUV-s final coefficients (original units):",
        &design.to_original_scale(&r.final_s),
        &s_order,
        data,
    );
    out
}
