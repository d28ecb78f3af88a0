//! `csuv generate`

use std::fs::File;
use std::io::BufWriter;

use anyhow::{Context, Result};
use csuv::simgen::{generate, ModelSpec};

use crate::args::{GenerateArgs, ModelArg};
use crate::data::{default_names, write_dataset};
use crate::fit::classify;
use crate::input_error;

pub fn model_spec(args: &GenerateArgs) -> Result<ModelSpec> {
    let param = |name: &str| args.param.ok_or_else(|| input_error(format!("--model {:?} needs --param ({name})", args.model)));
    let spec = match args.model {
        ModelArg::M1 => ModelSpec::model1(args.n, args.sigma),
        ModelArg::M2 => ModelSpec::model2(args.n, args.p, args.s, param("rho")?),
        ModelArg::M3 => ModelSpec::model3(args.n, args.p, args.s, param("block correlation")?),
        ModelArg::M4 => {
            let f = param("factor count")?;
            if f.fract() != 0.0 || f < 1.0 {
                return Err(input_error(format!("factor count must be a positive integer, got {f}")));
            }
            ModelSpec::model4(args.n, args.p, args.s, f as usize)
        }
        ModelArg::M5 => ModelSpec::model5(args.n, args.p, args.s, param("rho")?),
    };
    let spec = ModelSpec {
        sigma: args.sigma,
        test_rows: 0,
        ..spec
    };
    spec.validate().map_err(classify)?;
    Ok(spec)
}

/// Writes the training rows of one realization; covariates are already
/// standardized.
pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = model_spec(args)?;
    let data = generate(&spec, args.realization, args.seed).map_err(classify)?;
    let names = default_names(spec.p);
    let out = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_dataset(BufWriter::new(out), &names, data.design.x(), "y", data.design.y())?;
    if let (Some(path), Some(beta)) = (&args.truth, &data.true_beta) {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["covariate", "beta"])?;
        for (name, b) in names.iter().zip(beta.iter()) {
            w.write_record([name.clone(), b.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}
