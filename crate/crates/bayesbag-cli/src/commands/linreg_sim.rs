//! Linear-regression simulation study driver: a grid of setting labels
//! crossed with prior strengths, one CSV row per replicate, plus a JSON
//! summary of medians, quartiles, and NA fractions.

use bayesbag::core::child_seed;
use bayesbag::simharness::{
    run_study, study_csv, summarize, CoefSetting, RegressionFn, RegressorSetting, SimConfig,
};
use clap::Args;

use crate::commands::write_output;
use crate::config::{render_resolved, resolve};
use crate::{CliError, Ctx};

#[derive(Args, Debug)]
pub struct LinregSimArgs {
    /// Observations per dataset
    #[arg(long)]
    n: Option<usize>,
    /// Regressor dimension
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated setting labels: default, nonlinear, correlated, k-sparse
    #[arg(long)]
    settings: Option<String>,
    /// Comma-separated prior precision scales
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    b0: Option<f64>,
    /// Replicates per configuration
    #[arg(long)]
    replicates: Option<usize>,
    /// Bootstrap replicates per bag
    #[arg(long)]
    b: Option<usize>,
    /// Noise standard deviation (0 = noiseless sanity hook)
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    csv_out: Option<String>,
    #[arg(long)]
    summary_out: Option<String>,
}

fn parse_setting(label: &str) -> Result<(RegressorSetting, RegressionFn, CoefSetting), CliError> {
    match label {
        "default" => Ok((RegressorSetting::Uncorrelated, RegressionFn::Linear, CoefSetting::Dense)),
        "nonlinear" => Ok((
            RegressorSetting::Uncorrelated,
            RegressionFn::Nonlinear,
            CoefSetting::Dense,
        )),
        "correlated" => Ok((
            RegressorSetting::Correlated,
            RegressionFn::Linear,
            CoefSetting::Dense,
        )),
        other => {
            if let Some(k) = other.strip_suffix("-sparse") {
                let k: usize = k
                    .parse()
                    .map_err(|_| CliError::config(format!("bad sparse setting '{other}'")))?;
                Ok((RegressorSetting::Uncorrelated, RegressionFn::Linear, CoefSetting::Sparse(k)))
            } else {
                Err(CliError::config(format!(
                    "unknown setting '{other}' (expected default, nonlinear, correlated, or k-sparse)"
                )))
            }
        }
    }
}

const SECTION: &str = "linreg-sim";

pub fn run(ctx: &Ctx, args: &LinregSimArgs) -> Result<(), CliError> {
    let get = |key: &str| ctx.file.get(SECTION, key);
    let n = resolve(get("n"), args.n, 50usize, "n")?;
    let d = resolve(get("d"), args.d, 10usize, "d")?;
    let settings_raw = resolve(get("settings"), args.settings.clone(), "default".to_string(), "settings")?;
    let lambda_raw = resolve(get("lambda"), args.lambda.clone(), "1".to_string(), "lambda")?;
    let a0 = resolve(get("a0"), args.a0, 2.0f64, "a0")?;
    let b0 = resolve(get("b0"), args.b0, 1.0f64, "b0")?;
    let replicates = resolve(get("replicates"), args.replicates, 50usize, "replicates")?;
    let b = resolve(get("b"), args.b, 100usize, "b")?;
    let noise_sd = resolve(get("noise_sd"), args.noise_sd, 1.0f64, "noise_sd")?;
    let csv_out = resolve(get("csv_out"), args.csv_out.clone(), "study.csv".to_string(), "csv_out")?;
    let summary_out = resolve(
        get("summary_out"),
        args.summary_out.clone(),
        "study_summary.json".to_string(),
        "summary_out",
    )?;

    let settings: Vec<&str> = settings_raw.split(',').map(str::trim).collect();
    let lambdas: Vec<f64> = lambda_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("bad lambda value '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if settings.is_empty() || lambdas.is_empty() {
        return Err(CliError::config("settings and lambda must be nonempty".into()));
    }

    let mut configs = Vec::new();
    for label in &settings {
        let (regressors, regression_fn, coefs) = parse_setting(label)?;
        for &lambda in &lambdas {
            let index = configs.len() as u64;
            configs.push(SimConfig {
                n,
                d,
                regressors,
                regression_fn,
                coefs,
                lambda,
                a0,
                b0,
                replicates,
                b,
                master_seed: child_seed(ctx.master_seed, index),
                noise_sd,
            });
        }
    }

    let study = run_study(&configs).map_err(CliError::from)?;
    write_output(&ctx.out_dir, &csv_out, &study_csv(&study))?;
    write_output(&ctx.out_dir, &summary_out, &crate::jsonfmt::to_string(&summarize(&study))?)?;

    let resolved = render_resolved(
        &ctx.global_entries(),
        SECTION,
        &[
            ("n", n.to_string()),
            ("d", d.to_string()),
            ("settings", settings.join(",")),
            ("lambda", lambdas.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")),
            ("a0", a0.to_string()),
            ("b0", b0.to_string()),
            ("replicates", replicates.to_string()),
            ("b", b.to_string()),
            ("noise_sd", noise_sd.to_string()),
            ("csv_out", csv_out.clone()),
            ("summary_out", summary_out.clone()),
        ],
    );
    write_output(&ctx.out_dir, "linreg-sim.resolved.cfg", &resolved)?;
    Ok(())
}
