//! Mismatch-index reports from three kinds of input: exact conjugate
//! Gaussian-location moments, an NIG regression fit (bagged by Monte
//! Carlo), or raw draw matrices from any sampler.

use bayesbag::conjugate::{gl_bagged_moments_exact, gl_posterior, GaussianLocationModel, NigModel};
use bayesbag::conjugate::nig_posterior;
use bayesbag::core::{child_seed, BootstrapPlan, Dataset, FunctionOfInterest};
use bayesbag::diagnostics::{MismatchReport, VariancePair};
use bayesbag::engine::{bag, mixture_mean_var, DrawMatrix, PosteriorSummary};
use clap::Args;
use nalgebra::DMatrix;

use crate::commands::{read_matrix, write_output};
use crate::config::{render_resolved, resolve};
use crate::{CliError, Ctx};

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Input kind: gaussian-location, nig, or draws
    #[arg(long)]
    mode: Option<String>,
    /// Data CSV for the conjugate modes (rows: observation coordinates,
    /// or y,z1..zD for nig)
    #[arg(long)]
    data: Option<String>,
    /// Observation variance V for gaussian-location
    #[arg(long)]
    v: Option<f64>,
    /// Prior variance: V0 for gaussian-location, or the per-function prior
    /// variance in draws mode
    #[arg(long)]
    v0: Option<f64>,
    /// Bootstrap size used for the bagged variance (default: n)
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    b0: Option<f64>,
    /// Bootstrap replicates for the nig mode's Monte Carlo bag
    #[arg(long)]
    b: Option<usize>,
    /// Draw matrix CSV from the standard posterior (draws mode)
    #[arg(long)]
    std_draws: Option<String>,
    /// Draw matrix CSV from the bagged posterior at M = N (draws mode)
    #[arg(long)]
    bag_draws: Option<String>,
    /// Number of observations behind the draws (draws mode)
    #[arg(long)]
    n: Option<usize>,
    /// Function of interest: all-coordinates, coordinate:K, log-sum-squares
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

const SECTION: &str = "diagnose";

fn gl_report(
    data: &Dataset,
    v: f64,
    v0: f64,
    m: usize,
) -> Result<MismatchReport, CliError> {
    let d = data.width();
    let model = GaussianLocationModel::new(
        DMatrix::identity(d, d) * v,
        DMatrix::identity(d, d) * v0,
    )
    .map_err(|e| CliError::config(e.to_string()))?;
    let post = gl_posterior(&model, data, None)?;
    let (_, bag_cov) = gl_bagged_moments_exact(&model, data, m)?;
    let pairs: Vec<(String, VariancePair)> = (0..d)
        .map(|j| {
            (
                format!("theta_{}", j + 1),
                VariancePair::new(post.cov()[(j, j)], bag_cov[(j, j)], data.len())
                    .with_prior_variance(v0),
            )
        })
        .collect();
    Ok(MismatchReport::from_pairs(&pairs)?)
}

fn nig_report(
    data: &Dataset,
    model: &NigModel,
    m: usize,
    b: usize,
    seed: u64,
) -> Result<MismatchReport, CliError> {
    let d = data.width() - 1;
    let std_post = nig_posterior(model, data, None)?;
    let std_summary = PosteriorSummary::Nig(std_post);
    let plan = BootstrapPlan::new(m, b, seed)?;
    let bagged = bag(model, data, &plan)?;
    let pairs: Vec<(String, VariancePair)> = (0..=d)
        .map(|j| -> Result<_, CliError> {
            let f = FunctionOfInterest::coordinate(j);
            let (_, v_n) = std_summary.f_mean_var(&f)?;
            let (_, v_bag) = mixture_mean_var(&bagged, &f)?;
            let (label, v0) = if j == 0 {
                ("log_sigma2".to_string(), model.prior_logsigma2_variance())
            } else {
                (format!("beta_{j}"), model.prior_beta_variance()?)
            };
            Ok((label, VariancePair::new(v_n, v_bag, data.len()).with_prior_variance(v0)))
        })
        .collect::<Result<_, _>>()?;
    Ok(MismatchReport::from_pairs(&pairs)?)
}

fn parse_functions(spec: &str, dim: usize) -> Result<Vec<FunctionOfInterest>, CliError> {
    match spec {
        "all-coordinates" => Ok((0..dim).map(FunctionOfInterest::coordinate).collect()),
        "log-sum-squares" => Ok(vec![FunctionOfInterest::log_sum_of_squares(0, dim)
            .with_label("log_sum_squares")]),
        other => match other.strip_prefix("coordinate:") {
            Some(k) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| CliError::config(format!("bad function '{other}'")))?;
                if k >= dim {
                    return Err(CliError::config(format!(
                        "coordinate {k} out of range for dimension {dim}"
                    )));
                }
                Ok(vec![FunctionOfInterest::coordinate(k)])
            }
            None => Err(CliError::config(format!(
                "unknown function '{other}' (expected all-coordinates, coordinate:K, log-sum-squares)"
            ))),
        },
    }
}

fn draws_report(
    std_draws: &DrawMatrix,
    bag_draws: &DrawMatrix,
    n: usize,
    v0: Option<f64>,
    function_spec: &str,
) -> Result<MismatchReport, CliError> {
    if std_draws.dim() != bag_draws.dim() {
        return Err(CliError::config(format!(
            "draw dimensions differ: {} vs {}",
            std_draws.dim(),
            bag_draws.dim()
        )));
    }
    let functions = parse_functions(function_spec, std_draws.dim())?;
    let pairs: Vec<(String, VariancePair)> = functions
        .iter()
        .map(|f| -> Result<_, CliError> {
            let (_, v_n) = std_draws.f_mean_var(f)?;
            let (_, v_bag) = bag_draws.f_mean_var(f)?;
            let mut vp = VariancePair::new(v_n, v_bag, n);
            if let Some(v0) = v0 {
                vp = vp.with_prior_variance(v0);
            }
            Ok((f.label.clone(), vp))
        })
        .collect::<Result<_, _>>()?;
    Ok(MismatchReport::from_pairs(&pairs)?)
}

pub fn run(ctx: &Ctx, args: &DiagnoseArgs) -> Result<(), CliError> {
    let get = |key: &str| ctx.file.get(SECTION, key);
    let mode = resolve(get("mode"), args.mode.clone(), "gaussian-location".to_string(), "mode")?;
    let out_name = resolve(get("out"), args.out.clone(), "mismatch.json".to_string(), "out")?;
    let m_raw = resolve(get("m"), args.m, 0usize, "m")?;

    let mut resolved_entries: Vec<(&str, String)> = vec![("mode", mode.clone())];
    let report = match mode.as_str() {
        "gaussian-location" => {
            let data_path = resolve(get("data"), args.data.clone(), String::new(), "data")?;
            if data_path.is_empty() {
                return Err(CliError::config("gaussian-location mode requires data=".into()));
            }
            let rows = read_matrix(std::path::Path::new(&data_path))?;
            let data = Dataset::from_rows(&rows).map_err(|e| CliError::config(e.to_string()))?;
            let v = resolve(get("v"), args.v, 1.0f64, "v")?;
            let v0 = resolve(get("v0"), args.v0, 1.0f64, "v0")?;
            let m = if m_raw == 0 { data.len() } else { m_raw };
            resolved_entries.extend([
                ("data", data_path.clone()),
                ("v", v.to_string()),
                ("v0", v0.to_string()),
                ("m", m.to_string()),
            ]);
            gl_report(&data, v, v0, m)?
        }
        "nig" => {
            let data_path = resolve(get("data"), args.data.clone(), String::new(), "data")?;
            if data_path.is_empty() {
                return Err(CliError::config("nig mode requires data=".into()));
            }
            let rows = read_matrix(std::path::Path::new(&data_path))?;
            let data = Dataset::from_rows(&rows).map_err(|e| CliError::config(e.to_string()))?;
            if data.width() < 2 {
                return Err(CliError::config("nig data rows must be y,z1,...,zD".into()));
            }
            let lambda = resolve(get("lambda"), args.lambda, 1.0f64, "lambda")?;
            let a0 = resolve(get("a0"), args.a0, 2.0f64, "a0")?;
            let b0 = resolve(get("b0"), args.b0, 1.0f64, "b0")?;
            let b = resolve(get("b"), args.b, 100usize, "b")?;
            if a0 <= 1.0 {
                return Err(CliError::config("nig mode needs a0 > 1 for prior variances".into()));
            }
            let m = if m_raw == 0 { data.len() } else { m_raw };
            let model = NigModel::new(a0, b0, lambda).map_err(|e| CliError::config(e.to_string()))?;
            resolved_entries.extend([
                ("data", data_path.clone()),
                ("lambda", lambda.to_string()),
                ("a0", a0.to_string()),
                ("b0", b0.to_string()),
                ("b", b.to_string()),
                ("m", m.to_string()),
            ]);
            nig_report(&data, &model, m, b, child_seed(ctx.master_seed, 1))?
        }
        "draws" => {
            let std_path = resolve(get("std_draws"), args.std_draws.clone(), String::new(), "std_draws")?;
            let bag_path = resolve(get("bag_draws"), args.bag_draws.clone(), String::new(), "bag_draws")?;
            if std_path.is_empty() || bag_path.is_empty() {
                return Err(CliError::config("draws mode requires std_draws= and bag_draws=".into()));
            }
            let n = resolve(get("n"), args.n, 0usize, "n")?;
            if n == 0 {
                return Err(CliError::config("draws mode requires n = number of observations".into()));
            }
            let function = resolve(
                get("function"),
                args.function.clone(),
                "all-coordinates".to_string(),
                "function",
            )?;
            let v0 = match (get("v0"), args.v0) {
                (_, Some(v)) => Some(v),
                (Some(raw), None) => Some(raw.parse::<f64>().map_err(|_| {
                    CliError::config(format!("invalid value '{raw}' for v0"))
                })?),
                (None, None) => None,
            };
            let load = |path: &str| -> Result<DrawMatrix, CliError> {
                let rows = read_matrix(std::path::Path::new(path))?;
                let dim = rows[0].len();
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                DrawMatrix::new(flat, dim).map_err(|e| CliError::config(e.to_string()))
            };
            resolved_entries.extend([
                ("std_draws", std_path.clone()),
                ("bag_draws", bag_path.clone()),
                ("n", n.to_string()),
                ("function", function.clone()),
            ]);
            if let Some(v0) = v0 {
                resolved_entries.push(("v0", v0.to_string()));
            }
            draws_report(&load(&std_path)?, &load(&bag_path)?, n, v0, &function)?
        }
        other => {
            return Err(CliError::config(format!(
                "unknown mode '{other}' (expected gaussian-location, nig, draws)"
            )))
        }
    };

    write_output(&ctx.out_dir, &out_name, &crate::jsonfmt::to_string(&report)?)?;
    resolved_entries.push(("out", out_name.clone()));
    let resolved = render_resolved(&ctx.global_entries(), SECTION, &resolved_entries);
    write_output(&ctx.out_dir, "diagnose.resolved.cfg", &resolved)?;
    Ok(())
}
