//! Gaussian-location calibration demo: standard vs bagged moments (exact
//! and B-replicate Monte Carlo) and frequentist coverage of 95% central
//! intervals under a configurable true data variance.

use bayesbag::conjugate::{gl_bagged_moments_exact, gl_posterior, GaussianLocationModel};
use bayesbag::core::{child_seed, derive_stream, BootstrapPlan, Dataset, FunctionOfInterest};
use bayesbag::engine::{bag, mc_error, mixture_mean_var, McStatistic};
use bayesbag::special::central_interval_z;
use clap::Args;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::commands::write_output;
use crate::config::{render_resolved, resolve};
use crate::{CliError, Ctx};

#[derive(Args, Debug)]
pub struct GlDemoArgs {
    /// Observations per dataset
    #[arg(long)]
    n: Option<usize>,
    /// Bootstrap dataset size (default: n)
    #[arg(long)]
    m: Option<usize>,
    /// Bootstrap size as a multiple of n (overrides neither --m nor m=)
    #[arg(long)]
    m_factor: Option<f64>,
    /// Modeled observation variance V
    #[arg(long)]
    v: Option<f64>,
    /// Prior variance V0
    #[arg(long)]
    v0: Option<f64>,
    /// True data variance as a multiple of V (1 = well-specified)
    #[arg(long)]
    true_var_scale: Option<f64>,
    /// True mean of the data (the optimal parameter)
    #[arg(long)]
    true_mean: Option<f64>,
    /// Bootstrap replicates for the Monte Carlo bag
    #[arg(long)]
    b: Option<usize>,
    /// Datasets simulated for the coverage estimate
    #[arg(long)]
    replications: Option<usize>,
    /// Output file name
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Serialize)]
struct ResolvedGlDemo {
    n: usize,
    m: usize,
    v: f64,
    v0: f64,
    true_var_scale: f64,
    true_mean: f64,
    b: usize,
    replications: usize,
    master_seed: u64,
}

#[derive(Serialize)]
struct GlDemoOutput {
    schema_version: u32,
    config: ResolvedGlDemo,
    std_mean: f64,
    std_var: f64,
    bag_mean_exact: f64,
    bag_var_exact: f64,
    bag_mean_mc: f64,
    bag_var_mc: f64,
    bag_mean_mc_se: f64,
    bag_var_mc_se: f64,
    coverage_std: f64,
    coverage_bag: f64,
}

const SECTION: &str = "gl-demo";

pub fn run(ctx: &Ctx, args: &GlDemoArgs) -> Result<(), CliError> {
    let get = |key: &str| ctx.file.get(SECTION, key);
    let n = resolve(get("n"), args.n, 200usize, "n")?;
    let m_raw = resolve(get("m"), args.m, 0usize, "m")?;
    let m_factor = resolve(get("m_factor"), args.m_factor, 0.0f64, "m_factor")?;
    let m = match (m_raw, m_factor) {
        (0, f) if f > 0.0 => (f * n as f64).round() as usize,
        (0, _) => n,
        (m, _) => m,
    };
    let cfg = ResolvedGlDemo {
        n,
        m,
        v: resolve(get("v"), args.v, 1.0, "v")?,
        v0: resolve(get("v0"), args.v0, 1.0, "v0")?,
        true_var_scale: resolve(get("true_var_scale"), args.true_var_scale, 1.0, "true_var_scale")?,
        true_mean: resolve(get("true_mean"), args.true_mean, 0.0, "true_mean")?,
        b: resolve(get("b"), args.b, 100usize, "b")?,
        replications: resolve(get("replications"), args.replications, 2000usize, "replications")?,
        master_seed: ctx.master_seed,
    };
    if cfg.n == 0 || cfg.m == 0 || cfg.b < 2 || cfg.replications == 0 {
        return Err(CliError::config("need n >= 1, m >= 1, b >= 2, replications >= 1".into()));
    }
    if !(cfg.v > 0.0 && cfg.v0 > 0.0 && cfg.true_var_scale > 0.0) {
        return Err(CliError::config("v, v0, true_var_scale must be positive".into()));
    }
    let out_name = resolve(get("out"), args.out.clone(), "gl_demo.json".to_string(), "out")?;

    let model = GaussianLocationModel::scalar(cfg.v, cfg.v0).map_err(|e| CliError::config(e.to_string()))?;
    let data_seed = child_seed(cfg.master_seed, 0);
    let normal = Normal::new(cfg.true_mean, (cfg.true_var_scale * cfg.v).sqrt())
        .map_err(|e| CliError::config(e.to_string()))?;
    let make_data = |rep: u64| -> Result<Dataset, CliError> {
        let mut stream = derive_stream(data_seed, rep);
        let xs: Vec<f64> = (0..cfg.n).map(|_| normal.sample(&mut stream)).collect();
        Ok(Dataset::from_scalars(&xs)?)
    };

    // Moments on the first dataset: exact standard and bagged, plus the
    // B-replicate Monte Carlo bag with its error estimates.
    let data0 = make_data(0)?;
    let std_post = gl_posterior(&model, &data0, None)?;
    let (exact_mean, exact_cov) = gl_bagged_moments_exact(&model, &data0, cfg.m)?;
    let plan = BootstrapPlan::new(cfg.m, cfg.b, child_seed(cfg.master_seed, 1))?;
    let mc_bag = bag(&model, &data0, &plan)?;
    let f = FunctionOfInterest::coordinate(0);
    let (bag_mean_mc, bag_var_mc) = mixture_mean_var(&mc_bag, &f)?;

    // Coverage of central 95% intervals over replicate datasets, using the
    // exact posterior and exact bagged moments for each dataset.
    let z = central_interval_z(0.95);
    let (mut cover_std, mut cover_bag) = (0usize, 0usize);
    for rep in 0..cfg.replications {
        let data = make_data(rep as u64)?;
        let post = gl_posterior(&model, &data, None)?;
        if (post.mean()[0] - cfg.true_mean).abs() <= z * post.cov()[(0, 0)].sqrt() {
            cover_std += 1;
        }
        let (bm, bc) = gl_bagged_moments_exact(&model, &data, cfg.m)?;
        if (bm[0] - cfg.true_mean).abs() <= z * bc[(0, 0)].sqrt() {
            cover_bag += 1;
        }
    }

    let output = GlDemoOutput {
        schema_version: 1,
        std_mean: std_post.mean()[0],
        std_var: std_post.cov()[(0, 0)],
        bag_mean_exact: exact_mean[0],
        bag_var_exact: exact_cov[(0, 0)],
        bag_mean_mc,
        bag_var_mc,
        bag_mean_mc_se: mc_error(&mc_bag, &f, McStatistic::Mean)?,
        bag_var_mc_se: mc_error(&mc_bag, &f, McStatistic::Variance)?,
        coverage_std: cover_std as f64 / cfg.replications as f64,
        coverage_bag: cover_bag as f64 / cfg.replications as f64,
        config: cfg,
    };

    write_output(&ctx.out_dir, &out_name, &crate::jsonfmt::to_string(&output)?)?;
    let resolved = render_resolved(
        &ctx.global_entries(),
        SECTION,
        &[
            ("n", output.config.n.to_string()),
            ("m", output.config.m.to_string()),
            ("v", format!("{}", output.config.v)),
            ("v0", format!("{}", output.config.v0)),
            ("true_var_scale", format!("{}", output.config.true_var_scale)),
            ("true_mean", format!("{}", output.config.true_mean)),
            ("b", output.config.b.to_string()),
            ("replications", output.config.replications.to_string()),
            ("out", out_name.clone()),
        ],
    );
    write_output(&ctx.out_dir, "gl-demo.resolved.cfg", &resolved)?;
    Ok(())
}
