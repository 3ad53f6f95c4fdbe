//! Command-line front end: `simulate`, `fit`, `conjecture`, `diagnose`, `plot`.
//!
//! Every JSON output carries a `config` block echoing the parsed arguments.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::conjecture::{run_conjecture, ConjectureConfig, CorrelationMode, Estimator};
use crate::diagnostics::{dispersion_check, independence_check, subspace_angle, IndependenceReport};
use crate::error::{Error, Result};
use crate::fit::{fit_model3, fit_model5, FitOptions, FitResult, MeanFamily};
use crate::io::{read_dataset, read_json, read_text, write_dataset, write_json, write_text};
use crate::models::{example_2_1, example_2_2, ModelParams, ParamsFile, StiefelFrame, VarianceProfile};
use crate::numerics::SeedSpec;
use crate::plot::plot_svg;
use crate::randcov::{CovKind, CovScheme};

pub const THREADS_ENV: &str = "PVCDR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pvcdr", version, about = "Variance-component inverse regression and principal-component correlation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a preset example or a parameter file and write CSV.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of model 3 or model 5.
    Fit(FitArgs),
    /// Estimate how often the leading principal component wins.
    Conjecture(ConjectureArgs),
    /// Independence and dispersion checks for a fitted frame.
    Diagnose(DiagnoseArgs),
    /// Two-panel SVG: x1 vs y and γᵀx vs y.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Preset: 2.1 (dispersion model) or 2.2 (location-dispersion model).
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    pub example: Option<String>,
    /// JSON parameter file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Mean of the normal y marginal (preset default: 2 for 2.1, 3 for 2.2, else 0).
    #[arg(long)]
    pub y_mean: Option<f64>,
    #[arg(long)]
    pub y_sd: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// 3 (dispersion) or 5 (location-dispersion).
    #[arg(long)]
    pub model: u8,
    #[arg(long)]
    pub data: PathBuf,
    /// Frame dimension (Γ for model 3, Γ₁ for model 5).
    #[arg(long)]
    pub d: usize,
    /// Dimension of Γ₂ (model 5; defaults to the dimension of τ).
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub shared_frame: bool,
    /// Dispersion profile, e.g. `absdev:0:1`, `diagabsdev:0,0:1,2`, `const:2`.
    #[arg(long)]
    pub nu: Option<String>,
    /// Model-5 dispersion profile τ (falls back to `--nu`).
    #[arg(long)]
    pub tau: Option<String>,
    /// `fixed:VALUE` or `estimate`.
    #[arg(long, default_value = "fixed:1.0")]
    pub sigma2: String,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Reference frame: a JSON file (`gamma_hat`, `gamma` or `gamma1`),
    /// inline column-major numbers, or `x1`.
    #[arg(long)]
    pub true_gamma: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConjectureArgs {
    #[arg(long, default_value = "rotation")]
    pub scheme: CovKind,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Outer trials.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Inner sample size for moment estimates.
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = crate::randcov::DEFAULT_C)]
    pub c: f64,
    #[arg(long, default_value = "abs")]
    pub mode: CorrelationMode,
    #[arg(long, default_value = "sample")]
    pub estimator: Estimator,
    #[arg(long, default_value_t = 0.0)]
    pub noise_var: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Frame source, as for `fit --true-gamma`.
    #[arg(long)]
    pub gamma: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Frame source, as for `fit --true-gamma`; `x1` gives identical panels.
    #[arg(long, default_value = "x1")]
    pub gamma: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    config: &'a FitArgs,
    model: u8,
    p: usize,
    d: usize,
    gamma_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma1_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma2_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_slopes: Option<Vec<f64>>,
    sigma2_hat: f64,
    loglik: f64,
    converged: bool,
    iterations: usize,
    start_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    subspace_angle_to: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ConjectureOutput<'a> {
    prob_first_wins: f64,
    mc_stderr: f64,
    winner_histogram: Vec<u64>,
    trials: usize,
    config: &'a ConjectureConfig,
}

#[derive(Debug, Serialize)]
struct DiagnoseOutput<'a> {
    config: &'a DiagnoseArgs,
    p: usize,
    d: usize,
    independence: IndependenceReport,
    dispersion: IndependenceReport,
}

/// Parses a profile spec: `absdev:C:S`, `diagabsdev:C1,..:S1,..` or
/// `const:V` (d = 1).
pub fn parse_profile(spec: &str) -> Result<VarianceProfile> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::config(format!("bad number {s:?} in profile {spec:?}")))
    };
    let list = |s: &str| -> Result<Vec<f64>> { s.split(',').map(num).collect() };
    let profile = match parts.as_slice() {
        ["absdev", c, s] => VarianceProfile::AbsDev {
            center: num(c)?,
            scale: num(s)?,
        },
        ["diagabsdev", c, s] => VarianceProfile::DiagAbsDev {
            centers: list(c)?,
            scales: list(s)?,
        },
        ["const", v] => VarianceProfile::Constant {
            d: 1,
            value: vec![num(v)?],
        },
        _ => {
            return Err(Error::config(format!(
                "unknown profile {spec:?} (expected absdev:C:S, diagabsdev:C,..:S,.. or const:V)"
            )))
        }
    };
    profile.validate()?;
    Ok(profile)
}

/// `(estimate, value)` from `fixed:V` or `estimate`.
pub fn parse_sigma2(spec: &str) -> Result<(bool, f64)> {
    if spec == "estimate" {
        return Ok((true, 1.0));
    }
    let value = spec
        .strip_prefix("fixed:")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::config(format!("bad --sigma2 {spec:?} (expected fixed:VALUE or estimate)")))?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::config("sigma2 must be positive"));
    }
    Ok((false, value))
}

/// Resolves a frame source against dimension `p`: `x1`, inline column-major
/// numbers, or a JSON file with `gamma_hat`, `gamma` or `gamma1`.
pub fn load_frame(spec: &str, p: usize) -> Result<StiefelFrame> {
    if spec == "x1" {
        return StiefelFrame::axes(p, &[0]);
    }
    let inline: Option<Vec<f64>> = spec.split(',').map(|s| s.trim().parse().ok()).collect();
    let values = match inline {
        Some(v) => v,
        None => {
            let path = Path::new(spec);
            let json: serde_json::Value = read_json(path)?;
            let field = ["gamma_hat", "gamma", "gamma1"]
                .iter()
                .find_map(|k| json.get(k))
                .ok_or_else(|| Error::config(format!("{spec}: no gamma_hat, gamma or gamma1 field")))?;
            serde_json::from_value(field.clone())
                .map_err(|e| Error::config(format!("{spec}: frame is not a number array: {e}")))?
        }
    };
    StiefelFrame::from_column_major(p, &values)
}

/// Y-marginal sampler: `n` draws from `N(mean, sd²)`.
pub fn sample_ys(mean: f64, sd: f64, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config("n must be positive"));
    }
    if !(sd >= 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(Error::config("y marginal needs a finite mean and non-negative sd"));
    }
    let dist = Normal::new(mean, sd).map_err(|e| Error::config(format!("bad y marginal: {e}")))?;
    let mut rng = seed.rng();
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Sizes the global rayon pool from `PVCDR_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second initialization (e.g. repeated calls in tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Conjecture(a) => cmd_conjecture(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (params, default_mean) = match (&args.example, &args.params) {
        (Some(ex), _) => match ex.as_str() {
            "2.1" => (ModelParams::Dispersion(example_2_1()), 2.0),
            "2.2" => (ModelParams::LocationDispersion(example_2_2()), 3.0),
            other => return Err(Error::config(format!("unknown example {other:?} (expected 2.1 or 2.2)"))),
        },
        (None, Some(path)) => (read_json::<ParamsFile>(path)?.into_params()?, 0.0),
        (None, None) => return Err(Error::config("simulate needs --example or --params")),
    };
    let ys = sample_ys(
        args.y_mean.unwrap_or(default_mean),
        args.y_sd.unwrap_or(1.0),
        args.n,
        SeedSpec::new(args.seed, 1),
    )?;
    let data = params.sample(&ys, SeedSpec::new(args.seed, 0))?;
    write_dataset(&args.out, &data)
}

fn fit_options(args: &FitArgs) -> Result<FitOptions> {
    let (estimate_sigma2, sigma2) = parse_sigma2(&args.sigma2)?;
    Ok(FitOptions {
        max_iters: args.max_iters,
        n_starts: args.starts,
        estimate_sigma2,
        sigma2,
        seed: SeedSpec::new(args.seed, 0),
        ..FitOptions::default()
    })
}

fn run_fit(args: &FitArgs, data: &crate::models::Dataset) -> Result<FitResult> {
    let opts = fit_options(args)?;
    match args.model {
        3 => {
            let spec = args.nu.as_deref().ok_or_else(|| Error::config("model 3 needs --nu"))?;
            fit_model3(data, &parse_profile(spec)?, args.d, &opts)
        }
        5 => {
            let spec = args
                .tau
                .as_deref()
                .or(args.nu.as_deref())
                .ok_or_else(|| Error::config("model 5 needs --tau (or --nu)"))?;
            let tau = parse_profile(spec)?;
            let d2 = args.d2.unwrap_or(tau.d());
            fit_model5(data, MeanFamily::Linear, &tau, args.d, d2, args.shared_frame, &opts)
        }
        other => Err(Error::config(format!("unknown model {other} (expected 3 or 5)"))),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let data = read_dataset(&args.data)?;
    let p = data.p();
    // resolve the reference first so a bad path fails before the fit runs
    let reference = args.true_gamma.as_deref().map(|s| load_frame(s, p)).transpose()?;
    let fit = run_fit(args, &data)?;
    let subspace_angle_to = match reference {
        None => None,
        Some(r) => {
            let target = [Some(&fit.gamma_hat), fit.gamma1_hat.as_ref()]
                .into_iter()
                .flatten()
                .find(|g| g.d() == r.d())
                .ok_or_else(|| Error::dims(format!("--true-gamma has d = {} which matches no fitted frame", r.d())))?;
            Some(subspace_angle(&r, target)?)
        }
    };
    let out = FitOutput {
        config: args,
        model: args.model,
        p,
        d: fit.gamma_hat.d(),
        gamma_hat: fit.gamma_hat.to_column_major(),
        gamma1_hat: fit.gamma1_hat.as_ref().map(StiefelFrame::to_column_major),
        gamma2_hat: fit.gamma2_hat.as_ref().map(StiefelFrame::to_column_major),
        mu_hat: fit.mu_hat.as_ref().map(|m| m.as_slice().to_vec()),
        mean_slopes: fit.mean_slopes.clone(),
        sigma2_hat: fit.sigma2_hat,
        loglik: fit.loglik,
        converged: fit.converged,
        iterations: fit.iterations,
        start_index: fit.start_index,
        subspace_angle_to,
    };
    write_json(&args.out, &out)
}

pub fn conjecture_config(args: &ConjectureArgs) -> Result<ConjectureConfig> {
    let scheme = CovScheme::new(args.scheme, args.c, args.p)?;
    let mut config = ConjectureConfig::new(scheme, args.seed);
    config.n_outer = args.n;
    config.m_inner = args.m;
    config.noise_var = args.noise_var;
    config.correlation_mode = args.mode;
    config.estimator = args.estimator;
    config.validate()?;
    Ok(config)
}

pub fn cmd_conjecture(args: &ConjectureArgs) -> Result<()> {
    let config = conjecture_config(args)?;
    let result = run_conjecture(&config)?;
    write_json(
        &args.out,
        &ConjectureOutput {
            prob_first_wins: result.prob_first_wins,
            mc_stderr: result.mc_stderr,
            winner_histogram: result.winner_histogram,
            trials: result.trials,
            config: &config,
        },
    )
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let data = read_dataset(&args.data)?;
    let gamma = load_frame(&args.gamma, data.p())?;
    let out = DiagnoseOutput {
        config: args,
        p: gamma.p(),
        d: gamma.d(),
        independence: independence_check(&data, &gamma)?,
        dispersion: dispersion_check(&data, &gamma)?,
    };
    write_json(&args.out, &out)
}

pub fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let text = read_text(&args.data)?;
    let data = crate::io::dataset_from_csv(&text, &args.data)?;
    let gamma = load_frame(&args.gamma, data.p())?;
    write_text(&args.out, &plot_svg(&data, &gamma)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_specs() {
        assert_eq!(
            parse_profile("absdev:0:1").unwrap(),
            VarianceProfile::AbsDev { center: 0.0, scale: 1.0 }
        );
        assert_eq!(parse_profile("diagabsdev:0,1:1,2").unwrap().d(), 2);
        assert_eq!(parse_profile("const:2").unwrap().d(), 1);
        assert!(parse_profile("absdev:0").is_err());
        assert!(parse_profile("gauss:0:1").is_err());
    }

    #[test]
    fn sigma2_specs() {
        assert_eq!(parse_sigma2("fixed:1.5").unwrap(), (false, 1.5));
        assert!(parse_sigma2("estimate").unwrap().0);
        assert!(parse_sigma2("fixed:-1").is_err());
        assert!(parse_sigma2("1.0").is_err());
    }

    #[test]
    fn inline_frames() {
        let f = load_frame("0,1,0", 3).unwrap();
        assert_eq!(f.as_matrix()[(1, 0)], 1.0);
        assert_eq!(load_frame("x1", 3).unwrap(), StiefelFrame::axes(3, &[0]).unwrap());
        assert!(load_frame("1,1,0", 3).is_err());
    }

    #[test]
    fn y_marginal() {
        assert!(sample_ys(0.0, 1.0, 0, SeedSpec::new(0, 0)).is_err());
        let ys = sample_ys(3.0, 1.0, 20_000, SeedSpec::new(0, 0)).unwrap();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((mean - 3.0).abs() < 0.03);
    }
}
