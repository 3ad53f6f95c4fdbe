//! Monte Carlo estimate of how often the leading principal component of `X`
//! has the largest correlation with `Y = βᵀX + ε` when `Σ` and `β` are drawn
//! independently.
//!
//! Each outer trial draws `Σ` from a [`CovScheme`] and `β ~ N(0, I_p)`, then
//! computes the correlations `ρᵢ = corr(vᵢᵀX, Y)` along the eigenvectors of
//! `Σ`, either from `m` simulated pairs (method of moments) or in closed form:
//!
//! ```text
//! ρᵢ = √λᵢ · vᵢᵀβ / √(βᵀΣβ + σ²)
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigen_sym, pearson, standard_normal_vector, EigenDecomp, SeedSpec, SymMatrix};
use crate::randcov::CovScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaDist {
    StandardNormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    Absolute,
    Signed,
}

impl FromStr for CorrelationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" | "absolute" => Ok(CorrelationMode::Absolute),
            "signed" => Ok(CorrelationMode::Signed),
            other => Err(Error::config(format!("unknown mode {other:?} (expected abs|signed)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Sample correlations from `m_inner` simulated `(X, Y)` pairs.
    MomentSample,
    /// Closed-form population correlations.
    PopulationOracle,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" | "moment" => Ok(Estimator::MomentSample),
            "oracle" | "population" => Ok(Estimator::PopulationOracle),
            other => Err(Error::config(format!("unknown estimator {other:?} (expected sample|oracle)"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::MomentSample => "sample",
            Estimator::PopulationOracle => "oracle",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureConfig {
    pub scheme: CovScheme,
    pub n_outer: usize,
    pub m_inner: usize,
    pub beta_dist: BetaDist,
    pub noise_var: f64,
    pub correlation_mode: CorrelationMode,
    pub estimator: Estimator,
    /// Trial `i` uses the stream `(seed, i)`.
    pub seed: u64,
}

impl ConjectureConfig {
    /// The reference setup: n = m = 200, β ~ N(0, I), no noise, absolute
    /// correlations, moment estimates.
    pub fn new(scheme: CovScheme, seed: u64) -> Self {
        Self {
            scheme,
            n_outer: 200,
            m_inner: 200,
            beta_dist: BetaDist::StandardNormal,
            noise_var: 0.0,
            correlation_mode: CorrelationMode::Absolute,
            estimator: Estimator::MomentSample,
            seed,
        }
    }

    pub fn p(&self) -> usize {
        self.scheme.p
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.n_outer == 0 {
            return Err(Error::config("n_outer must be at least 1"));
        }
        if self.estimator == Estimator::MomentSample && self.m_inner < 3 {
            return Err(Error::config("m_inner must be at least 3 for moment estimates"));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::config("noise_var must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Correlations ordered by descending eigenvalue of Σ.
    pub rho: Vec<f64>,
    /// Zero-based index of the winning component.
    pub winner: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureResult {
    pub prob_first_wins: f64,
    pub mc_stderr: f64,
    /// `winner_histogram[i]` counts trials won by component `i` (zero-based).
    pub winner_histogram: Vec<u64>,
    pub trials: usize,
}

impl ConjectureResult {
    pub fn from_records(records: &[TrialRecord], p: usize) -> Self {
        let mut hist = vec![0u64; p];
        for r in records {
            hist[r.winner] += 1;
        }
        let n = records.len();
        let prob = hist.first().copied().unwrap_or(0) as f64 / n as f64;
        Self {
            prob_first_wins: prob,
            mc_stderr: (prob * (1.0 - prob) / n as f64).sqrt(),
            winner_histogram: hist,
            trials: n,
        }
    }
}

/// Closed-form `corr(vᵢᵀX, Y)` for `X ~ N(0, Σ)`, `Y = βᵀX + ε`, `var ε = noise_var`.
pub fn population_correlations(beta: &DVector<f64>, sigma: &SymMatrix, noise_var: f64) -> Result<Vec<f64>> {
    let eig = eigen_sym(sigma)?;
    population_correlations_eig(beta, sigma, &eig, noise_var)
}

pub fn population_correlations_eig(
    beta: &DVector<f64>,
    sigma: &SymMatrix,
    eig: &EigenDecomp,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let p = sigma.dim();
    if beta.len() != p {
        return Err(Error::dims(format!("β has length {} but Σ is {p}x{p}", beta.len())));
    }
    let var_y = sigma.quadratic_form(beta) + noise_var;
    if !(var_y > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    let sd_y = var_y.sqrt();
    Ok((0..p)
        .map(|i| {
            let lambda = eig.values[i].max(0.0);
            lambda.sqrt() * eig.vectors.column(i).dot(beta) / sd_y
        })
        .collect())
}

/// Sample Pearson correlations between each projection `vᵢᵀxⱼ` and `yⱼ`.
///
/// `xs` holds one observation per row. A projection (or `y`) with zero sample
/// variance yields a correlation of 0.
pub fn sample_correlations(xs: &DMatrix<f64>, ys: &[f64], eig: &EigenDecomp) -> Result<Vec<f64>> {
    let (m, p) = xs.shape();
    if m < 3 {
        return Err(Error::config(format!("need at least 3 pairs, got {m}")));
    }
    if ys.len() != m || eig.vectors.nrows() != p {
        return Err(Error::dims("data and eigenvectors disagree in shape"));
    }
    let proj = xs * &eig.vectors;
    Ok((0..p).map(|i| pearson(proj.column(i).as_slice(), ys)).collect())
}

fn winner(rho: &[f64], mode: CorrelationMode) -> usize {
    let key = |r: f64| match mode {
        CorrelationMode::Absolute => r.abs(),
        CorrelationMode::Signed => r,
    };
    let mut best = 0;
    for (i, &r) in rho.iter().enumerate().skip(1) {
        if key(r) > key(rho[best]) {
            best = i;
        }
    }
    best
}

/// Runs outer trial `index` on its own stream `(config.seed, index)`.
pub fn run_trial(config: &ConjectureConfig, index: u64) -> Result<TrialRecord> {
    let mut rng = SeedSpec::new(config.seed, index).rng();
    let p = config.p();
    let sigma = config.scheme.sample_with(&mut rng);
    let beta = match config.beta_dist {
        BetaDist::StandardNormal => standard_normal_vector(&mut rng, p),
    };
    let eig = eigen_sym(&sigma)?;
    let rho = match config.estimator {
        Estimator::PopulationOracle => population_correlations_eig(&beta, &sigma, &eig, config.noise_var)?,
        Estimator::MomentSample => {
            // X = V diag(√λ) z, so that cov X = Σ
            let mut factor = eig.vectors.clone();
            for (j, mut col) in factor.column_iter_mut().enumerate() {
                col *= eig.values[j].max(0.0).sqrt();
            }
            let noise_sd = config.noise_var.sqrt();
            let m = config.m_inner;
            let mut xs = DMatrix::zeros(m, p);
            let mut ys = Vec::with_capacity(m);
            for j in 0..m {
                let x = &factor * standard_normal_vector(&mut rng, p);
                let eps: f64 = rng.sample(StandardNormal);
                ys.push(beta.dot(&x) + noise_sd * eps);
                xs.set_row(j, &x.transpose());
            }
            sample_correlations(&xs, &ys, &eig)?
        }
    };
    let winner = winner(&rho, config.correlation_mode);
    Ok(TrialRecord { rho, winner })
}

/// All outer trials, evaluated in parallel on the current rayon pool.
pub fn trial_records(config: &ConjectureConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.n_outer as u64)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect()
}

pub fn run_conjecture(config: &ConjectureConfig) -> Result<ConjectureResult> {
    let records = trial_records(config)?;
    Ok(ConjectureResult::from_records(&records, config.p()))
}

pub fn run_conjecture_serial(config: &ConjectureConfig) -> Result<ConjectureResult> {
    config.validate()?;
    let records = (0..config.n_outer as u64)
        .map(|i| run_trial(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConjectureResult::from_records(&records, config.p()))
}
