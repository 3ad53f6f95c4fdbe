//! Gaussian log-likelihoods of the two inverse-regression models, evaluated
//! through the semiorthogonal structure instead of a dense p×p covariance.
//!
//! With `C_y = σ⁴(Γν_yΓᵀ + I)²`, `ΓᵀΓ = I` and `W_y = (ν_y + I)⁻² − I`:
//!
//! ```text
//! log det C_y = 2p log σ² + 2 log det(ν_y + I)
//! rᵀ C_y⁻¹ r  = σ⁻⁴ [ ‖r‖² + (Γᵀr)ᵀ W_y (Γᵀr) ]
//! ```
//!
//! so the only Γ-dependent piece of the log-likelihood is
//! `−½ σ⁻⁴ Σᵢ tr[Wᵢ (Γᵀrᵢ)(Γᵀrᵢ)ᵀ]`, and its Euclidean gradient in Γ is
//! `−σ⁻⁴ Σᵢ rᵢrᵢᵀ Γ Wᵢ`.
//!
//! The `*_at` variants evaluate the same expressions at an arbitrary matrix in
//! place of the frame. They agree with the true likelihood only on the Stiefel
//! manifold, but they are what finite-difference checks and the optimizer
//! differentiate.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dataset, MeanProfile, Model3Params, Model5Params, VarianceProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoglikBreakdown {
    pub total: f64,
    pub per_obs: Vec<f64>,
    /// `Σᵢ log det C_{yᵢ}`.
    pub logdet_part: f64,
    /// `Σᵢ rᵢᵀ C_{yᵢ}⁻¹ rᵢ`.
    pub quad_part: f64,
}

impl LoglikBreakdown {
    /// `n p log 2π`, the remaining term in `total = −½(constant + logdet + quad)`.
    pub fn constant(n: usize, p: usize) -> f64 {
        (n * p) as f64 * (2.0 * PI).ln()
    }
}

/// Per-observation `log det(ν_{yᵢ} + I)` and `Wᵢ`, which depend only on the
/// profile and the responses.
#[derive(Clone, Debug)]
pub struct DispersionCache {
    pub log_dets: Vec<f64>,
    pub weights: Vec<DMatrix<f64>>,
}

impl DispersionCache {
    pub fn new(profile: &VarianceProfile, ys: &[f64]) -> Result<Self> {
        let mut log_dets = Vec::with_capacity(ys.len());
        let mut weights = Vec::with_capacity(ys.len());
        for &y in ys {
            let t = profile.terms(y)?;
            log_dets.push(t.log_det);
            weights.push(t.weight);
        }
        Ok(Self { log_dets, weights })
    }

    pub fn d(&self) -> usize {
        self.weights.first().map_or(0, |w| w.nrows())
    }
}

/// Mean vectors `ν_{yᵢ}` of a location profile, one column per observation.
pub fn mean_profile_values(nu: &MeanProfile, ys: &[f64]) -> Result<DMatrix<f64>> {
    let d = nu.d();
    let mut m = DMatrix::zeros(d, ys.len());
    for (i, &y) in ys.iter().enumerate() {
        m.set_column(i, &nu.eval(y)?);
    }
    Ok(m)
}

/// Structured log-likelihood of residual rows `r` under frame `gamma`.
pub(crate) fn structured(
    residuals: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    cache: &DispersionCache,
    sigma2: f64,
) -> LoglikBreakdown {
    let (n, p) = residuals.shape();
    let ln_2pi = (2.0 * PI).ln();
    let inv_s4 = 1.0 / (sigma2 * sigma2);
    let ld_scale = 2.0 * p as f64 * sigma2.ln();
    let projected = residuals * gamma;
    let mut per_obs = Vec::with_capacity(n);
    let (mut logdet_part, mut quad_part) = (0.0, 0.0);
    for i in 0..n {
        let r = residuals.row(i);
        let z = projected.row(i).transpose();
        let q = inv_s4 * (r.norm_squared() + z.dot(&(&cache.weights[i] * &z)));
        let ld = ld_scale + 2.0 * cache.log_dets[i];
        per_obs.push(-0.5 * (p as f64 * ln_2pi + ld + q));
        logdet_part += ld;
        quad_part += q;
    }
    LoglikBreakdown {
        total: per_obs.iter().sum(),
        per_obs,
        logdet_part,
        quad_part,
    }
}

fn check_frame_rows(gamma: &DMatrix<f64>, data: &Dataset) -> Result<()> {
    if gamma.nrows() != data.p() {
        return Err(Error::dims(format!("frame has {} rows but data has p = {}", gamma.nrows(), data.p())));
    }
    Ok(())
}

/// Residuals `xᵢ − μ − Γ₁ν_{yᵢ}` as rows.
pub(crate) fn model5_residuals(
    data: &Dataset,
    mu: &DVector<f64>,
    gamma1: &DMatrix<f64>,
    means: &DMatrix<f64>,
) -> DMatrix<f64> {
    let shift = (gamma1 * means).transpose();
    let mut r = &data.x - shift;
    for mut row in r.row_iter_mut() {
        row -= mu.transpose();
    }
    r
}

pub fn loglik_model3(params: &Model3Params, data: &Dataset) -> Result<LoglikBreakdown> {
    loglik_model3_at(params, params.gamma.as_matrix(), data)
}

/// [`loglik_model3`] with `gamma` substituted for the frame.
pub fn loglik_model3_at(params: &Model3Params, gamma: &DMatrix<f64>, data: &Dataset) -> Result<LoglikBreakdown> {
    check_frame_rows(gamma, data)?;
    let cache = DispersionCache::new(&params.nu, &data.y)?;
    Ok(structured(&data.x, gamma, &cache, params.sigma2))
}

pub fn loglik_model5(params: &Model5Params, data: &Dataset) -> Result<LoglikBreakdown> {
    loglik_model5_at(params, params.gamma1.as_matrix(), params.gamma2.as_matrix(), data)
}

/// [`loglik_model5`] with `gamma1` and `gamma2` substituted for the frames.
pub fn loglik_model5_at(
    params: &Model5Params,
    gamma1: &DMatrix<f64>,
    gamma2: &DMatrix<f64>,
    data: &Dataset,
) -> Result<LoglikBreakdown> {
    check_frame_rows(gamma1, data)?;
    check_frame_rows(gamma2, data)?;
    let cache = DispersionCache::new(&params.tau, &data.y)?;
    let means = mean_profile_values(&params.nu, &data.y)?;
    let r = model5_residuals(data, &params.mu, gamma1, &means);
    Ok(structured(&r, gamma2, &cache, params.sigma2))
}

/// `−σ⁻⁴ Σᵢ rᵢ rᵢᵀ Γ Wᵢ`.
pub(crate) fn dispersion_gradient(
    residuals: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    cache: &DispersionCache,
    sigma2: f64,
) -> DMatrix<f64> {
    let projected = residuals * gamma;
    let mut g = DMatrix::zeros(gamma.nrows(), gamma.ncols());
    for i in 0..residuals.nrows() {
        let r = residuals.row(i).transpose();
        let wz = &cache.weights[i] * projected.row(i).transpose();
        g += r * wz.transpose();
    }
    g * (-1.0 / (sigma2 * sigma2))
}

/// `σ⁻⁴ Σᵢ (I + Γ₂WᵢΓ₂ᵀ) rᵢ ν_{yᵢ}ᵀ`.
pub(crate) fn location_gradient(
    residuals: &DMatrix<f64>,
    gamma2: &DMatrix<f64>,
    means: &DMatrix<f64>,
    cache: &DispersionCache,
    sigma2: f64,
) -> DMatrix<f64> {
    let projected = residuals * gamma2;
    let mut g = DMatrix::zeros(residuals.ncols(), means.nrows());
    for i in 0..residuals.nrows() {
        let r = residuals.row(i).transpose();
        let wz = &cache.weights[i] * projected.row(i).transpose();
        let precision_r = r + gamma2 * wz;
        g += precision_r * means.column(i).transpose();
    }
    g * (1.0 / (sigma2 * sigma2))
}

pub fn grad_gamma_model3(params: &Model3Params, data: &Dataset) -> Result<DMatrix<f64>> {
    grad_gamma_model3_at(params, params.gamma.as_matrix(), data)
}

pub fn grad_gamma_model3_at(params: &Model3Params, gamma: &DMatrix<f64>, data: &Dataset) -> Result<DMatrix<f64>> {
    check_frame_rows(gamma, data)?;
    let cache = DispersionCache::new(&params.nu, &data.y)?;
    Ok(dispersion_gradient(&data.x, gamma, &cache, params.sigma2))
}

/// Euclidean gradients of the location-dispersion log-likelihood in Γ₁ (via
/// the mean) and Γ₂ (via the dispersion).
#[derive(Clone, Debug, PartialEq)]
pub struct Model5Gradient {
    pub gamma1: DMatrix<f64>,
    pub gamma2: DMatrix<f64>,
}

impl Model5Gradient {
    /// Gradient in a single frame playing both roles.
    pub fn shared(&self) -> Result<DMatrix<f64>> {
        if self.gamma1.shape() != self.gamma2.shape() {
            return Err(Error::dims("shared frame requires d1 == d2"));
        }
        Ok(&self.gamma1 + &self.gamma2)
    }
}

pub fn grad_gamma_model5(params: &Model5Params, data: &Dataset) -> Result<Model5Gradient> {
    grad_gamma_model5_at(params, params.gamma1.as_matrix(), params.gamma2.as_matrix(), data)
}

pub fn grad_gamma_model5_at(
    params: &Model5Params,
    gamma1: &DMatrix<f64>,
    gamma2: &DMatrix<f64>,
    data: &Dataset,
) -> Result<Model5Gradient> {
    check_frame_rows(gamma1, data)?;
    check_frame_rows(gamma2, data)?;
    let cache = DispersionCache::new(&params.tau, &data.y)?;
    let means = mean_profile_values(&params.nu, &data.y)?;
    let r = model5_residuals(data, &params.mu, gamma1, &means);
    Ok(Model5Gradient {
        gamma1: location_gradient(&r, gamma2, &means, &cache, params.sigma2),
        gamma2: dispersion_gradient(&r, gamma2, &cache, params.sigma2),
    })
}
