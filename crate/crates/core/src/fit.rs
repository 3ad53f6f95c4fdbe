//! Maximum-likelihood fits of the inverse-regression models by projected
//! gradient ascent on the Stiefel manifold.
//!
//! Each ascent step projects the Euclidean gradient onto the tangent space,
//! `ξ = G − Γ sym(ΓᵀG)`, retracts `Γ + tξ` by QR, and backtracks `t` by
//! halves until the Armijo condition holds. The first trial step is
//! `step_init`; later ones use the Barzilai-Borwein length of the previous
//! step. Likelihood increases for the Armijo test are computed in difference
//! form so they stay accurate near the optimum, where the totals agree to
//! many digits.
//!
//! For the location-dispersion model the mean coefficients are updated in
//! closed form (generalized least squares given the frames) before every frame
//! step, so both blocks only ever increase the likelihood.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{
    dispersion_gradient, location_gradient, loglik_model3, loglik_model5, structured, DispersionCache,
};
use crate::models::{Dataset, MeanProfile, Model3Params, Model5Params, StiefelFrame, VarianceProfile};
use crate::numerics::{eigen_sym, orthonormalize, SeedSpec, SymMatrix};

const ARMIJO_C: f64 = 1e-4;
const STALL_RTOL: f64 = 1e-10;
const MAX_BACKTRACKS: usize = 60;
const MAX_STEP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Tolerance on the Frobenius norm of the projected gradient.
    pub grad_tol: f64,
    pub n_starts: usize,
    /// Profile σ² out after fitting the frames; otherwise `sigma2` is held fixed.
    pub estimate_sigma2: bool,
    pub sigma2: f64,
    pub step_init: f64,
    pub seed: SeedSpec,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-7,
            n_starts: 8,
            estimate_sigma2: false,
            sigma2: 1.0,
            step_init: 1.0,
            seed: SeedSpec::new(0, 0),
        }
    }
}

impl FitOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed: SeedSpec::new(seed, 0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.n_starts == 0 {
            return Err(Error::config("max_iters and n_starts must be at least 1"));
        }
        if !(self.grad_tol > 0.0) || !(self.step_init > 0.0) {
            return Err(Error::config("grad_tol and step_init must be positive"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config("sigma2 must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// The reduction: Γ̂ for the dispersion model, the shared frame or an
    /// orthonormal basis of span(Γ̂₁, Γ̂₂) for the location-dispersion model.
    pub gamma_hat: StiefelFrame,
    pub gamma1_hat: Option<StiefelFrame>,
    pub gamma2_hat: Option<StiefelFrame>,
    pub mu_hat: Option<DVector<f64>>,
    /// Fitted linear mean coefficients (`ν_y = slopes · y`; intercepts folded into μ̂).
    pub mean_slopes: Option<Vec<f64>>,
    pub sigma2_hat: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_index: usize,
}

impl FitResult {
    /// The fitted location-dispersion parameters, when this is such a fit.
    pub fn model5_params(&self, tau: &VarianceProfile) -> Option<Result<Model5Params>> {
        let (g1, g2, mu, slopes) = (
            self.gamma1_hat.as_ref()?,
            self.gamma2_hat.as_ref()?,
            self.mu_hat.as_ref()?,
            self.mean_slopes.as_ref()?,
        );
        Some(Model5Params::new(
            mu.clone(),
            g1.clone(),
            MeanProfile::Linear {
                slopes: slopes.clone(),
                intercepts: vec![0.0; slopes.len()],
            },
            g2.clone(),
            tau.clone(),
            self.sigma2_hat,
        ))
    }
}

/// Parametric family for the mean profile of the location-dispersion model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFamily {
    /// `ν_y = b · y` per coordinate; the intercept is absorbed by μ.
    Linear,
}

/// Tangent-space projection at `gamma` under the embedded metric.
pub fn project_tangent(gamma: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    let a = gamma.transpose() * grad;
    let sym = (&a + a.transpose()) * 0.5;
    grad - gamma * sym
}

/// QR retraction.
pub fn retract(point: &DMatrix<f64>) -> DMatrix<f64> {
    orthonormalize(point)
}

trait FrameObjective {
    /// Closed-form update of any non-frame block at the current frames.
    fn refresh(&mut self, _frames: &[DMatrix<f64>]) -> Result<()> {
        Ok(())
    }
    fn value(&self, frames: &[DMatrix<f64>]) -> f64;
    fn gradient(&self, frames: &[DMatrix<f64>]) -> Vec<DMatrix<f64>>;
    /// `value(to) − value(from)`, computed without cancellation.
    fn increase(&self, from: &[DMatrix<f64>], to: &[DMatrix<f64>]) -> f64;
}

struct Ascent {
    frames: Vec<DMatrix<f64>>,
    value: f64,
    iterations: usize,
    converged: bool,
}

type Frames = Vec<DMatrix<f64>>;

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn ascend<O: FrameObjective>(obj: &mut O, mut frames: Vec<DMatrix<f64>>, opts: &FitOptions) -> Result<Ascent> {
    let mut last_step: Option<(Frames, Frames)> = None; // (displacement, ξ at its start)
    let mut t_accepted = opts.step_init;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        obj.refresh(&frames)?;
        let grads = obj.gradient(&frames);
        let xi: Vec<DMatrix<f64>> = frames.iter().zip(&grads).map(|(g, e)| project_tangent(g, e)).collect();
        let gnorm2 = inner(&xi, &xi);
        if gnorm2.sqrt() <= opts.grad_tol {
            converged = true;
            break;
        }

        let mut t = match &last_step {
            None => opts.step_init,
            Some((s, xi_prev)) => {
                let dxi: Vec<DMatrix<f64>> = xi.iter().zip(xi_prev).map(|(a, b)| a - b).collect();
                let curvature = -inner(s, &dxi);
                if curvature > 0.0 {
                    inner(s, s) / curvature
                } else {
                    2.0 * t_accepted
                }
            }
        };
        t = t.clamp(f64::MIN_POSITIVE, MAX_STEP);

        let t0 = t;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<DMatrix<f64>> = frames.iter().zip(&xi).map(|(g, e)| retract(&(g + e * t))).collect();
            let gain = obj.increase(&frames, &cand);
            if gain > 0.0 && gain >= ARMIJO_C * t * gnorm2 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // no representable ascent left: the predicted gain sits below the
            // rounding floor of the objective, which is as stationary as it gets
            let floor = STALL_RTOL * obj.value(&frames).abs().max(1.0);
            converged = t0 * gnorm2 <= floor;
            break;
        };
        let displacement = next.iter().zip(&frames).map(|(a, b)| a - b).collect();
        last_step = Some((displacement, xi));
        t_accepted = t;
        frames = next;
        iterations += 1;
    }
    obj.refresh(&frames)?;
    let value = obj.value(&frames);
    Ok(Ascent {
        frames,
        value,
        iterations,
        converged,
    })
}

struct DispersionObjective<'a> {
    x: &'a DMatrix<f64>,
    cache: DispersionCache,
    sigma2: f64,
}

impl FrameObjective for DispersionObjective<'_> {
    fn value(&self, frames: &[DMatrix<f64>]) -> f64 {
        structured(self.x, &frames[0], &self.cache, self.sigma2).total
    }

    fn gradient(&self, frames: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        vec![dispersion_gradient(self.x, &frames[0], &self.cache, self.sigma2)]
    }

    fn increase(&self, from: &[DMatrix<f64>], to: &[DMatrix<f64>]) -> f64 {
        let diff = self.x * (&to[0] - &from[0]);
        let sum = self.x * (&to[0] + &from[0]);
        let mut dq = 0.0;
        for i in 0..self.x.nrows() {
            let a = diff.row(i).transpose();
            let b = sum.row(i).transpose();
            dq += a.dot(&(&self.cache.weights[i] * b));
        }
        -0.5 * dq / (self.sigma2 * self.sigma2)
    }
}

struct LocationDispersionObjective<'a> {
    data: &'a Dataset,
    cache: DispersionCache,
    sigma2: f64,
    shared: bool,
    mu: DVector<f64>,
    slopes: DVector<f64>,
}

impl LocationDispersionObjective<'_> {
    fn split<'f>(&self, frames: &'f [DMatrix<f64>]) -> (&'f DMatrix<f64>, &'f DMatrix<f64>) {
        if self.shared {
            (&frames[0], &frames[0])
        } else {
            (&frames[0], &frames[1])
        }
    }

    /// Mean-profile values `b·yᵢ`, one column per observation.
    fn means(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.slopes.len(), self.data.n(), |k, i| self.slopes[k] * self.data.y[i])
    }

    fn residuals(&self, gamma1: &DMatrix<f64>) -> DMatrix<f64> {
        crate::likelihood::model5_residuals(self.data, &self.mu, gamma1, &self.means())
    }
}

impl FrameObjective for LocationDispersionObjective<'_> {
    /// Generalized least squares for `(μ, b)` with design `[I_p, yᵢΓ₁]` and
    /// per-observation precision `I + Γ₂WᵢΓ₂ᵀ` (σ⁻⁴ cancels).
    fn refresh(&mut self, frames: &[DMatrix<f64>]) -> Result<()> {
        let (g1, g2) = self.split(frames);
        let p = self.data.p();
        let d1 = g1.ncols();
        let k = p + d1;
        let mut lhs = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for i in 0..self.data.n() {
            let y = self.data.y[i];
            let mut design = DMatrix::<f64>::zeros(p, k);
            design.view_mut((0, 0), (p, p)).fill_with_identity();
            design.view_mut((0, p), (p, d1)).copy_from(&(g1 * y));
            let precision = g2 * &self.cache.weights[i] * g2.transpose() + DMatrix::identity(p, p);
            let pd = &precision * &design;
            lhs += design.transpose() * &pd;
            rhs += pd.transpose() * self.data.row(i);
        }
        let sym = SymMatrix::mirror_upper(lhs).into_matrix();
        let theta = match sym.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => sym
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::config(format!("mean update failed: {e}")))?,
        };
        self.mu = theta.rows(0, p).into_owned();
        self.slopes = theta.rows(p, d1).into_owned();
        Ok(())
    }

    fn value(&self, frames: &[DMatrix<f64>]) -> f64 {
        let (g1, g2) = self.split(frames);
        structured(&self.residuals(g1), g2, &self.cache, self.sigma2).total
    }

    fn gradient(&self, frames: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let (g1, g2) = self.split(frames);
        let r = self.residuals(g1);
        let loc = location_gradient(&r, g2, &self.means(), &self.cache, self.sigma2);
        let disp = dispersion_gradient(&r, g2, &self.cache, self.sigma2);
        if self.shared {
            vec![loc + disp]
        } else {
            vec![loc, disp]
        }
    }

    fn increase(&self, from: &[DMatrix<f64>], to: &[DMatrix<f64>]) -> f64 {
        let (g1o, g2o) = self.split(from);
        let (g1n, g2n) = self.split(to);
        let r_old = self.residuals(g1o);
        let r_new = self.residuals(g1n);
        // r_new − r_old = −yᵢ (ΔΓ₁) b
        let shift = (g1n - g1o) * &self.slopes;
        let dg2 = g2n - g2o;
        let mut dq = 0.0;
        for i in 0..self.data.n() {
            let rn = r_new.row(i).transpose();
            let ro = r_old.row(i).transpose();
            let dr = &shift * (-self.data.y[i]);
            let dz = dg2.transpose() * &rn + g2o.transpose() * &dr;
            let sz = g2n.transpose() * &rn + g2o.transpose() * &ro;
            dq += dr.dot(&(&rn + &ro)) + dz.dot(&(&self.cache.weights[i] * sz));
        }
        -0.5 * dq / (self.sigma2 * self.sigma2)
    }
}

/// Runs the ascent from `n_starts` Haar-random starts (in parallel) and keeps
/// the best by (value, lowest start index).
fn multistart<O, F>(opts: &FitOptions, make: F) -> Result<(usize, Ascent, O)>
where
    O: FrameObjective + Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<(O, Vec<DMatrix<f64>>)> + Sync,
{
    let runs: Vec<Result<(Ascent, O)>> = (0..opts.n_starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = opts.seed.substream(s as u64).rng();
            let (mut obj, init) = make(&mut rng)?;
            let ascent = ascend(&mut obj, init, opts)?;
            Ok((ascent, obj))
        })
        .collect();
    let mut best: Option<(usize, Ascent, O)> = None;
    for (s, run) in runs.into_iter().enumerate() {
        let (ascent, obj) = run?;
        if best.as_ref().is_none_or(|(_, b, _)| ascent.value > b.value) {
            best = Some((s, ascent, obj));
        }
    }
    Ok(best.expect("n_starts >= 1"))
}

fn check_dims(data: &Dataset, d: usize) -> Result<()> {
    if d == 0 || d >= data.p() {
        return Err(Error::config(format!("need 1 <= d < p, got d = {d}, p = {}", data.p())));
    }
    Ok(())
}

/// Maximum-likelihood Γ for the dispersion model with a known profile `nu`.
pub fn fit_model3(data: &Dataset, nu: &VarianceProfile, d: usize, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    check_dims(data, d)?;
    if nu.d() != d {
        return Err(Error::dims(format!("profile has d = {} but d = {d} was requested", nu.d())));
    }
    let cache = DispersionCache::new(nu, &data.y)?;
    let p = data.p();
    let (start_index, ascent, _) = multistart(opts, |rng| {
        let init = StiefelFrame::random(rng, p, d)?.into_matrix();
        let obj = DispersionObjective {
            x: &data.x,
            cache: cache.clone(),
            sigma2: opts.sigma2,
        };
        Ok((obj, vec![init]))
    })?;

    let gamma_hat = StiefelFrame::new(ascent.frames[0].clone())?.canonical();
    let sigma2_hat = if opts.estimate_sigma2 {
        profile_sigma2(data, &gamma_hat, nu)?
    } else {
        opts.sigma2
    };
    let params = Model3Params::new(gamma_hat.clone(), nu.clone(), sigma2_hat)?;
    let loglik = loglik_model3(&params, data)?.total;
    Ok(FitResult {
        gamma_hat,
        gamma1_hat: None,
        gamma2_hat: None,
        mu_hat: None,
        mean_slopes: None,
        sigma2_hat,
        loglik,
        iterations: ascent.iterations,
        converged: ascent.converged,
        start_index,
    })
}

/// Maximum-likelihood fit of the location-dispersion model with a linear mean
/// profile of dimension `d1` and known dispersion profile `tau` (dimension `d2`).
pub fn fit_model5(
    data: &Dataset,
    family: MeanFamily,
    tau: &VarianceProfile,
    d1: usize,
    d2: usize,
    shared_frame: bool,
    opts: &FitOptions,
) -> Result<FitResult> {
    let MeanFamily::Linear = family;
    opts.validate()?;
    check_dims(data, d1)?;
    check_dims(data, d2)?;
    if tau.d() != d2 {
        return Err(Error::dims(format!("dispersion profile has d = {} but d2 = {d2}", tau.d())));
    }
    if shared_frame && d1 != d2 {
        return Err(Error::config("a shared frame needs d1 == d2"));
    }
    if !shared_frame && d1 + d2 >= data.p() {
        return Err(Error::config(format!("distinct frames need d1 + d2 < p, got {d1} + {d2} >= {}", data.p())));
    }
    let cache = DispersionCache::new(tau, &data.y)?;
    let p = data.p();
    let (start_index, ascent, obj) = multistart(opts, |rng| {
        let mut init = vec![StiefelFrame::random(rng, p, d1)?.into_matrix()];
        if !shared_frame {
            init.push(StiefelFrame::random(rng, p, d2)?.into_matrix());
        }
        let obj = LocationDispersionObjective {
            data,
            cache: cache.clone(),
            sigma2: opts.sigma2,
            shared: shared_frame,
            mu: DVector::zeros(p),
            slopes: DVector::zeros(d1),
        };
        Ok((obj, init))
    })?;

    let mut slopes = obj.slopes.clone();
    let mut g1 = ascent.frames[0].clone();
    let mut g2 = if shared_frame { g1.clone() } else { ascent.frames[1].clone() };
    // d = 1 sign convention; Γ₁b and Γ₂τΓ₂ᵀ are unchanged by the flips
    if d1 == 1 {
        let canon = StiefelFrame::new(g1.clone())?.canonical().into_matrix();
        if canon != g1 {
            slopes.neg_mut();
            if shared_frame {
                g2 = canon.clone();
            }
            g1 = canon;
        }
    }
    if !shared_frame && d2 == 1 {
        g2 = StiefelFrame::new(g2)?.canonical().into_matrix();
    }
    let gamma1_hat = StiefelFrame::new(g1)?;
    let gamma2_hat = StiefelFrame::new(g2)?;

    let mu_hat = obj.mu.clone();
    let nu_hat = MeanProfile::Linear {
        slopes: slopes.as_slice().to_vec(),
        intercepts: vec![0.0; d1],
    };
    let mut params = Model5Params::new(mu_hat.clone(), gamma1_hat.clone(), nu_hat, gamma2_hat.clone(), tau.clone(), opts.sigma2)?;
    if opts.estimate_sigma2 {
        let r = crate::likelihood::model5_residuals(
            data,
            &params.mu,
            params.gamma1.as_matrix(),
            &crate::likelihood::mean_profile_values(&params.nu, &data.y)?,
        );
        params.sigma2 = sigma2_from_residuals(&r, params.gamma2.as_matrix(), &cache)?;
    }
    let loglik = loglik_model5(&params, data)?.total;

    let gamma_hat = if shared_frame {
        gamma1_hat.clone()
    } else {
        let mut both = DMatrix::zeros(p, d1 + d2);
        both.view_mut((0, 0), (p, d1)).copy_from(gamma1_hat.as_matrix());
        both.view_mut((0, d1), (p, d2)).copy_from(gamma2_hat.as_matrix());
        StiefelFrame::orthonormalized(&both)?
    };
    Ok(FitResult {
        gamma_hat,
        gamma1_hat: Some(gamma1_hat),
        gamma2_hat: Some(gamma2_hat),
        mu_hat: Some(mu_hat),
        mean_slopes: Some(slopes.as_slice().to_vec()),
        sigma2_hat: params.sigma2,
        loglik,
        iterations: ascent.iterations,
        converged: ascent.converged,
        start_index,
    })
}

/// The d = 1 maximizer in closed form.
///
/// With `wᵢ = (ν_{yᵢ} + 1)⁻² − 1` the Γ-dependent log-likelihood is
/// `−½σ⁻⁴ Σᵢ wᵢ(γᵀxᵢ)²`, maximized over unit γ by the top eigenvector of
/// `Σᵢ (−wᵢ) xᵢxᵢᵀ`. The answer does not depend on σ².
pub fn closed_form_d1(data: &Dataset, nu: &VarianceProfile, sigma2: f64) -> Result<DVector<f64>> {
    if nu.d() != 1 {
        return Err(Error::config("closed form requires d = 1"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::config("sigma2 must be positive"));
    }
    let cache = DispersionCache::new(nu, &data.y)?;
    let p = data.p();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for i in 0..data.n() {
        let x = data.row(i);
        m -= &x * x.transpose() * cache.weights[i][(0, 0)];
    }
    if m.iter().all(|v| *v == 0.0) {
        return Err(Error::Unidentified);
    }
    let eig = eigen_sym(&SymMatrix::mirror_upper(m))?;
    Ok(eig.vectors.column(0).into_owned())
}

fn sigma2_from_residuals(residuals: &DMatrix<f64>, gamma: &DMatrix<f64>, cache: &DispersionCache) -> Result<f64> {
    let (n, p) = residuals.shape();
    let projected = residuals * gamma;
    let mut total = 0.0;
    for i in 0..n {
        let z = projected.row(i).transpose();
        total += residuals.row(i).norm_squared() + z.dot(&(&cache.weights[i] * &z));
    }
    let sigma4 = total / (n * p) as f64;
    if !(sigma4 > 0.0 && sigma4.is_finite()) {
        return Err(Error::DegenerateScale);
    }
    Ok(sigma4.sqrt())
}

/// Maximizer of the σ²-profile of the dispersion-model likelihood at fixed Γ:
/// `σ̂⁴ = (np)⁻¹ Σᵢ [‖xᵢ‖² + (Γᵀxᵢ)ᵀ((ν_{yᵢ}+I)⁻² − I)(Γᵀxᵢ)]`.
pub fn profile_sigma2(data: &Dataset, gamma: &StiefelFrame, nu: &VarianceProfile) -> Result<f64> {
    if gamma.p() != data.p() || gamma.d() != nu.d() {
        return Err(Error::dims("frame, profile and data disagree in shape"));
    }
    let cache = DispersionCache::new(nu, &data.y)?;
    sigma2_from_residuals(&data.x, gamma.as_matrix(), &cache)
}
