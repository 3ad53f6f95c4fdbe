//! Inverse-regression models with a variance component.
//!
//! Dispersion-only model:
//!
//! ```text
//! X = σ² (Γ ν_y Γᵀ + I_p) ε,                 ε ~ N(0, I_p), ε ⫫ Y
//! ```
//!
//! Location plus dispersion model:
//!
//! ```text
//! X = μ + Γ₁ ν_y + σ² (Γ₂ τ_y Γ₂ᵀ + I_p) ε
//! ```
//!
//! The factor multiplying `ε` is the *multiplier* `M_y`; the conditional
//! covariance of `X` given `y` is `M_y²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    eigen_sym, fix_sign, max_abs, orthonormalize, standard_normal_matrix, standard_normal_vector, SeedSpec,
    SymMatrix,
};

/// Eigenvalues of a profile value must exceed `-1 + ADMISSIBLE_MARGIN`.
pub const ADMISSIBLE_MARGIN: f64 = 1e-8;

const FRAME_TOL: f64 = 1e-10;

/// A p×d matrix with orthonormal columns, `1 ≤ d < p`.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelFrame {
    cols: DMatrix<f64>,
}

impl StiefelFrame {
    pub fn new(cols: DMatrix<f64>) -> Result<Self> {
        let (p, d) = cols.shape();
        if d == 0 || d >= p {
            return Err(Error::dims(format!("frame must satisfy 1 <= d < p, got p = {p}, d = {d}")));
        }
        if cols.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteMatrix);
        }
        let gap = max_abs(&(cols.transpose() * &cols - DMatrix::identity(d, d)));
        if gap > FRAME_TOL {
            return Err(Error::NotSemiorthogonal(gap));
        }
        Ok(Self { cols })
    }

    /// Orthonormalizes the columns of `m` (QR, positive `R` diagonal).
    pub fn orthonormalized(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(orthonormalize(m))
    }

    /// Frame spanned by the standard basis vectors `e_k`, `k ∈ axes` (zero-based).
    pub fn axes(p: usize, axes: &[usize]) -> Result<Self> {
        let mut m = DMatrix::zeros(p, axes.len());
        for (j, &k) in axes.iter().enumerate() {
            if k >= p {
                return Err(Error::dims(format!("axis {k} out of range for p = {p}")));
            }
            m[(k, j)] = 1.0;
        }
        Self::new(m)
    }

    /// Column-major data, as stored in parameter and fit files.
    pub fn from_column_major(p: usize, data: &[f64]) -> Result<Self> {
        if p == 0 || !data.len().is_multiple_of(p) {
            return Err(Error::dims(format!("{} entries do not form a matrix with {p} rows", data.len())));
        }
        Self::new(DMatrix::from_column_slice(p, data.len() / p, data))
    }

    /// First `d` columns of a Haar orthogonal matrix.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, p: usize, d: usize) -> Result<Self> {
        Self::orthonormalized(&standard_normal_matrix(rng, p, d))
    }

    /// For d = 1, flips the column to the numerics sign convention.
    pub fn canonical(mut self) -> Self {
        if self.d() == 1 {
            let mut col = self.cols.column(0).into_owned();
            fix_sign(&mut col);
            self.cols.set_column(0, &col);
        }
        self
    }

    pub fn p(&self) -> usize {
        self.cols.nrows()
    }

    pub fn d(&self) -> usize {
        self.cols.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.cols
    }

    pub fn to_column_major(&self) -> Vec<f64> {
        self.cols.as_slice().to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub y: f64,
    /// Column-major d×d values.
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub y: f64,
    pub value: Vec<f64>,
}

/// A map `y ↦ ν_y`, symmetric d×d, entering the conditional dispersion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum VarianceProfile {
    /// `scale · |y − center|`, d = 1.
    AbsDev { center: f64, scale: f64 },
    /// `diag(scaleₖ · |y − centerₖ|)`.
    DiagAbsDev { centers: Vec<f64>, scales: Vec<f64> },
    /// The same matrix for every y.
    Constant { d: usize, value: Vec<f64> },
    /// Exact-match table; evaluating at an unlisted y is an error.
    Lookup { d: usize, table: Vec<MatrixEntry> },
}

impl VarianceProfile {
    pub fn d(&self) -> usize {
        match self {
            VarianceProfile::AbsDev { .. } => 1,
            VarianceProfile::DiagAbsDev { centers, .. } => centers.len(),
            VarianceProfile::Constant { d, .. } | VarianceProfile::Lookup { d, .. } => *d,
        }
    }

    pub fn zero(d: usize) -> Self {
        VarianceProfile::Constant {
            d,
            value: vec![0.0; d * d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d == 0 {
            return Err(Error::config("profile dimension must be at least 1"));
        }
        match self {
            VarianceProfile::DiagAbsDev { centers, scales } if centers.len() != scales.len() => {
                Err(Error::config("diag_abs_dev needs as many scales as centers"))
            }
            VarianceProfile::Constant { value, .. } if value.len() != d * d => {
                Err(Error::config(format!("constant profile needs {} values", d * d)))
            }
            VarianceProfile::Lookup { table, .. } if table.iter().any(|e| e.value.len() != d * d) => {
                Err(Error::config(format!("lookup entries need {} values", d * d)))
            }
            _ => Ok(()),
        }
    }

    /// `ν_y`, without the admissibility check.
    pub fn eval(&self, y: f64) -> Result<DMatrix<f64>> {
        let d = self.d();
        match self {
            VarianceProfile::AbsDev { center, scale } => Ok(DMatrix::from_element(1, 1, scale * (y - center).abs())),
            VarianceProfile::DiagAbsDev { centers, scales } => Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                centers.iter().zip(scales).map(|(c, s)| s * (y - c).abs()),
            ))),
            VarianceProfile::Constant { value, .. } => Ok(DMatrix::from_column_slice(d, d, value)),
            VarianceProfile::Lookup { table, .. } => table
                .iter()
                .find(|e| e.y == y)
                .map(|e| DMatrix::from_column_slice(d, d, &e.value))
                .ok_or_else(|| Error::config(format!("lookup profile has no entry for y = {y}"))),
        }
    }

    /// Eigen-split terms of `ν_y + I` used by the likelihood, after checking
    /// admissibility.
    pub fn terms(&self, y: f64) -> Result<DispersionTerms> {
        let nu = self.eval(y)?;
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::ProfileNotAdmissible { y });
        }
        if nu.nrows() == 1 {
            let a = 1.0 + nu[(0, 0)];
            if a <= ADMISSIBLE_MARGIN {
                return Err(Error::ProfileNotAdmissible { y });
            }
            return Ok(DispersionTerms {
                log_det: a.ln(),
                weight: DMatrix::from_element(1, 1, 1.0 / (a * a) - 1.0),
            });
        }
        let sym = SymMatrix::from_matrix(nu).map_err(|_| Error::ProfileNotAdmissible { y })?;
        let eig = eigen_sym(&sym)?;
        if eig.values.iter().any(|&l| l <= -1.0 + ADMISSIBLE_MARGIN) {
            return Err(Error::ProfileNotAdmissible { y });
        }
        let log_det = eig.values.iter().map(|l| (1.0 + l).ln()).sum();
        let w = DVector::from_iterator(eig.values.len(), eig.values.iter().map(|l| (1.0 + l).powi(-2) - 1.0));
        let weight = &eig.vectors * DMatrix::from_diagonal(&w) * eig.vectors.transpose();
        Ok(DispersionTerms {
            log_det,
            weight: SymMatrix::mirror_upper(weight).into_matrix(),
        })
    }
}

/// For one `y`: `log det(ν_y + I)` and `W = (ν_y + I)⁻² − I`.
#[derive(Clone, Debug)]
pub struct DispersionTerms {
    pub log_det: f64,
    pub weight: DMatrix<f64>,
}

/// A map `y ↦ ν_y ∈ ℝ^{d₁}` entering the conditional mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum MeanProfile {
    /// `slopeₖ · y + interceptₖ` per coordinate.
    Linear { slopes: Vec<f64>, intercepts: Vec<f64> },
    Lookup { d: usize, table: Vec<VectorEntry> },
}

impl MeanProfile {
    pub fn d(&self) -> usize {
        match self {
            MeanProfile::Linear { slopes, .. } => slopes.len(),
            MeanProfile::Lookup { d, .. } => *d,
        }
    }

    pub fn zero(d: usize) -> Self {
        MeanProfile::Linear {
            slopes: vec![0.0; d],
            intercepts: vec![0.0; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeanProfile::Linear { slopes, intercepts } if slopes.len() != intercepts.len() => {
                Err(Error::config("linear mean profile needs as many intercepts as slopes"))
            }
            MeanProfile::Lookup { d, table } if table.iter().any(|e| e.value.len() != *d) => {
                Err(Error::config(format!("lookup entries need {d} values")))
            }
            _ if self.d() == 0 => Err(Error::config("mean profile dimension must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: f64) -> Result<DVector<f64>> {
        match self {
            MeanProfile::Linear { slopes, intercepts } => Ok(DVector::from_iterator(
                slopes.len(),
                slopes.iter().zip(intercepts).map(|(b, a)| b * y + a),
            )),
            MeanProfile::Lookup { table, .. } => table
                .iter()
                .find(|e| e.y == y)
                .map(|e| DVector::from_column_slice(&e.value))
                .ok_or_else(|| Error::config(format!("lookup mean profile has no entry for y = {y}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model3Params {
    pub gamma: StiefelFrame,
    pub nu: VarianceProfile,
    pub sigma2: f64,
}

impl Model3Params {
    pub fn new(gamma: StiefelFrame, nu: VarianceProfile, sigma2: f64) -> Result<Self> {
        nu.validate()?;
        if nu.d() != gamma.d() {
            return Err(Error::dims(format!("profile has d = {} but frame has d = {}", nu.d(), gamma.d())));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::config(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self { gamma, nu, sigma2 })
    }

    pub fn p(&self) -> usize {
        self.gamma.p()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model5Params {
    pub mu: DVector<f64>,
    pub gamma1: StiefelFrame,
    pub nu: MeanProfile,
    pub gamma2: StiefelFrame,
    pub tau: VarianceProfile,
    pub sigma2: f64,
}

impl Model5Params {
    /// `d₁ + d₂ < p` is required unless both frames are the same matrix.
    pub fn new(
        mu: DVector<f64>,
        gamma1: StiefelFrame,
        nu: MeanProfile,
        gamma2: StiefelFrame,
        tau: VarianceProfile,
        sigma2: f64,
    ) -> Result<Self> {
        nu.validate()?;
        tau.validate()?;
        let p = gamma1.p();
        if gamma2.p() != p || mu.len() != p {
            return Err(Error::dims("μ, Γ₁ and Γ₂ must share the ambient dimension p"));
        }
        if nu.d() != gamma1.d() || tau.d() != gamma2.d() {
            return Err(Error::dims("profile dimensions must match their frames"));
        }
        if gamma1 != gamma2 && gamma1.d() + gamma2.d() >= p {
            return Err(Error::config(format!(
                "distinct frames need d1 + d2 < p, got {} + {} >= {p}",
                gamma1.d(),
                gamma2.d()
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::config(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self {
            mu,
            gamma1,
            nu,
            gamma2,
            tau,
            sigma2,
        })
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn shared_frame(&self) -> bool {
        self.gamma1 == self.gamma2
    }

    /// `μ + Γ₁ ν_y`.
    pub fn mean_at(&self, y: f64) -> Result<DVector<f64>> {
        Ok(&self.mu + self.gamma1.as_matrix() * self.nu.eval(y)?)
    }
}

/// Paired observations; row i of `x` goes with `y[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::config("n must be positive"));
        }
        if x.nrows() != y.len() || x.ncols() == 0 {
            return Err(Error::dims(format!("x is {}x{} but y has {} entries", x.nrows(), x.ncols(), y.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::config("dataset contains non-finite values"));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Projections `xᵢᵀ v` for every observation.
    pub fn project(&self, v: &DVector<f64>) -> Vec<f64> {
        (&self.x * v).as_slice().to_vec()
    }
}

fn dispersion_multiplier(gamma: &StiefelFrame, profile: &VarianceProfile, sigma2: f64, y: f64) -> Result<DMatrix<f64>> {
    profile.terms(y)?;
    let g = gamma.as_matrix();
    let p = g.nrows();
    let inner = g * profile.eval(y)? * g.transpose() + DMatrix::identity(p, p);
    Ok(SymMatrix::mirror_upper(inner * sigma2).into_matrix())
}

/// `M_y = σ²(Γ ν_y Γᵀ + I_p)`.
pub fn multiplier_matrix(params: &Model3Params, y: f64) -> Result<DMatrix<f64>> {
    dispersion_multiplier(&params.gamma, &params.nu, params.sigma2, y)
}

/// `σ²(Γ₂ τ_y Γ₂ᵀ + I_p)`.
pub fn multiplier_matrix5(params: &Model5Params, y: f64) -> Result<DMatrix<f64>> {
    dispersion_multiplier(&params.gamma2, &params.tau, params.sigma2, y)
}

fn check_ys(ys: &[f64]) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::config("n must be positive"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::config("responses must be finite"));
    }
    Ok(())
}

/// `xᵢ = M_{yᵢ} εᵢ` with `εᵢ` drawn in order from the seed's stream.
pub fn sample_model3(params: &Model3Params, ys: &[f64], seed: SeedSpec) -> Result<Dataset> {
    check_ys(ys)?;
    let p = params.p();
    let mut rng = seed.rng();
    let mut x = DMatrix::zeros(ys.len(), p);
    for (i, &y) in ys.iter().enumerate() {
        let m = multiplier_matrix(params, y)?;
        let eps = standard_normal_vector(&mut rng, p);
        x.set_row(i, &(m * eps).transpose());
    }
    Dataset::new(x, ys.to_vec())
}

/// `xᵢ = μ + Γ₁ν_{yᵢ} + σ²(Γ₂τ_{yᵢ}Γ₂ᵀ + I)εᵢ`.
pub fn sample_model5(params: &Model5Params, ys: &[f64], seed: SeedSpec) -> Result<Dataset> {
    check_ys(ys)?;
    let p = params.p();
    let mut rng = seed.rng();
    let mut x = DMatrix::zeros(ys.len(), p);
    for (i, &y) in ys.iter().enumerate() {
        let m = multiplier_matrix5(params, y)?;
        let eps = standard_normal_vector(&mut rng, p);
        x.set_row(i, &(params.mean_at(y)? + m * eps).transpose());
    }
    Dataset::new(x, ys.to_vec())
}

/// p = 3, d = 1, Γ = e₁, ν_y = |y|, σ² = 1.
pub fn example_2_1() -> Model3Params {
    Model3Params::new(
        StiefelFrame::axes(3, &[0]).expect("e1 is a frame"),
        VarianceProfile::AbsDev {
            center: 0.0,
            scale: 1.0,
        },
        1.0,
    )
    .expect("valid preset")
}

/// Mean (5y, 0, 0)ᵀ plus the dispersion of [`example_2_1`]; Γ₁ = Γ₂ = e₁.
pub fn example_2_2() -> Model5Params {
    let e1 = StiefelFrame::axes(3, &[0]).expect("e1 is a frame");
    Model5Params::new(
        DVector::zeros(3),
        e1.clone(),
        MeanProfile::Linear {
            slopes: vec![5.0],
            intercepts: vec![0.0],
        },
        e1,
        VarianceProfile::AbsDev {
            center: 0.0,
            scale: 1.0,
        },
        1.0,
    )
    .expect("valid preset")
}

/// On-disk parameter file. Frames are column-major; `d`/`d2` are optional
/// cross-checks on the column counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub model: u8,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<usize>,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<VarianceProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<VarianceProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_mean: Option<MeanProfile>,
}

/// Either model, as read from a [`ParamsFile`].
#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Dispersion(Model3Params),
    LocationDispersion(Model5Params),
}

impl ModelParams {
    pub fn p(&self) -> usize {
        match self {
            ModelParams::Dispersion(m) => m.p(),
            ModelParams::LocationDispersion(m) => m.p(),
        }
    }

    pub fn sample(&self, ys: &[f64], seed: SeedSpec) -> Result<Dataset> {
        match self {
            ModelParams::Dispersion(m) => sample_model3(m, ys, seed),
            ModelParams::LocationDispersion(m) => sample_model5(m, ys, seed),
        }
    }
}

fn required<T>(field: Option<T>, name: &str, model: u8) -> Result<T> {
    field.ok_or_else(|| Error::config(format!("model {model} parameter file needs `{name}`")))
}

fn frame_field(p: usize, data: Vec<f64>, expect_d: Option<usize>, name: &str) -> Result<StiefelFrame> {
    let frame = StiefelFrame::from_column_major(p, &data)?;
    if let Some(d) = expect_d {
        if frame.d() != d {
            return Err(Error::dims(format!("`{name}` has {} columns but d = {d}", frame.d())));
        }
    }
    Ok(frame)
}

impl ParamsFile {
    pub fn into_params(self) -> Result<ModelParams> {
        match self.model {
            3 => {
                let gamma = frame_field(self.p, required(self.gamma, "gamma", 3)?, self.d, "gamma")?;
                let nu = required(self.nu, "nu", 3)?;
                Ok(ModelParams::Dispersion(Model3Params::new(gamma, nu, self.sigma2)?))
            }
            5 => {
                let gamma1 = frame_field(self.p, required(self.gamma1, "gamma1", 5)?, self.d, "gamma1")?;
                let gamma2 = frame_field(self.p, required(self.gamma2, "gamma2", 5)?, self.d2, "gamma2")?;
                let mu = DVector::from_vec(self.mu.unwrap_or_else(|| vec![0.0; self.p]));
                let nu = required(self.nu_mean, "nu_mean", 5)?;
                let tau = required(self.tau, "tau", 5)?;
                Ok(ModelParams::LocationDispersion(Model5Params::new(
                    mu,
                    gamma1,
                    nu,
                    gamma2,
                    tau,
                    self.sigma2,
                )?))
            }
            other => Err(Error::config(format!("unknown model {other} (expected 3 or 5)"))),
        }
    }

    pub fn from_params(params: &ModelParams) -> Self {
        match params {
            ModelParams::Dispersion(m) => ParamsFile {
                model: 3,
                p: m.p(),
                d: Some(m.gamma.d()),
                d2: None,
                sigma2: m.sigma2,
                gamma: Some(m.gamma.to_column_major()),
                nu: Some(m.nu.clone()),
                mu: None,
                gamma1: None,
                gamma2: None,
                tau: None,
                nu_mean: None,
            },
            ModelParams::LocationDispersion(m) => ParamsFile {
                model: 5,
                p: m.p(),
                d: Some(m.gamma1.d()),
                d2: Some(m.gamma2.d()),
                sigma2: m.sigma2,
                gamma: None,
                nu: None,
                mu: Some(m.mu.as_slice().to_vec()),
                gamma1: Some(m.gamma1.to_column_major()),
                gamma2: Some(m.gamma2.to_column_major()),
                tau: Some(m.tau.clone()),
                nu_mean: Some(m.nu.clone()),
            },
        }
    }
}
