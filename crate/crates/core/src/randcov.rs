//! Two "uniform" generators for random covariance matrices.
//!
//! Both draw eigenvalue-scale parameters i.i.d. `U(0, c)`; `c` is an explicit
//! truncation since no proper uniform law exists on the positive-definite
//! cone.
//!
//! * `Rotation`: `Σ = A diag(λ) Aᵀ` with `A` a uniformly random rotation
//!   (angle `θ ~ U(0, 2π)` for p = 2, a Haar orthogonal matrix for p > 2).
//! * `Entry` (p = 2 only): `Σ = [[λ₁, α], [α, λ₂]]` with
//!   `α | λ ~ U(−√(λ₁λ₂), √(λ₁λ₂))`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{haar_orthogonal_with, SeedSpec, SymMatrix};

pub const DEFAULT_C: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Rotation,
    Entry,
}

impl fmt::Display for CovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovKind::Rotation => "rotation",
            CovKind::Entry => "entry",
        })
    }
}

impl FromStr for CovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(CovKind::Rotation),
            "entry" => Ok(CovKind::Entry),
            other => Err(Error::config(format!("unknown scheme {other:?} (expected rotation|entry)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovScheme {
    pub kind: CovKind,
    pub c: f64,
    pub p: usize,
}

impl CovScheme {
    pub fn new(kind: CovKind, c: f64, p: usize) -> Result<Self> {
        let scheme = Self { kind, c, p };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("c must be positive, got {}", self.c)));
        }
        if self.p == 0 {
            return Err(Error::config("p must be at least 1"));
        }
        if self.kind == CovKind::Entry && self.p != 2 {
            return Err(Error::config(format!("entry scheme is defined for p = 2 only, got p = {}", self.p)));
        }
        Ok(())
    }

    /// Draws one Σ according to the scheme.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        match self.kind {
            CovKind::Rotation => draw_rotation(self, rng).0,
            CovKind::Entry => draw_entry(self, rng),
        }
    }
}

/// `U(0, c)` excluding the endpoint zero.
fn open_uniform<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u * c;
        }
    }
}

/// `A diag(λ₁, λ₂) Aᵀ` with `A = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn rotation_sigma(lambdas: [f64; 2], theta: f64) -> SymMatrix {
    let (s, c) = theta.sin_cos();
    let a = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
    conjugate_diag(&a, &lambdas)
}

/// `Q diag(λ) Qᵀ`.
pub fn conjugate_diag(q: &DMatrix<f64>, lambdas: &[f64]) -> SymMatrix {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(lambdas));
    SymMatrix::mirror_upper(q * d * q.transpose())
}

/// `[[λ₁, α], [α, λ₂]]`.
pub fn entry_sigma(lambdas: [f64; 2], alpha: f64) -> SymMatrix {
    SymMatrix::mirror_upper(DMatrix::from_row_slice(2, 2, &[lambdas[0], alpha, alpha, lambdas[1]]))
}

pub(crate) fn draw_rotation<R: Rng + ?Sized>(scheme: &CovScheme, rng: &mut R) -> (SymMatrix, Vec<f64>) {
    let lambdas: Vec<f64> = (0..scheme.p).map(|_| open_uniform(rng, scheme.c)).collect();
    let sigma = if scheme.p == 2 {
        let theta = rng.gen::<f64>() * TAU;
        rotation_sigma([lambdas[0], lambdas[1]], theta)
    } else {
        let q = haar_orthogonal_with(rng, scheme.p);
        conjugate_diag(&q, &lambdas)
    };
    (sigma, lambdas)
}

fn draw_entry<R: Rng + ?Sized>(scheme: &CovScheme, rng: &mut R) -> SymMatrix {
    let l1 = open_uniform(rng, scheme.c);
    let l2 = open_uniform(rng, scheme.c);
    let bound = (l1 * l2).sqrt();
    // the closed endpoints give a singular Σ; redraw on the (measure-zero) hit
    let alpha = loop {
        let a = bound * (2.0 * rng.gen::<f64>() - 1.0);
        if l1 * l2 - a * a > 0.0 {
            break a;
        }
    };
    entry_sigma([l1, l2], alpha)
}

pub fn sample_rotation_sigma(scheme: &CovScheme, seed: SeedSpec) -> Result<SymMatrix> {
    scheme.validate()?;
    if scheme.kind != CovKind::Rotation {
        return Err(Error::config("sample_rotation_sigma requires the rotation scheme"));
    }
    Ok(draw_rotation(scheme, &mut seed.rng()).0)
}

pub fn sample_entry_sigma(scheme: &CovScheme, seed: SeedSpec) -> Result<SymMatrix> {
    scheme.validate()?;
    if scheme.kind != CovKind::Entry {
        return Err(Error::config("sample_entry_sigma requires the entry scheme"));
    }
    Ok(draw_entry(scheme, &mut seed.rng()))
}
