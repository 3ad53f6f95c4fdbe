//! Empirical checks of the reduction `Y ⫫ X | ΓᵀX` and subspace comparison.
//!
//! The checkable consequence is `Γ₀ᵀX ⫫ Y` for any orthogonal completion
//! `Γ₀`. We correlate each complement coordinate (or its centered square)
//! with the test functions `y`, `|y − ȳ|` and `(y − ȳ)²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dataset, StiefelFrame};
use crate::numerics::{orthonormalize, pearson};

pub const MIN_N: usize = 30;
pub const TEST_FUNCTIONS: [&str; 3] = ["y", "abs_centered_y", "squared_centered_y"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    /// `stats[j][k]`: correlation of complement coordinate j with test function k.
    pub stats: Vec<Vec<f64>>,
    pub max_abs: f64,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
    /// Same layout for the Γ-side coordinates; only filled by [`dispersion_check`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_stats: Option<Vec<Vec<f64>>>,
}

impl IndependenceReport {
    /// Largest Γ-side magnitude, when present.
    pub fn signal_max_abs(&self) -> Option<f64> {
        self.signal_stats.as_ref().map(|s| max_entry(s))
    }
}

fn max_entry(stats: &[Vec<f64>]) -> f64 {
    stats.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `Γ₀` with `(Γ, Γ₀)` orthogonal, from the QR factorization of `[Γ | I_p]`.
pub fn complement_basis(gamma: &StiefelFrame) -> StiefelFrame {
    let (p, d) = (gamma.p(), gamma.d());
    let mut aug = DMatrix::<f64>::zeros(p, d + p);
    aug.view_mut((0, 0), (p, d)).copy_from(gamma.as_matrix());
    aug.view_mut((0, d), (p, p)).fill_with_identity();
    let q = orthonormalize(&aug);
    let tail = q.columns(d, p - d).into_owned();
    // the first d columns of q span Γ, so the tail is an exact completion
    StiefelFrame::new(tail).expect("orthogonal completion of a valid frame")
}

fn test_functions(y: &[f64]) -> [Vec<f64>; 3] {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    [
        y.to_vec(),
        y.iter().map(|v| (v - mean).abs()).collect(),
        y.iter().map(|v| (v - mean).powi(2)).collect(),
    ]
}

/// Centered squares `(t − t̄)²`.
fn centered_squares(t: &[f64]) -> Vec<f64> {
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    t.iter().map(|v| (v - mean).powi(2)).collect()
}

fn correlation_table(coords: &DMatrix<f64>, squared: bool, tests: &[Vec<f64>; 3]) -> Vec<Vec<f64>> {
    coords
        .column_iter()
        .map(|c| {
            let c = c.as_slice().to_vec();
            let c = if squared { centered_squares(&c) } else { c };
            tests.iter().map(|t| pearson(&c, t)).collect()
        })
        .collect()
}

fn check_inputs(data: &Dataset, gamma: &StiefelFrame) -> Result<()> {
    if data.n() < MIN_N {
        return Err(Error::config(format!("diagnostics need n >= {MIN_N}, got {}", data.n())));
    }
    if data.p() != gamma.p() {
        return Err(Error::dims(format!("data has p = {} but frame has p = {}", data.p(), gamma.p())));
    }
    Ok(())
}

fn report(stats: Vec<Vec<f64>>, n: usize, signal_stats: Option<Vec<Vec<f64>>>) -> IndependenceReport {
    let max_abs = max_entry(&stats);
    let threshold = 4.0 / (n as f64).sqrt();
    IndependenceReport {
        stats,
        max_abs,
        n,
        threshold,
        pass: max_abs <= threshold,
        signal_stats,
    }
}

/// Linear correlations of `Γ₀ᵀx` with the test functions of y.
pub fn independence_check(data: &Dataset, gamma: &StiefelFrame) -> Result<IndependenceReport> {
    check_inputs(data, gamma)?;
    let g0 = complement_basis(gamma);
    let tests = test_functions(&data.y);
    let stats = correlation_table(&(&data.x * g0.as_matrix()), false, &tests);
    Ok(report(stats, data.n(), None))
}

/// Correlations of the centered squared coordinates, which see y-dependence
/// living only in the conditional variance. The Γ side is reported in
/// `signal_stats` and does not enter `pass`.
pub fn dispersion_check(data: &Dataset, gamma: &StiefelFrame) -> Result<IndependenceReport> {
    check_inputs(data, gamma)?;
    let g0 = complement_basis(gamma);
    let tests = test_functions(&data.y);
    let stats = correlation_table(&(&data.x * g0.as_matrix()), true, &tests);
    let signal = correlation_table(&(&data.x * gamma.as_matrix()), true, &tests);
    Ok(report(stats, data.n(), Some(signal)))
}

/// Largest principal angle between the column spaces, in radians.
///
/// Uses `atan2(sin, cos)` with `cos = σ_min(aᵀb)` and
/// `sin = σ_max((I − aaᵀ)b)`, which stays accurate near 0 and near π/2.
pub fn subspace_angle(a: &StiefelFrame, b: &StiefelFrame) -> Result<f64> {
    if a.p() != b.p() || a.d() != b.d() {
        return Err(Error::dims(format!(
            "frames are {}x{} and {}x{}",
            a.p(),
            a.d(),
            b.p(),
            b.d()
        )));
    }
    let (am, bm) = (a.as_matrix(), b.as_matrix());
    let cross = am.transpose() * bm;
    let cos = cross.singular_values().min().clamp(0.0, 1.0);
    let resid = bm - am * &cross;
    let sin = resid.singular_values().max().clamp(0.0, 1.0);
    Ok(sin.atan2(cos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_model3, FitOptions};
    use crate::models::{example_2_1, sample_model3, Model3Params, VarianceProfile};
    use crate::numerics::{max_abs, SeedSpec};
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::FRAC_PI_2;

    fn normal_ys(seed: u64, n: usize, mean: f64) -> Vec<f64> {
        let mut rng = SeedSpec::new(seed, 99).rng();
        let dist = Normal::new(mean, 1.0).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn complement_of_first_axis() {
        let e1 = StiefelFrame::axes(3, &[0]).unwrap();
        let g0 = complement_basis(&e1);
        let m = g0.as_matrix();
        assert_eq!(m.shape(), (3, 2));
        assert!(m.row(0).iter().all(|v| *v == 0.0));
        assert!(max_abs(&(m.transpose() * m - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn resolution_of_identity() {
        let mut rng = SeedSpec::new(1, 0).rng();
        for (p, d) in [(5, 2), (4, 1), (6, 3), (2, 1)] {
            for _ in 0..50 {
                let g = StiefelFrame::random(&mut rng, p, d).unwrap();
                let g0 = complement_basis(&g);
                let (a, b) = (g.as_matrix(), g0.as_matrix());
                assert!(max_abs(&(b.transpose() * a)) < 1e-10);
                let proj = a * a.transpose() + b * b.transpose();
                assert!(max_abs(&(proj - DMatrix::identity(p, p))) < 1e-10);
            }
        }
    }

    #[test]
    fn angle_special_cases() {
        let e1 = StiefelFrame::axes(3, &[0]).unwrap();
        let e2 = StiefelFrame::axes(3, &[1]).unwrap();
        assert_eq!(subspace_angle(&e1, &e1).unwrap(), 0.0);
        assert!((subspace_angle(&e1, &e2).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let v = nalgebra::DMatrix::from_column_slice(3, 1, &[0.964, 0.047, 0.068]);
        let b = StiefelFrame::orthonormalized(&v).unwrap();
        let norm = (0.964f64.powi(2) + 0.047f64.powi(2) + 0.068f64.powi(2)).sqrt();
        let want = (0.964 / norm).acos();
        assert!((subspace_angle(&e1, &b).unwrap() - want).abs() < 1e-12);
        let e12 = StiefelFrame::axes(3, &[0, 1]).unwrap();
        assert!(subspace_angle(&e1, &e12).is_err());
    }

    #[test]
    fn angle_is_symmetric_and_rotation_invariant() {
        let mut rng = SeedSpec::new(2, 0).rng();
        for _ in 0..100 {
            let a = StiefelFrame::random(&mut rng, 6, 3).unwrap();
            let b = StiefelFrame::random(&mut rng, 6, 3).unwrap();
            let ab = subspace_angle(&a, &b).unwrap();
            assert!((ab - subspace_angle(&b, &a).unwrap()).abs() < 1e-10);
            let q = crate::numerics::haar_orthogonal_with(&mut rng, 3);
            let br = StiefelFrame::new(b.as_matrix() * q).unwrap();
            assert!((ab - subspace_angle(&a, &br).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn small_samples_rejected() {
        let data = sample_model3(&example_2_1(), &normal_ys(0, 10, 2.0), SeedSpec::new(0, 0)).unwrap();
        let e1 = StiefelFrame::axes(3, &[0]).unwrap();
        assert!(independence_check(&data, &e1).is_err());
    }

    #[test]
    fn true_frame_passes_and_signal_is_visible() {
        let ys = normal_ys(3, 10_000, 2.0);
        let data = sample_model3(&example_2_1(), &ys, SeedSpec::new(3, 0)).unwrap();
        let e1 = StiefelFrame::axes(3, &[0]).unwrap();
        let lin = independence_check(&data, &e1).unwrap();
        assert!(lin.pass, "{lin:?}");
        assert!(lin.stats.iter().flatten().all(|v| v.abs() <= 1.0));
        let disp = dispersion_check(&data, &e1).unwrap();
        assert!(disp.pass, "{disp:?}");
        assert!(disp.signal_max_abs().unwrap() > 0.3, "{disp:?}");
        // the wrong frame leaves the signal in the complement
        let e3 = StiefelFrame::axes(3, &[2]).unwrap();
        assert!(!dispersion_check(&data, &e3).unwrap().pass);
    }

    #[test]
    fn constant_profile_passes() {
        let params = Model3Params::new(
            StiefelFrame::axes(3, &[0]).unwrap(),
            VarianceProfile::Constant { d: 1, value: vec![2.0] },
            1.0,
        )
        .unwrap();
        let data = sample_model3(&params, &normal_ys(4, 10_000, 2.0), SeedSpec::new(4, 0)).unwrap();
        let e1 = StiefelFrame::axes(3, &[0]).unwrap();
        let rep = dispersion_check(&data, &e1).unwrap();
        assert!(rep.pass);
        assert!(rep.signal_max_abs().unwrap() <= rep.threshold);
    }

    #[test]
    fn fitted_and_true_frames_agree() {
        let ys = normal_ys(5, 10_000, 2.0);
        let data = sample_model3(&example_2_1(), &ys, SeedSpec::new(5, 0)).unwrap();
        let e1 = StiefelFrame::axes(3, &[0]).unwrap();
        let nu = example_2_1().nu;
        let fit = fit_model3(&data, &nu, 1, &FitOptions::with_seed(5)).unwrap();
        let a = dispersion_check(&data, &e1).unwrap();
        let b = dispersion_check(&data, &fit.gamma_hat).unwrap();
        assert_eq!(a.pass, b.pass);
    }

    #[test]
    fn shuffled_response_passes() {
        let mut passes = 0;
        for rep in 0..200u64 {
            let ys = normal_ys(rep, 1000, 2.0);
            let mut data = sample_model3(&example_2_1(), &ys, SeedSpec::new(rep, 0)).unwrap();
            data.y.shuffle(&mut SeedSpec::new(rep, 1).rng());
            let e1 = StiefelFrame::axes(3, &[0]).unwrap();
            if independence_check(&data, &e1).unwrap().pass {
                passes += 1;
            }
        }
        assert!(passes >= 190, "{passes}/200");
    }
}
