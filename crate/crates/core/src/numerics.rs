//! Seeded random streams and the small dense linear algebra the rest of the
//! crate is built on.
//!
//! Matrices here are tiny (p is at most a few dozen), so everything is plain
//! `nalgebra` dynamic storage. The symmetric eigensolver is a cyclic Jacobi
//! iteration, which is accurate to working precision for matrices of this size
//! and returns orthonormal vectors even for clustered spectra.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries with magnitude at or below this are treated as zero when fixing
/// eigenvector signs.
pub const SIGN_EPS: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Identifies one reproducible random stream.
///
/// The stream is a ChaCha8 generator keyed by `master_seed` with its stream
/// counter set to `stream_id`, so distinct ids never overlap and a given pair
/// always yields the same numbers regardless of thread scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream `index` of a child family derived from this stream.
    ///
    /// Used when a seeded unit of work (one trial, one fit) needs its own
    /// indexed sub-streams.
    pub fn substream(&self, index: u64) -> SeedSpec {
        let key = splitmix64(self.master_seed ^ splitmix64(self.stream_id.wrapping_add(0x5EED)));
        SeedSpec::new(key, index)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A real symmetric matrix. Only the upper triangle of the input is kept; the
/// lower triangle is mirrored from it so symmetry holds bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Accepts a square matrix whose two triangles agree to rounding
    /// (relative 1e-10), then mirrors the upper triangle.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        if p == 0 || m.ncols() != p {
            return Err(Error::dims(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = 1.0 + m.iter().filter(|v| v.is_finite()).fold(0.0_f64, |a, v| a.max(v.abs()));
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if a.is_finite() && b.is_finite() && (a - b).abs() > 1e-10 * scale {
                    return Err(Error::NotSymmetric {
                        i,
                        j,
                        gap: (a - b).abs(),
                    });
                }
            }
        }
        Ok(Self::mirror_upper(m))
    }

    /// Mirrors the upper triangle without checking the lower one.
    pub fn mirror_upper(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                m[(j, i)] = m[(i, j)];
            }
        }
        Self { inner: m }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            inner: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.inner * x))
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomp {
    /// `V · diag(values) · Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Values come back sorted descending (stable, so equal values keep their
/// Jacobi order) and each eigenvector is signed so that its first entry with
/// magnitude above [`SIGN_EPS`] is positive.
pub fn eigen_sym(m: &SymMatrix) -> Result<EigenDecomp> {
    if !m.is_finite() {
        return Err(Error::NonFiniteMatrix);
    }
    let p = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(p, p);
    let frob = a.norm();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-17 * frob {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                jacobi_rotate(&mut a, &mut v, i, j);
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[(y, y)].partial_cmp(&a[(x, x)]).unwrap_or(std::cmp::Ordering::Equal));

    let values = DVector::from_iterator(p, order.iter().map(|&k| a[(k, k)]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomp { values, vectors })
}

/// One two-sided rotation annihilating `a[(i, j)]`.
fn jacobi_rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, i: usize, j: usize) {
    let aij = a[(i, j)];
    if aij == 0.0 {
        return;
    }
    let theta = (a[(j, j)] - a[(i, i)]) / (2.0 * aij);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let p = a.nrows();

    for k in 0..p {
        let (aki, akj) = (a[(k, i)], a[(k, j)]);
        a[(k, i)] = c * aki - s * akj;
        a[(k, j)] = s * aki + c * akj;
    }
    for k in 0..p {
        let (aik, ajk) = (a[(i, k)], a[(j, k)]);
        a[(i, k)] = c * aik - s * ajk;
        a[(j, k)] = s * aik + c * ajk;
    }
    a[(i, j)] = 0.0;
    a[(j, i)] = 0.0;

    for k in 0..p {
        let (vki, vkj) = (v[(k, i)], v[(k, j)]);
        v[(k, i)] = c * vki - s * vkj;
        v[(k, j)] = s * vki + c * vkj;
    }
}

/// Flips `col` so its first entry above [`SIGN_EPS`] in magnitude is positive.
pub fn fix_sign(col: &mut DVector<f64>) {
    if let Some(first) = col.iter().find(|x| x.abs() > SIGN_EPS) {
        if *first < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.sample(StandardNormal))
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill so the draw order is fixed by the storage layout
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Thin QR orthonormalization with the `R` diagonal made non-negative, so the
/// result is a function of the column span and column order only.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn haar_orthogonal_with<R: Rng + ?Sized>(rng: &mut R, p: usize) -> DMatrix<f64> {
    orthonormalize(&standard_normal_matrix(rng, p, p))
}

/// A Haar-distributed p×p orthogonal matrix: QR of a standard-normal matrix
/// with the sign correction on `R`'s diagonal.
pub fn sample_haar_orthogonal(p: usize, seed: SeedSpec) -> DMatrix<f64> {
    haar_orthogonal_with(&mut seed.rng(), p)
}

pub fn sample_mvn_with<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    cov_factor: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let p = mean.len();
    if cov_factor.nrows() != p {
        return Err(Error::dims(format!(
            "mean has length {p} but covariance factor has {} rows",
            cov_factor.nrows()
        )));
    }
    let z = standard_normal_vector(rng, cov_factor.ncols());
    Ok(mean + cov_factor * z)
}

/// `mean + L·z` with `z` standard normal, where `L Lᵀ` is the target covariance.
pub fn sample_mvn(mean: &DVector<f64>, cov_factor: &DMatrix<f64>, seed: SeedSpec) -> Result<DVector<f64>> {
    sample_mvn_with(&mut seed.rng(), mean, cov_factor)
}

/// Pearson correlation with 1/n moments. Returns 0 when either side has zero
/// variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
