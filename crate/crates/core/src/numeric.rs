//! Complex vector/matrix kernels and seeded complex Gaussian sampling.
//!
//! Vectors and matrices are `nalgebra` dynamic types over `Complex<f64>`.
//! Every inverse is checked by its residual before it is returned.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

pub type C64 = Complex<f64>;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Per-entry tolerance for treating a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest admissible singular value relative to the largest.
pub const RANK_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue relative to the largest.
pub const PD_TOL: f64 = 1e-12;
/// Per-entry residual allowed for `M·M⁻¹ − I`.
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const J: C64 = C64::new(0.0, 1.0);

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Monte-Carlo trial `k` uses stream `k`, so results do not depend on how
/// trials are scheduled across threads.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One CN(0, variance) sample.
    pub fn cgauss(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// `n` i.i.d. CN(0, variance) samples; `variance` is the total complex variance.
pub fn sample_cgauss(n: usize, variance: f64, rng: &mut RngStream) -> Result<CVec> {
    if n == 0 {
        return domain("sample count must be at least 1");
    }
    if !(variance >= 0.0) {
        return domain(format!("variance must be nonnegative, got {variance}"));
    }
    Ok(CVec::from_iterator(n, (0..n).map(|_| rng.cgauss(variance))))
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `max |A − B|` over entries.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Inverse of a Hermitian positive-definite matrix, residual-checked.
pub fn invert_hermitian(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if !m.is_square() || n == 0 {
        return Err(Error::Singular("matrix must be square and nonempty".into()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if !is_hermitian(m, HERMITIAN_TOL * scale) {
        return Err(Error::Singular("matrix is not Hermitian".into()));
    }
    let ev = hermitian_eigenvalues(m);
    let (lo, hi) = (ev[0], ev[n - 1]);
    if !(hi > 0.0) || lo <= PD_TOL * hi {
        return Err(Error::Singular(format!("matrix is not positive definite (eigenvalues {lo:e} .. {hi:e})")));
    }
    let inv = m.clone().cholesky().ok_or_else(|| Error::Singular("Cholesky factorization failed".into()))?.inverse();
    check_residual(m, &inv)?;
    Ok(inv)
}

fn check_residual(m: &CMat, inv: &CMat) -> Result<()> {
    let n = m.nrows();
    let res = max_abs_diff(&(m * inv), &identity(n));
    if res > INVERSE_RESIDUAL_TOL {
        return Err(Error::Singular(format!("inverse residual {res:e} too large")));
    }
    Ok(())
}

/// Gram matrix `TᴴT` after verifying full column rank.
fn checked_gram(t: &CMat) -> Result<CMat> {
    if t.ncols() == 0 || t.ncols() > t.nrows() {
        return Err(Error::Singular(format!("{}x{} matrix cannot have full column rank", t.nrows(), t.ncols())));
    }
    let gram = t.adjoint() * t;
    let ev = hermitian_eigenvalues(&gram);
    let (lo, hi) = (ev[0].max(0.0).sqrt(), ev[ev.len() - 1].max(0.0).sqrt());
    if !(hi > 0.0) || lo <= RANK_TOL * hi {
        return Err(Error::Singular(format!("rank-deficient columns (singular values {lo:e} .. {hi:e})")));
    }
    Ok(gram)
}

/// Left pseudo-inverse `(TᴴT)⁻¹Tᴴ` of a full-column-rank matrix.
pub fn pseudo_inverse(t: &CMat) -> Result<CMat> {
    let gram = checked_gram(t)?;
    Ok(invert_hermitian(&gram)? * t.adjoint())
}

/// Orthogonal projector `T(TᴴT)⁻¹Tᴴ` onto the column span of `T`.
pub fn projection_onto_columns(t: &CMat) -> Result<CMat> {
    let p = t * pseudo_inverse(t)?;
    // symmetrize away rounding so the Hermitian tag holds exactly
    Ok((&p + p.adjoint()).scale(0.5))
}

/// `aᴴb`.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}
