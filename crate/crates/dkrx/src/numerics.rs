//! Complex linear-algebra kernel: vector/matrix aliases, reproducible RNG
//! streams, Gaussian sampling, and the least-squares / regularized solvers
//! used as centralized oracles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
/// Column vector of complex signal amplitudes.
pub type CVector = DVector<C64>;
/// Dense complex matrix (nalgebra column-major storage).
pub type CMatrix = DMatrix<C64>;

/// Relative singular-value cutoff for minimum-norm least squares: singular
/// values below `cutoff * sigma_max` are treated as zero.
pub const SV_CUTOFF: f64 = 1e-12;

/// A reproducible, addressable random stream.
///
/// Streams are realized as ChaCha8 keystreams. The derivation rule is fixed so
/// results reproduce across machines:
///
/// 1. the 256-bit ChaCha key is expanded from `seed` with SplitMix64
///    (`ChaCha8Rng::seed_from_u64`),
/// 2. the 64-bit ChaCha stream counter is set to `stream`.
///
/// Identical `(seed, stream)` pairs therefore yield bitwise-identical draw
/// sequences, and distinct stream ids select disjoint keystreams of the same
/// key, giving statistically independent sequences for parallel trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws `n` fair bits, taken LSB-first from successive 64-bit words of the
/// stream. The chunked rule is part of the reproducibility contract.
pub fn draw_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    let mut remaining = n;
    while remaining > 0 {
        let word: u64 = rng.random();
        let take = remaining.min(64);
        for j in 0..take {
            bits.push(((word >> j) & 1) as u8);
        }
        remaining -= take;
    }
    bits
}

/// Samples one CN(0, `variance`) scalar: real and imaginary parts are
/// independent N(0, `variance`/2), drawn in (re, im) order.
pub fn sample_cn_scalar(rng: &mut ChaCha8Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Samples a circularly-symmetric complex Gaussian vector with i.i.d.
/// CN(0, `variance`) entries.
pub fn sample_complex_gaussian(dim: usize, variance: f64, stream: RngStream) -> Result<CVector> {
    if dim == 0 {
        return Err(Error::invalid("sample_complex_gaussian: dim must be positive"));
    }
    if !(variance >= 0.0) {
        return Err(Error::invalid(format!(
            "sample_complex_gaussian: variance must be nonnegative, got {variance}"
        )));
    }
    let mut rng = stream.rng();
    Ok(sample_complex_gaussian_with(&mut rng, dim, variance))
}

/// As [`sample_complex_gaussian`] but drawing from an already-positioned
/// generator; used where several quantities share one stream.
pub fn sample_complex_gaussian_with(rng: &mut ChaCha8Rng, dim: usize, variance: f64) -> CVector {
    CVector::from_fn(dim, |_, _| sample_cn_scalar(rng, variance))
}

/// Minimum-norm least-squares solution of `A x ~ b` (Moore-Penrose solution),
/// computed via SVD with singular values below `SV_CUTOFF * sigma_max`
/// truncated. For full-column-rank `A` this is the unique LS minimizer.
pub fn ls_solve(a: &CMatrix, b: &CVector) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "ls_solve: A has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("ls_solve: SVD did not converge".into()))?;
    let sigma_max = svd.singular_values.max();
    let eps = SV_CUTOFF * sigma_max;
    svd.solve(b, eps)
        .map(|x| x.column(0).into_owned())
        .map_err(|e| Error::Numerical(format!("ls_solve: {e}")))
}

/// Moore-Penrose pseudoinverse with the same cutoff rule as [`ls_solve`].
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("pseudo_inverse: SVD did not converge".into()))?;
    let eps = SV_CUTOFF * svd.singular_values.max();
    svd.pseudo_inverse(eps)
        .map_err(|e| Error::Numerical(format!("pseudo_inverse: {e}")))
}

/// Numerical rank with the same cutoff rule as [`ls_solve`].
pub fn rank(a: &CMatrix) -> Result<usize> {
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("rank: SVD did not converge".into()))?;
    let eps = SV_CUTOFF * svd.singular_values.max();
    Ok(svd.singular_values.iter().filter(|&&s| s > eps).count())
}

/// Tikhonov-regularized solve `x = A^H (A A^H + xi I)^{-1} b`, the x-part of
/// the minimum-norm solution of the consistent augmented system
/// `[A, sqrt(xi) I] z = b`; algebraically equal to `(A^H A + xi I)^{-1} A^H b`.
///
/// The `M x M` Gram system is solved by Cholesky, which exists for any
/// `xi > 0`.
pub fn regularized_solve(a: &CMatrix, b: &CVector, xi: f64) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "regularized_solve: A has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    if !(xi > 0.0) {
        return Err(Error::invalid(format!(
            "regularized_solve: xi must be positive, got {xi}"
        )));
    }
    let m = a.nrows();
    let mut gram = a * a.adjoint();
    for i in 0..m {
        gram[(i, i)] += C64::new(xi, 0.0);
    }
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::Numerical("regularized_solve: Gram matrix not positive definite".into()))?;
    let w = chol.solve(b);
    Ok(a.adjoint() * w)
}

/// Relative l2 distance `||a - b|| / max(||b||, floor)`; `floor` guards the
/// zero-reference case.
pub fn rel_error(a: &CVector, b: &CVector) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE.sqrt());
    (a - b).norm() / denom
}

/// Largest entry modulus of a vector.
pub fn max_abs(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_variance_gives_zero_vector() {
        let v = sample_complex_gaussian(4, 0.0, RngStream::new(1, 0)).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(sample_complex_gaussian(4, -1.0, RngStream::new(1, 0)).is_err());
        assert!(sample_complex_gaussian(0, 1.0, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn unit_variance_energy_monte_carlo() {
        // E|z|^2 = 1 for CN(0,1); 1e5 samples put the mean within [0.99, 1.01].
        let v = sample_complex_gaussian(100_000, 1.0, RngStream::new(7, 3)).unwrap();
        let mean_energy = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((0.99..=1.01).contains(&mean_energy), "mean energy {mean_energy}");
    }

    #[test]
    fn variance_two_mean_near_zero() {
        let v = sample_complex_gaussian(100_000, 2.0, RngStream::new(9, 1)).unwrap();
        let n = v.len() as f64;
        let mean_re = v.iter().map(|z| z.re).sum::<f64>() / n;
        let mean_im = v.iter().map(|z| z.im).sum::<f64>() / n;
        assert!(mean_re.abs() < 0.02, "mean re {mean_re}");
        assert!(mean_im.abs() < 0.02, "mean im {mean_im}");
    }

    #[test]
    fn same_stream_is_bitwise_reproducible() {
        let a = sample_complex_gaussian(64, 1.5, RngStream::new(42, 5)).unwrap();
        let b = sample_complex_gaussian(64, 1.5, RngStream::new(42, 5)).unwrap();
        assert_eq!(a, b);
        let c = sample_complex_gaussian(64, 1.5, RngStream::new(42, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ls_solve_identity_system() {
        let a = CMatrix::identity(3, 3);
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)]);
        let x = ls_solve(&a, &b).unwrap();
        assert!((&x - &b).norm() < 1e-14);
    }

    #[test]
    fn ls_solve_overdetermined_average() {
        // A = [[1],[1]], b = (1,3): normal equations give x = 2.
        let a = CMatrix::from_element(2, 1, c(1.0, 0.0));
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0)]);
        let x = ls_solve(&a, &b).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ls_solve_rank_deficient_minimum_norm() {
        // Rank-1 system x1 + x2 = 2 (twice): minimum-norm solution is (1,1).
        let a = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let b = CVector::from_vec(vec![c(2.0, 0.0), c(2.0, 0.0)]);
        let x = ls_solve(&a, &b).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ls_solve_dimension_mismatch() {
        let a = CMatrix::identity(3, 3);
        let b = CVector::from_element(2, c(1.0, 0.0));
        assert!(matches!(ls_solve(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ls_solve_recovers_full_rank_solution() {
        let mut rng = RngStream::new(11, 0).rng();
        for _ in 0..20 {
            let a = CMatrix::from_fn(8, 4, |_, _| sample_cn_scalar(&mut rng, 1.0));
            let x0 = sample_complex_gaussian_with(&mut rng, 4, 1.0);
            let b = &a * &x0;
            let x = ls_solve(&a, &b).unwrap();
            assert!(rel_error(&x, &x0) < 1e-10, "rel err {}", rel_error(&x, &x0));
        }
    }

    #[test]
    fn regularized_solve_identity() {
        let a = CMatrix::identity(2, 2);
        let b = CVector::from_element(2, c(1.0, 0.0));
        let x = regularized_solve(&a, &b, 1.0).unwrap();
        assert!((x[0] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((x[1] - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn regularized_solve_small_xi_approaches_ls() {
        let a = CMatrix::from_element(1, 1, c(2.0, 0.0));
        let b = CVector::from_element(1, c(4.0, 0.0));
        let x = regularized_solve(&a, &b, 1e-4).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn regularized_solve_underdetermined() {
        // A = [1 1], b = 2, xi = 2: x = A^H (A A^H + xi)^{-1} b = (0.5, 0.5).
        let a = CMatrix::from_element(1, 2, c(1.0, 0.0));
        let b = CVector::from_element(1, c(2.0, 0.0));
        let x = regularized_solve(&a, &b, 2.0).unwrap();
        assert!((x[0] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((x[1] - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn regularized_solve_rejects_bad_args() {
        let a = CMatrix::identity(2, 2);
        let b = CVector::from_element(2, c(1.0, 0.0));
        assert!(regularized_solve(&a, &b, 0.0).is_err());
        assert!(regularized_solve(&a, &b, -1.0).is_err());
        let short = CVector::from_element(1, c(1.0, 0.0));
        assert!(regularized_solve(&a, &short, 1.0).is_err());
    }

    #[test]
    fn regularized_matches_augmented_ls() {
        // x-part of the minimum-norm solution of [A, sqrt(xi) I] z = b equals
        // the direct regularized solve; this identity is what makes the
        // augmented consistent system equivalent to Tikhonov regularization.
        let mut rng = RngStream::new(23, 0).rng();
        for &xi in &[0.3f64, 1.0, 4.0] {
            let m = 6;
            let k = 3;
            let a = CMatrix::from_fn(m, k, |_, _| sample_cn_scalar(&mut rng, 1.0));
            let b = sample_complex_gaussian_with(&mut rng, m, 1.0);
            let mut aug = CMatrix::zeros(m, k + m);
            aug.view_mut((0, 0), (m, k)).copy_from(&a);
            for i in 0..m {
                aug[(i, k + i)] = c(xi.sqrt(), 0.0);
            }
            let z = ls_solve(&aug, &b).unwrap();
            let x_aug = z.rows(0, k).into_owned();
            let x_reg = regularized_solve(&a, &b, xi).unwrap();
            assert!(rel_error(&x_aug, &x_reg) < 1e-9);
        }
    }
}
