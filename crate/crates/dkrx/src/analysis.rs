//! Numerical verification of the error-sum bound and the per-step energy
//! identity behind it, plus the receivers' arithmetic/exchange cost formulas
//! and the semi-convergence (BER valley) detector.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{
    pseudo_inverse, sample_complex_gaussian_with, C64, CVector, RngStream,
};
use crate::receivers::ReceiverKind;

/// Lower-bound constants of the error-sum inequality: `B^2 = K p` (signal
/// energy) and `rho^2 = sigma^2` (worst-case pure-noise residual energy).
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub b_sq: f64,
    pub rho_sq: f64,
}

impl BoundParams {
    pub fn new(b_sq: f64, rho_sq: f64) -> Result<Self> {
        if !(b_sq > 0.0) || !(rho_sq > 0.0) {
            return Err(Error::invalid("BoundParams: B^2 and rho^2 must be positive"));
        }
        Ok(BoundParams { b_sq, rho_sq })
    }

    /// From the experiment parameters: `B^2 = K p`, `rho^2 = sigma^2`.
    pub fn from_system(k: usize, p: f64, sigma2: f64) -> Result<Self> {
        Self::new(k as f64 * p, sigma2)
    }
}

/// Residual of the per-step identity
/// `Re<x_prev - x, rho> = (1/(2 lambda)) (||x_next - x||^2 - ||x_prev - x||^2)
///  - (lambda/2) ||rho||^2`,
/// which is exact (to rounding) whenever `x_next = x_prev + lambda rho`.
pub fn per_step_identity_residual(
    x_true: &CVector,
    x_prev: &CVector,
    x_next: &CVector,
    rho: &CVector,
    lambda_m: f64,
) -> Result<f64> {
    let k = x_true.len();
    if x_prev.len() != k || x_next.len() != k || rho.len() != k {
        return Err(Error::invalid("per_step_identity_residual: dimension mismatch"));
    }
    if !(lambda_m > 0.0) {
        return Err(Error::invalid("per_step_identity_residual: lambda must be positive"));
    }
    let lhs = (x_prev - x_true).dotc(rho).re;
    let err_next = (x_next - x_true).norm_squared();
    let err_prev = (x_prev - x_true).norm_squared();
    let rhs = (err_next - err_prev) / (2.0 * lambda_m) - lambda_m / 2.0 * rho.norm_squared();
    Ok((lhs - rhs).abs())
}

/// Outcome of one Monte Carlo bound check.
#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub lambda: f64,
    pub trials: usize,
    /// Monte Carlo mean of the summed real inner products (the bounded side).
    pub lhs_mean: f64,
    /// `-(1/(2 lambda_1)) E||x||^2 - sum_m (lambda_m/2) E||rho_m||^2`.
    pub rhs: f64,
    /// Standard error of the left-hand mean.
    pub std_err: f64,
    /// Loose analytic constants recorded alongside the empirical bound.
    pub params: BoundParams,
}

impl TheoremReport {
    /// The inequality with a three-standard-error guard band.
    pub fn holds(&self) -> bool {
        self.lhs_mean >= self.rhs - 3.0 * self.std_err
    }

    pub fn slack(&self) -> f64 {
        self.lhs_mean - self.rhs
    }
}

/// Monte Carlo check of the first-cycle error-sum bound on a unit-row
/// channel with constant relaxation `lambda`.
///
/// Expectations are conditioned on the channel: the single realization stays
/// fixed while `(x, n)` are redrawn. Rows must be unit-norm (within 1e-9) so
/// that `lambda_m = lambda / ||h_m||^2` really is constant across nodes,
/// which is what makes the telescoping step behind the bound exact. The
/// reference `x` is the LS solution of each draw.
pub fn theorem_bound_check(
    channel: &ChannelRealization,
    trials: usize,
    lambda: f64,
    params: BoundParams,
    stream: RngStream,
) -> Result<TheoremReport> {
    if trials == 0 {
        return Err(Error::invalid("theorem_bound_check: trials must be >= 1"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("theorem_bound_check: lambda must be positive"));
    }
    for m in 0..channel.m() {
        if (channel.row_norm_sq(m) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "theorem_bound_check: rows must be unit-norm so the per-node relaxation is constant",
            ));
        }
    }
    let (m, k) = (channel.m(), channel.k());
    let p = params.b_sq / k as f64;
    let sigma2 = params.rho_sq;
    let pinv = pseudo_inverse(channel.h())?;

    let mut rng = stream.rng();
    let mut lhs_samples = Vec::with_capacity(trials);
    let mut x_energy_sum = 0.0;
    let mut rho_energy_sum = vec![0.0f64; m];
    for _ in 0..trials {
        let x_data = sample_complex_gaussian_with(&mut rng, k, p);
        let noise = sample_complex_gaussian_with(&mut rng, m, sigma2);
        let y = channel.h() * &x_data + noise;
        let x_ref = &pinv * &y;
        x_energy_sum += x_ref.norm_squared();

        let mut x_hat = CVector::zeros(k);
        let mut lhs = 0.0;
        for node in 0..m {
            let h = channel.h().row(node);
            let mut r = y[node];
            for (hk, xk) in h.iter().zip(x_hat.iter()) {
                r -= hk * xk;
            }
            // rho = conj(h) r; accumulate Re<x_hat - x_ref, rho> before updating.
            let mut inner = C64::new(0.0, 0.0);
            let mut rho_norm_sq = 0.0;
            for (col, hk) in h.iter().enumerate() {
                let rho_k = hk.conj() * r;
                inner += (x_hat[col] - x_ref[col]).conj() * rho_k;
                rho_norm_sq += rho_k.norm_sqr();
                x_hat[col] += rho_k * lambda;
            }
            lhs += inner.re;
            rho_energy_sum[node] += rho_norm_sq;
        }
        lhs_samples.push(lhs);
    }

    let n = trials as f64;
    let lhs_mean = lhs_samples.iter().sum::<f64>() / n;
    let var = if trials > 1 {
        lhs_samples.iter().map(|v| (v - lhs_mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_err = (var / n).sqrt();
    let mean_x_energy = x_energy_sum / n;
    let rhs = -mean_x_energy / (2.0 * lambda)
        - rho_energy_sum.iter().map(|s| lambda / 2.0 * (s / n)).sum::<f64>();
    Ok(TheoremReport {
        lambda,
        trials,
        lhs_mean,
        rhs,
        std_err,
        params,
    })
}

/// Result of fuzzing the per-step identity over random Kaczmarz updates.
#[derive(Debug, Clone, Copy)]
pub struct IdentityFuzzReport {
    pub steps: usize,
    pub max_abs_residual: f64,
    /// Largest `|lhs - rhs| / (1 + |lhs|)`.
    pub max_rel_residual: f64,
}

/// Applies random SDK steps (random dimension, channel row, observation,
/// reference vector, and relaxation in (0, 1]) and reports the worst identity
/// residual seen.
pub fn identity_fuzz(steps: usize, stream: RngStream) -> Result<IdentityFuzzReport> {
    if steps == 0 {
        return Err(Error::invalid("identity_fuzz: steps must be >= 1"));
    }
    let mut rng = stream.rng();
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for _ in 0..steps {
        let k = 1 + (rand::Rng::random::<u64>(&mut rng) % 8) as usize;
        let h = sample_complex_gaussian_with(&mut rng, k, 1.0);
        let x_prev = sample_complex_gaussian_with(&mut rng, k, 2.0);
        let x_true = sample_complex_gaussian_with(&mut rng, k, 1.0);
        let y = crate::numerics::sample_cn_scalar(&mut rng, 1.5);
        let lambda = rand::Rng::random::<f64>(&mut rng).max(1e-3);

        let mut r = y;
        for (hk, xk) in h.iter().zip(x_prev.iter()) {
            r -= hk * xk;
        }
        let rho: CVector = h.map(|hk| hk.conj() * r);
        let mut x_next = x_prev.clone();
        for (col, rk) in rho.iter().enumerate() {
            x_next[col] += rk * lambda;
        }
        let resid = per_step_identity_residual(&x_true, &x_prev, &x_next, &rho, lambda)?;
        let lhs = (&x_prev - &x_true).dotc(&rho).re;
        max_abs = max_abs.max(resid);
        max_rel = max_rel.max(resid / (1.0 + lhs.abs()));
    }
    Ok(IdentityFuzzReport {
        steps,
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
    })
}

/// SDK per-node arithmetic cost in real FLOPs: `(12K + 2) T`.
pub fn flops_sdk(k: usize, t: usize) -> u64 {
    (12 * k as u64 + 2) * t as u64
}

/// BDK per-node arithmetic cost in real FLOPs: `(12K + 6) T`.
pub fn flops_bdk(k: usize, t: usize) -> u64 {
    (12 * k as u64 + 6) * t as u64
}

/// Per-link exchange cost (dispersion + pooling backpropagation): `4 K T`.
pub fn exchange_count(k: usize, t: usize) -> u64 {
    4 * k as u64 * t as u64
}

/// Arithmetic and exchange cost attached to an experiment result. Centralized
/// receivers have no per-node cost in this model and report zeros; SRC shares
/// the SDK step structure.
#[derive(Debug, Clone, Copy)]
pub struct CostReport {
    pub receiver: ReceiverKind,
    pub k: usize,
    pub t: usize,
    pub flops_per_node: u64,
    pub exchange_per_link: u64,
}

impl CostReport {
    pub fn for_receiver(receiver: ReceiverKind, k: usize, t: usize) -> Self {
        let (flops_per_node, exchange_per_link) = match receiver {
            ReceiverKind::Sdk | ReceiverKind::Src => (flops_sdk(k, t), exchange_count(k, t)),
            ReceiverKind::Bdk => (flops_bdk(k, t), exchange_count(k, t)),
            ReceiverKind::Zf | ReceiverKind::Rzf => (0, 0),
        };
        CostReport {
            receiver,
            k,
            t,
            flops_per_node,
            exchange_per_link,
        }
    }
}

/// One point of a BER-vs-cycles profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub t: usize,
    pub ber: f64,
}

/// Detects the semi-convergence valley of a BER-vs-cycles profile: the cycle
/// count at the (first) global minimum, provided the profile rises again
/// afterwards. Monotone non-increasing profiles have no valley.
pub fn semi_convergence_profile(points: &[BerPoint]) -> Result<Option<usize>> {
    if points.len() < 3 {
        return Err(Error::invalid(
            "semi_convergence_profile: need at least 3 points",
        ));
    }
    if points.windows(2).any(|w| w[0].t >= w[1].t) {
        return Err(Error::invalid(
            "semi_convergence_profile: points must be sorted by strictly increasing T",
        ));
    }
    let mut best = 0usize;
    for (i, p) in points.iter().enumerate() {
        if p.ber < points[best].ber {
            best = i;
        }
    }
    if points[best].ber < points[points.len() - 1].ber {
        Ok(Some(points[best].t))
    } else {
        Ok(None)
    }
}
