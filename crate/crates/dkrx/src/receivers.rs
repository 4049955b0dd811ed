//! Iterative decentralized receivers (SDK, BDK, SRC), their one-cycle
//! closed-form evaluations, and the centralized ZF/RZF oracles.
//!
//! A run executes `T` cycles over a [`Schedule`]: each group disperses
//! sequentially (one Kaczmarz-style update per node), then pooling combines
//! the groups' final estimates with the schedule weights. On the chain the
//! single group carries weight one, so pooling passes the leaf estimate
//! through unchanged and the pooled estimate seeds the next cycle.
//!
//! Nodes with zero channel energy are skipped by SDK/SRC (their relaxation
//! scalar is undefined); BDK handles them natively through the `+xi`
//! regularization. Inter-node messages always carry exactly `K` complex
//! values: the BDK noise estimate stays node-local because node `m` alone
//! touches slot `m`.

use std::fmt;
use std::str::FromStr;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{ls_solve, regularized_solve, C64, CMatrix, CVector};
use crate::relaxation::{lambda_bdk, lambda_sdk, LambdaContext, LambdaStrategy};
use crate::topology::Schedule;

/// Receiver selectable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    Zf,
    Rzf,
    Sdk,
    Bdk,
    Src,
}

impl ReceiverKind {
    pub fn is_decentralized(&self) -> bool {
        matches!(self, ReceiverKind::Sdk | ReceiverKind::Bdk | ReceiverKind::Src)
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ReceiverKind::Zf => "zf",
            ReceiverKind::Rzf => "rzf",
            ReceiverKind::Sdk => "sdk",
            ReceiverKind::Bdk => "bdk",
            ReceiverKind::Src => "src",
        };
        f.write_str(name)
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(ReceiverKind::Zf),
            "rzf" => Ok(ReceiverKind::Rzf),
            "sdk" => Ok(ReceiverKind::Sdk),
            "bdk" => Ok(ReceiverKind::Bdk),
            "src" => Ok(ReceiverKind::Src),
            other => Err(Error::invalid(format!(
                "unknown receiver '{other}': expected zf|rzf|sdk|bdk|src"
            ))),
        }
    }
}

/// Running state of an iterative receiver.
///
/// `u_hat` holds the BDK per-node noise-estimate slots and stays identically
/// zero under SDK/SRC.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverState {
    pub x_hat: CVector,
    pub u_hat: CVector,
    /// 1-based cycle index.
    pub t: usize,
    /// Steps taken within the current dispersion pass.
    pub cursor: usize,
}

impl ReceiverState {
    /// Zero-initialized state for a `K`-user, `M`-antenna run.
    pub fn new(k: usize, m: usize) -> Self {
        ReceiverState {
            x_hat: CVector::zeros(k),
            u_hat: CVector::zeros(m),
            t: 1,
            cursor: 0,
        }
    }
}

/// One SDK update: `r = y_m - h_m^T x`, then `x += lambda_m conj(h_m) r`.
pub fn sdk_step(
    state: &ReceiverState,
    h_m: &CVector,
    y_m: C64,
    lambda_m: f64,
) -> Result<ReceiverState> {
    if h_m.len() != state.x_hat.len() {
        return Err(Error::invalid(format!(
            "sdk_step: h_m has dim {} but x_hat has dim {}",
            h_m.len(),
            state.x_hat.len()
        )));
    }
    let mut next = state.clone();
    let r = kaczmarz_update(&mut next.x_hat, h_m.iter(), y_m, lambda_m);
    next.cursor += 1;
    let _ = r;
    Ok(next)
}

/// One BDK update on the `xi`-augmented system: the residual additionally
/// cancels the node's own noise estimate, and slot `m` of `u_hat` absorbs
/// `lambda*_m sqrt(xi) r`.
pub fn bdk_step(
    state: &ReceiverState,
    h_m: &CVector,
    y_m: C64,
    m: usize,
    xi: f64,
    lambda_star_m: f64,
) -> Result<ReceiverState> {
    if h_m.len() != state.x_hat.len() {
        return Err(Error::invalid(format!(
            "bdk_step: h_m has dim {} but x_hat has dim {}",
            h_m.len(),
            state.x_hat.len()
        )));
    }
    if m >= state.u_hat.len() {
        return Err(Error::invalid(format!(
            "bdk_step: node index {m} out of range for {} noise slots",
            state.u_hat.len()
        )));
    }
    if !(xi > 0.0) {
        return Err(Error::invalid(format!("bdk_step: xi must be positive, got {xi}")));
    }
    let mut next = state.clone();
    bdk_update(
        &mut next.x_hat,
        &mut next.u_hat[m],
        h_m.iter(),
        y_m,
        xi.sqrt(),
        lambda_star_m,
    );
    next.cursor += 1;
    Ok(next)
}

fn kaczmarz_update<'a, I>(x: &mut CVector, h_row: I, y: C64, lambda: f64) -> C64
where
    I: Iterator<Item = &'a C64> + Clone,
{
    let mut r = y;
    for (hk, xk) in h_row.clone().zip(x.iter()) {
        r -= hk * xk;
    }
    for (k, hk) in h_row.enumerate() {
        x[k] += hk.conj() * r * lambda;
    }
    r
}

fn bdk_update<'a, I>(
    x: &mut CVector,
    u_slot: &mut C64,
    h_row: I,
    y: C64,
    sqrt_xi: f64,
    lambda_star: f64,
) -> C64
where
    I: Iterator<Item = &'a C64> + Clone,
{
    let mut r = y - *u_slot * sqrt_xi;
    for (hk, xk) in h_row.clone().zip(x.iter()) {
        r -= hk * xk;
    }
    for (k, hk) in h_row.enumerate() {
        x[k] += hk.conj() * r * lambda_star;
    }
    *u_slot += r * sqrt_xi * lambda_star;
    r
}

/// Whether a run keeps per-step snapshots (BER sweeps turn this off to stay
/// O(K) per trial).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRecording {
    Off,
    Full,
}

/// Snapshot of one scheduled node visit.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Physical antenna index.
    pub node: usize,
    /// 1-based position within the group's dispersion pass.
    pub position: usize,
    /// 1-based cycle.
    pub cycle: usize,
    pub residual: C64,
    pub x_after: CVector,
    /// BDK only: the full noise-estimate vector after the visit.
    pub u_after: Option<CVector>,
    /// Complex values handed to the next node (always the estimate length).
    pub payload_len: usize,
}

/// Per-step and per-cycle history of a run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub steps: Vec<StepRecord>,
    /// Pooled estimate at the end of each cycle.
    pub cycle_estimates: Vec<CVector>,
}

fn validate_run_inputs(
    channel: &ChannelRealization,
    y: &CVector,
    cycles: usize,
    schedule: &Schedule,
    x0: &CVector,
) -> Result<()> {
    if y.len() != channel.m() {
        return Err(Error::invalid(format!(
            "receiver run: y has dim {} but the channel has {} antennas",
            y.len(),
            channel.m()
        )));
    }
    if x0.len() != channel.k() {
        return Err(Error::invalid(format!(
            "receiver run: x0 has dim {} but the channel serves {} users",
            x0.len(),
            channel.k()
        )));
    }
    if cycles == 0 {
        return Err(Error::invalid("receiver run: cycle count must be >= 1"));
    }
    let mut seen = vec![false; channel.m()];
    for group in schedule.groups() {
        for &leaf in &group.leaves {
            if leaf >= channel.m() || seen[leaf] {
                return Err(Error::invalid(format!(
                    "receiver run: schedule must visit each of the {} antennas exactly once",
                    channel.m()
                )));
            }
            seen[leaf] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::invalid(
            "receiver run: schedule does not cover every antenna",
        ));
    }
    Ok(())
}

// Pooling: pooled = sum_i w_i * xg_i, groups in ascending order. Scaling by
// the real weight keeps the single-group weight-one case bitwise equal to
// the plain chain.
fn pool_into(pooled: &mut Option<CVector>, xg: &CVector, weight: f64) {
    match pooled {
        None => {
            *pooled = Some(xg.map(|z| z.scale(weight)));
        }
        Some(p) => {
            for (pk, gk) in p.iter_mut().zip(xg.iter()) {
                *pk += gk.scale(weight);
            }
        }
    }
}

/// Runs the SDK receiver for `cycles` cycles. `snr` is the linear `p/sigma^2`
/// consumed by the `sanchez`/`proposed` strategies.
pub fn sdk_run(
    channel: &ChannelRealization,
    y: &CVector,
    strategy: LambdaStrategy,
    snr: f64,
    cycles: usize,
    schedule: &Schedule,
    x0: &CVector,
    recording: TraceRecording,
) -> Result<(CVector, RunTrace)> {
    validate_run_inputs(channel, y, cycles, schedule, x0)?;
    let norms: Vec<f64> = (0..channel.m()).map(|m| channel.row_norm_sq(m)).collect();
    let mut trace = RunTrace::default();
    let mut x = x0.clone();
    for t in 1..=cycles {
        let mut pooled: Option<CVector> = None;
        for group in schedule.groups() {
            let mut xg = x.clone();
            for (pos, &node) in group.leaves.iter().enumerate() {
                let position = pos + 1;
                let h = channel.h().row(node);
                let r;
                if norms[node] > 0.0 {
                    let ctx = LambdaContext {
                        position,
                        cycle: t,
                        h_norm_sq: norms[node],
                        k: channel.k(),
                        m: channel.m(),
                        snr,
                    };
                    let lambda_m = lambda_sdk(strategy, &ctx)?;
                    r = kaczmarz_update(&mut xg, h.iter(), y[node], lambda_m);
                } else {
                    // Zero-energy node: no update, equivalent to lambda_m = 0.
                    let mut res = y[node];
                    for (hk, xk) in h.iter().zip(xg.iter()) {
                        res -= hk * xk;
                    }
                    r = res;
                }
                if recording == TraceRecording::Full {
                    trace.steps.push(StepRecord {
                        node,
                        position,
                        cycle: t,
                        residual: r,
                        x_after: xg.clone(),
                        u_after: None,
                        payload_len: xg.len(),
                    });
                }
            }
            pool_into(&mut pooled, &xg, group.weight);
        }
        x = pooled.expect("schedule has at least one group");
        trace.cycle_estimates.push(x.clone());
    }
    Ok((x, trace))
}

/// Runs the BDK receiver. Every node updates (zero rows are regularized by
/// `xi`); `u0` seeds the node-local noise slots.
#[allow(clippy::too_many_arguments)]
pub fn bdk_run(
    channel: &ChannelRealization,
    y: &CVector,
    xi: f64,
    lambda_star: f64,
    cycles: usize,
    schedule: &Schedule,
    x0: &CVector,
    u0: &CVector,
    recording: TraceRecording,
) -> Result<(CVector, CVector, RunTrace)> {
    validate_run_inputs(channel, y, cycles, schedule, x0)?;
    if !(xi > 0.0) {
        return Err(Error::invalid(format!("bdk_run: xi must be positive, got {xi}")));
    }
    if u0.len() != channel.m() {
        return Err(Error::invalid(format!(
            "bdk_run: u0 has dim {} but the channel has {} antennas",
            u0.len(),
            channel.m()
        )));
    }
    let sqrt_xi = xi.sqrt();
    let norms: Vec<f64> = (0..channel.m()).map(|m| channel.row_norm_sq(m)).collect();
    let mut trace = RunTrace::default();
    let mut x = x0.clone();
    let mut u = u0.clone();
    for t in 1..=cycles {
        let mut pooled: Option<CVector> = None;
        for group in schedule.groups() {
            let mut xg = x.clone();
            for (pos, &node) in group.leaves.iter().enumerate() {
                let lambda_star_m = lambda_bdk(norms[node], xi, lambda_star)?;
                let h = channel.h().row(node);
                let r = bdk_update(
                    &mut xg,
                    &mut u[node],
                    h.iter(),
                    y[node],
                    sqrt_xi,
                    lambda_star_m,
                );
                if recording == TraceRecording::Full {
                    trace.steps.push(StepRecord {
                        node,
                        position: pos + 1,
                        cycle: t,
                        residual: r,
                        x_after: xg.clone(),
                        u_after: Some(u.clone()),
                        payload_len: xg.len(),
                    });
                }
            }
            pool_into(&mut pooled, &xg, group.weight);
        }
        x = pooled.expect("schedule has at least one group");
        trace.cycle_estimates.push(x.clone());
    }
    Ok((x, u, trace))
}

/// Runs the SRC receiver: node `m` cancels the running estimate's
/// contribution from its observation and adds `conj(w_m) r`. The default
/// combiner is the normalized matched filter `w_m = h_m / ||h_m||^2`, which
/// makes SRC coincide with SDK at `lambda = 1`.
pub fn src_run(
    channel: &ChannelRealization,
    y: &CVector,
    cycles: usize,
    schedule: &Schedule,
    combiners: Option<&[CVector]>,
) -> Result<CVector> {
    let x0 = CVector::zeros(channel.k());
    validate_run_inputs(channel, y, cycles, schedule, &x0)?;
    if let Some(ws) = combiners {
        if ws.len() != channel.m() {
            return Err(Error::invalid(format!(
                "src_run: {} combiners for {} antennas",
                ws.len(),
                channel.m()
            )));
        }
        if let Some(w) = ws.iter().find(|w| w.len() != channel.k()) {
            return Err(Error::invalid(format!(
                "src_run: combiner has dim {}, expected {}",
                w.len(),
                channel.k()
            )));
        }
    }
    let norms: Vec<f64> = (0..channel.m()).map(|m| channel.row_norm_sq(m)).collect();
    let mut x = x0;
    for _ in 1..=cycles {
        let mut pooled: Option<CVector> = None;
        for group in schedule.groups() {
            let mut xg = x.clone();
            for &node in &group.leaves {
                let h = channel.h().row(node);
                let mut r = y[node];
                for (hk, xk) in h.iter().zip(xg.iter()) {
                    r -= hk * xk;
                }
                match combiners {
                    Some(ws) => {
                        if ws[node].norm_squared() == 0.0 {
                            continue;
                        }
                        for (k, wk) in ws[node].iter().enumerate() {
                            xg[k] += wk.conj() * r;
                        }
                    }
                    None => {
                        if norms[node] == 0.0 {
                            continue;
                        }
                        let inv = 1.0 / norms[node];
                        for (k, hk) in h.iter().enumerate() {
                            xg[k] += hk.conj() * r * inv;
                        }
                    }
                }
            }
            pool_into(&mut pooled, &xg, group.weight);
        }
        x = pooled.expect("schedule has at least one group");
    }
    Ok(x)
}

/// Output of [`closed_form_sdk`]: the leaf estimate and the per-antenna
/// combining vectors `v_m` (so that `V^H y` reproduces the zero-guess
/// estimate).
#[derive(Debug, Clone)]
pub struct ClosedFormSdk {
    pub x_hat: CVector,
    pub combiners: Vec<CVector>,
}

fn validate_lambdas(channel: &ChannelRealization, lambdas: &[f64]) -> Result<()> {
    if lambdas.len() != channel.m() {
        return Err(Error::invalid(format!(
            "closed form: {} relaxation scalars for {} antennas",
            lambdas.len(),
            channel.m()
        )));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::invalid(
            "closed form: relaxation scalars must be finite and nonnegative",
        ));
    }
    Ok(())
}

/// Per-antenna relaxation scalars for the canonical (unrotated) chain at
/// cycle `t`; zero-energy rows get `0` (the skip).
pub fn sdk_node_lambdas(
    channel: &ChannelRealization,
    strategy: LambdaStrategy,
    snr: f64,
    cycle: usize,
) -> Result<Vec<f64>> {
    (0..channel.m())
        .map(|node| {
            let h_norm_sq = channel.row_norm_sq(node);
            if h_norm_sq == 0.0 {
                return Ok(0.0);
            }
            lambda_sdk(
                strategy,
                &LambdaContext {
                    position: node + 1,
                    cycle,
                    h_norm_sq,
                    k: channel.k(),
                    m: channel.m(),
                    snr,
                },
            )
        })
        .collect()
}

/// Evaluates the one-cycle SDK leaf estimate in product form:
/// `x = P x0 + sum_m C_m lambda_m conj(h_m) y_m` with
/// `C_m = prod_{i>m} (I - lambda_i conj(h_i) h_i^T)` accumulated from the
/// leaf backwards, and `P = C_0`. The combining vectors are
/// `v_m = conj(C_m lambda_m conj(h_m))`.
pub fn closed_form_sdk(
    channel: &ChannelRealization,
    y: &CVector,
    lambdas: &[f64],
    x0: &CVector,
) -> Result<ClosedFormSdk> {
    if y.len() != channel.m() || x0.len() != channel.k() {
        return Err(Error::invalid("closed_form_sdk: dimension mismatch"));
    }
    validate_lambdas(channel, lambdas)?;
    let (x_hat, combiners) = product_form(channel, y, lambdas, x0);
    Ok(ClosedFormSdk { x_hat, combiners })
}

// Backward accumulation of the projector chains: on entry to node m the
// `chain` matrix equals C_m = prod_{i>m} (I - lambda_i conj(h_i) h_i^T),
// so c = C_m conj(h_m) yields both the signal term and the combining vector,
// and a rank-1 update advances the chain to C_{m-1}.
fn product_form(
    channel: &ChannelRealization,
    signals: &CVector,
    lambdas: &[f64],
    x0: &CVector,
) -> (CVector, Vec<CVector>) {
    let (m, k) = (channel.m(), channel.k());
    let mut chain = CMatrix::identity(k, k);
    let mut sum = CVector::zeros(k);
    let mut combiners = vec![CVector::zeros(k); m];
    for node in (0..m).rev() {
        let lambda = lambdas[node];
        let h = channel.h().row(node);
        let mut c = CVector::zeros(k);
        for col in 0..k {
            let hc = h[col].conj();
            if hc != C64::new(0.0, 0.0) {
                for rowi in 0..k {
                    c[rowi] += chain[(rowi, col)] * hc;
                }
            }
        }
        for rowi in 0..k {
            sum[rowi] += c[rowi] * signals[node] * lambda;
        }
        combiners[node] = c.map(|z| (z * lambda).conj());
        for col in 0..k {
            let hk = h[col];
            if hk != C64::new(0.0, 0.0) {
                for rowi in 0..k {
                    chain[(rowi, col)] -= c[rowi] * hk * lambda;
                }
            }
        }
    }
    (&chain * x0 + sum, combiners)
}

/// Evaluates the one-cycle BDK displays: the data estimate in product form
/// over the effective signals `y_m - sqrt(xi) u0[m]` (slot `m` is untouched
/// before node `m`'s own visit, so the first-cycle effective signal only
/// involves `u0`), and the noise estimate via the diagonal product
/// `u[m] = (1 - lambda*_m xi) u0[m] + lambda*_m sqrt(xi) (y_m - h_m^T x_{m-1})`.
pub fn closed_form_bdk(
    channel: &ChannelRealization,
    y: &CVector,
    xi: f64,
    lambda_star: f64,
    x0: &CVector,
    u0: &CVector,
) -> Result<(CVector, CVector)> {
    let (m, k) = (channel.m(), channel.k());
    if y.len() != m || x0.len() != k || u0.len() != m {
        return Err(Error::invalid("closed_form_bdk: dimension mismatch"));
    }
    if !(xi > 0.0) {
        return Err(Error::invalid(format!(
            "closed_form_bdk: xi must be positive, got {xi}"
        )));
    }
    let sqrt_xi = xi.sqrt();
    let lambdas: Vec<f64> = (0..m)
        .map(|node| lambda_bdk(channel.row_norm_sq(node), xi, lambda_star))
        .collect::<Result<_>>()?;
    let effective: CVector = CVector::from_fn(m, |node, _| y[node] - u0[node] * sqrt_xi);
    let (x_hat, _) = product_form(channel, &effective, &lambdas, x0);

    // Forward prefix states feed the noise-slot display.
    let mut u_hat = CVector::zeros(m);
    let mut x_prefix = x0.clone();
    for node in 0..m {
        let h = channel.h().row(node);
        let mut s = y[node];
        for (hk, xk) in h.iter().zip(x_prefix.iter()) {
            s -= hk * xk;
        }
        u_hat[node] = u0[node].scale(1.0 - lambdas[node] * xi) + s * (lambdas[node] * sqrt_xi);
        let r = s - u0[node] * sqrt_xi;
        for (col, hk) in h.iter().enumerate() {
            x_prefix[col] += hk.conj() * r * lambdas[node];
        }
    }
    Ok((x_hat, u_hat))
}

/// Centralized zero forcing: the minimum-norm LS solution.
pub fn centralized_zf(channel: &ChannelRealization, y: &CVector) -> Result<CVector> {
    ls_solve(channel.h(), y)
}

/// Centralized regularized zero forcing `(H^H H + xi I)^{-1} H^H y`.
pub fn centralized_rzf(channel: &ChannelRealization, y: &CVector, xi: f64) -> Result<CVector> {
    regularized_solve(channel.h(), y, xi)
}
