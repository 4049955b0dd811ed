//! Relaxation-parameter schedules for the Kaczmarz-style receivers.
//!
//! All SDK strategies emit `lambda_m = factor / ||h_m||^2` where `factor`
//! depends on the strategy:
//!
//! - `constant:<v>` — a fixed scalar `v`;
//! - `sanchez` — `0.5 * (K/M) * ln(4 * M * SNR)`, a closed-form SINR
//!   approximation tuned for a single cycle (natural logarithm — the source
//!   expression leaves the base implicit);
//! - `proposed` — `min(sqrt(K * SNR / (t * m)), 1)`, which shrinks with the
//!   1-based node position `m` in the dispersion pass and the cycle index `t`
//!   to counter noise aggregation, and is capped at one so every node
//!   underrelaxes.
//!
//! The BDK update uses the separate rule `lambda* / (||h_m||^2 + xi)`, well
//! defined even for fully masked (zero) rows.

use crate::error::{Error, Result};

/// SDK relaxation strategy. `snr` is the linear power ratio `p / sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaStrategy {
    Constant(f64),
    Sanchez,
    Proposed,
}

impl LambdaStrategy {
    /// Canonical CLI spelling (`constant:<v>`, `sanchez`, `proposed`).
    pub fn spec_string(&self) -> String {
        match self {
            LambdaStrategy::Constant(v) => format!("constant:{v}"),
            LambdaStrategy::Sanchez => "sanchez".to_string(),
            LambdaStrategy::Proposed => "proposed".to_string(),
        }
    }
}

/// Context a strategy consumes when emitting a per-node scalar.
#[derive(Debug, Clone, Copy)]
pub struct LambdaContext {
    /// 1-based node position in the dispersion pass (not the antenna label;
    /// the position counts how many updates precede this one on the branch).
    pub position: usize,
    /// 1-based cycle index.
    pub cycle: usize,
    /// Squared channel-row norm of the node.
    pub h_norm_sq: f64,
    pub k: usize,
    pub m: usize,
    /// Linear SNR `p / sigma^2`.
    pub snr: f64,
}

/// Per-node SDK relaxation scalar `lambda_m`.
pub fn lambda_sdk(strategy: LambdaStrategy, ctx: &LambdaContext) -> Result<f64> {
    if !(ctx.h_norm_sq > 0.0) {
        return Err(Error::invalid(
            "lambda_sdk: zero-norm channel row; the caller must skip this node",
        ));
    }
    if ctx.position == 0 || ctx.cycle == 0 {
        return Err(Error::invalid("lambda_sdk: position and cycle are 1-based"));
    }
    let factor = match strategy {
        LambdaStrategy::Constant(v) => {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "lambda_sdk: constant relaxation must be positive and finite, got {v}"
                )));
            }
            v
        }
        LambdaStrategy::Sanchez => sanchez_factor(ctx.k, ctx.m, ctx.snr)?,
        LambdaStrategy::Proposed => {
            let ratio = ctx.k as f64 * ctx.snr / (ctx.cycle as f64 * ctx.position as f64);
            ratio.sqrt().min(1.0)
        }
    };
    Ok(factor / ctx.h_norm_sq)
}

/// The cycle-independent `sanchez` factor `0.5 (K/M) ln(4 M SNR)`.
pub fn sanchez_factor(k: usize, m: usize, snr: f64) -> Result<f64> {
    let arg = 4.0 * m as f64 * snr;
    if arg <= 1.0 {
        return Err(Error::invalid(format!(
            "sanchez relaxation undefined: 4*M*SNR = {arg} <= 1 gives a nonpositive factor"
        )));
    }
    Ok(0.5 * (k as f64 / m as f64) * arg.ln())
}

/// Per-node BDK relaxation scalar `lambda*_m = lambda* / (||h_m||^2 + xi)`.
pub fn lambda_bdk(h_norm_sq: f64, xi: f64, lambda_star: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::invalid(format!(
            "lambda_bdk: xi must be positive, got {xi}"
        )));
    }
    if !(h_norm_sq >= 0.0) {
        return Err(Error::invalid("lambda_bdk: negative row norm"));
    }
    Ok(lambda_star / (h_norm_sq + xi))
}

/// Parses the CLI strategy string `constant:<value> | sanchez | proposed`.
pub fn parse_lambda_spec(spec: &str) -> Result<LambdaStrategy> {
    match spec {
        "sanchez" => Ok(LambdaStrategy::Sanchez),
        "proposed" => Ok(LambdaStrategy::Proposed),
        other => {
            if let Some(v) = other.strip_prefix("constant:") {
                let value: f64 = v.parse().map_err(|_| {
                    Error::invalid(format!("lambda 'constant:{v}': bad value"))
                })?;
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::invalid(format!(
                        "lambda 'constant:{v}': value must be positive and finite"
                    )));
                }
                Ok(LambdaStrategy::Constant(value))
            } else {
                Err(Error::invalid(format!(
                    "lambda '{other}': expected constant:<value>, sanchez, or proposed"
                )))
            }
        }
    }
}
