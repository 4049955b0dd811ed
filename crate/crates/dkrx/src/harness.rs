//! Monte Carlo BER experiment engine and the verification runners behind the
//! CLI.
//!
//! Reproducibility contract: trial `i` of an experiment draws everything from
//! `RngStream { seed, stream: i }` in a fixed order — channel, data bits,
//! noise, then (if enabled) the random root. Trials run in parallel but are
//! reduced in ascending trial order, so results are independent of the thread
//! count. Sweeps reuse the same seed for every row (common random numbers
//! across the swept axis).
//!
//! Power normalization: `p = 1`, `sigma^2 = 10^(-snr_db/10)`, and the BDK/RZF
//! regularizer is `xi = sigma^2 / p`.

use std::io::Write;

use rayon::prelude::*;

use crate::analysis::CostReport;
use crate::channel::{self, ChannelRealization};
use crate::error::{Error, Result};
use crate::modem::{self, BITS_PER_SYMBOL};
use crate::numerics::{draw_bits, sample_complex_gaussian_with, CVector, RngStream};
use crate::receivers::{
    bdk_run, centralized_rzf, centralized_zf, sdk_run, src_run, ReceiverKind, TraceRecording,
};
use crate::relaxation::LambdaStrategy;
use crate::topology::{make_schedule, select_random_root_with, Topology, TopologySpec};

/// Uplink transmit power; the SNR axis is swept through the noise power.
pub const P_TX: f64 = 1.0;

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub receiver: ReceiverKind,
    pub m: usize,
    pub k: usize,
    /// Effective users per antenna; `None` selects the stationary channel
    /// (equivalent to `D = K`).
    pub d: Option<usize>,
    /// SNR in dB; `f64::INFINITY` runs noiseless.
    pub snr_db: f64,
    /// Cycles `T`.
    pub cycles: usize,
    pub lambda: LambdaStrategy,
    pub topology: TopologySpec,
    /// Echo string for the CSV `topology` column.
    pub topology_label: String,
    pub trials: usize,
    pub random_root: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn sigma2(&self) -> f64 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    pub fn snr_linear(&self) -> f64 {
        if self.sigma2() == 0.0 {
            f64::INFINITY
        } else {
            P_TX / self.sigma2()
        }
    }

    /// Regularizer `xi = sigma^2 / p` for BDK/RZF.
    pub fn xi(&self) -> f64 {
        self.sigma2() / P_TX
    }

    /// Effective-user count actually applied.
    pub fn effective_d(&self) -> usize {
        self.d.unwrap_or(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 {
            return Err(Error::invalid("config: M and K must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("config: trials must be >= 1"));
        }
        if self.cycles == 0 {
            return Err(Error::invalid("config: cycles must be >= 1"));
        }
        if let Some(d) = self.d {
            if d == 0 || d > self.k {
                return Err(Error::invalid(format!(
                    "config: D must satisfy 1 <= D <= K, got D={d}, K={}",
                    self.k
                )));
            }
        }
        if self.snr_db.is_nan() {
            return Err(Error::invalid("config: snr_db must not be NaN"));
        }
        if matches!(self.receiver, ReceiverKind::Rzf | ReceiverKind::Bdk) && self.sigma2() == 0.0 {
            return Err(Error::invalid(format!(
                "config: the {} receiver needs a positive regularizer; use a finite SNR",
                self.receiver
            )));
        }
        if self.random_root && !matches!(self.topology, TopologySpec::Chain) {
            return Err(Error::invalid(
                "config: root randomization applies to chain topologies only",
            ));
        }
        Ok(())
    }
}

/// BER estimate with its 95% normal-approximation confidence half-width and
/// the cost accounting of the configured receiver.
#[derive(Debug, Clone)]
pub struct BerResult {
    pub ber_mean: f64,
    pub ber_ci95: f64,
    pub trials: usize,
    pub bit_errors: u64,
    pub bits: u64,
    pub cost: CostReport,
    pub config: SimConfig,
}

/// Bit errors and bit count of a single coherence block.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub bit_errors: usize,
    pub bits: usize,
}

/// Runs one trial: draw a channel and a 16-QAM symbol vector, form
/// `y = H x + n`, detect with the configured receiver, demap, count errors.
pub fn run_trial(config: &SimConfig, stream: RngStream) -> Result<TrialOutcome> {
    config.validate()?;
    let topology = config.topology.build(config.m)?;
    run_trial_with(config, &topology, stream)
}

fn run_trial_with(
    config: &SimConfig,
    topology: &Topology,
    stream: RngStream,
) -> Result<TrialOutcome> {
    let mut rng = stream.rng();
    let channel = channel::generate_with(&mut rng, config.m, config.k, config.effective_d());
    let bits = draw_bits(&mut rng, config.k * BITS_PER_SYMBOL);
    let symbols = modem::map_bits(&bits)?;
    let x = symbols.map(|s| s.scale(P_TX.sqrt()));
    let sigma2 = config.sigma2();
    let noise = sample_complex_gaussian_with(&mut rng, config.m, sigma2);
    let y = channel.h() * &x + noise;

    let root = if config.random_root {
        select_random_root_with(&channel, &mut rng)?
    } else {
        0
    };
    let x_hat = detect(config, topology, &channel, &y, root)?;
    // The raw soft estimate is demapped without rescaling; under heavy
    // masking the receivers converge to a scaled estimate and the resulting
    // error floor is part of the model.
    let rx_bits = modem::demap_symbols(&x_hat);
    Ok(TrialOutcome {
        bit_errors: modem::count_bit_errors(&bits, &rx_bits),
        bits: bits.len(),
    })
}

fn detect(
    config: &SimConfig,
    topology: &Topology,
    channel: &ChannelRealization,
    y: &CVector,
    root: usize,
) -> Result<CVector> {
    match config.receiver {
        ReceiverKind::Zf => centralized_zf(channel, y),
        ReceiverKind::Rzf => centralized_rzf(channel, y, config.xi()),
        ReceiverKind::Sdk => {
            let schedule = make_schedule(topology, root)?;
            let x0 = CVector::zeros(config.k);
            sdk_run(
                channel,
                y,
                config.lambda,
                config.snr_linear(),
                config.cycles,
                &schedule,
                &x0,
                TraceRecording::Off,
            )
            .map(|(x, _)| x)
        }
        ReceiverKind::Bdk => {
            let schedule = make_schedule(topology, root)?;
            let x0 = CVector::zeros(config.k);
            let u0 = CVector::zeros(config.m);
            bdk_run(
                channel,
                y,
                config.xi(),
                1.0,
                config.cycles,
                &schedule,
                &x0,
                &u0,
                TraceRecording::Off,
            )
            .map(|(x, _, _)| x)
        }
        ReceiverKind::Src => {
            let schedule = make_schedule(topology, root)?;
            src_run(channel, y, config.cycles, &schedule, None)
        }
    }
}

/// Runs all trials of an experiment (in parallel, one stream per trial) and
/// aggregates the BER statistics.
pub fn run_experiment(config: &SimConfig) -> Result<BerResult> {
    config.validate()?;
    let topology = config.topology.build(config.m)?;
    let outcomes: Vec<Result<TrialOutcome>> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial_with(config, &topology, RngStream::new(config.seed, i as u64)))
        .collect();

    // Ascending-trial reduction keeps the result thread-count independent.
    let mut per_trial_ber = Vec::with_capacity(config.trials);
    let mut bit_errors = 0u64;
    let mut bits = 0u64;
    for outcome in outcomes {
        let o = outcome?;
        per_trial_ber.push(o.bit_errors as f64 / o.bits as f64);
        bit_errors += o.bit_errors as u64;
        bits += o.bits as u64;
    }
    let n = per_trial_ber.len() as f64;
    let ber_mean = per_trial_ber.iter().sum::<f64>() / n;
    let ci = if per_trial_ber.len() > 1 {
        let var = per_trial_ber
            .iter()
            .map(|b| (b - ber_mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        0.0
    };
    Ok(BerResult {
        ber_mean,
        ber_ci95: ci,
        trials: config.trials,
        bit_errors,
        bits,
        cost: CostReport::for_receiver(config.receiver, config.k, config.cycles),
        config: config.clone(),
    })
}

/// Axis a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    Cycles,
    D,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(SweepAxis::SnrDb),
            "cycles" => Ok(SweepAxis::Cycles),
            "D" | "d" => Ok(SweepAxis::D),
            other => Err(Error::invalid(format!(
                "unknown sweep axis '{other}': expected snr|cycles|D"
            ))),
        }
    }
}

/// Runs one experiment per axis value, overriding the template's field.
pub fn sweep(template: &SimConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<BerResult>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep: no axis values"));
    }
    let mut results = Vec::with_capacity(values.len());
    for &v in values {
        let mut config = template.clone();
        match axis {
            SweepAxis::SnrDb => config.snr_db = v,
            SweepAxis::Cycles => config.cycles = integer_axis_value(v, "cycles")?,
            SweepAxis::D => config.d = Some(integer_axis_value(v, "D")?),
        }
        results.push(run_experiment(&config)?);
    }
    Ok(results)
}

fn integer_axis_value(v: f64, axis: &str) -> Result<usize> {
    if !v.is_finite() || v < 1.0 || v.fract() != 0.0 {
        return Err(Error::invalid(format!(
            "sweep axis {axis}: values must be positive integers, got {v}"
        )));
    }
    Ok(v as usize)
}

/// Parses sweep values: either an inclusive range `a:b:step` or a
/// comma-separated list `v1,v2,...`.
pub fn parse_axis_values(spec: &str) -> Result<Vec<f64>> {
    if spec.is_empty() {
        return Err(Error::invalid("values: empty specification"));
    }
    let parse_one = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("values: bad number '{s}'")))?;
        if v.is_nan() {
            return Err(Error::invalid("values: NaN is not a valid axis value"));
        }
        Ok(v)
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        3 => {
            let start = parse_one(parts[0])?;
            let stop = parse_one(parts[1])?;
            let step = parse_one(parts[2])?;
            if !(step > 0.0) || !step.is_finite() || !start.is_finite() || !stop.is_finite() {
                return Err(Error::invalid(format!(
                    "values '{spec}': need finite start/stop and positive step"
                )));
            }
            if stop < start {
                return Err(Error::invalid(format!(
                    "values '{spec}': stop must be >= start"
                )));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| start + i as f64 * step).collect())
        }
        1 => spec.split(',').map(parse_one).collect(),
        _ => Err(Error::invalid(format!(
            "values '{spec}': expected a:b:step or v1,v2,..."
        ))),
    }
}

/// Exact CSV header of experiment outputs.
pub const CSV_HEADER: &str = "receiver,lambda,topology,M,K,D,snr_db,T,trials,ber_mean,ber_ci95,flops_per_node,exchange_per_link,seed";

/// Writes results in the canonical CSV schema.
pub fn write_results_csv<W: Write>(results: &[BerResult], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER.split(','))?;
    for r in results {
        let c = &r.config;
        let lambda_label = if c.receiver == ReceiverKind::Sdk {
            c.lambda.spec_string()
        } else {
            "-".to_string()
        };
        w.write_record(&[
            c.receiver.to_string(),
            lambda_label,
            c.topology_label.clone(),
            c.m.to_string(),
            c.k.to_string(),
            c.effective_d().to_string(),
            c.snr_db.to_string(),
            c.cycles.to_string(),
            c.trials.to_string(),
            r.ber_mean.to_string(),
            r.ber_ci95.to_string(),
            r.cost.flops_per_node.to_string(),
            r.cost.exchange_per_link.to_string(),
            c.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
