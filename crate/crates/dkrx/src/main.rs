//! Command-line front end: `simulate`, `sweep`, `verify`, and `dump-channel`.
//!
//! All failures exit nonzero after printing a single machine-readable
//! `error: <message>` line on stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dkrx::analysis::{
    self, exchange_count, flops_bdk, flops_sdk, theorem_bound_check, BoundParams,
};
use dkrx::channel;
use dkrx::error::Error;
use dkrx::harness::{
    parse_axis_values, run_experiment, sweep, write_results_csv, SimConfig, SweepAxis,
};
use dkrx::numerics::RngStream;
use dkrx::receivers::ReceiverKind;
use dkrx::relaxation::parse_lambda_spec;
use dkrx::topology::{parse_partition_json, parse_topology_spec, TopologySpec};
use dkrx::Result;

#[derive(Parser)]
#[command(
    name = "dkrx",
    version,
    about = "Decentralized iterative MIMO uplink receiver simulator",
    long_about = "Monte Carlo BER simulation of decentralized Kaczmarz-style uplink receivers \
                  (SDK, BDK, SRC) against centralized ZF/RZF baselines.\n\n\
                  Reproducibility: trial i draws from a ChaCha8 stream with key derived from \
                  --seed (SplitMix64 expansion) and stream counter i; draw order is channel, \
                  bits, noise, random root.\n\n\
                  Lambda strategies: constant:<v>; sanchez = 0.5*(K/M)*ln(4*M*SNR) (natural \
                  logarithm); proposed = min(sqrt(K*SNR/(t*m)), 1) over the row energy. SNR is \
                  taken as the linear ratio p/sigma^2 derived from --snr-db."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one BER experiment and write a single-row CSV.
    Simulate(SimulateArgs),
    /// Run a family of experiments along one axis and write one CSV row each.
    Sweep(SweepArgs),
    /// Run a numerical verification suite and print pass/fail lines.
    Verify {
        #[arg(value_enum)]
        check: VerifyCheck,
    },
    /// Write one channel realization as `m,k,re,im,visible` CSV.
    DumpChannel(DumpChannelArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Receiver: zf|rzf|sdk|bdk|src.
    #[arg(long)]
    receiver: String,
    /// Antennas (processing nodes).
    #[arg(long = "M")]
    m: usize,
    /// Single-antenna users.
    #[arg(long = "K")]
    k: usize,
    /// Effective users per antenna; omit for the stationary channel (D = K).
    #[arg(long = "D")]
    d: Option<usize>,
    /// SNR in dB (p/sigma^2); `inf` runs noiseless.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: f64,
    /// Cycles T over the processing tree.
    #[arg(long, default_value_t = 1)]
    cycles: usize,
    /// Monte Carlo trials (coherence blocks).
    #[arg(long)]
    trials: usize,
    /// Base RNG seed; trial i uses stream i.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Relaxation strategy: constant:<v> | sanchez | proposed (SDK only).
    #[arg(long, default_value = "constant:1")]
    lambda: String,
    /// Topology: `chain`, `tree:SxN`, or a JSON partition file path.
    #[arg(long, default_value = "chain")]
    topology: String,
    /// Re-select the chain root per trial with probability ~ ||h_m||^2.
    #[arg(long)]
    random_root: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Swept axis: snr|cycles|D.
    #[arg(long)]
    axis: String,
    /// Axis values: inclusive range a:b:step or list v1,v2,...
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DumpChannelArgs {
    #[arg(long = "M")]
    m: usize,
    #[arg(long = "K")]
    k: usize,
    /// Effective users per antenna; omit for stationary.
    #[arg(long = "D")]
    d: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stream id within the seed (matches trial numbering).
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VerifyCheck {
    Theorem1,
    Identity,
    Costs,
}

fn build_config(args: &CommonArgs) -> Result<SimConfig> {
    let receiver: ReceiverKind = args.receiver.parse()?;
    let lambda = parse_lambda_spec(&args.lambda)?;
    let topology = resolve_topology(&args.topology)?;
    Ok(SimConfig {
        receiver,
        m: args.m,
        k: args.k,
        d: args.d,
        snr_db: args.snr_db,
        cycles: args.cycles,
        lambda,
        topology,
        topology_label: args.topology.clone(),
        trials: args.trials,
        random_root: args.random_root,
        seed: args.seed,
    })
}

fn resolve_topology(spec: &str) -> Result<TopologySpec> {
    match parse_topology_spec(spec) {
        Ok(t) => Ok(t),
        Err(parse_err) => {
            // Not a recognized inline form; try it as a JSON partition file.
            if std::path::Path::new(spec).exists() {
                let bytes = std::fs::read(spec)?;
                parse_partition_json(&bytes)
            } else {
                Err(parse_err)
            }
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = build_config(&args.common)?;
    let result = run_experiment(&config)?;
    let file = BufWriter::new(File::create(&args.out)?);
    write_results_csv(std::slice::from_ref(&result), file)?;
    println!(
        "{} M={} K={} D={} snr_db={} T={} trials={}: ber={:.6e} ci95={:.2e} -> {}",
        config.receiver,
        config.m,
        config.k,
        config.effective_d(),
        config.snr_db,
        config.cycles,
        config.trials,
        result.ber_mean,
        result.ber_ci95,
        args.out.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = build_config(&args.common)?;
    let axis = SweepAxis::parse(&args.axis)?;
    let values = parse_axis_values(&args.values)?;
    let results = sweep(&config, axis, &values)?;
    let file = BufWriter::new(File::create(&args.out)?);
    write_results_csv(&results, file)?;
    for r in &results {
        println!(
            "{} D={} snr_db={} T={}: ber={:.6e} ci95={:.2e}",
            r.config.receiver,
            r.config.effective_d(),
            r.config.snr_db,
            r.config.cycles,
            r.ber_mean,
            r.ber_ci95
        );
    }
    println!("wrote {} rows -> {}", results.len(), args.out.display());
    Ok(())
}

fn cmd_dump_channel(args: DumpChannelArgs) -> Result<()> {
    let stream = RngStream::new(args.seed, args.stream);
    let realization = match args.d {
        Some(d) => channel::generate_nonstationary(args.m, args.k, d, stream)?,
        None => channel::generate_stationary(args.m, args.k, stream)?,
    };
    let mut file = BufWriter::new(File::create(&args.out)?);
    realization.write_csv(&mut file)?;
    file.flush()?;
    println!(
        "channel M={} K={} D={} -> {}",
        args.m,
        args.k,
        realization.d(),
        args.out.display()
    );
    Ok(())
}

fn cmd_verify(check: VerifyCheck) -> Result<()> {
    let mut all_ok = true;
    match check {
        VerifyCheck::Identity => {
            let report = analysis::identity_fuzz(1000, RngStream::new(0xD51C, 0))?;
            let ok = report.max_abs_residual <= 1e-9;
            all_ok &= ok;
            println!(
                "{} identity: max |lhs-rhs| = {:.3e} (normalized {:.3e}) over {} fuzzed steps (budget 1e-9)",
                pass_str(ok),
                report.max_abs_residual,
                report.max_rel_residual,
                report.steps
            );
        }
        VerifyCheck::Theorem1 => {
            let (m, k) = (32, 8);
            let params = BoundParams::from_system(k, 1.0, 1.0)?;
            for &lambda in &[0.25, 0.5, 1.0] {
                let mut worst_slack = f64::INFINITY;
                let mut worst_sigma = 0.0;
                for channel_id in 0..10u64 {
                    let ch = channel::generate_stationary(
                        m,
                        k,
                        RngStream::new(0xBEEF + channel_id, 0),
                    )?
                    .normalize_rows()?;
                    let report = theorem_bound_check(
                        &ch,
                        10_000,
                        lambda,
                        params,
                        RngStream::new(0xFACE, channel_id),
                    )?;
                    if !report.holds() {
                        all_ok = false;
                    }
                    if report.slack() < worst_slack {
                        worst_slack = report.slack();
                        worst_sigma = report.std_err;
                    }
                }
                println!(
                    "{} theorem1 lambda={lambda}: min slack = {worst_slack:.4} (std err {worst_sigma:.4}, bound holds within 3 SE)",
                    pass_str(worst_slack >= -3.0 * worst_sigma)
                );
            }
        }
        VerifyCheck::Costs => {
            let checks: [(&str, u64, u64); 3] = [
                ("flops_sdk(16,1)", flops_sdk(16, 1), 194),
                ("flops_bdk(16,1)", flops_bdk(16, 1), 198),
                ("exchange(16,1)", exchange_count(16, 1), 64),
            ];
            for (name, got, want) in checks {
                let ok = got == want;
                all_ok &= ok;
                println!("{} costs {name} = {got} (expected {want})", pass_str(ok));
            }
            let gap_ok = (1..=32).all(|k| (1..=8).all(|t| flops_bdk(k, t) - flops_sdk(k, t) == 4 * t as u64));
            all_ok &= gap_ok;
            println!(
                "{} costs flops_bdk - flops_sdk == 4T over K in 1..=32, T in 1..=8",
                pass_str(gap_ok)
            );
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err(Error::invalid("verification failed"))
    }
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify { check } => cmd_verify(check),
        Command::DumpChannel(args) => cmd_dump_channel(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
