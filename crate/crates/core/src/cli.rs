//! Batch runner behind the `qentropy` binary.
//!
//! Exit codes: 0 success, 1 a mathematical check failed, 2 usage or
//! configuration error. Every command takes a mandatory `--seed`; reports
//! contain no timings, so reruns with the same seed are byte-identical.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::capacity::{self, CapacityEstimate, OptimizerConfig};
use crate::channel::{self, Channel, KrausChannel, MeasurePrepareChannel, QuantumChannel};
use crate::error::{Error, Result};
use crate::inequalities::{self, CheckResult, FuzzConfig, FuzzReport, Inequality};
use crate::json::{self, ChannelDoc};
use crate::linalg::{self, real, CMatrix};
use crate::qstate::{DensityOperator, RngStream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qentropy", version, about = "Quantum entropy inequalities and channel capacities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuzz every entropy inequality and report slacks.
    VerifyInequalities(VerifyArgs),
    /// Estimate χ or C_E for one channel.
    Capacity(CapacityArgs),
    /// Check C_E ≤ log d on entanglement-breaking channels and C_E ≤ χ + log d.
    Bounds(BoundsArgs),
    /// Compare χ of a tensor channel with the sum of the single-channel values.
    AdditivityProbe(AdditivityArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    seed: u64,
    /// Directory for JSON reports.
    #[arg(long, default_value = "qentropy-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct OptimizerArgs {
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
}

impl OptimizerArgs {
    fn config(&self, seed: u64) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig { seed, restarts: self.restarts, max_iters: self.max_iters, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Subsystem dimensions to sample from.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Trials for the purification-decomposition campaign.
    #[arg(long, default_value_t = 500)]
    decomposition_trials: usize,
    /// A trial passes when its slack is at least this value.
    #[arg(long, default_value_t = inequalities::DEFAULT_THRESHOLD, allow_hyphen_values = true)]
    tol: f64,
    /// Restrict to these inequalities (labels as printed in reports).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Chi,
    Ce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Zoo {
    Identity,
    Depolarizing,
    Dephasing,
    Constant,
    AmplitudeDamping,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Named channel.
    #[arg(long, value_enum, conflicts_with = "channel")]
    zoo: Option<Zoo>,
    /// Channel JSON file.
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Noise parameter for depolarizing and amplitude-damping channels.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

#[derive(Debug, Args)]
struct CapacityArgs {
    which: Which,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Check a single channel instead of sampling.
    #[command(flatten)]
    channel: ChannelArgs,
    /// Dimensions of sampled channels.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    dims: Vec<usize>,
    /// Sampled entanglement-breaking channels per dimension.
    #[arg(long, default_value_t = 10)]
    eb_channels: usize,
    /// Sampled general channels per dimension.
    #[arg(long, default_value_t = 5)]
    channels: usize,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Debug, Args)]
struct AdditivityArgs {
    #[command(flatten)]
    common: Common,
    /// Entanglement-breaking factor for a single named pair.
    #[arg(long, value_enum, requires = "other")]
    eb: Option<Zoo>,
    /// Second factor for a single named pair.
    #[arg(long, value_enum, requires = "eb")]
    other: Option<Zoo>,
    /// Dimension of each factor.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::VerifyInequalities(a) => verify(a, out),
        Command::Capacity(a) => capacity_cmd(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::AdditivityProbe(a) => additivity(a, out),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn emit<T: Serialize + ?Sized>(out: &mut dyn Write, format: Format, value: &T, table: &str) -> Result<()> {
    match format {
        Format::Json => out.write_all(json::to_pretty(value)?.as_bytes())?,
        Format::Table => out.write_all(table.as_bytes())?,
    }
    Ok(())
}

fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<bool> {
    let inequalities = if a.only.is_empty() {
        Inequality::ALL.to_vec()
    } else {
        a.only
            .iter()
            .map(|l| {
                Inequality::from_label(l).ok_or_else(|| Error::InvalidParameter(format!("unknown inequality {l:?}")))
            })
            .collect::<Result<_>>()?
    };
    let cfg = FuzzConfig {
        seed: a.common.seed,
        trials: a.trials,
        decomposition_trials: a.decomposition_trials,
        dims: a.dims.clone(),
        threshold: a.tol,
        inequalities,
        ..FuzzConfig::default()
    };
    cfg.validate()?;
    let reports = inequalities::run_fuzz(&cfg, Some(&a.common.out))?;
    let ok = reports.iter().all(|r| r.failures == 0);
    emit(out, a.common.format, &reports, &fuzz_table(&reports))?;
    Ok(ok)
}

fn fuzz_table(reports: &[FuzzReport]) -> String {
    let mut s = format!("{:<32} {:>7} {:>14} {:>14} {:>8}\n", "inequality", "trials", "min slack", "mean slack", "failures");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<32} {:>7} {:>14} {:>14} {:>8}",
            r.inequality.label(),
            r.trials,
            fmt_real(r.min_slack),
            fmt_real(r.mean_slack),
            r.failures
        );
    }
    s
}

fn zoo_channel(zoo: Zoo, d: usize, p: f64) -> Result<Channel> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    Ok(match zoo {
        Zoo::Identity => channel::identity(d).into(),
        Zoo::Depolarizing => channel::depolarizing(d, p)?.into(),
        // Measuring in the computational basis and re-preparing the outcome.
        Zoo::Dephasing => channel::qc_channel((0..d).map(|k| linalg::outer(&linalg::basis(d, k))).collect())?.into(),
        Zoo::Constant => channel::constant(d, DensityOperator::maximally_mixed(d))?.into(),
        Zoo::AmplitudeDamping => amplitude_damping(d, p)?.into(),
    })
}

/// Qubit amplitude damping with decay probability `gamma`.
fn amplitude_damping(d: usize, gamma: f64) -> Result<KrausChannel> {
    if d != 2 {
        return Err(Error::InvalidParameter("amplitude damping is defined for qubits".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("decay probability {gamma} outside [0, 1]")));
    }
    let mut k0 = CMatrix::zeros(2, 2);
    k0[(0, 0)] = real(1.0);
    k0[(1, 1)] = real((1.0 - gamma).sqrt());
    let mut k1 = CMatrix::zeros(2, 2);
    k1[(0, 1)] = real(gamma.sqrt());
    KrausChannel::new(vec![k0, k1])
}

fn zoo_name(zoo: Zoo) -> &'static str {
    match zoo {
        Zoo::Identity => "identity",
        Zoo::Depolarizing => "depolarizing",
        Zoo::Dephasing => "dephasing",
        Zoo::Constant => "constant",
        Zoo::AmplitudeDamping => "amplitude-damping",
    }
}

/// Channel and a file-name stem.
fn load_channel(a: &ChannelArgs) -> Result<Option<(Channel, String)>> {
    if let Some(path) = &a.channel {
        let doc: ChannelDoc = json::read_file(path)
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "channel".into());
        return Ok(Some((doc.to_channel()?, stem)));
    }
    match a.zoo {
        Some(z) => Ok(Some((zoo_channel(z, a.dim, a.p)?, format!("{}-d{}", zoo_name(z), a.dim)))),
        None => Ok(None),
    }
}

fn capacity_cmd(a: &CapacityArgs, out: &mut dyn Write) -> Result<bool> {
    let (ch, stem) = load_channel(&a.channel)?
        .ok_or_else(|| Error::InvalidParameter("give --zoo or --channel".into()))?;
    let cfg = a.optimizer.config(a.common.seed)?;
    let (est, which) = match a.which {
        Which::Chi => (capacity::optimize_chi(&ch, &cfg)?, "chi"),
        Which::Ce => (capacity::optimize_ce(&ch, &cfg)?, "ce"),
    };
    let path = a.common.out.join("capacity").join(format!("{which}-{stem}-{}.json", a.common.seed));
    json::write_file(&path, &est)?;
    let table = format!(
        "{which} {stem}: {:.6} bits (converged: {}, restarts: {}, spread: {})\n",
        est.value,
        est.converged,
        est.restarts,
        fmt_real(est.spread)
    );
    emit(out, a.common.format, &est, &table)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct BoundsEntry {
    channel: String,
    check: CheckResult,
}

fn check_table(entries: &[BoundsEntry]) -> String {
    let mut s = format!("{:<16} {:<38} {:>14} {:>14} {:>14} {:>5}\n", "channel", "check", "lhs", "rhs", "slack", "pass");
    for e in entries {
        let c = &e.check;
        let _ = writeln!(
            s,
            "{:<16} {:<38} {:>14} {:>14} {:>14} {:>5}",
            e.channel,
            c.name,
            fmt_real(c.lhs),
            fmt_real(c.rhs),
            fmt_real(c.slack),
            c.pass
        );
        for comp in &c.components {
            let _ = writeln!(
                s,
                "{:<16}   {:<36} {:>14} {:>14} {:>14} {:>5}",
                "",
                comp.label,
                fmt_real(comp.lhs),
                fmt_real(comp.rhs),
                fmt_real(comp.slack),
                comp.pass
            );
        }
    }
    s
}

fn check_dims(dims: &[usize], max: usize) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2 || d > max) {
        return Err(Error::InvalidParameter(format!("dimensions must lie in 2..={max}, got {dims:?}")));
    }
    Ok(())
}

fn bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<bool> {
    let cfg = a.optimizer.config(a.common.seed)?;
    let mut entries = Vec::new();
    if let Some((ch, stem)) = load_channel(&a.channel)? {
        if let Channel::MeasurePrepare(mp) = &ch {
            entries.push(BoundsEntry { channel: stem.clone(), check: capacity::check_eb_ce_bound(mp, &cfg)? });
        }
        entries.push(BoundsEntry { channel: stem, check: capacity::check_ce_chi_bound(&ch, &cfg)? });
    } else {
        check_dims(&a.dims, 4)?;
        for &d in &a.dims {
            for i in 0..a.eb_channels {
                let mut rng = RngStream::new(a.common.seed, (1 << 40) | ((d as u64) << 32) | i as u64).rng();
                let ch = capacity::random_eb_channel(d, &mut rng)?;
                entries.push(BoundsEntry { channel: format!("eb-d{d}-{i}"), check: capacity::check_eb_ce_bound(&ch, &cfg)? });
            }
            for i in 0..a.channels {
                let mut rng = RngStream::new(a.common.seed, (2 << 40) | ((d as u64) << 32) | i as u64).rng();
                let ch = channel::random_channel(d, d, 2, &mut rng)?;
                entries.push(BoundsEntry {
                    channel: format!("random-d{d}-{i}"),
                    check: capacity::check_ce_chi_bound(&ch, &cfg)?,
                });
            }
        }
    }
    json::write_file(&a.common.out.join("bounds").join(format!("{}.json", a.common.seed)), &entries)?;
    let ok = entries.iter().all(|e| e.check.pass);
    emit(out, a.common.format, &entries, &check_table(&entries))?;
    Ok(ok)
}

#[derive(Debug, Serialize)]
struct ProbeEntry {
    pair: String,
    check: CheckResult,
    first: CapacityEstimate,
    second: CapacityEstimate,
    tensor: CapacityEstimate,
}

fn as_eb(ch: Channel, name: &str) -> Result<MeasurePrepareChannel> {
    match ch {
        Channel::MeasurePrepare(mp) => Ok(mp),
        Channel::Kraus(_) => Err(Error::InvalidParameter(format!("{name} is not a measure-and-prepare channel"))),
    }
}

fn additivity(a: &AdditivityArgs, out: &mut dyn Write) -> Result<bool> {
    let cfg = a.optimizer.config(a.common.seed)?;
    check_dims(&a.dims, 3)?;
    let mut pairs: Vec<(String, MeasurePrepareChannel, KrausChannel)> = Vec::new();
    if let (Some(eb), Some(other)) = (a.eb, a.other) {
        let d = a.dims[0];
        let first = as_eb(zoo_channel(eb, d, a.p)?, zoo_name(eb))?;
        let second = zoo_channel(other, d, a.p)?.to_kraus();
        pairs.push((format!("{}-{}", zoo_name(eb), zoo_name(other)), first, second));
    } else {
        for i in 0..a.pairs {
            let mut rng = RngStream::new(a.common.seed, (3 << 40) | i as u64).rng();
            let d1 = a.dims[i % a.dims.len()];
            let d2 = a.dims[(i / a.dims.len()) % a.dims.len()];
            if d1 * d2 > capacity::MAX_TENSOR_DIM {
                continue;
            }
            let first = capacity::random_eb_channel(d1, &mut rng)?;
            let second = channel::random_channel(d2, d2, 2, &mut rng)?;
            pairs.push((format!("pair-{i}"), first, second));
        }
    }
    let mut entries = Vec::new();
    let mut ok = true;
    for (i, (name, first, second)) in pairs.into_iter().enumerate() {
        let (check, est) = capacity::additivity_probe_detailed(&first, &second, &cfg)?;
        // Only a positive gap beyond tolerance counts as a failure; a large
        // negative gap means the tensor optimizer fell short.
        if check.slack < check.threshold {
            ok = false;
            let path = a.common.out.join("witnesses").join("additivity").join(format!("{}-{i}.json", a.common.seed));
            json::write_file(&path, &check)?;
            eprintln!("ADDITIVITY VIOLATION CANDIDATE: {name} gap {} (witness {})", fmt_real(est.gap), path.display());
        }
        entries.push(ProbeEntry { pair: name, check, first: est.first, second: est.second, tensor: est.tensor });
    }
    json::write_file(&a.common.out.join("additivity").join(format!("{}.json", a.common.seed)), &entries)?;
    let mut table = format!("{:<28} {:>12} {:>12} {:>12} {:>14} {:>5}\n", "pair", "chi first", "chi second", "chi tensor", "gap", "pass");
    for e in &entries {
        let _ = writeln!(
            table,
            "{:<28} {:>12.6} {:>12.6} {:>12.6} {:>14} {:>5}",
            e.pair,
            e.first.value,
            e.second.value,
            e.tensor.value,
            fmt_real(e.tensor.value - e.first.value - e.second.value),
            e.check.pass
        );
    }
    emit(out, a.common.format, &entries, &table)?;
    Ok(ok)
}
