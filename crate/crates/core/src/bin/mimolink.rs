//! Command-line front end: BER sweeps, single-pyramid transport, and
//! synthetic input generation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 golden tolerance
//! violation, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mimolink::baseband::compression_ratio;
use mimolink::config::RunConfig;
use mimolink::error::Error;
use mimolink::golden::{check_reports, GOLDEN_NS, GOLDEN_SNRS};
use mimolink::metrics::{ber_csv, cell_seed, estimate_ber, sweep_ber, BerReport};
use mimolink::neuro::mce::MceConfig;
use mimolink::neuro::synth::{synth_pyramid, SynthDistribution};
use mimolink::neuro::weights::{init_weights, load_pyramid, save_pyramid, WeightBundle};
use mimolink::pipeline::transmit_pyramid;

const EXIT_CONFIG: u8 = 2;
const EXIT_GOLDEN: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "mimolink", version, about = "Link-level simulator for digital MIMO transport of feature pyramids")]
struct Cli {
    /// JSON run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (ber, transmit) or directory (synth); stdout/cwd if unset.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results are identical for any
    /// worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep over an {N} x {SNR} grid, CSV output.
    Ber(BerArgs),
    /// Transport one feature pyramid end to end, JSON distortion report.
    Transmit(TransmitArgs),
    /// Generate synthetic pyramid and/or weight containers.
    Synth(SynthArgs),
}

#[derive(Args)]
struct BerArgs {
    /// Antenna counts, comma-separated (overrides config n_list).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// SNR grid in dB, comma-separated (overrides config snr_list).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Minimum bits per stream per cell (overrides config bits_target).
    #[arg(long)]
    bits: Option<u64>,
    /// Check results against the reference BER table; exit 3 on violation.
    #[arg(long)]
    golden: bool,
    /// Re-run the deep-BER cell (N=4, 15 dB) with at least 10^8 bits so the
    /// sub-1e-7 entry can be checked instead of skipped.
    #[arg(long)]
    long_run: bool,
}

#[derive(Args)]
struct TransmitArgs {
    /// Antennas N (overrides config).
    #[arg(long)]
    n: Option<usize>,
    /// Quantizer bits m (overrides config).
    #[arg(long)]
    m: Option<u32>,
    /// Compressed feature channels C (overrides config).
    #[arg(long)]
    c: Option<usize>,
    /// Channel SNR in dB (overrides config).
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Weight container; fresh random weights from the seed if unset.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Input pyramid container; synthetic pyramid from the seed if unset.
    #[arg(long)]
    pyramid: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Antennas N for the weight container (overrides config).
    #[arg(long)]
    n: Option<usize>,
    /// Compressed feature channels C for the weight container.
    #[arg(long)]
    c: Option<usize>,
    /// What to generate.
    #[arg(long, value_enum, default_value = "both")]
    kind: SynthKind,
    /// Sample distribution for the pyramid.
    #[arg(long, value_enum, default_value = "normal")]
    dist: DistArg,
}

#[derive(Clone, Copy, PartialEq, clap::ValueEnum)]
enum SynthKind {
    Pyramid,
    Weights,
    Both,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DistArg {
    Normal,
    Uniform,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Json(_) | Error::Container(_) | Error::WeightBundle(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Error::config("--workers must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    }

    match cli.command {
        Command::Ber(args) => run_ber(cfg, cli.out, args),
        Command::Transmit(args) => run_transmit(cfg, cli.out, args),
        Command::Synth(args) => run_synth(cfg, cli.out, args),
    }
}

fn run_ber(mut cfg: RunConfig, out: Option<PathBuf>, args: BerArgs) -> Result<ExitCode, Error> {
    if let Some(n) = args.n {
        cfg.n_list = n;
    }
    if let Some(snr) = args.snr {
        cfg.snr_list = snr;
    }
    if let Some(bits) = args.bits {
        cfg.bits_target = bits;
    }
    cfg.validate()?;

    let mut reports = sweep_ber(&cfg.n_list, &cfg.snr_list, cfg.bits_target, cfg.seed);
    if args.long_run {
        extend_deep_cell(&mut reports, &cfg);
    }

    let csv = ber_csv(&reports);
    match &out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }

    if args.golden {
        let grid_covers_golden = GOLDEN_NS.iter().all(|n| cfg.n_list.contains(n))
            && GOLDEN_SNRS.iter().all(|s| cfg.snr_list.contains(s));
        if !grid_covers_golden {
            eprintln!("note: sweep grid does not cover the full reference table; checking covered cells only");
        }
        let checks = check_reports(&reports, args.long_run);
        let mut failed = 0usize;
        for c in &checks {
            let status = if c.skipped {
                "SKIP"
            } else if c.pass {
                "PASS"
            } else {
                failed += 1;
                "FAIL"
            };
            let stream = if c.cell.stream == 0 {
                "avg".to_string()
            } else {
                format!("s{}", c.cell.stream)
            };
            eprintln!(
                "{status} golden N={} SNR={:+} dB {}: measured {:.4e} ({})",
                c.cell.n, c.cell.snr_db, stream, c.measured, c.tolerance
            );
        }
        if failed > 0 {
            eprintln!("golden check failed for {failed} cell(s)");
            return Ok(ExitCode::from(EXIT_GOLDEN));
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Replace the (N=4, 15 dB) report with a deeper run of at least 10^8 bits
/// per stream, keeping the same per-cell seed so shorter prefixes agree.
fn extend_deep_cell(reports: &mut [BerReport], cfg: &RunConfig) {
    let deep_bits = cfg.bits_target.max(100_000_000);
    for (idx, report) in reports.iter_mut().enumerate() {
        if report.n_antennas == 4 && report.snr_db == 15.0 && report.bits_per_stream < deep_bits {
            let seed = cell_seed(cfg.seed, idx);
            *report = estimate_ber(4, 15.0, deep_bits, seed);
        }
    }
}

fn run_transmit(
    mut cfg: RunConfig,
    out: Option<PathBuf>,
    args: TransmitArgs,
) -> Result<ExitCode, Error> {
    if let Some(n) = args.n {
        cfg.n_antennas = n;
    }
    if let Some(m) = args.m {
        cfg.quant_bits = m;
    }
    if let Some(c) = args.c {
        cfg.feature_channels = c;
    }
    if let Some(snr) = args.snr {
        cfg.snr_db = snr;
    }
    if args.weights.is_some() {
        cfg.weights_path = args.weights;
    }
    if args.pyramid.is_some() {
        cfg.pyramid_path = args.pyramid;
    }
    cfg.validate()?;

    let link = cfg.link_config();
    let arch = cfg.arch_config();

    let bundle = match &cfg.weights_path {
        Some(path) => WeightBundle::load(path)?,
        None => init_weights(cfg.seed, &arch)?,
    };
    let pyramid = match &cfg.pyramid_path {
        Some(path) => load_pyramid(path)?,
        None => synth_pyramid(
            cfg.image_height,
            cfg.image_width,
            cfg.seed,
            SynthDistribution::StandardNormal,
        )?,
    };

    let mce_cfg = MceConfig::from_arch(&arch);
    let outcome = transmit_pyramid(
        &pyramid, &bundle, &link, &mce_cfg, cfg.snr_db, cfg.seed, 0,
    )?;

    let report = serde_json::json!({
        "n_antennas": cfg.n_antennas,
        "snr_db": cfg.snr_db,
        "quant_bits": cfg.quant_bits,
        "feature_channels": cfg.feature_channels,
        "seed": cfg.seed,
        "compression_ratio": compression_ratio(&link).as_f64(),
        "equivalent_snrs_db": outcome.frame.equivalent_snrs_db,
        "distortion": outcome.distortion,
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn run_synth(mut cfg: RunConfig, out: Option<PathBuf>, args: SynthArgs) -> Result<ExitCode, Error> {
    if let Some(n) = args.n {
        cfg.n_antennas = n;
    }
    if let Some(c) = args.c {
        cfg.feature_channels = c;
    }
    cfg.validate()?;

    let dir = out
        .or(cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;

    if args.kind != SynthKind::Weights {
        let dist = match args.dist {
            DistArg::Normal => SynthDistribution::StandardNormal,
            DistArg::Uniform => SynthDistribution::Uniform,
        };
        let pyr = synth_pyramid(cfg.image_height, cfg.image_width, cfg.seed, dist)?;
        let path = dir.join("pyramid.bin");
        save_pyramid(&path, &pyr)?;
        eprintln!("wrote {}", path.display());
    }
    if args.kind != SynthKind::Pyramid {
        let bundle = init_weights(cfg.seed, &cfg.arch_config())?;
        let path = dir.join("weights.bin");
        bundle.save(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
