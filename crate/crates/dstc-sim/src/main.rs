use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dstc_sim::{cli, config};

/// Link-level simulator for distributed space-time coded MIMO-OFDM
/// broadcasting: ergodic capacity sweeps over a two-site geometry and
/// sphere-decoded BER sweeps of ten ST coding schemes.
#[derive(Debug, Parser)]
#[command(name = "dstc-sim", version)]
struct Cli {
    /// Plain-text key=value config file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// capacity-sweep | ber-snr-sweep | ber-imbalance-sweep | validate
    #[arg(long)]
    mode: Option<String>,
    /// ST code token (e.g. 3d, l2, jafarkhani, r1-alamouti, sm-4x2,
    /// r2-alamouti, siso-sfn, miso-alamouti, simo-mrc, mimo-alamouti)
    #[arg(long)]
    code: Option<String>,
    /// qpsk | 16qam
    #[arg(long)]
    constellation: Option<String>,
    /// SNR grid in dB: single value, comma list, or start:step:end
    #[arg(long)]
    snr: Option<String>,
    /// Site power-imbalance grid in dB (same grammar as --snr)
    #[arg(long)]
    imbalance: Option<String>,
    /// Receiver positions in km (same grammar as --snr)
    #[arg(long)]
    positions: Option<String>,
    /// Base seed for all random streams
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to env DSTC_SIM_WORKERS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
}

fn overrides_from(cli: &Cli) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            out.push((k.to_string(), v));
        }
    };
    push("mode", cli.mode.clone());
    push("code", cli.code.clone());
    push("constellation", cli.constellation.clone());
    push("snr", cli.snr.clone());
    push("imbalance", cli.imbalance.clone());
    push("positions", cli.positions.clone());
    push("seed", cli.seed.map(|v| v.to_string()));
    push("out", cli.out.as_ref().map(|p| p.display().to_string()));
    let workers = cli
        .workers
        .map(|v| v.to_string())
        .or_else(|| std::env::var("DSTC_SIM_WORKERS").ok());
    push("workers", workers);
    out
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let cfg = match config::parse_config(&text, &overrides_from(&args)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match cli::run(&cfg) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
