use std::path::PathBuf;
use std::process::ExitCode;

use cdce_core::pilot::assemble_frame;
use cdce_sim::harness::{derive_seed, Stream};
use cdce_sim::output::{dump_pilot_analysis, emit, Format};
use cdce_sim::{Experiment, SimConfig, SimResult};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "cdce-sim", version, about = "Channel-estimation Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full SNR sweep and write one row per (estimator, SNR).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run one trial and print each estimator's NMSE.
    Single {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Dump the pilot DD image and ambiguity function as JSON.
    Af {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> SimResult<()> {
    match cli.command {
        Command::Sweep { config, out, format } => {
            let rows = Experiment::new(SimConfig::load(&config)?)?.run_sweep()?;
            emit(&rows, format, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Single { config, snr_db, trial } => {
            let exp = Experiment::new(SimConfig::load(&config)?)?;
            // Grid points reuse their sweep stream; off-grid SNRs get their own.
            let grid = &exp.config().snr_grid_db;
            let idx = grid.iter().position(|&s| s == snr_db).unwrap_or(grid.len());
            for (est, nmse) in exp.run_trial(snr_db, idx, trial)? {
                println!("{est}\t{nmse:.4}");
            }
        }
        Command::Af { config, out } => {
            let cfg = SimConfig::load(&config)?;
            let spec = cfg.frame_spec()?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, Stream::Frame, 0, 0));
            let frame = assemble_frame(&spec, &mut rng)?;
            let s = dump_pilot_analysis(&frame, spec.lattice, &out)?;
            println!("pilots\t{}", s.pilots);
            println!("peak_to_sidelobe\t{:.4}", s.peak_to_sidelobe);
            println!("energy_in_top_bins\t{:.4}", s.energy_in_top_bins);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
