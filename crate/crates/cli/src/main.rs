//! `hbands`: build harmonic bands over an elliptic Brillouin zone, compute
//! their quantum geometry, and verify the tower identities.
//!
//! Exit codes: 0 pass, 2 verification failure, 3 input error, 4 numerical
//! resolution / degeneracy error.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::{CmdError, RigidityMode, TbSource};
use num_complex::Complex64;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hbands", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum geometry of one band level: QGT grid, Chern number, Wirtinger report
    Band {
        #[command(flatten)]
        config: config::ConfigArgs,
    },
    /// Run the full identity battery and write a consolidated verdict
    Verify {
        #[command(flatten)]
        config: config::ConfigArgs,
        /// Inject a constant shift into ω^(1) (negative control; default 0.01)
        #[arg(long, num_args = 0..=1, default_missing_value = "0.01")]
        perturb_recurrence: Option<f64>,
    },
    /// Recover the relating unitary or projective matrix for a band pair
    Rigidity {
        #[command(flatten)]
        config: config::ConfigArgs,
        #[arg(long, value_enum, default_value = "twist")]
        mode: RigidityMode,
        /// Second modular parameter for cross-tau mode
        #[arg(long)]
        tau2_re: Option<f64>,
        #[arg(long)]
        tau2_im: Option<f64>,
    },
    /// Tight-binding pipeline: Bloch Hamiltonian, Fermi projector, geometry
    Tb {
        #[command(flatten)]
        config: config::ConfigArgs,
        /// Hopping-spec JSON file
        #[arg(long, conflicts_with = "model")]
        spec: Option<PathBuf>,
        /// Bundled model: two-band (with --mass) or atomic
        #[arg(long, value_parser = ["two-band", "atomic"])]
        model: Option<String>,
        /// Mass parameter of the bundled two-band model
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Fermi level
        #[arg(long, default_value_t = 0.0)]
        fermi: f64,
    },
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Band { config } => {
            let cfg = config::load(&config).map_err(CmdError::Input)?;
            commands::cmd_band(&cfg)
        }
        Command::Verify {
            config,
            perturb_recurrence,
        } => {
            let cfg = config::load(&config).map_err(CmdError::Input)?;
            commands::cmd_verify(&cfg, perturb_recurrence)
        }
        Command::Rigidity {
            config,
            mode,
            tau2_re,
            tau2_im,
        } => {
            let cfg = config::load(&config).map_err(CmdError::Input)?;
            let tau2 = match (tau2_re, tau2_im) {
                (None, None) => None,
                (re, im) => Some(Complex64::new(re.unwrap_or(0.3), im.unwrap_or(0.8))),
            };
            commands::cmd_rigidity(&cfg, mode, tau2)
        }
        Command::Tb {
            config,
            spec,
            model,
            mass,
            fermi,
        } => {
            let cfg = config::load(&config).map_err(CmdError::Input)?;
            let source = match (spec, model.as_deref()) {
                (Some(path), None) => TbSource::SpecFile(path),
                (None, Some("two-band")) => TbSource::TwoBand { mass },
                (None, Some("atomic")) => TbSource::Atomic,
                (None, None) => {
                    return Err(CmdError::Input(
                        "tb needs either --spec FILE or --model NAME".into(),
                    ))
                }
                _ => unreachable!("clap enforces the conflict"),
            };
            commands::cmd_tb(&cfg, source, fermi)
        }
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("hbands: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
