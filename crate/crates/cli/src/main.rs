mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::{Ctx, Failure};
use output::{sha256_hex, Artifacts};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(name = "bosegas", version, about = "Dilute Bose gas trial-state laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// No summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Scattering length, w profile and Fourier bound.
    Scattering,
    /// Ideal gas ρ_c, μ and f_0 by series and by quadrature.
    Thermo,
    /// Leading free energy shift along β = c ρ^{-2/3}.
    DeltaF,
    /// Exact Gibbs free energy on the nine-mode torus.
    Fock,
    /// Pair-excitation families and their energies.
    TrialState,
    /// Variational upper bounds against the exact free energy.
    UpperBound,
    /// Boundary bridge isometry, kinetic penalty and box rescaling.
    Bridge,
    /// Runs every acceptance check.
    Verify {
        /// Smaller samples for the randomized checks.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Scattering => "scattering",
            Command::Thermo => "thermo",
            Command::DeltaF => "delta-f",
            Command::Fock => "fock",
            Command::TrialState => "trial-state",
            Command::UpperBound => "upper-bound",
            Command::Bridge => "bridge",
            Command::Verify { .. } => "verify",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    seed: u64,
    config_path: Option<String>,
    config_sha256: Option<String>,
    config: &'a config::Config,
    versions: Versions,
    status: &'static str,
    first_failure: Option<String>,
    files: &'a [output::FileEntry],
}

#[derive(Serialize)]
struct Versions {
    bosegas: &'static str,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = match config::load(cli.config.as_deref()) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let seed = cli.seed.or(loaded.config.seed).unwrap_or(DEFAULT_SEED);
    let mut out = match Artifacts::new(&cli.out) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("cannot create {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    };
    let mut ctx = Ctx { loaded: &loaded, seed, out: &mut out, quiet: cli.quiet };
    let result = match cli.command {
        Command::Scattering => commands::scattering(&mut ctx),
        Command::Thermo => commands::thermo(&mut ctx),
        Command::DeltaF => commands::delta_f(&mut ctx),
        Command::Fock => commands::fock(&mut ctx),
        Command::TrialState => commands::trial_state(&mut ctx),
        Command::UpperBound => commands::upper_bound(&mut ctx),
        Command::Bridge => commands::bridge(&mut ctx),
        Command::Verify { quick } => commands::verify(&mut ctx, quick),
    };
    let (code, failure) = match result {
        Ok(rows) => match rows.iter().find(|r| !r.ok()) {
            Some(r) => (1, Some(format!("{} = {:e} exceeds {:e}", r.label, r.value, r.limit))),
            None => (0, None),
        },
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(e)) => (1, Some(e)),
    };
    let manifest = Manifest {
        command: cli.command.name(),
        seed,
        config_path: loaded.source.as_ref().map(|p| p.display().to_string()),
        config_sha256: loaded.source.as_ref().map(|_| sha256_hex(loaded.text.as_bytes())),
        config: &loaded.config,
        versions: Versions { bosegas: env!("CARGO_PKG_VERSION") },
        status: if code == 0 { "pass" } else { "fail" },
        first_failure: failure.clone(),
        files: &out.files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = std::fs::write(out.dir().join("manifest.json"), text) {
        eprintln!("cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    if let Some(f) = failure {
        eprintln!("check failed: {f}");
    }
    ExitCode::from(code)
}
