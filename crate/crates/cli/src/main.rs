use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::Outcome;

/// Dissipativity certificates for linear delay equations.
#[derive(Parser, Debug)]
#[command(name = "ddecert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the weighted-norm certificate at a given rate.
    Certify(commands::CertifyArgs),
    /// Smallest certifiable rate.
    MinMu(commands::MinMuArgs),
    /// Closed-form sufficient rates.
    Bounds(commands::BoundsArgs),
    /// Eigenvalues of the discretized generator.
    Spectrum(commands::SpectrumArgs),
    /// Discrete dissipativity check of a certificate.
    Check(commands::CheckArgs),
    /// Integrate the delay equation and check certified decay.
    Simulate(commands::SimulateArgs),
    /// Mean-square contraction of synchronously coupled SDDE pairs.
    SddePair(commands::SddePairArgs),
    /// Almost-sure Lyapunov exponent of a scalar SDDE.
    SddeLyapunov(commands::SddeLyapunovArgs),
    /// Solve AᵀQ + QA = -CᵀC for a renorming matrix Q.
    LyapunovRenorm(commands::LyapunovRenormArgs),
}

fn configure_threads() -> Result<(), String> {
    let threads = match std::env::var("DDECERT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("DDECERT_THREADS must be a non-negative integer, got {v:?}"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Certify(a) => commands::certify(a),
        Command::MinMu(a) => commands::min_mu(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Check(a) => commands::check(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::SddePair(a) => commands::sdde_pair(a),
        Command::SddeLyapunov(a) => commands::sdde_lyapunov(a),
        Command::LyapunovRenorm(a) => commands::lyapunov_renorm(a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
