//! `dps-sense`: extraction, sweeps, band analysis, sensitivity maps,
//! inversion and pulse experiments from one flat config file.
//!
//! Exit codes: 0 success, 1 model-domain failure, 2 I/O or configuration
//! failure.

mod commands;
mod failure;
mod output;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use failure::{Failure, EXIT_CONFIG};
use output::Output;
use run_config::{Excitation, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Circuit values from the geometry.
    Extract,
    /// S-parameters at each configured VWC.
    Sweep,
    /// Band edges by both methods.
    Band,
    /// Sensitivity map and optimum excitation.
    Sense,
    /// Detector readings to permittivity and VWC.
    Invert,
    /// Pulse and tone propagation through dispersive soil.
    Pulse,
}

#[derive(Debug, Parser)]
#[command(name = "dps-sense", version, about = "Soil moisture sensor modelling toolkit")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "dps-out")]
    out: PathBuf,
    /// Quantize detector readings to 0.1° and 0.1 dB.
    #[arg(long)]
    quantize: bool,
    /// Excitation frequency in Hz; overrides `f_exc`.
    #[arg(long)]
    fexc: Option<f64>,
    /// Number of cascaded cells; overrides `n_cells`.
    #[arg(long)]
    cells: Option<usize>,
    /// CSV with `v_p`, `v_m` and optional `nominal_vwc` columns for `invert`.
    #[arg(long)]
    readings: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if cli.quantize {
        cfg.quantize = true;
    }
    if let Some(f) = cli.fexc {
        if !(f.is_finite() && f > 0.0) {
            return Err(Failure::config(format!(
                "--fexc must be a positive frequency, got {f}"
            )));
        }
        cfg.f_exc = Excitation::Fixed(f);
    }
    if let Some(n) = cli.cells {
        if n == 0 {
            return Err(Failure::config("--cells must be at least 1"));
        }
        cfg.n_cells = n;
    }

    let mut out = Output::create(&cli.out)?;
    out.note(format!("command {:?}", cli.command));
    out.note(format!("config {}", cli.config.display()));
    out.note(format!("geometry sha256 {}", cfg.geometry_sha256));
    let result = match cli.command {
        Command::Extract => commands::extract_cmd(&cfg, &mut out),
        Command::Sweep => commands::sweep_cmd(&cfg, &mut out),
        Command::Band => commands::band_cmd(&cfg, &mut out),
        Command::Sense => commands::sense_cmd(&cfg, &mut out),
        Command::Invert => commands::invert_cmd(&cfg, cli.readings.as_deref(), &mut out),
        Command::Pulse => commands::pulse_cmd(&cfg, &mut out),
    };
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error (exit {}): {e}", e.code),
    };
    let files = out.written().len();
    out.finish(&status)?;
    result?;
    eprintln!("{files} file(s) written to {}", cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dps-sense: {e}");
            ExitCode::from(e.code)
        }
    }
}
