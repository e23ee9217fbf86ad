//! Command-line driver: parameter files, subcommands, and output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::{Overrides, ParamFile};
use crate::error::{CliError, CliResult};
use crate::output::{write_table, Format, Header, Manifest};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SIDEBAND_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "sideband-out";

#[derive(Debug, Parser)]
#[command(name = "sideband", version, about = "Sideband-pumped two-mode self-oscillator: simulation and analysis")]
pub struct Cli {
    /// Parameter file (TOML); keys not given fall back to the built-in reference device.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory [default: $SIDEBAND_OUT_DIR, else ./sideband-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Encoding of the data files.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived constants of the operating point.
    Constants,
    /// Stationary self-oscillation state, optionally with a trajectory.
    Steady(commands::SteadyArgs),
    /// Stationary amplitudes across pump detuning.
    SweepDetune(commands::GridArgs),
    /// Eigenvalues of the linearized dynamics and the phase-split constant across detuning.
    Eig(commands::GridArgs),
    /// Phase and amplitude response to a pump-phase step.
    Step(commands::StepArgs),
    /// Ensemble phase diffusion of the free-running oscillator.
    Diffuse(commands::DiffuseArgs),
    /// Pump-phase feedback holding one mode's phase.
    Stabilize(commands::StabilizeArgs),
    /// Welch power spectral density of a column of a CSV file.
    Spectrum(commands::SpectrumArgs),
    /// Dispersive coupling constant from frequency shift against squared amplitude.
    FitGamma(commands::FitGammaArgs),
    /// Slowest eigenvalue against pump current.
    Lambda3Sweep(commands::Lambda3Args),
    /// Full second-order equations of a toy device against the slow flow.
    OracleCheck(commands::OracleArgs),
    /// Re-run the invocation recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Steady(_) => "steady",
            Command::SweepDetune(_) => "sweep-detune",
            Command::Eig(_) => "eig",
            Command::Step(_) => "step",
            Command::Diffuse(_) => "diffuse",
            Command::Stabilize(_) => "stabilize",
            Command::Spectrum(_) => "spectrum",
            Command::FitGamma(_) => "fit-gamma",
            Command::Lambda3Sweep(_) => "lambda3-sweep",
            Command::OracleCheck(_) => "oracle-check",
            Command::Replay { .. } => "replay",
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn dispatch(cli: &Cli, pf: &ParamFile) -> CliResult<Output> {
    let seed = cli.seed;
    match &cli.command {
        Command::Constants => commands::constants(pf),
        Command::Steady(a) => commands::steady(pf, seed, a),
        Command::SweepDetune(a) => commands::sweep_detune(pf, a),
        Command::Eig(a) => commands::eig(pf, a),
        Command::Step(a) => commands::step(pf, a),
        Command::Diffuse(a) => commands::diffuse(pf, seed, a),
        Command::Stabilize(a) => commands::stabilize(pf, seed, a),
        Command::Spectrum(a) => commands::spectrum_cmd(a),
        Command::FitGamma(a) => commands::fit_gamma(pf, a),
        Command::Lambda3Sweep(a) => commands::lambda3_sweep(pf, a),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    }
}

/// Resolves parameters, computes, then writes the manifest followed by the data files.
fn execute(cli: &Cli, argv: Vec<String>, base: Option<(ParamFile, String)>) -> CliResult<()> {
    let (mut pf, source) = match base {
        Some(b) => b,
        None => match &cli.params {
            Some(path) => (ParamFile::load(path)?, path.display().to_string()),
            None => (ParamFile::builtin(), "<builtin>".to_string()),
        },
    };
    cli.overrides.apply(&mut pf)?;
    let output = dispatch(cli, &pf)?;

    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let manifest = Manifest {
        tool: "sideband".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cli.command.name().into(),
        argv,
        seed: cli.seed,
        format: cli.format,
        params_source: source,
        params_hash: pf.hash(),
        params: pf.clone(),
        outputs: output.tables.iter().map(|t| t.file_name(cli.format)).collect(),
    };
    manifest.write(&dir)?;
    let header = Header {
        subcommand: manifest.subcommand.clone(),
        params_hash: manifest.params_hash.clone(),
        seed: cli.seed,
        dt: output.dt,
    };
    for t in &output.tables {
        write_table(&dir, t, cli.format, &header)?;
    }
    for line in &output.lines {
        println!("{line}");
    }
    println!("wrote {} files to {}", output.tables.len() + 1, dir.display());
    match output.failure {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(()),
    }
}

fn replay(cli: &Cli, manifest_path: &std::path::Path) -> CliResult<()> {
    let m = Manifest::read(manifest_path)?;
    let mut args = vec!["sideband".to_string()];
    args.extend(m.argv.iter().cloned());
    let mut recorded = Cli::try_parse_from(&args)
        .map_err(|e| CliError::Config(format!("{}: recorded arguments: {e}", manifest_path.display())))?;
    if matches!(recorded.command, Command::Replay { .. }) {
        return Err(CliError::Config("manifest records a replay".into()));
    }
    recorded.out = cli.out.clone();
    let mut check = m.params.clone();
    recorded.overrides.apply(&mut check)?;
    if check.hash() != m.params_hash {
        return Err(CliError::Config(format!(
            "{}: parameters do not match the recorded hash",
            manifest_path.display()
        )));
    }
    execute(&recorded, m.argv.clone(), Some((m.params, m.params_source)))
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Replay { manifest } => replay(&cli, manifest),
        _ => execute(&cli, argv, None),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            e.exit_code()
        }
    }
}
