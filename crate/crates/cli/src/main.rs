//! `hess`: trace analysis, hybrid-supply sizing and simulation, RF field maps
//! and band-coexistence lookups.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, configuration or input data. Exit code 2.
    Usage(String),
    /// Anything else. Exit code 1.
    Internal(String),
}

impl From<hess_core::Error> for Failure {
    fn from(e: hess_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "hess",
    version,
    about = "Transceiver energy analysis and hybrid supply design"
)]
struct Cli {
    /// Omit the `# generated_unix_s` line so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy of a bench current trace.
    Analyze(AnalyzeArgs),
    /// Size the super-capacitor and check battery recharge.
    Size(SizeArgs),
    /// Time-domain simulation of the hybrid supply.
    Simulate(SimulateArgs),
    /// Received-power map around an antenna.
    Fieldmap(FieldmapArgs),
    /// Range and throughput loss under band coexistence.
    Coexist(CoexistArgs),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// CSV of sense-resistor voltages (`index,voltage_v` or one column).
    #[arg(long)]
    pub trace: PathBuf,
    /// Sense resistance, ohms.
    #[arg(long)]
    pub rsense: f64,
    /// Bench supply voltage, volts.
    #[arg(long)]
    pub vs: f64,
    /// Sample rate, samples per second.
    #[arg(long)]
    pub fs: f64,
    /// Remove short current spikes and report their energy separately.
    #[arg(long)]
    pub clean_spikes: bool,
    /// Spike current threshold in mA (default: 1.2 x active-max current).
    #[arg(long, requires = "clean_spikes")]
    pub spike_threshold_ma: Option<f64>,
    /// Longest run treated as a spike, microseconds.
    #[arg(long, requires = "clean_spikes", default_value_t = 50.0)]
    pub spike_max_width_us: f64,
    /// Characters transferred during the capture.
    #[arg(long)]
    pub chars: Option<u64>,
    /// Communication mode label: echo or no-echo.
    #[arg(long, default_value = "no-echo")]
    pub mode: String,
    /// Level tolerance for phase segmentation, volts.
    #[arg(long, default_value_t = 0.02)]
    pub tolerance_v: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Use the rounded 1.33 / 2.66 coefficients.
    #[arg(long)]
    pub paper_literal: bool,
    /// Also evaluate these battery internal resistances (ohms, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub sweep_r_ib: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Time step, seconds (default: sim.dt_us, else 0.1 us).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of cycles (default: sim.cycles, else 10).
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Also run the battery-only baseline and report battery stress.
    #[arg(long)]
    pub baseline: bool,
    /// Write every N-th waveform sample.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long)]
    pub paper_literal: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FieldmapArgs {
    /// isotropic, monopole or patch (default: rf.antenna, else isotropic).
    #[arg(long)]
    pub antenna: Option<String>,
    /// Fit the map to a measured range: micaz, hc05 or theoretical.
    #[arg(long)]
    pub calibrate_to: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p_tx_dbm: Option<f64>,
    #[arg(long)]
    pub distance_m: Option<f64>,
    #[arg(long)]
    pub frequency_hz: Option<f64>,
    /// Angular resolution, degrees; must divide 180.
    #[arg(long)]
    pub step_deg: Option<f64>,
    #[arg(long)]
    pub peak_gain_dbi: Option<f64>,
    #[arg(long)]
    pub shape_exponent: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CoexistArgs {
    #[arg(long)]
    pub transceiver: String,
    /// indoor or outdoor.
    #[arg(long, default_value = "indoor")]
    pub scenario: String,
    /// severe, average or none.
    #[arg(long, default_value = "severe")]
    pub interference: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stamp = !cli.no_timestamp;
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(a, stamp),
        Command::Size(a) => commands::size(a, stamp),
        Command::Simulate(a) => commands::simulate(a, stamp),
        Command::Fieldmap(a) => commands::fieldmap(a, stamp),
        Command::Coexist(a) => commands::coexist(a, stamp),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
    }
}
