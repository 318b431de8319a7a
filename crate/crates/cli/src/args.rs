use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "qrngqual", version, about = "Qualify phase-noise QRNG intensity data and simulate gain-switched lasers")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Root seed for every random stream
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// ADC resolution in bits
    #[arg(long, global = true, default_value_t = 10)]
    pub adc_bits: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo calibration of the statistical-distance boundary
    Calibrate(CalibrateArgs),
    /// Apply both criteria to recorded intensities or a waveform
    Qualify(QualifyArgs),
    /// Simulate a gain-switched laser behind the interferometer
    Simulate(SimulateArgs),
    /// Qualify a grid of operating points
    Sweep(SweepArgs),
    /// Pull one intensity per pulse out of a waveform
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 0.155)]
    pub d_bound: f64,
    #[arg(long, default_value_t = -18.52, allow_negative_numbers = true)]
    pub c1_bound_db: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Noise std values (fraction of the ideal span), comma separated; default 8 values over 0.43 %..3 %
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    /// ADC fill fractions, comma separated; default 8 values over 50 %..85 %
    #[arg(long, value_delimiter = ',')]
    pub fraction: Option<Vec<f64>>,
    /// Samples per dataset
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Phase std in rad; default 0.825 pi
    #[arg(long)]
    pub sigma_phi: Option<f64>,
    /// Sample sizes for the convergence study; `none` skips it
    #[arg(long, default_value = "100,1000,10000,100000")]
    pub sizes: String,
    /// Reps per size in the convergence study
    #[arg(long, default_value_t = 20)]
    pub size_reps: usize,
    /// Calibration CSV (one row per cell and rep)
    #[arg(long, default_value = "calibration.csv")]
    pub out: PathBuf,
    /// Per-cell mean and std
    #[arg(long, default_value = "calibration_summary.csv")]
    pub summary_out: PathBuf,
    /// Convergence CSV
    #[arg(long, default_value = "convergence.csv")]
    pub convergence_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractionArgs {
    /// Repetition period in s (waveform input)
    #[arg(long, default_value_t = 5.07e-9)]
    pub rep_period: f64,
    /// Duty cycle of the drive (waveform input)
    #[arg(long, default_value_t = 0.5)]
    pub duty_cycle: f64,
    /// Sampling instant as a fraction of the on-time
    #[arg(long, default_value_t = 0.8)]
    pub offset: f64,
    /// Electrical-to-optical delay in s
    #[arg(long, default_value_t = 0.0)]
    pub delay: f64,
    /// Estimate the delay from the drive column of a simulator trace
    #[arg(long)]
    pub detect_delay: bool,
}

#[derive(Debug, Args)]
pub struct QualifyArgs {
    /// ADC codes (one per line or a `code` column) or a waveform CSV
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub bounds: BoundaryArgs,
    #[command(flatten)]
    pub extraction: ExtractionArgs,
    /// Report file; printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LaserArgs {
    /// Laser preset: laser1, laser2 or laser3
    #[arg(long, default_value = "laser3")]
    pub preset: String,
    /// TOML file with laser parameters; overrides --preset
    #[arg(long)]
    pub laser_file: Option<PathBuf>,
    /// Drive lowpass cutoff in Hz; 0 removes the preset's lowpass
    #[arg(long)]
    pub lowpass_hz: Option<f64>,
    /// Additive detection noise, mW
    #[arg(long, default_value_t = 0.02)]
    pub detector_noise: f64,
    /// Euler step in s
    #[arg(long, default_value_t = 0.2e-12)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct DriveArgs {
    #[arg(long, default_value_t = 5.07e-9)]
    pub rep_period: f64,
    #[arg(long, default_value_t = 0.5)]
    pub duty_cycle: f64,
    #[arg(long, default_value_t = 36.0)]
    pub peak_ma: f64,
    #[arg(long, default_value_t = 0.6)]
    pub mod_depth: f64,
    /// Chip temperature, degC
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    pub temperature: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub laser: LaserArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
    /// Number of pulses (or CW samples)
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Constant drive at the peak current instead of pulses
    #[arg(long)]
    pub cw: bool,
    /// Sampling instant as a fraction of the on-time
    #[arg(long, default_value_t = 0.8)]
    pub offset: f64,
    /// Digitized per-pulse intensities
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full waveform CSV (drive, photon density, phase, interfered intensity)
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub laser: LaserArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[command(flatten)]
    pub bounds: BoundaryArgs,
    /// First swept parameter: peak_current, duty_cycle, modulation_depth or temperature
    #[arg(long, default_value = "peak_current")]
    pub axis1: String,
    #[arg(long, value_delimiter = ',', default_value = "8,16,24,36,54,80", allow_negative_numbers = true)]
    pub values1: Vec<f64>,
    #[arg(long, default_value = "duty_cycle")]
    pub axis2: String,
    #[arg(long, value_delimiter = ',', default_value = "0.0333333333,0.3333333333,0.5,0.6666666667,0.9666666667", allow_negative_numbers = true)]
    pub values2: Vec<f64>,
    /// Pulses per dataset
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Datasets per cell
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Sampling instant as a fraction of the on-time
    #[arg(long, default_value_t = 0.8)]
    pub offset: f64,
    #[arg(long, default_value = "acceptance_map.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Waveform CSV: simulator trace or `time_s,value`
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub extraction: ExtractionArgs,
    /// Digitized intensities, one code per line
    #[arg(long)]
    pub out: PathBuf,
}
