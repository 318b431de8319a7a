//! Pass/fail decisions, autocorrelation boundary derivation and operating-point sweeps.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adc::{build_histogram, dynamic_range_fraction, AdcModel, SampleSequence};
use crate::autocorr::autocorr_profile;
use crate::criteria::{fit_arcsine, min_entropy, FitConfig, FitFailure};
use crate::error::{Error, Result};
use crate::extract::{AutoRange, DEFAULT_OFFSET_FRACTION};
use crate::laser::{
    DetectorParams, DriveParams, IntegratorConfig, InterferometerParams, LaserParams, LaserState, Lowpass,
    DEFAULT_SAMPLE_RATE,
};
use crate::par;

/// Lags reported in every profile.
pub const PROFILE_LAGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub d_bound: f64,
    pub c1_bound_db: f64,
    /// Bounds for lags 2, 3, ... in dB; empty disables them.
    #[serde(default)]
    pub higher_lag_bound_db: Vec<f64>,
}

impl Default for Boundaries {
    fn default() -> Self {
        Self { d_bound: 0.155, c1_bound_db: -18.52, higher_lag_bound_db: Vec::new() }
    }
}

impl Boundaries {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_bound > 0.0 && self.d_bound < 1.0) {
            return Err(Error::InvalidConfig(format!("d_bound must be in (0, 1), got {}", self.d_bound)));
        }
        if !(self.c1_bound_db < 0.0) {
            return Err(Error::InvalidConfig(format!("c1_bound_db must be negative, got {}", self.c1_bound_db)));
        }
        if self.higher_lag_bound_db.len() > PROFILE_LAGS - 1 {
            return Err(Error::InvalidConfig(format!("at most {} higher-lag bounds", PROFILE_LAGS - 1)));
        }
        Ok(())
    }

    pub fn pass_statdist(&self, d_stat: f64) -> bool {
        d_stat <= self.d_bound
    }

    /// `c_db[0]` is lag 1. An empty profile (constant data) fails.
    pub fn pass_autocorr(&self, c_db: &[f64]) -> bool {
        let Some(&c1) = c_db.first() else {
            return false;
        };
        c1 <= self.c1_bound_db
            && self
                .higher_lag_bound_db
                .iter()
                .enumerate()
                .all(|(i, &bound)| c_db.get(i + 1).is_some_and(|&c| c <= bound))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualReport {
    pub samples: usize,
    pub d_stat: f64,
    pub converged: bool,
    pub fit_failure: Option<FitFailure>,
    pub support_lo: Option<f64>,
    pub support_hi: Option<f64>,
    /// `10 log10 |C_d|` for lags 1 upward; empty when the autocorrelation is undefined.
    pub c_db: Vec<f64>,
    pub autocorr_error: Option<String>,
    pub min_entropy_bits: f64,
    pub dynamic_range_fraction: f64,
    pub pass_statdist: bool,
    pub pass_autocorr: bool,
    pub pass_overall: bool,
    pub metadata: BTreeMap<String, String>,
}

impl QualReport {
    pub fn c1_db(&self) -> Option<f64> {
        self.c_db.first().copied()
    }

    /// Recomputes the pass flags from the stored values.
    pub fn reevaluate(&mut self, b: &Boundaries) {
        self.pass_statdist = b.pass_statdist(self.d_stat);
        self.pass_autocorr = b.pass_autocorr(&self.c_db);
        self.pass_overall = self.pass_statdist && self.pass_autocorr;
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
    }
}

pub fn qualify(seq: &SampleSequence, adc: &AdcModel, b: &Boundaries) -> Result<QualReport> {
    qualify_with(seq, adc, b, &FitConfig::default())
}

pub fn qualify_with(seq: &SampleSequence, adc: &AdcModel, b: &Boundaries, fit: &FitConfig) -> Result<QualReport> {
    b.validate()?;
    if seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hist = build_histogram(seq, adc)?;
    let result = fit_arcsine(&hist, fit);
    let max_lag = PROFILE_LAGS.min(seq.len() - 1);
    let (c_db, autocorr_error) = if max_lag == 0 {
        (Vec::new(), Some(Error::LagTooLarge { lag: 1, len: seq.len() }.to_string()))
    } else {
        match autocorr_profile(seq, max_lag) {
            Ok(p) => (p.rows[1..].iter().map(|r| r.coeff_db.expect("lags >= 1 carry dB")).collect(), None),
            Err(e @ Error::ZeroVariance) => (Vec::new(), Some(e.to_string())),
            Err(e) => return Err(e),
        }
    };
    let mut report = QualReport {
        samples: seq.len(),
        d_stat: result.d_stat,
        converged: result.converged,
        fit_failure: result.failure,
        support_lo: result.support().map(|s| s.0),
        support_hi: result.support().map(|s| s.1),
        c_db,
        autocorr_error,
        min_entropy_bits: min_entropy(&hist)?,
        dynamic_range_fraction: dynamic_range_fraction(&hist)?,
        pass_statdist: false,
        pass_autocorr: false,
        pass_overall: false,
        metadata: BTreeMap::new(),
    };
    report.reevaluate(b);
    Ok(report)
}

/// Half the best (lowest) CW coefficient in linear terms, i.e. 3.01 dB below it.
pub fn derive_autocorr_boundary(cw_c1_db_values: &[f64]) -> Result<f64> {
    let min = cw_c1_db_values.iter().copied().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    min.map(|m| m - 10.0 * 2f64.log10()).ok_or(Error::EmptyInput)
}

/// Everything about the simulated measurement chain except the operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub laser: LaserParams,
    pub interferometer: InterferometerParams,
    pub detector: DetectorParams,
    pub dt: f64,
    pub sample_rate: f64,
    pub pulses: usize,
    /// Pulses simulated and discarded before recording starts.
    pub warmup_pulses: usize,
    pub adc_bits: u32,
    pub auto_range: AutoRange,
    /// Sampling instant as a fraction of the on-time.
    pub offset_fraction: f64,
    pub fit: FitConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            laser: LaserParams::default(),
            interferometer: InterferometerParams::default(),
            detector: DetectorParams::default(),
            dt: IntegratorConfig::default().dt,
            sample_rate: DEFAULT_SAMPLE_RATE,
            pulses: 10_000,
            warmup_pulses: 8,
            adc_bits: 10,
            auto_range: AutoRange::default(),
            offset_fraction: DEFAULT_OFFSET_FRACTION,
            fit: FitConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_laser(laser: LaserParams) -> Self {
        Self { laser, ..Self::default() }
    }
}

/// Detected per-pulse intensities (mW) at one operating point, simulated
/// sample by sample so that memory does not grow with the pulse count.
pub fn simulate_pulse_values(drive: &DriveParams, sim: &SimConfig, seed: u64) -> Result<Vec<f64>> {
    drive.validate()?;
    sim.interferometer.validate()?;
    if !(0.0..1.0).contains(&sim.offset_fraction) {
        return Err(Error::InvalidConfig(format!("offset fraction must be in [0, 1), got {}", sim.offset_fraction)));
    }
    let fs = sim.sample_rate;
    let period = drive.period_samples(fs);
    if period < 20 {
        return Err(Error::InvalidInput(format!("{period} samples per period cannot resolve the pulse shape")));
    }
    let on = drive.on_samples(fs);
    let pick = ((sim.offset_fraction * on as f64).round() as usize).min(period - 1);
    let (high, low) = (drive.peak_current_ma, drive.off_level_ma());

    let cfg = IntegratorConfig { dt: sim.dt, temperature_c: drive.temperature_c };
    let mut laser = LaserState::new(&sim.laser, fs, &cfg, low, par::derive_seed(seed, &[0]))?;
    let mut bias_t = match sim.laser.bias_t_cutoff_hz {
        Some(fc) => Some(Lowpass::new(fs, fc, low)?),
        None => None,
    };
    let delay = sim.interferometer.delay_samples(fs);
    if delay == 0 {
        return Err(Error::InvalidConfig("interferometer delay is below one sample".into()));
    }
    let warmup = sim.warmup_pulses.max(delay.div_ceil(period) + 1);
    let (c1, c2) = sim.interferometer.path_amplitudes();
    let drift = sim.interferometer.bias_drift / fs.sqrt();
    let mut drift_rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, &[1]));
    let mut det_rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, &[2]));
    let mut theta = 0.0;
    let mut ring = vec![Complex64::new(0.0, 0.0); delay];
    let mut values = Vec::with_capacity(sim.pulses);

    let mut j = 0usize;
    for pulse in 0..warmup + sim.pulses {
        for k in 0..period {
            let mut current = if k < on { high } else { low };
            if let Some(f) = bias_t.as_mut() {
                current = f.next(current);
            }
            laser.step(current)?;
            if drift > 0.0 {
                let z: f64 = StandardNormal.sample(&mut drift_rng);
                theta += drift * z;
            }
            let field = Complex64::from_polar(sim.laser.output_power_mw(laser.s).sqrt(), laser.phi);
            let slot = j % delay;
            let late = ring[slot];
            ring[slot] = field;
            j += 1;
            if k == pick && pulse >= warmup {
                let intensity = (field * c1 + late * Complex64::from_polar(c2, theta)).norm_sqr();
                let z: f64 = StandardNormal.sample(&mut det_rng);
                values.push(intensity + sim.detector.noise_mw * z);
            }
        }
    }
    Ok(values)
}

/// Digitizes detected values with the auto-ranged ADC and qualifies them.
pub fn qualify_values(values: &[f64], sim: &SimConfig, b: &Boundaries) -> Result<(QualReport, AdcModel)> {
    let adc = sim.auto_range.select(sim.adc_bits, values)?;
    let seq = SampleSequence::from_intensities(values, &adc)?;
    Ok((qualify_with(&seq, &adc, b, &sim.fit)?, adc))
}

pub fn qualify_operating_point(drive: &DriveParams, sim: &SimConfig, b: &Boundaries, seed: u64) -> Result<QualReport> {
    let values = simulate_pulse_values(drive, sim, seed)?;
    let (mut report, _) = qualify_values(&values, sim, b)?;
    report.metadata.extend(drive_metadata(drive, &sim.laser.name, seed));
    Ok(report)
}

pub fn drive_metadata(drive: &DriveParams, laser: &str, seed: u64) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("laser".to_string(), laser.to_string()),
        ("temperature_c".to_string(), drive.temperature_c.to_string()),
        ("duty_cycle".to_string(), drive.duty_cycle.to_string()),
        ("peak_current_ma".to_string(), drive.peak_current_ma.to_string()),
        ("modulation_depth".to_string(), drive.modulation_depth.to_string()),
        ("rep_period_s".to_string(), drive.rep_period_s.to_string()),
        ("seed".to_string(), seed.to_string()),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Temperature,
    DutyCycle,
    PeakCurrent,
    ModulationDepth,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Temperature => "temperature_c",
            SweepAxis::DutyCycle => "duty_cycle",
            SweepAxis::PeakCurrent => "peak_current_ma",
            SweepAxis::ModulationDepth => "modulation_depth",
        }
    }

    pub fn apply(self, drive: &mut DriveParams, value: f64) {
        match self {
            SweepAxis::Temperature => drive.temperature_c = value,
            SweepAxis::DutyCycle => drive.duty_cycle = value,
            SweepAxis::PeakCurrent => drive.peak_current_ma = value,
            SweepAxis::ModulationDepth => drive.modulation_depth = value,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temperature" | "temperature_c" | "t" => Ok(SweepAxis::Temperature),
            "duty_cycle" | "dc" => Ok(SweepAxis::DutyCycle),
            "peak_current" | "peak_current_ma" | "im" => Ok(SweepAxis::PeakCurrent),
            "modulation_depth" | "md" => Ok(SweepAxis::ModulationDepth),
            other => Err(Error::InvalidInput(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: DriveParams,
    pub axis1: SweepAxis,
    pub values1: Vec<f64>,
    pub axis2: SweepAxis,
    pub values2: Vec<f64>,
    /// Independent datasets per cell.
    pub reps: usize,
}

/// Outcome of one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub rep: usize,
    pub d_stat: f64,
    pub c1_db: Option<f64>,
    pub pass_statdist: bool,
    pub pass_autocorr: bool,
    pub pass_overall: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub value1: f64,
    pub value2: f64,
    pub runs: Vec<CellRun>,
}

impl MapCell {
    pub fn pass_fraction(&self) -> f64 {
        self.runs.iter().filter(|r| r.pass_overall).count() as f64 / self.runs.len() as f64
    }

    pub fn first(&self) -> &CellRun {
        &self.runs[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceMap {
    pub grid: SweepGrid,
    /// Axis-1-major.
    pub cells: Vec<MapCell>,
}

impl AcceptanceMap {
    pub fn cell(&self, i: usize, j: usize) -> &MapCell {
        &self.cells[i * self.grid.values2.len() + j]
    }
}

fn run_cell(drive: &DriveParams, sim: &SimConfig, b: &Boundaries, rep: usize, seed: u64) -> CellRun {
    match qualify_operating_point(drive, sim, b, seed) {
        Ok(r) => CellRun {
            rep,
            d_stat: r.d_stat,
            c1_db: r.c1_db(),
            pass_statdist: r.pass_statdist,
            pass_autocorr: r.pass_autocorr,
            pass_overall: r.pass_overall,
            error: r.autocorr_error,
        },
        Err(e) => CellRun {
            rep,
            d_stat: 1.0,
            c1_db: None,
            pass_statdist: false,
            pass_autocorr: false,
            pass_overall: false,
            error: Some(e.to_string()),
        },
    }
}

/// Seed of one sweep run, keyed on the operating point rather than its grid
/// position, so a cell reproduces in any grid layout or evaluation order.
pub fn cell_seed(seed: u64, drive: &DriveParams, rep: usize) -> u64 {
    let point = [
        drive.temperature_c,
        drive.duty_cycle,
        drive.peak_current_ma,
        drive.modulation_depth,
        drive.rep_period_s,
    ];
    let mut path: Vec<u64> = point.iter().map(|v| v.to_bits()).collect();
    path.push(rep as u64);
    par::derive_seed(seed, &path)
}

/// Simulates and qualifies every grid cell. A cell whose simulation fails is
/// recorded with its error; the sweep continues.
pub fn sweep(grid: &SweepGrid, sim: &SimConfig, b: &Boundaries, seed: u64) -> Result<AcceptanceMap> {
    b.validate()?;
    if grid.values1.is_empty() || grid.values2.is_empty() || grid.reps == 0 {
        return Err(Error::InvalidConfig("sweep grid needs values on both axes and reps >= 1".into()));
    }
    let (n1, n2) = (grid.values1.len(), grid.values2.len());
    let tasks: Vec<(usize, usize, usize)> =
        (0..n1).flat_map(|i| (0..n2).flat_map(move |j| (0..grid.reps).map(move |r| (i, j, r)))).collect();
    let runs = par::map(&tasks, |&(i, j, r)| {
        let mut drive = grid.base;
        grid.axis1.apply(&mut drive, grid.values1[i]);
        grid.axis2.apply(&mut drive, grid.values2[j]);
        run_cell(&drive, sim, b, r, cell_seed(seed, &drive, r))
    });
    let mut runs = runs.into_iter();
    let cells = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .map(|(i, j)| MapCell {
            value1: grid.values1[i],
            value2: grid.values2[j],
            runs: runs.by_ref().take(grid.reps).collect(),
        })
        .collect();
    Ok(AcceptanceMap { grid: grid.clone(), cells })
}
