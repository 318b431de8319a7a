//! Monte-Carlo phase-diffusion model and statistical-distance boundary calibration.
//!
//! The pipeline mirrors a detection chain: Gaussian relative phases are wrapped,
//! turned into interference intensities, mapped into a fraction of the ADC
//! range, blurred by Gaussian detection noise and quantized. Fitting an ideal
//! arcsine to many such synthetic histograms gives the distance boundary.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adc::{build_histogram, wrap_phase_unchecked, AdcModel, SampleSequence};
use crate::criteria::{fit_arcsine, FitConfig};
use crate::error::{Error, Result};
use crate::par;

/// Target phase-drift width, `0.825 pi`.
pub const DEFAULT_SIGMA_PHI: f64 = 0.825 * PI;

/// How relative phases between consecutive pulses are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhaseModel {
    /// Every pulse pair draws a fresh relative phase.
    #[default]
    Independent,
    /// The relative phase itself wanders by a Gaussian step per pulse, so
    /// neighbouring intensities are correlated (residual coherence).
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiffusionConfig {
    pub sigma_phi: f64,
    pub n_pulses: usize,
    pub visibility: f64,
    pub seed: u64,
    pub model: PhaseModel,
}

impl Default for PhaseDiffusionConfig {
    fn default() -> Self {
        Self { sigma_phi: DEFAULT_SIGMA_PHI, n_pulses: 10_000, visibility: 1.0, seed: 0, model: PhaseModel::Independent }
    }
}

impl PhaseDiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_phi >= 0.0 && self.sigma_phi.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma_phi must be >= 0, got {}", self.sigma_phi)));
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidConfig("n_pulses must be >= 1".into()));
        }
        check_visibility(self.visibility)
    }
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidInput(format!("visibility must be in [0, 1], got {v}")));
    }
    Ok(())
}

/// Detection-noise description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Std of additive Gaussian intensity noise, as a fraction of the maximum intensity.
    pub sigma_noise: f64,
    /// Measured CW phase noise of the setup in degrees; recorded, not simulated.
    pub system_phase_noise_deg: f64,
}

impl NoiseModel {
    pub fn new(sigma_noise: f64) -> Result<Self> {
        if !(sigma_noise >= 0.0 && sigma_noise.is_finite()) {
            return Err(Error::InvalidInput(format!("noise must be >= 0, got {sigma_noise}")));
        }
        Ok(Self { sigma_noise, system_phase_noise_deg: 36.33 })
    }
}

/// Wrapped relative phases in `(-pi, pi]`.
pub fn simulate_phases(cfg: &PhaseDiffusionConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = || -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * cfg.sigma_phi
    };
    let phases = match cfg.model {
        PhaseModel::Independent => (0..cfg.n_pulses).map(|_| wrap_phase_unchecked(draw())).collect(),
        PhaseModel::RandomWalk => {
            let mut phi = 0.0;
            (0..cfg.n_pulses)
                .map(|_| {
                    phi = wrap_phase_unchecked(phi + draw());
                    phi
                })
                .collect()
        }
    };
    Ok(phases)
}

/// Normalized two-beam interference intensity `(1 + V cos phi) / 2`.
pub fn phases_to_intensities(phases: &[f64], visibility: f64) -> Result<Vec<f64>> {
    check_visibility(visibility)?;
    Ok(phases.iter().map(|&p| 0.5 * (1.0 + visibility * p.cos())).collect())
}

/// Places the ideal `[0, 1]` intensity span on the central `fraction` of the ADC
/// range, adds Gaussian noise (std in units of that span) and quantizes.
pub fn apply_noise_and_quantize(
    intensities: &[f64],
    noise: &NoiseModel,
    fraction: f64,
    adc: &AdcModel,
    seed: u64,
) -> Result<SampleSequence> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let (lo, hi) = adc.range();
    let width = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = intensities
        .iter()
        .map(|&i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let noisy = i + noise.sigma_noise * z;
            adc.quantize(lo + (0.5 + (noisy - 0.5) * fraction) * width)
        })
        .collect();
    SampleSequence::new(codes, adc.code_count())
}

/// One synthetic dataset pushed through the full chain and fitted.
#[allow(clippy::too_many_arguments)]
fn simulate_fitted_distance(
    sigma_phi: f64,
    visibility: f64,
    noise: &NoiseModel,
    fraction: f64,
    n_samples: usize,
    adc: &AdcModel,
    fit: &FitConfig,
    seed: u64,
) -> Result<f64> {
    let cfg = PhaseDiffusionConfig {
        sigma_phi,
        n_pulses: n_samples,
        visibility,
        seed: par::derive_seed(seed, &[0]),
        model: PhaseModel::Independent,
    };
    let phases = simulate_phases(&cfg)?;
    let intensities = phases_to_intensities(&phases, visibility)?;
    let seq = apply_noise_and_quantize(&intensities, noise, fraction, adc, par::derive_seed(seed, &[1]))?;
    let hist = build_histogram(&seq, adc)?;
    Ok(fit_arcsine(&hist, fit).d_stat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub noise_values: Vec<f64>,
    pub fraction_values: Vec<f64>,
    pub n_samples: usize,
    pub reps: usize,
    pub sigma_phi: f64,
    pub visibility: f64,
    pub fit: FitConfig,
}

/// `n` evenly spaced values over `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

impl Default for CalibrationSpec {
    /// 8 x 8 cells over noise 0.43 %..3.0 % and ADC fraction 50 %..85 %,
    /// ten reps of 10000 pulses each.
    fn default() -> Self {
        Self {
            noise_values: linspace(0.0043, 0.03, 8),
            fraction_values: linspace(0.5, 0.85, 8),
            n_samples: 10_000,
            reps: 10,
            sigma_phi: DEFAULT_SIGMA_PHI,
            visibility: 1.0,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub noise: f64,
    pub fraction: f64,
    pub d_stats: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over reps (0 for a single rep).
    pub std: f64,
}

impl CalibrationCell {
    /// Standard error of the cell mean.
    pub fn std_error(&self) -> f64 {
        self.std / (self.d_stats.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub noise_values: Vec<f64>,
    pub fraction_values: Vec<f64>,
    pub n_samples: usize,
    pub reps: usize,
    /// Noise-major: cell `(i, j)` is at `i * fraction_values.len() + j`.
    pub cells: Vec<CalibrationCell>,
    /// Mean over every cell and rep; the proposed boundary.
    pub mean: f64,
}

impl CalibrationGrid {
    pub fn cell(&self, noise_idx: usize, fraction_idx: usize) -> &CalibrationCell {
        &self.cells[noise_idx * self.fraction_values.len() + fraction_idx]
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the synthetic chain over every (noise, fraction) cell and rep.
pub fn calibrate_boundary(spec: &CalibrationSpec, adc: &AdcModel, seed: u64) -> Result<CalibrationGrid> {
    if spec.noise_values.is_empty() || spec.fraction_values.is_empty() || spec.reps == 0 {
        return Err(Error::EmptyInput);
    }
    if spec.n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
    }
    for &f in &spec.fraction_values {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidInput(format!("fraction must be in (0, 1], got {f}")));
        }
    }
    let noises = spec.noise_values.iter().map(|&s| NoiseModel::new(s)).collect::<Result<Vec<_>>>()?;
    let nf = spec.fraction_values.len();
    let tasks: Vec<(usize, usize)> =
        (0..noises.len() * nf).flat_map(|cell| (0..spec.reps).map(move |rep| (cell, rep))).collect();
    let results = par::map(&tasks, |&(cell, rep)| {
        let noise = &noises[cell / nf];
        let fraction = spec.fraction_values[cell % nf];
        simulate_fitted_distance(
            spec.sigma_phi,
            spec.visibility,
            noise,
            fraction,
            spec.n_samples,
            adc,
            &spec.fit,
            par::derive_seed(seed, &[cell as u64, rep as u64]),
        )
    });
    let d: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let cells: Vec<CalibrationCell> = d
        .chunks(spec.reps)
        .enumerate()
        .map(|(cell, ds)| {
            let (mean, std) = mean_std(ds);
            CalibrationCell {
                noise: spec.noise_values[cell / nf],
                fraction: spec.fraction_values[cell % nf],
                d_stats: ds.to_vec(),
                mean,
                std,
            }
        })
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok(CalibrationGrid {
        noise_values: spec.noise_values.clone(),
        fraction_values: spec.fraction_values.clone(),
        n_samples: spec.n_samples,
        reps: spec.reps,
        cells,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub size: usize,
    pub mean: f64,
    pub std: f64,
    /// Set when fewer than two reps make the std meaningless.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeSpec {
    pub noise: f64,
    pub fraction: f64,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub sigma_phi: f64,
    pub fit: FitConfig,
}

impl Default for SampleSizeSpec {
    fn default() -> Self {
        Self {
            noise: 0.015,
            fraction: 0.5,
            sizes: vec![100, 1_000, 10_000, 100_000],
            reps: 20,
            sigma_phi: DEFAULT_SIGMA_PHI,
            fit: FitConfig::default(),
        }
    }
}

/// Mean and spread of the fitted distance per sample size.
pub fn sample_size_study(spec: &SampleSizeSpec, adc: &AdcModel, seed: u64) -> Result<Vec<SizeRow>> {
    if spec.sizes.is_empty() || spec.reps == 0 {
        return Err(Error::EmptyInput);
    }
    if spec.sizes.windows(2).any(|w| w[0] >= w[1]) || spec.sizes[0] == 0 {
        return Err(Error::InvalidInput("sizes must be positive and strictly ascending".into()));
    }
    let noise = NoiseModel::new(spec.noise)?;
    let tasks: Vec<(usize, usize)> =
        (0..spec.sizes.len()).flat_map(|s| (0..spec.reps).map(move |r| (s, r))).collect();
    let results = par::map(&tasks, |&(s, rep)| {
        simulate_fitted_distance(
            spec.sigma_phi,
            1.0,
            &noise,
            spec.fraction,
            spec.sizes[s],
            adc,
            &spec.fit,
            par::derive_seed(seed, &[s as u64, rep as u64]),
        )
    });
    let d: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    Ok(d
        .chunks(spec.reps)
        .zip(&spec.sizes)
        .map(|(ds, &size)| {
            let (mean, std) = mean_std(ds);
            SizeRow { size, mean, std, degenerate: ds.len() < 2 }
        })
        .collect())
}
