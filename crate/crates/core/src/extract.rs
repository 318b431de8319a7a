//! One intensity value per pulse from a sampled waveform.

use serde::{Deserialize, Serialize};

use crate::adc::{AdcModel, SampleSequence};
use crate::error::{Error, Result};
use crate::laser::DriveParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// s
    pub rep_period: f64,
    /// Electrical-to-optical delay, s.
    pub delay: f64,
    /// From pulse start to the sampling instant, s.
    pub intra_pulse_offset: f64,
}

/// Default sampling point as a fraction of the on-time.
pub const DEFAULT_OFFSET_FRACTION: f64 = 0.8;

impl ExtractionConfig {
    /// Samples at 80 % of the on-time of `drive`, zero delay.
    pub fn for_drive(drive: &DriveParams) -> Self {
        Self::for_drive_at(drive, DEFAULT_OFFSET_FRACTION)
    }

    /// Samples at `fraction` of the on-time.
    pub fn for_drive_at(drive: &DriveParams, fraction: f64) -> Self {
        Self {
            rep_period: drive.rep_period_s,
            delay: 0.0,
            intra_pulse_offset: fraction * drive.duty_cycle * drive.rep_period_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_period > 0.0 && self.rep_period.is_finite()) {
            return Err(Error::InvalidConfig(format!("repetition period must be > 0, got {}", self.rep_period)));
        }
        if !(self.intra_pulse_offset >= 0.0 && self.intra_pulse_offset < self.rep_period) {
            return Err(Error::InvalidConfig(format!(
                "intra-pulse offset {} s must lie in [0, {})",
                self.intra_pulse_offset, self.rep_period
            )));
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::InvalidConfig(format!("delay must be >= 0, got {}", self.delay)));
        }
        Ok(())
    }
}

/// Sample indices `round((k T + delay + offset) fs)` that fall inside the trace.
pub fn extraction_indices(len: usize, sample_rate: f64, cfg: &ExtractionConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidInput("sample rate must be positive".into()));
    }
    let duration = len as f64 / sample_rate;
    if duration < 2.0 * cfg.rep_period {
        let need = (2.0 * cfg.rep_period * sample_rate).ceil() as usize;
        return Err(Error::TraceTooShort { have: len, need });
    }
    let mut out = Vec::new();
    for k in 0.. {
        let t = k as f64 * cfg.rep_period + cfg.delay + cfg.intra_pulse_offset;
        let idx = (t * sample_rate).round() as usize;
        if idx >= len {
            break;
        }
        out.push(idx);
    }
    Ok(out)
}

/// Raw per-pulse values before digitization.
pub fn extract_values(trace: &[f64], sample_rate: f64, cfg: &ExtractionConfig) -> Result<Vec<f64>> {
    Ok(extraction_indices(trace.len(), sample_rate, cfg)?.into_iter().map(|i| trace[i]).collect())
}

pub fn extract_intensities(
    trace: &[f64],
    sample_rate: f64,
    cfg: &ExtractionConfig,
    adc: &AdcModel,
) -> Result<SampleSequence> {
    let values = extract_values(trace, sample_rate, cfg)?;
    SampleSequence::from_intensities(&values, adc)
}

/// Oscilloscope-style vertical range selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoRange {
    /// Largest fraction of full scale the central 99.8 % of values may span.
    pub max_fill: f64,
    /// Smallest full-scale span the instrument offers.
    pub min_span: f64,
}

impl Default for AutoRange {
    fn default() -> Self {
        Self { max_fill: 0.75, min_span: 0.05 }
    }
}

/// Full-scale spans available per decade.
const RANGE_STEPS: [f64; 10] = [1.0, 1.2, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0];

impl AutoRange {
    /// Centers the window on the data and picks the smallest span from a
    /// 1-1.2-1.5-2-... ladder that keeps the fill at or below `max_fill`.
    pub fn select(&self, bits: u32, values: &[f64]) -> Result<AdcModel> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(self.max_fill > 0.0 && self.max_fill <= 1.0) || !(self.min_span > 0.0) {
            return Err(Error::InvalidConfig("auto-range needs 0 < max_fill <= 1 and min_span > 0".into()));
        }
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if sorted.is_empty() {
            return Err(Error::InvalidInput("no finite values to range".into()));
        }
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
        let (lo, hi) = (q(0.001), q(0.999));
        let needed = ((hi - lo) / self.max_fill).max(self.min_span);
        let decade = 10f64.powf(needed.log10().floor());
        let span = RANGE_STEPS
            .iter()
            .chain(std::iter::once(&10.0))
            .map(|s| s * decade)
            .find(|&s| s >= needed * (1.0 - 1e-12))
            .unwrap_or(10.0 * decade);
        let center = 0.5 * (lo + hi);
        AdcModel::new(bits, center - 0.5 * span, center + 0.5 * span)
    }
}

/// Lag in `[0, period)` samples that best aligns `optical` with `electrical`,
/// returned in seconds.
pub fn detect_delay(electrical: &[f64], optical: &[f64], sample_rate: f64, period: usize) -> Result<f64> {
    Ok(detect_delay_samples(electrical, optical, period)? as f64 / sample_rate)
}

pub fn detect_delay_samples(electrical: &[f64], optical: &[f64], period: usize) -> Result<usize> {
    let len = electrical.len().min(optical.len());
    if period == 0 || len < 2 * period {
        return Err(Error::TraceTooShort { have: len, need: 2 * period.max(1) });
    }
    let window = len - period;
    let centered = |xs: &[f64]| {
        let m = xs[..len].iter().sum::<f64>() / len as f64;
        xs[..len].iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let e = centered(electrical);
    let o = centered(optical);
    let flat = |xs: &[f64]| xs.iter().all(|x| x.abs() <= 1e-12 * (1.0 + xs[0].abs()));
    if flat(&e) || flat(&o) {
        return Err(Error::NoSignal);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for lag in 0..period {
        let score: f64 = e[..window].iter().zip(&o[lag..lag + window]).map(|(a, b)| a * b).sum();
        if score > best.1 {
            best = (lag, score);
        }
    }
    Ok(best.0)
}
