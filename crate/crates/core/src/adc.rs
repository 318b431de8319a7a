//! ADC quantization, sample sequences, histograms and phase wrapping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear ADC with `2^bits` codes spanning `[range_low, range_high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcModel {
    bits: u32,
    range_low: f64,
    range_high: f64,
}

impl Default for AdcModel {
    fn default() -> Self {
        Self { bits: 10, range_low: 0.0, range_high: 1.0 }
    }
}

impl AdcModel {
    pub fn new(bits: u32, range_low: f64, range_high: f64) -> Result<Self> {
        if !(1..=24).contains(&bits) {
            return Err(Error::InvalidInput(format!("ADC bits must be in 1..=24, got {bits}")));
        }
        if !(range_low.is_finite() && range_high.is_finite() && range_high > range_low) {
            return Err(Error::InvalidInput(format!(
                "ADC range [{range_low}, {range_high}] is empty or non-finite"
            )));
        }
        Ok(Self { bits, range_low, range_high })
    }

    /// Unit range `[0, 1)` with the given resolution.
    pub fn with_bits(bits: u32) -> Result<Self> {
        Self::new(bits, 0.0, 1.0)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn code_count(&self) -> usize {
        1usize << self.bits
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_low, self.range_high)
    }

    /// Same resolution, different input range.
    pub fn with_range(&self, range_low: f64, range_high: f64) -> Result<Self> {
        Self::new(self.bits, range_low, range_high)
    }

    /// Maps an intensity to its code, saturating at both rails.
    pub fn quantize(&self, intensity: f64) -> u32 {
        let top = (self.code_count() - 1) as f64;
        let scaled =
            (intensity - self.range_low) / (self.range_high - self.range_low) * self.code_count() as f64;
        if scaled.is_nan() {
            return 0;
        }
        scaled.floor().clamp(0.0, top) as u32
    }
}

/// Ordered per-pulse ADC codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSequence {
    codes: Vec<u32>,
    code_count: usize,
}

impl SampleSequence {
    pub fn new(codes: Vec<u32>, code_count: usize) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((i, &c)) = codes.iter().enumerate().find(|(_, &c)| c as usize >= code_count) {
            return Err(Error::InvalidInput(format!(
                "code {c} at index {i} outside [0, {}]",
                code_count - 1
            )));
        }
        Ok(Self { codes, code_count })
    }

    pub fn from_intensities(intensities: &[f64], adc: &AdcModel) -> Result<Self> {
        Self::new(intensities.iter().map(|&x| adc.quantize(x)).collect(), adc.code_count())
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn code_count(&self) -> usize {
        self.code_count
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| c as f64).collect()
    }
}

/// Counts per ADC code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl IntensityHistogram {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let total = counts.iter().sum();
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Lowest and highest occupied code, `None` when empty.
    pub fn occupied_range(&self) -> Option<(usize, usize)> {
        let first = self.counts.iter().position(|&n| n > 0)?;
        let last = self.counts.iter().rposition(|&n| n > 0)?;
        Some((first, last))
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&n| n > 0).count()
    }
}

pub fn quantize(intensity: f64, adc: &AdcModel) -> u32 {
    adc.quantize(intensity)
}

pub fn build_histogram(seq: &SampleSequence, adc: &AdcModel) -> Result<IntensityHistogram> {
    if seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    if seq.code_count() != adc.code_count() {
        return Err(Error::ShapeMismatch { model: adc.code_count(), hist: seq.code_count() });
    }
    let mut counts = vec![0u64; adc.code_count()];
    for &c in seq.codes() {
        counts[c as usize] += 1;
    }
    IntensityHistogram::from_counts(counts)
}

/// Wraps a phase onto `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::InvalidInput(format!("phase {phi} is not finite")));
    }
    Ok(wrap_phase_unchecked(phi))
}

pub(crate) fn wrap_phase_unchecked(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = phi.rem_euclid(two_pi); // [0, 2pi)
    if r > PI {
        r - two_pi
    } else {
        r
    }
}

/// Share of the code space between the lowest and highest occupied code.
pub fn dynamic_range_fraction(hist: &IntensityHistogram) -> Result<f64> {
    if hist.total() == 0 {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = hist.occupied_range().ok_or(Error::EmptyInput)?;
    Ok((hi - lo + 1) as f64 / hist.bin_count() as f64)
}
