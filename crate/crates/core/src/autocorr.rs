//! Autocovariance, normalized autocorrelation coefficients and their dB form.

use serde::{Deserialize, Serialize};

use crate::adc::SampleSequence;
use crate::error::{Error, Result};

/// How lags reaching past the end of the sequence are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Indexing {
    /// `X_{i+d}` wraps to the start; always `N` terms.
    #[default]
    Circular,
    /// Only the `N - d` overlapping pairs, still divided by `N`.
    Truncated,
}

/// dB value reported for a coefficient of exactly zero.
pub const DEFAULT_DB_FLOOR: f64 = -100.0;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Lag-`d` autocovariance of a real-valued series.
pub fn autocov_f64(xs: &[f64], d: usize, indexing: Indexing) -> Result<f64> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if d >= n {
        return Err(Error::LagTooLarge { lag: d, len: n });
    }
    let m = mean(xs);
    let head = &xs[..n - d];
    let mut acc: f64 = head.iter().zip(&xs[d..]).map(|(a, b)| (a - m) * (b - m)).sum();
    if indexing == Indexing::Circular {
        acc += xs[n - d..].iter().zip(&xs[..d]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>();
    }
    Ok(acc / n as f64)
}

pub fn autocov(seq: &SampleSequence, d: usize) -> Result<f64> {
    autocov_f64(&seq.to_f64(), d, Indexing::Circular)
}

/// `C_d = Gamma_d / Gamma_0`.
pub fn autocorr_coeff_f64(xs: &[f64], d: usize, indexing: Indexing) -> Result<f64> {
    let g0 = autocov_f64(xs, 0, indexing)?;
    let gd = autocov_f64(xs, d, indexing)?;
    // relative to the squared scale of the data so tiny float residue counts as constant
    let scale = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    if !(g0 > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroVariance);
    }
    Ok((gd / g0).clamp(-1.0, 1.0))
}

pub fn autocorr_coeff(seq: &SampleSequence, d: usize) -> Result<f64> {
    autocorr_coeff_f64(&seq.to_f64(), d, Indexing::Circular)
}

/// `10 log10 |c|`, with `floor_db` standing in for `c = 0`.
pub fn coeff_db_with_floor(c: f64, floor_db: f64) -> Result<f64> {
    if !(c.abs() <= 1.0) {
        return Err(Error::InvalidCoefficient(c));
    }
    if c == 0.0 {
        return Ok(floor_db);
    }
    Ok((10.0 * c.abs().log10()).max(floor_db))
}

pub fn coeff_db(c: f64) -> Result<f64> {
    coeff_db_with_floor(c, DEFAULT_DB_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrRow {
    pub lag: usize,
    pub gamma: f64,
    pub coeff: f64,
    /// `None` at lag 0, which is the 0 dB reference by construction.
    pub coeff_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrProfile {
    pub rows: Vec<AutocorrRow>,
}

impl AutocorrProfile {
    pub fn max_lag(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn coeff(&self, lag: usize) -> Option<f64> {
        self.rows.get(lag).map(|r| r.coeff)
    }

    pub fn coeff_db(&self, lag: usize) -> Option<f64> {
        self.rows.get(lag).and_then(|r| r.coeff_db)
    }
}

pub fn autocorr_profile_f64(xs: &[f64], max_lag: usize, indexing: Indexing, floor_db: f64) -> Result<AutocorrProfile> {
    if xs.len() <= max_lag {
        return Err(Error::LagTooLarge { lag: max_lag, len: xs.len() });
    }
    let g0 = autocov_f64(xs, 0, indexing)?;
    // same degeneracy rule as the single-lag coefficient
    autocorr_coeff_f64(xs, 0, indexing)?;
    let mut rows = Vec::with_capacity(max_lag + 1);
    rows.push(AutocorrRow { lag: 0, gamma: g0, coeff: 1.0, coeff_db: None });
    for lag in 1..=max_lag {
        let gamma = autocov_f64(xs, lag, indexing)?;
        let coeff = (gamma / g0).clamp(-1.0, 1.0);
        rows.push(AutocorrRow { lag, gamma, coeff, coeff_db: Some(coeff_db_with_floor(coeff, floor_db)?) });
    }
    Ok(AutocorrProfile { rows })
}

/// Coefficients for lags `0..=max_lag` (ten lags by convention).
pub fn autocorr_profile(seq: &SampleSequence, max_lag: usize) -> Result<AutocorrProfile> {
    autocorr_profile_f64(&seq.to_f64(), max_lag, Indexing::Circular, DEFAULT_DB_FLOOR)
}
