//! Gain-switched single-mode laser simulator.
//!
//! Carrier density `N`, photon density `S` and optical phase `phi` follow the
//! usual single-mode rate equations with linear gain `G(N) = g0 (N - N_tr)`:
//!
//! ```text
//! dN/dt   = I / (qV) - N / tau_n - G S
//! dS/dt   = (Gamma G - 1 / tau_p) S + R_sp                 (+ F_S)
//! dphi/dt = alpha / 2 (Gamma G - 1 / tau_p)                 + F_phi
//! R_sp = Gamma beta N / tau_n,  <F_phi^2> dt = R_sp dt / (2 S),  <F_S^2> dt = 2 R_sp S dt
//! ```
//!
//! Integration is explicit stochastic Euler. Traces are recorded at the drive's
//! sample rate with the drive held constant between samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const PLANCK: f64 = 6.626_070_15e-34;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Interferometer delay of the reference setup, 5.0678 ns.
pub const DEFAULT_DELAY_S: f64 = 5.0678e-9;
/// Default simulation sample rate, 100 GS/s.
pub const DEFAULT_SAMPLE_RATE: f64 = 100e9;

/// Physical parameters of the rate-equation model.
///
/// The threshold current is the user-facing knob; the transparency density is
/// derived from it so that `I_th = q V N_th / tau_n` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserParams {
    pub name: String,
    /// Threshold current at `reference_temperature_c`, mA.
    pub threshold_current_ma: f64,
    /// Linear threshold increase with chip temperature, mA/degC.
    pub threshold_slope_ma_per_c: f64,
    pub reference_temperature_c: f64,
    /// s
    pub carrier_lifetime: f64,
    /// s
    pub photon_lifetime: f64,
    /// Differential gain `g0`, m^3/s.
    pub differential_gain: f64,
    pub confinement: f64,
    /// Spontaneous-emission factor.
    pub beta: f64,
    /// Linewidth-enhancement factor.
    pub alpha: f64,
    /// m^3
    pub active_volume: f64,
    /// m
    pub wavelength: f64,
    /// Fraction of cavity photon loss that reaches the fiber.
    pub output_efficiency: f64,
    pub intensity_noise: bool,
    pub phase_noise: bool,
    /// First-order lowpass on the drive current representing a slow bias-T, Hz.
    pub bias_t_cutoff_hz: Option<f64>,
}

impl Default for LaserParams {
    /// Generic 1550 nm DFB.
    fn default() -> Self {
        Self {
            name: "generic".into(),
            threshold_current_ma: 12.0,
            threshold_slope_ma_per_c: 0.2,
            reference_temperature_c: 25.0,
            carrier_lifetime: 1e-9,
            photon_lifetime: 2e-12,
            differential_gain: 2.5e-12,
            confinement: 0.3,
            beta: 1e-5,
            alpha: 3.0,
            active_volume: 4e-17,
            wavelength: 1550e-9,
            output_efficiency: 0.3,
            intensity_noise: false,
            phase_noise: true,
            bias_t_cutoff_hz: None,
        }
    }
}

/// Named behavioural presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Drive passes a 1 GHz bias-T.
    Laser1,
    /// Ten times weaker output, so detection noise dominates.
    Laser2,
    /// Fast electronics, full output.
    Laser3,
}

impl Preset {
    pub fn params(self) -> LaserParams {
        let base = LaserParams { intensity_noise: true, ..LaserParams::default() };
        match self {
            Preset::Laser1 => LaserParams { name: "laser1".into(), bias_t_cutoff_hz: Some(1e9), ..base },
            Preset::Laser2 => LaserParams { name: "laser2".into(), output_efficiency: 0.03, ..base },
            Preset::Laser3 => LaserParams { name: "laser3".into(), ..base },
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laser1" => Ok(Preset::Laser1),
            "laser2" => Ok(Preset::Laser2),
            "laser3" => Ok(Preset::Laser3),
            other => Err(Error::InvalidInput(format!("unknown preset {other:?}"))),
        }
    }
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("threshold_current_ma", self.threshold_current_ma),
            ("carrier_lifetime", self.carrier_lifetime),
            ("photon_lifetime", self.photon_lifetime),
            ("differential_gain", self.differential_gain),
            ("confinement", self.confinement),
            ("active_volume", self.active_volume),
            ("wavelength", self.wavelength),
            ("output_efficiency", self.output_efficiency),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig(format!("beta must be in (0, 1), got {}", self.beta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if let Some(fc) = self.bias_t_cutoff_hz {
            if !(fc > 0.0) {
                return Err(Error::InvalidConfig(format!("bias-T cutoff must be positive, got {fc}")));
            }
        }
        if self.transparency_density(self.reference_temperature_c) <= 0.0 {
            return Err(Error::InvalidConfig(
                "threshold current too low for the gain and photon lifetime (transparency density <= 0)".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: LaserParams = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("laser parameters serialize")
    }

    pub fn threshold_current_at(&self, temperature_c: f64) -> f64 {
        self.threshold_current_ma + self.threshold_slope_ma_per_c * (temperature_c - self.reference_temperature_c)
    }

    /// Carrier density at which modal gain balances cavity loss.
    pub fn threshold_density(&self, temperature_c: f64) -> f64 {
        self.threshold_current_at(temperature_c) * 1e-3 * self.carrier_lifetime
            / (ELEMENTARY_CHARGE * self.active_volume)
    }

    pub fn transparency_density(&self, temperature_c: f64) -> f64 {
        self.threshold_density(temperature_c)
            - 1.0 / (self.confinement * self.differential_gain * self.photon_lifetime)
    }

    fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength
    }

    /// Fiber-coupled optical power in mW for photon density `s`.
    pub fn output_power_mw(&self, s: f64) -> f64 {
        self.output_efficiency * self.photon_energy() * self.active_volume * s
            / (self.confinement * self.photon_lifetime)
            * 1e3
    }

    /// Lower bound on the photon density, a small fraction of the spontaneous
    /// level at transparency.
    pub fn photon_floor(&self, temperature_c: f64) -> f64 {
        self.beta * self.transparency_density(temperature_c) / self.carrier_lifetime * self.photon_lifetime * 1e-3
    }

    /// Noise-free fixed point `(N, S)` of the rate equations at constant current.
    pub fn steady_state(&self, current_ma: f64, temperature_c: f64) -> (f64, f64) {
        let pump = current_ma * 1e-3 / (ELEMENTARY_CHARGE * self.active_volume);
        let g0 = self.differential_gain;
        let ntr = self.transparency_density(temperature_c);
        let (tn, tp, gam, beta) = (self.carrier_lifetime, self.photon_lifetime, self.confinement, self.beta);
        // S from the photon equation: S = gam beta N / tn / (1/tp - gam g0 (N - ntr)),
        // substituted into pump = N/tn + g0 (N - ntr) S gives a quadratic in N.
        let k = gam * g0 * tp;
        // pump (1 - k (N - ntr)) = N/tn (1 - k (N - ntr)) + g0 (N - ntr) gam beta N tp / tn
        let a = -k / tn + g0 * gam * beta * tp / tn;
        let b = pump * k + (1.0 + k * ntr) / tn - g0 * gam * beta * tp * ntr / tn;
        let c = -pump * (1.0 + k * ntr);
        // stable quadratic roots; the physical one lies below the threshold density
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let q = -0.5 * (b + b.signum() * disc);
        let nth = self.threshold_density(temperature_c);
        let n = [q / a, c / q].into_iter().filter(|r| *r > 0.0 && *r < nth).fold(f64::NAN, f64::min);
        let s = gam * beta * n / tn / (1.0 / tp - gam * g0 * (n - ntr));
        (n, s)
    }
}

/// Operating point of the drive electronics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub temperature_c: f64,
    pub duty_cycle: f64,
    pub peak_current_ma: f64,
    pub modulation_depth: f64,
    pub rep_period_s: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            temperature_c: 25.0,
            duty_cycle: 0.5,
            peak_current_ma: 30.0,
            modulation_depth: 0.6,
            rep_period_s: 5.07e-9,
        }
    }
}

impl DriveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(Error::InvalidInput(format!("duty cycle must be in (0, 1), got {}", self.duty_cycle)));
        }
        if !(self.peak_current_ma > 0.0 && self.peak_current_ma.is_finite()) {
            return Err(Error::InvalidInput(format!("peak current must be > 0, got {}", self.peak_current_ma)));
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return Err(Error::InvalidInput(format!(
                "modulation depth must be in [0, 1], got {}",
                self.modulation_depth
            )));
        }
        if !(self.rep_period_s > 0.0 && self.rep_period_s.is_finite()) {
            return Err(Error::InvalidInput(format!("repetition period must be > 0, got {}", self.rep_period_s)));
        }
        if !self.temperature_c.is_finite() {
            return Err(Error::InvalidInput("temperature must be finite".into()));
        }
        Ok(())
    }

    /// Constant bias `(1 - MD) I_m`.
    pub fn bias_ma(&self) -> f64 {
        (1.0 - self.modulation_depth) * self.peak_current_ma
    }

    /// Square-wave amplitude `MD I_m`.
    pub fn amplitude_ma(&self) -> f64 {
        self.modulation_depth * self.peak_current_ma
    }

    /// Current between pulses, `(1 - 2 MD) I_m`; negative means reverse bias.
    pub fn off_level_ma(&self) -> f64 {
        self.bias_ma() - self.amplitude_ma()
    }

    pub fn period_samples(&self, sample_rate: f64) -> usize {
        (self.rep_period_s * sample_rate).round() as usize
    }

    /// Samples per period at the peak current, at least one and at most `period - 1`.
    pub fn on_samples(&self, sample_rate: f64) -> usize {
        let period = self.period_samples(sample_rate);
        ((self.duty_cycle * period as f64).round() as usize).clamp(1, period.saturating_sub(1).max(1))
    }
}

/// Bias plus square modulation, `periods` repetitions, in mA per sample.
pub fn make_drive(p: &DriveParams, sample_rate: f64, periods: usize) -> Result<Vec<f64>> {
    p.validate()?;
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidInput(format!("sample rate must be > 0, got {sample_rate}")));
    }
    let period = p.period_samples(sample_rate);
    if period < 20 {
        return Err(Error::InvalidInput(format!(
            "{period} samples per period cannot resolve the pulse shape (need >= 20)"
        )));
    }
    let on = p.on_samples(sample_rate);
    let (high, low) = (p.peak_current_ma, p.off_level_ma());
    let mut out = Vec::with_capacity(period * periods);
    for _ in 0..periods {
        out.extend((0..period).map(|k| if k < on { high } else { low }));
    }
    Ok(out)
}

/// First-order lowpass (bilinear RC, prewarped so the gain is exactly
/// 1/sqrt(2) at the cutoff), unity DC gain.
#[derive(Debug, Clone, Copy)]
pub struct Lowpass {
    b: f64,
    a: f64,
    x_prev: f64,
    y: f64,
}

impl Lowpass {
    /// Filter at rest at level `initial`.
    pub fn new(sample_rate: f64, cutoff_hz: f64, initial: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0) || !(sample_rate > 0.0) {
            return Err(Error::InvalidInput(format!("cutoff {cutoff_hz} Hz and sample rate must be positive")));
        }
        if cutoff_hz >= 0.5 * sample_rate {
            return Err(Error::InvalidInput(format!("cutoff {cutoff_hz} Hz must be below Nyquist")));
        }
        let k = (PI * cutoff_hz / sample_rate).tan();
        Ok(Self { b: k / (1.0 + k), a: (1.0 - k) / (1.0 + k), x_prev: initial, y: initial })
    }

    #[inline]
    pub fn next(&mut self, x: f64) -> f64 {
        self.y = self.b * (x + self.x_prev) + self.a * self.y;
        self.x_prev = x;
        self.y
    }
}

pub fn lowpass(trace: &[f64], sample_rate: f64, cutoff_hz: f64) -> Result<Vec<f64>> {
    let mut f = Lowpass::new(sample_rate, cutoff_hz, trace.first().copied().unwrap_or(0.0))?;
    Ok(trace.iter().map(|&x| f.next(x)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Euler step, s. Must not exceed 1 ps.
    pub dt: f64,
    pub temperature_c: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 0.2e-12, temperature_c: 25.0 }
    }
}

/// Sampled simulator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrace {
    pub sample_rate: f64,
    pub drive_ma: Vec<f64>,
    pub photon_density: Vec<f64>,
    /// Unwrapped optical phase, rad.
    pub phase: Vec<f64>,
    /// Fiber-coupled power, mW.
    pub power_mw: Vec<f64>,
}

impl PulseTrace {
    pub fn len(&self) -> usize {
        self.photon_density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photon_density.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }
}

/// Rate-equation state advanced one output sample at a time.
#[derive(Debug, Clone)]
pub struct LaserState {
    substeps: usize,
    dt: f64,
    sample_dt: f64,
    tn: f64,
    tp: f64,
    g0: f64,
    gam: f64,
    ntr: f64,
    qv: f64,
    s_floor: f64,
    spont: f64,
    half_alpha: f64,
    intensity_noise: bool,
    phase_noise: bool,
    /// Carrier density, m^-3.
    pub n: f64,
    /// Photon density, m^-3.
    pub s: f64,
    /// Optical phase, rad.
    pub phi: f64,
    elapsed: usize,
    rng: ChaCha8Rng,
    phase_rng: ChaCha8Rng,
}

impl LaserState {
    /// Starts from the noise-free fixed point of `initial_ma` (carriers clamped
    /// to >= 0 for reverse bias).
    pub fn new(lp: &LaserParams, sample_rate: f64, cfg: &IntegratorConfig, initial_ma: f64, seed: u64) -> Result<Self> {
        lp.validate()?;
        if !(cfg.dt > 0.0 && cfg.dt <= 1e-12 + 1e-18) {
            return Err(Error::InvalidConfig(format!("dt must be in (0, 1 ps], got {}", cfg.dt)));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        let t = cfg.temperature_c;
        let sample_dt = 1.0 / sample_rate;
        let substeps = (sample_dt / cfg.dt).ceil().max(1.0) as usize;
        let s_floor = lp.photon_floor(t);
        let (mut n, mut s) = if initial_ma > 0.0 { lp.steady_state(initial_ma, t) } else { (0.0, s_floor) };
        if !n.is_finite() || !s.is_finite() {
            n = 0.0;
            s = s_floor;
        }
        Ok(Self {
            substeps,
            dt: sample_dt / substeps as f64,
            sample_dt,
            tn: lp.carrier_lifetime,
            tp: lp.photon_lifetime,
            g0: lp.differential_gain,
            gam: lp.confinement,
            ntr: lp.transparency_density(t),
            qv: ELEMENTARY_CHARGE * lp.active_volume,
            s_floor,
            spont: lp.confinement * lp.beta / lp.carrier_lifetime,
            half_alpha: 0.5 * lp.alpha,
            intensity_noise: lp.intensity_noise,
            phase_noise: lp.phase_noise,
            n,
            s: s.max(s_floor),
            phi: 0.0,
            elapsed: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            phase_rng: ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_A5A5_5A5A_5A5A),
        })
    }

    /// Effective Euler step after rounding to a whole number of substeps.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Runs the Euler substeps of one sample; returns the new `(N, S)`, the
    /// summed net modal gain and the summed `N / S`.
    #[inline(always)]
    fn substeps<const NOISY: bool>(&mut self, pump: f64) -> (f64, f64, f64, f64) {
        let (dt, ntr, s_floor) = (self.dt, self.ntr, self.s_floor);
        // the update is refactored into per-step constants to shorten the
        // floating-point dependency chain through N and S
        let g_dt = self.g0 * dt;
        let gam = self.gam;
        let keep_n = 1.0 - dt / self.tn;
        let keep_s = 1.0 - dt / self.tp;
        let pump_dt = pump * dt;
        let sp_dt = self.spont * dt;
        // the intensity Langevin force is band-limited to the sample rate: one
        // draw per sample with its variance taken at the start of the sample,
        // spread evenly over the substeps
        let kick = if NOISY {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            (2.0 * self.spont * self.n * self.s * dt * self.substeps as f64).sqrt() * z / self.substeps as f64
        } else {
            0.0
        };
        let (mut n, mut s) = (self.n, self.s);
        let (mut excess_sum, mut n_over_s) = (0.0, 0.0);
        for _ in 0..self.substeps {
            let excess = n - ntr;
            let gain_dt = g_dt * excess;
            let mut s_next = s * (keep_s + gam * gain_dt) + sp_dt * n;
            if NOISY {
                s_next += kick;
            }
            let n_next = n * keep_n + pump_dt - gain_dt * s;
            excess_sum += excess;
            n_over_s += n / s;
            n = n_next.max(0.0);
            s = s_next.max(s_floor);
        }
        let net_sum = gam * self.g0 * excess_sum - self.substeps as f64 / self.tp;
        (n, s, net_sum, n_over_s)
    }

    /// Advances by one sample period at constant current `i_ma`.
    #[inline]
    pub fn step(&mut self, i_ma: f64) -> Result<()> {
        let pump = i_ma * 1e-3 / self.qv;
        let (n, s, net_sum, n_over_s) =
            if self.intensity_noise { self.substeps::<true>(pump) } else { self.substeps::<false>(pump) };
        let mut phi = self.phi + self.half_alpha * self.dt * net_sum;
        // phase noise does not feed back into N or S, so the per-substep
        // increments of one sample are summed into a single Gaussian draw
        let phase_var = 0.5 * self.spont * self.dt * n_over_s;
        if self.phase_noise && phase_var > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.phase_rng);
            phi += phase_var.sqrt() * z;
        }
        self.elapsed += 1;
        if !(n.is_finite() && s.is_finite() && phi.is_finite()) {
            return Err(Error::NumericalDivergence { time: self.elapsed as f64 * self.sample_dt });
        }
        self.n = n;
        self.s = s;
        self.phi = phi;
        Ok(())
    }
}

/// Integrates the rate equations over a sampled drive current.
pub fn integrate_rate_equations(
    lp: &LaserParams,
    drive_ma: &[f64],
    sample_rate: f64,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<PulseTrace> {
    let first = drive_ma.first().copied().unwrap_or(0.0);
    let mut state = LaserState::new(lp, sample_rate, cfg, first, seed)?;
    let len = drive_ma.len();
    let mut photon_density = Vec::with_capacity(len);
    let mut phase = Vec::with_capacity(len);
    let mut power_mw = Vec::with_capacity(len);
    for &i_ma in drive_ma {
        state.step(i_ma)?;
        photon_density.push(state.s);
        phase.push(state.phi);
        power_mw.push(lp.output_power_mw(state.s));
    }
    Ok(PulseTrace { sample_rate, drive_ma: drive_ma.to_vec(), photon_density, phase, power_mw })
}

/// Asymmetric Mach-Zehnder interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerParams {
    pub delay_s: f64,
    /// Power fraction kept in the bar path of the input coupler.
    pub split_in: f64,
    /// Power fraction kept in the bar path of the output coupler.
    pub split_out: f64,
    /// Slow random walk of the interferometer bias phase, rad / sqrt(s).
    pub bias_drift: f64,
}

impl Default for InterferometerParams {
    fn default() -> Self {
        Self { delay_s: DEFAULT_DELAY_S, split_in: 0.515, split_out: 0.515, bias_drift: 40.0 }
    }
}

impl InterferometerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_s > 0.0) {
            return Err(Error::InvalidConfig(format!("delay must be positive, got {}", self.delay_s)));
        }
        for r in [self.split_in, self.split_out] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidConfig(format!("split ratio must be in (0, 1), got {r}")));
            }
        }
        if !(self.bias_drift >= 0.0) {
            return Err(Error::InvalidConfig("bias drift must be >= 0".into()));
        }
        Ok(())
    }

    /// Field amplitudes of the undelayed and delayed paths at the observed port.
    pub fn path_amplitudes(&self) -> (f64, f64) {
        ((self.split_in * self.split_out).sqrt(), ((1.0 - self.split_in) * (1.0 - self.split_out)).sqrt())
    }

    /// Amplitudes at the complementary port.
    pub fn complementary_amplitudes(&self) -> (f64, f64) {
        ((self.split_in * (1.0 - self.split_out)).sqrt(), ((1.0 - self.split_in) * self.split_out).sqrt())
    }

    pub fn delay_samples(&self, sample_rate: f64) -> usize {
        (self.delay_s * sample_rate).round() as usize
    }
}

/// Both output ports of the interferometer, mW.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerOutput {
    pub primary: Vec<f64>,
    pub complementary: Vec<f64>,
}

/// Interferes the trace with a copy of itself delayed by the nearest whole
/// number of samples to `delay_s`. The first `delay` samples see only the
/// undelayed arm. The bias phase performs a seeded random walk.
pub fn amzi_interfere(trace: &PulseTrace, ip: &InterferometerParams, seed: u64) -> Result<InterferometerOutput> {
    ip.validate()?;
    let d = ip.delay_samples(trace.sample_rate);
    if trace.len() <= d || d == 0 {
        return Err(Error::TraceTooShort { have: trace.len(), need: d + 1 });
    }
    let (c1, c2) = ip.path_amplitudes();
    let (c3, c4) = ip.complementary_amplitudes();
    let step = ip.bias_drift / trace.sample_rate.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = 0.0;
    let field = |k: usize| Complex64::from_polar(trace.power_mw[k].max(0.0).sqrt(), trace.phase[k]);
    let mut primary = Vec::with_capacity(trace.len());
    let mut complementary = Vec::with_capacity(trace.len());
    for k in 0..trace.len() {
        if step > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            theta += step * z;
        }
        let now = field(k);
        let late = if k >= d { field(k - d) * Complex64::from_polar(1.0, theta) } else { Complex64::new(0.0, 0.0) };
        primary.push((now * c1 + late * c2).norm_sqr());
        complementary.push((now * c3 - late * c4).norm_sqr());
    }
    Ok(InterferometerOutput { primary, complementary })
}

/// Additive Gaussian detection noise, mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub noise_mw: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { noise_mw: 0.02 }
    }
}

pub fn detect(intensity: &[f64], det: &DetectorParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    intensity
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + det.noise_mw * z
        })
        .collect()
}

/// Converts CW interference intensities to phase magnitudes in `[0, pi]`.
pub fn cw_intensity_to_phase(intensities: &[f64], i_min: f64, i_max: f64) -> Result<Vec<f64>> {
    if !(i_min < i_max) {
        return Err(Error::InvalidInput(format!("need i_min < i_max, got {i_min} >= {i_max}")));
    }
    Ok(intensities
        .iter()
        .map(|&i| {
            let x = (2.0 * (i.clamp(i_min, i_max) - i_min) / (i_max - i_min) - 1.0).clamp(-1.0, 1.0);
            x.acos()
        })
        .collect())
}
