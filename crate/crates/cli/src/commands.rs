use std::path::Path;

use anyhow::{bail, Context, Result};
use qrng_qual::adc::{AdcModel, SampleSequence};
use qrng_qual::extract::{detect_delay, extract_values, AutoRange, ExtractionConfig};
use qrng_qual::io;
use qrng_qual::laser::{
    amzi_interfere, detect, integrate_rate_equations, lowpass, make_drive, DetectorParams, DriveParams,
    IntegratorConfig, LaserParams, Preset,
};
use qrng_qual::par::derive_seed;
use qrng_qual::phasesim::{calibrate_boundary, sample_size_study, CalibrationSpec, SampleSizeSpec};
use qrng_qual::qualify::{
    qualify as qualify_seq, simulate_pulse_values, sweep as run_sweep, Boundaries, SimConfig,
    SweepAxis, SweepGrid,
};

use crate::args::{
    BoundaryArgs, CalibrateArgs, DriveArgs, ExtractArgs, ExtractionArgs, Global, LaserArgs, QualifyArgs,
    SimulateArgs, SweepArgs,
};
use crate::Outcome;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes()).with_context(|| format!("cannot write {}", path.display()))
}

fn boundaries(b: &BoundaryArgs) -> Result<Boundaries> {
    let b = Boundaries { d_bound: b.d_bound, c1_bound_db: b.c1_bound_db, ..Default::default() };
    b.validate()?;
    Ok(b)
}

pub fn calibrate(g: &Global, a: &CalibrateArgs) -> Result<Outcome> {
    let defaults = CalibrationSpec::default();
    let spec = CalibrationSpec {
        noise_values: a.noise.clone().unwrap_or(defaults.noise_values),
        fraction_values: a.fraction.clone().unwrap_or(defaults.fraction_values),
        n_samples: a.n,
        reps: a.reps,
        sigma_phi: a.sigma_phi.unwrap_or(defaults.sigma_phi),
        ..defaults
    };
    let adc = AdcModel::with_bits(g.adc_bits)?;
    let grid = calibrate_boundary(&spec, &adc, derive_seed(g.seed, &[0]))?;
    write(&a.out, &io::calibration_csv(&grid))?;
    write(&a.summary_out, &io::calibration_summary_csv(&grid))?;
    println!("mean d_stat = {:.4} over {} datasets (proposed d_bound)", grid.mean, grid.cells.len() * grid.reps);

    if a.sizes.trim() != "none" {
        let sizes = a
            .sizes
            .split(',')
            .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad size {s:?}")))
            .collect::<Result<Vec<_>>>()?;
        // the study runs at one representative cell; a single-cell grid overrides it
        let base = SampleSizeSpec::default();
        let size_spec = SampleSizeSpec {
            noise: if a.noise.is_some() { spec.noise_values[0] } else { base.noise },
            fraction: if a.fraction.is_some() { spec.fraction_values[0] } else { base.fraction },
            sizes,
            reps: a.size_reps,
            sigma_phi: spec.sigma_phi,
            ..base
        };
        let rows = sample_size_study(&size_spec, &adc, derive_seed(g.seed, &[1]))?;
        write(&a.convergence_out, &io::convergence_csv(&rows))?;
        if rows.iter().any(|r| r.degenerate) {
            eprintln!("warning: one rep per size, std is reported as 0");
        }
        for r in &rows {
            println!("size {:>7}: mean {:.4} std {:.4}", r.size, r.mean, r.std);
        }
    }
    Ok(Outcome::Pass)
}

fn laser_params(a: &LaserArgs) -> Result<LaserParams> {
    let mut lp = match &a.laser_file {
        Some(path) => LaserParams::from_toml(&read(path)?)?,
        None => a.preset.parse::<Preset>()?.params(),
    };
    match a.lowpass_hz {
        Some(0.0) => lp.bias_t_cutoff_hz = None,
        Some(f) => lp.bias_t_cutoff_hz = Some(f),
        None => {}
    }
    lp.validate()?;
    Ok(lp)
}

fn sim_config(g: &Global, a: &LaserArgs, pulses: usize, offset: f64) -> Result<SimConfig> {
    if !(a.detector_noise >= 0.0) {
        bail!("detector noise must be >= 0");
    }
    Ok(SimConfig {
        laser: laser_params(a)?,
        detector: DetectorParams { noise_mw: a.detector_noise },
        dt: a.dt,
        pulses,
        adc_bits: g.adc_bits,
        offset_fraction: offset,
        ..SimConfig::default()
    })
}

fn drive_params(d: &DriveArgs) -> DriveParams {
    DriveParams {
        temperature_c: d.temperature,
        duty_cycle: d.duty_cycle,
        peak_current_ma: d.peak_ma,
        modulation_depth: d.mod_depth,
        rep_period_s: d.rep_period,
    }
}

fn digitize(values: &[f64], bits: u32) -> Result<(SampleSequence, AdcModel)> {
    let adc = AutoRange::default().select(bits, values)?;
    Ok((SampleSequence::from_intensities(values, &adc)?, adc))
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<Outcome> {
    if a.out.is_none() && a.trace_out.is_none() {
        bail!("nothing to do: give --out and/or --trace-out");
    }
    let sim = sim_config(g, &a.laser, a.n, a.offset)?;
    let mut drive = drive_params(&a.drive);
    if a.cw {
        drive.modulation_depth = 0.0;
    }
    drive.validate()?;
    let values = match &a.trace_out {
        None => simulate_pulse_values(&drive, &sim, g.seed)?,
        Some(path) => {
            let fs = sim.sample_rate;
            let period = drive.period_samples(fs);
            let warmup = sim.warmup_pulses.max(sim.interferometer.delay_samples(fs).div_ceil(period) + 1);
            let mut current = make_drive(&drive, fs, warmup + a.n)?;
            if let Some(fc) = sim.laser.bias_t_cutoff_hz {
                current = lowpass(&current, fs, fc)?;
            }
            let cfg = IntegratorConfig { dt: sim.dt, temperature_c: drive.temperature_c };
            let mut trace = integrate_rate_equations(&sim.laser, &current, fs, &cfg, derive_seed(g.seed, &[0]))?;
            let out = amzi_interfere(&trace, &sim.interferometer, derive_seed(g.seed, &[1]))?;
            let mut detected = detect(&out.primary, &sim.detector, derive_seed(g.seed, &[2]));
            // drop the warm-up pulses, including those without a delayed partner
            let skip = warmup * period;
            trace.drive_ma.drain(..skip);
            trace.photon_density.drain(..skip);
            trace.phase.drain(..skip);
            trace.power_mw.drain(..skip);
            detected.drain(..skip);
            write(path, &io::trace_csv(&trace, &detected)?)?;
            let cfg = ExtractionConfig::for_drive_at(&drive, a.offset);
            let cfg = ExtractionConfig { rep_period: period as f64 / fs, ..cfg };
            extract_values(&detected, fs, &cfg)?
        }
    };
    let (seq, adc) = digitize(&values, g.adc_bits)?;
    if let Some(path) = &a.out {
        write(path, &io::codes_text(seq.codes()))?;
    }
    let (lo, hi) = adc.range();
    println!("{} samples, ADC range [{lo:.4}, {hi:.4}] mW", seq.len());
    Ok(Outcome::Pass)
}

fn extraction_config(a: &ExtractionArgs) -> Result<ExtractionConfig> {
    if !(0.0..1.0).contains(&a.offset) {
        bail!("--offset is a fraction of the on-time and must lie in [0, 1)");
    }
    let cfg = ExtractionConfig {
        rep_period: a.rep_period,
        delay: a.delay,
        intra_pulse_offset: a.offset * a.duty_cycle * a.rep_period,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Per-pulse values from a waveform file.
fn waveform_values(text: &str, a: &ExtractionArgs) -> Result<Vec<f64>> {
    let wave = io::read_waveform(text)?;
    let mut cfg = extraction_config(a)?;
    if a.detect_delay {
        let Some(drive) = &wave.drive else {
            bail!("--detect-delay needs a trace with a drive column");
        };
        let period = (cfg.rep_period * wave.sample_rate).round() as usize;
        cfg.delay = detect_delay(drive, &wave.intensity, wave.sample_rate, period)?;
        eprintln!("detected delay {:.4e} s", cfg.delay);
    }
    Ok(extract_values(&wave.intensity, wave.sample_rate, &cfg)?)
}

fn is_waveform(text: &str) -> bool {
    let first = text.lines().next().unwrap_or("");
    first.starts_with('#') || first.split(',').any(|h| h.trim() == "time_s")
}

pub fn qualify(g: &Global, a: &QualifyArgs) -> Result<Outcome> {
    let b = boundaries(&a.bounds)?;
    let text = read(&a.input)?;
    let (seq, adc) = if is_waveform(&text) {
        digitize(&waveform_values(&text, &a.extraction)?, g.adc_bits)?
    } else {
        let adc = AdcModel::with_bits(g.adc_bits)?;
        let codes = io::read_codes(&text).with_context(|| format!("in {}", a.input.display()))?;
        (SampleSequence::new(codes, adc.code_count())?, adc)
    };
    let mut report = qualify_seq(&seq, &adc, &b)?;
    report.metadata.insert("input".into(), a.input.display().to_string());
    let text = report.to_text();
    match &a.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "d_stat {:.4} ({}), C1 {} ({}) -> {}",
        report.d_stat,
        if report.pass_statdist { "pass" } else { "fail" },
        report.c1_db().map_or_else(|| "undefined".to_string(), |c| format!("{c:.2} dB")),
        if report.pass_autocorr { "pass" } else { "fail" },
        if report.pass_overall { "PASS" } else { "FAIL" },
    );
    Ok(if report.pass_overall { Outcome::Pass } else { Outcome::Fail })
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<Outcome> {
    let b = boundaries(&a.bounds)?;
    let sim = sim_config(g, &a.laser, a.n, a.offset)?;
    let grid = SweepGrid {
        base: drive_params(&a.drive),
        axis1: a.axis1.parse::<SweepAxis>()?,
        values1: a.values1.clone(),
        axis2: a.axis2.parse::<SweepAxis>()?,
        values2: a.values2.clone(),
        reps: a.reps,
    };
    if grid.axis1 == grid.axis2 {
        bail!("the two sweep axes must differ");
    }
    let map = run_sweep(&grid, &sim, &b, g.seed)?;
    write(&a.out, &io::acceptance_map_csv(&map))?;
    let passing = map.cells.iter().filter(|c| c.first().pass_overall).count();
    println!("{passing} of {} cells pass (laser {})", map.cells.len(), sim.laser.name);
    Ok(Outcome::Pass)
}

pub fn extract(g: &Global, a: &ExtractArgs) -> Result<Outcome> {
    let text = read(&a.input)?;
    let values = waveform_values(&text, &a.extraction)?;
    let (seq, adc) = digitize(&values, g.adc_bits)?;
    write(&a.out, &io::codes_text(seq.codes()))?;
    let (lo, hi) = adc.range();
    println!("{} pulses extracted, ADC range [{lo:.4}, {hi:.4}]", seq.len());
    Ok(Outcome::Pass)
}
