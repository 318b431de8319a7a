//! End-to-end acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one line; the process fails if any criterion does.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use qrng_qual::autocorr::{autocorr_coeff, autocov_f64, Indexing};
use qrng_qual::criteria::{arcsine_expected_counts, min_entropy, stat_distance};
use qrng_qual::laser::{
    integrate_rate_equations, make_drive, DriveParams, IntegratorConfig, LaserParams, LaserState, Preset,
};
use qrng_qual::par::derive_seed;
use qrng_qual::phasesim::{calibrate_boundary, sample_size_study, CalibrationGrid, CalibrationSpec, SampleSizeSpec};
use qrng_qual::qualify::{
    qualify_values, simulate_pulse_values, sweep, AcceptanceMap, Boundaries, SimConfig, SweepAxis, SweepGrid,
};
use qrng_qual::{AdcModel, IntensityHistogram, SampleSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn adc10() -> AdcModel {
    AdcModel::with_bits(10).unwrap()
}

fn boundary_reproduction(grid: &CalibrationGrid, seconds: f64) -> Outcome {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()) as f64;
    // wall time times thread count bounds the single-threaded cost from above
    let cpu_bound = seconds * threads;
    let pass = (grid.mean - 0.155).abs() <= 0.015 && cpu_bound <= 300.0;
    outcome(
        pass,
        format!("mean d_stat {:.4} (target 0.155 +- 0.015), {seconds:.1} s on {threads} thread(s)", grid.mean),
    )
}

fn monotonicity(grid: &CalibrationGrid) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for j in 0..grid.fraction_values.len() {
        for i in 1..grid.noise_values.len() {
            let (a, b) = (grid.cell(i - 1, j), grid.cell(i, j));
            let slack = a.std.max(b.std);
            let step = b.mean - a.mean;
            worst = worst.min(step / slack.max(f64::MIN_POSITIVE));
            if step < -slack {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} decreases beyond 1 MC std; worst step {worst:+.2} std"))
}

fn convergence() -> Outcome {
    let spec = SampleSizeSpec { noise: 0.015, fraction: 0.5, reps: 100, ..Default::default() };
    let rows = sample_size_study(&spec, &adc10(), derive_seed(SEED, &[3])).unwrap();
    let decreasing = rows.windows(2).all(|w| w[1].mean < w[0].mean && w[1].std < w[0].std);
    let at_1e4 = rows.iter().find(|r| r.size == 10_000).unwrap().std;
    let pass = decreasing && (at_1e4 - 0.004).abs() <= 0.002;
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}/{:.4}", r.size, r.mean, r.std)).collect();
    outcome(pass, format!("size:mean/std {}; std at 1e4 {at_1e4:.4} (0.004 +- 0.002)", table.join(" ")))
}

fn autocorrelation_floor() -> Outcome {
    let n = 10_000;
    let seeds = 400;
    let mut sum = 0.0;
    for s in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[4, s]));
        let codes: Vec<u32> = (0..n).map(|_| rng.random_range(0..1024)).collect();
        let seq = SampleSequence::new(codes, 1024).unwrap();
        sum += autocorr_coeff(&seq, 1).unwrap().abs();
    }
    let mean_db = 10.0 * (sum / seeds as f64).log10();
    let oracle_db = 10.0 * ((2.0 / PI).sqrt() / (n as f64).sqrt()).log10();
    outcome(
        (mean_db + 20.9).abs() <= 1.5,
        format!("mean |C1| {mean_db:.2} dB over {seeds} seeds (target -20.9 +- 1.5, oracle {oracle_db:.2})"),
    )
}

/// Cells of `map` as `(value1, value2, d_stat, pass_statdist, pass_overall, |C1|)`.
fn cells(map: &AcceptanceMap) -> Vec<(f64, f64, f64, bool, bool, f64)> {
    map.cells
        .iter()
        .map(|c| {
            let r = c.first();
            assert!(r.error.is_none(), "cell failed to simulate: {:?}", r.error);
            let c1 = r.c1_db.map_or(f64::NAN, |db| 10f64.powf(db / 10.0));
            (c.value1, c.value2, r.d_stat, r.pass_statdist, r.pass_overall, c1)
        })
        .collect()
}

/// Number of 4-connected components among the marked cells of an `n1 x n2` grid.
fn components(marked: &[bool], n1: usize, n2: usize) -> usize {
    let mut seen = vec![false; marked.len()];
    let mut count = 0;
    for start in 0..marked.len() {
        if !marked[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let (i, j) = (k / n2, k % n2);
            let mut near = Vec::new();
            if i > 0 {
                near.push(k - n2);
            }
            if i + 1 < n1 {
                near.push(k + n2);
            }
            if j > 0 {
                near.push(k - 1);
            }
            if j + 1 < n2 {
                near.push(k + 1);
            }
            for m in near {
                if marked[m] && !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
    }
    count
}

fn discrimination() -> Outcome {
    let currents = vec![8.0, 16.0, 36.0, 54.0, 80.0];
    let duties: Vec<f64> = [1.0, 10.0, 15.0, 20.0, 25.0].iter().map(|k| k / 30.0).collect();
    let grid = SweepGrid {
        base: DriveParams { modulation_depth: 0.6, temperature_c: 25.0, ..Default::default() },
        axis1: SweepAxis::PeakCurrent,
        values1: currents.clone(),
        axis2: SweepAxis::DutyCycle,
        values2: duties.clone(),
        reps: 1,
    };
    let sim = SimConfig::with_laser(Preset::Laser3.params());
    let b = Boundaries::default();
    let map = sweep(&grid, &sim, &b, derive_seed(SEED, &[5])).unwrap();
    let cs = cells(&map);

    let below_threshold_fail = cs.iter().filter(|c| c.0 < sim.laser.threshold_current_ma).all(|c| !c.4);
    let short_pulses: Vec<f64> = cs.iter().filter(|c| c.1 < 0.05).map(|c| c.2).collect();
    let short_fail = cs.iter().filter(|c| c.1 < 0.05).all(|c| !c.4);
    // the passing plateau: one connected block of statdist passes, all at high
    // current and above the shortest pulses
    let marked: Vec<bool> = cs.iter().map(|c| c.3).collect();
    let plateau: Vec<_> = cs.iter().filter(|c| c.3).collect();
    let contiguous = components(&marked, currents.len(), duties.len()) == 1;
    let placed = plateau.iter().all(|c| c.0 >= 3.0 * sim.laser.threshold_current_ma && c.1 > 0.05);
    let plateau_overall = plateau.iter().filter(|c| c.4).count();
    // |C1| of an IID sequence is half-normal: mean sqrt(2/pi)/sqrt(N), std sqrt(1 - 2/pi)/sqrt(N)
    let len = sim.pulses as f64;
    let c1_mean = plateau.iter().map(|c| c.5).sum::<f64>() / plateau.len().max(1) as f64;
    let c1_limit = ((2.0 / PI).sqrt() + 4.0 * (1.0 - 2.0 / PI).sqrt() / (plateau.len().max(1) as f64).sqrt()) / len.sqrt();

    // sampling inside the relaxation oscillation on a long pulse
    let early = SimConfig { offset_fraction: 0.2, ..sim.clone() };
    let drive = DriveParams { peak_current_ma: 36.0, modulation_depth: 0.6, duty_cycle: 0.5, ..Default::default() };
    let values = simulate_pulse_values(&drive, &early, derive_seed(SEED, &[5, 1])).unwrap();
    let early_report = qualify_values(&values, &early, &b).unwrap().0;

    // the C1 bound alone rejects about one IID sequence in six at this length, so
    // overall passes only need a majority; systematic correlation shows in c1_mean
    let pass = below_threshold_fail
        && short_fail
        && contiguous
        && placed
        && plateau.len() >= 9
        && 2 * plateau_overall > plateau.len()
        && c1_mean <= c1_limit
        && !early_report.pass_statdist;
    let d_short: Vec<String> = short_pulses.iter().map(|d| format!("{d:.3}")).collect();
    outcome(
        pass,
        format!(
            "below-threshold row fails: {below_threshold_fail}; DC 1/30 fails: {short_fail} (d {}); \
             plateau {n} statdist cells, contiguous {contiguous}, at high current {placed}, {plateau_overall}/{n} pass overall, mean |C1| {:.2} dB (IID limit {:.2} dB); \
             early extraction d {:.3} (reference 0.256)",
            d_short.join(","),
            10.0 * c1_mean.log10(),
            10.0 * c1_limit.log10(),
            early_report.d_stat,
            n = plateau.len(),
        ),
    )
}

fn bias_t_limit() -> Outcome {
    let grid = |laser: &LaserParams| {
        let g = SweepGrid {
            base: DriveParams { modulation_depth: 0.6, ..Default::default() },
            axis1: SweepAxis::PeakCurrent,
            values1: vec![36.0, 54.0, 80.0],
            axis2: SweepAxis::DutyCycle,
            values2: vec![29.0 / 30.0],
            reps: 1,
        };
        let sim = SimConfig::with_laser(laser.clone());
        cells(&sweep(&g, &sim, &Boundaries::default(), derive_seed(SEED, &[6])).unwrap())
    };
    let filtered = Preset::Laser1.params();
    let unfiltered = LaserParams { bias_t_cutoff_hz: None, ..filtered.clone() };
    let with = grid(&filtered);
    let without = grid(&unfiltered);
    let fails_all = with.iter().all(|c| !c.4);
    let passing = without.iter().filter(|c| c.4).count();
    let d = |cs: &[(f64, f64, f64, bool, bool, f64)]| cs.iter().map(|c| format!("{:.3}", c.2)).collect::<Vec<_>>().join(",");
    outcome(
        fails_all && passing >= 1,
        format!(
            "with 1 GHz lowpass: {}/3 pass (d {}); without: {passing}/3 pass (d {})",
            with.iter().filter(|c| c.4).count(),
            d(&with),
            d(&without)
        ),
    )
}

/// Variance of the pulse-to-pulse phase change at the sampling instant.
fn phase_step_variance(lp: &LaserParams, on_s: f64, off_s: f64, pulses: usize, seed: u64) -> f64 {
    let fs = 100e9;
    let drive = DriveParams {
        peak_current_ma: 30.0,
        modulation_depth: 0.34,
        duty_cycle: on_s / (on_s + off_s),
        rep_period_s: on_s + off_s,
        ..Default::default()
    };
    let (period, on) = (drive.period_samples(fs), drive.on_samples(fs));
    let pick = (0.8 * on as f64).round() as usize;
    let cfg = IntegratorConfig::default();
    let mut laser = LaserState::new(lp, fs, &cfg, drive.off_level_ma(), seed).unwrap();
    let warmup = 5;
    let mut phases = Vec::with_capacity(pulses);
    for p in 0..warmup + pulses {
        for k in 0..period {
            laser.step(if k < on { drive.peak_current_ma } else { drive.off_level_ma() }).unwrap();
            if k == pick && p >= warmup {
                phases.push(laser.phi);
            }
        }
    }
    let steps: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
    let m = steps.iter().sum::<f64>() / steps.len() as f64;
    steps.iter().map(|x| (x - m).powi(2)).sum::<f64>() / steps.len() as f64
}

fn henry_linearity() -> Outcome {
    let lp = LaserParams { intensity_noise: false, phase_noise: true, ..LaserParams::default() };
    let off: Vec<f64> = vec![1e-9, 2e-9, 4e-9, 6e-9, 8e-9, 10e-9];
    let var: Vec<f64> = off
        .iter()
        .enumerate()
        .map(|(k, &t)| phase_step_variance(&lp, 1e-9, t, 4000, derive_seed(SEED, &[7, k as u64])))
        .collect();
    let x: Vec<f64> = off.iter().map(|t| t * 1e9).collect();
    let slope = x.iter().zip(&var).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let ss_res: f64 = x.iter().zip(&var).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let mean = var.iter().sum::<f64>() / var.len() as f64;
    let ss_tot: f64 = var.iter().map(|b| (b - mean).powi(2)).sum();
    let ss_raw: f64 = var.iter().map(|b| b * b).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let r2_uncentered = 1.0 - ss_res / ss_raw;
    let listed: Vec<String> = x.iter().zip(&var).map(|(a, b)| format!("{a}ns:{b:.0}")).collect();
    outcome(
        r2 > 0.99,
        format!(
            "var(rad^2) {}; slope {slope:.1} rad^2/ns; R^2 {r2:.4} (uncentered {r2_uncentered:.4})",
            listed.join(" ")
        ),
    )
}

fn brute_stat_distance(counts: &[u64], lo: f64, hi: f64) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut w = vec![0.0; counts.len()];
    for (i, wi) in w.iter_mut().enumerate() {
        let c = i as f64 + 0.5;
        if c > lo && c < hi {
            let u = (c - lo) / (hi - lo);
            *wi = 1.0 / (PI * (u * (1.0 - u)).sqrt());
        }
    }
    let sum: f64 = w.iter().sum();
    let mut l1 = 0.0;
    for i in 0..counts.len() {
        l1 += (total as f64 * w[i] / sum - counts[i] as f64).abs();
    }
    l1 / (2.0 * total as f64)
}

/// Mean of circular lagged products minus the squared mean, as written.
fn brute_autocov(xs: &[f64], d: usize) -> f64 {
    let n = xs.len();
    let mut m = 0.0;
    let mut prod = 0.0;
    for i in 0..n {
        m += xs[i];
        prod += xs[i] * xs[(i + d) % n];
    }
    m /= n as f64;
    prod / n as f64 - m * m
}

fn brute_min_entropy(codes: &[u32]) -> f64 {
    let mut freq: HashMap<u32, usize> = HashMap::new();
    for &c in codes {
        *freq.entry(c).or_default() += 1;
    }
    let max = freq.values().max().copied().unwrap();
    -(max as f64 / codes.len() as f64).log2()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[8]));
    let (mut worst_d, mut worst_g, mut worst_h) = (0.0f64, 0.0f64, 0.0f64);
    let mut checked_d = 0;
    for _ in 0..1000 {
        let bins = rng.random_range(4..64usize);
        let n = rng.random_range(2..300usize);
        let codes: Vec<u32> = (0..n).map(|_| rng.random_range(0..bins as u32)).collect();
        let seq = SampleSequence::new(codes.clone(), bins).unwrap();
        let mut counts = vec![0u64; bins];
        for &c in &codes {
            counts[c as usize] += 1;
        }
        let hist = IntensityHistogram::from_counts(counts).unwrap();

        let lo = rng.random_range(-0.3 * bins as f64..0.4 * bins as f64);
        let hi = rng.random_range(lo + 3.0..1.3 * bins as f64 + 3.0);
        if let Ok(model) = arcsine_expected_counts(lo, hi, n as f64, bins) {
            let d = stat_distance(&hist, &model).unwrap();
            worst_d = worst_d.max((d - brute_stat_distance(hist.counts(), lo, hi)).abs());
            checked_d += 1;
        }

        let xs = seq.to_f64();
        let lag = rng.random_range(0..n);
        let g = autocov_f64(&xs, lag, Indexing::Circular).unwrap();
        let g_ref = brute_autocov(&xs, lag);
        // the product form cancels terms of size mean(x^2); errors are measured on that scale
        let scale = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        worst_g = worst_g.max((g - g_ref).abs() / scale.max(1.0));

        worst_h = worst_h.max((min_entropy(&hist).unwrap() - brute_min_entropy(&codes)).abs());
    }
    let pass = worst_d <= 1e-12 && worst_g <= 1e-12 && worst_h <= 1e-12 && checked_d >= 900;
    outcome(
        pass,
        format!(
            "max deviation over 1000 instances: stat_distance {worst_d:.1e} ({checked_d} fitted), \
             autocov {worst_g:.1e} (relative to mean square), min_entropy {worst_h:.1e}"
        ),
    )
}

fn integrator_sanity() -> Outcome {
    let lp = LaserParams { intensity_noise: false, phase_noise: false, ..LaserParams::default() };
    let fs = 100e9;
    let i = 2.0 * lp.threshold_current_ma;
    let mut drive = vec![0.0; 10];
    drive.extend(vec![i; 15_000]);
    let tr = integrate_rate_equations(&lp, &drive, fs, &IntegratorConfig::default(), 0).unwrap();
    let (_, s_fixed) = lp.steady_state(i, 25.0);
    let settled = *tr.photon_density.last().unwrap();
    let fixed_err = (settled - s_fixed).abs() / s_fixed;

    let pulses = DriveParams::default();
    let train = make_drive(&pulses, fs, 4).unwrap();
    let period = pulses.period_samples(fs);
    let energy = |dt: f64| {
        let cfg = IntegratorConfig { dt, ..Default::default() };
        let tr = integrate_rate_equations(&lp, &train, fs, &cfg, 0).unwrap();
        tr.power_mw[3 * period..].iter().sum::<f64>()
    };
    let (coarse, fine) = (energy(0.2e-12), energy(0.1e-12));
    let dt_err = (coarse - fine).abs() / fine;
    outcome(
        fixed_err < 0.005 && dt_err < 0.01,
        format!("fixed point error {:.2e} % (< 0.5 %); dt halving changes pulse energy {:.2e} % (< 1 %)", fixed_err * 100.0, dt_err * 100.0),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |k: usize, name: &str, o: Outcome| {
        println!("criterion {k} {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };

    let t0 = Instant::now();
    let grid = calibrate_boundary(&CalibrationSpec::default(), &adc10(), derive_seed(SEED, &[1])).unwrap();
    let seconds = t0.elapsed().as_secs_f64();
    report(1, "boundary reproduction", boundary_reproduction(&grid, seconds));
    report(2, "monotonicity", monotonicity(&grid));
    report(3, "convergence", convergence());
    report(4, "autocorrelation floor", autocorrelation_floor());
    report(5, "end-to-end discrimination", discrimination());
    report(6, "bias-T limit", bias_t_limit());
    report(7, "phase-diffusion linearity", henry_linearity());
    report(8, "oracle equivalence", oracle_equivalence());
    report(9, "integrator sanity", integrator_sanity());

    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
