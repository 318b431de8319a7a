//! Arcsine model, statistical distance, arcsine fitting and min-entropy.
//!
//! Bin `i` of a histogram covers codes `[i, i + 1)`, so its center sits at
//! `i + 0.5`. Arcsine supports are expressed in the same code units and may
//! extend past the ADC rails.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::adc::IntensityHistogram;
use crate::error::{Error, Result};

/// How expected counts per bin are derived from the arcsine law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BinRule {
    /// Density evaluated at the bin center, then renormalized.
    #[default]
    Center,
    /// Exact probability mass of each bin, then renormalized to the visible bins.
    CdfDifference,
}

/// Ideal binned arcsine on `[lo, hi]` carrying `mass` counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcsineModel {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub expected: Vec<f64>,
}

fn arcsine_density(x: f64) -> f64 {
    1.0 / (PI * (x * (1.0 - x)).sqrt())
}

fn arcsine_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        2.0 / PI * x.sqrt().asin()
    }
}

/// Index range of bins whose center lies strictly inside `(lo, hi)`.
fn inner_bins(lo: f64, hi: f64, bins: usize) -> std::ops::Range<usize> {
    let first = (lo - 0.5).floor() + 1.0;
    let last = (hi - 0.5).ceil() - 1.0;
    let first = first.max(0.0);
    let last = last.min(bins as f64 - 1.0);
    if last < first {
        return 0..0;
    }
    first as usize..last as usize + 1
}

fn raw_weights(lo: f64, hi: f64, bins: usize, rule: BinRule, out: &mut Vec<f64>) -> std::ops::Range<usize> {
    out.clear();
    let width = hi - lo;
    match rule {
        BinRule::Center => {
            let range = inner_bins(lo, hi, bins);
            out.extend(range.clone().map(|i| arcsine_density((i as f64 + 0.5 - lo) / width)));
            range
        }
        BinRule::CdfDifference => {
            let first = lo.floor().max(0.0);
            let last = (hi.ceil() - 1.0).min(bins as f64 - 1.0);
            if last < first {
                return 0..0;
            }
            let range = first as usize..last as usize + 1;
            out.extend(range.clone().map(|i| {
                let a = (i as f64 - lo) / width;
                let b = (i as f64 + 1.0 - lo) / width;
                arcsine_cdf(b) - arcsine_cdf(a)
            }));
            range
        }
    }
}

impl ArcsineModel {
    pub fn new(lo: f64, hi: f64, mass: f64, bins: usize, rule: BinRule) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidSupport { lo, hi });
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidInput(format!("arcsine mass must be positive, got {mass}")));
        }
        let mut raw = Vec::new();
        let range = raw_weights(lo, hi, bins, rule, &mut raw);
        let sum: f64 = raw.iter().sum();
        if range.is_empty() || !(sum > 0.0) {
            return Err(Error::DegenerateSupport { lo, hi });
        }
        let mut expected = vec![0.0; bins];
        for (a, r) in expected[range].iter_mut().zip(&raw) {
            *a = mass * r / sum;
        }
        Ok(Self { lo, hi, mass, expected })
    }

    pub fn bin_count(&self) -> usize {
        self.expected.len()
    }
}

/// Center-rule arcsine counts on `bins` ADC codes.
pub fn arcsine_expected_counts(lo: f64, hi: f64, mass: f64, bins: usize) -> Result<ArcsineModel> {
    ArcsineModel::new(lo, hi, mass, bins, BinRule::Center)
}

/// Half the L1 distance between histogram and model, normalized by the sample count.
pub fn stat_distance(hist: &IntensityHistogram, model: &ArcsineModel) -> Result<f64> {
    if hist.bin_count() != model.bin_count() {
        return Err(Error::ShapeMismatch { model: model.bin_count(), hist: hist.bin_count() });
    }
    let total = hist.total() as f64;
    if total == 0.0 {
        return Err(Error::EmptyInput);
    }
    if (model.mass - total).abs() > 1e-6 * total {
        return Err(Error::MassMismatch { model: model.mass, hist: total });
    }
    let l1: f64 = hist
        .counts()
        .iter()
        .zip(&model.expected)
        .map(|(&n, &a)| (a - n as f64).abs())
        .sum();
    Ok((l1 / (2.0 * total)).clamp(0.0, 1.0))
}

/// Min-entropy of the empirical code distribution, in bits.
pub fn min_entropy(hist: &IntensityHistogram) -> Result<f64> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let max = *hist.counts().iter().max().expect("histogram has bins");
    Ok(-(max as f64 / total as f64).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Histograms with fewer samples are reported as failed fits.
    pub min_samples: u64,
    /// Best distances above this are reported as failed fits.
    pub fail_threshold: f64,
    pub max_evaluations: usize,
    pub bin_rule: BinRule,
    /// Points per axis of the multi-start grid.
    pub grid_points: usize,
    /// Half-width of the multi-start grid as a fraction of the occupied range.
    pub grid_span: f64,
    /// How many of the best grid points are refined.
    pub refine_starts: usize,
    /// Pattern-search step at which refinement stops, in codes.
    pub tolerance: f64,
    /// Additional caller-supplied `(lo, hi)` starting points.
    pub extra_starts: Vec<(f64, f64)>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            min_samples: 100,
            fail_threshold: 0.9,
            max_evaluations: 20_000,
            bin_rule: BinRule::Center,
            grid_points: 5,
            grid_span: 0.1,
            refine_starts: 3,
            tolerance: 0.01,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitFailure {
    TooFewSamples,
    DegenerateHistogram,
    DistanceAboveThreshold,
    EvaluationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Best model found; `None` when the histogram admits no fit at all.
    pub model: Option<ArcsineModel>,
    /// `1.0` whenever the fit did not converge.
    pub d_stat: f64,
    pub converged: bool,
    pub failure: Option<FitFailure>,
    pub evaluations: usize,
}

impl FitResult {
    fn failed(reason: FitFailure, model: Option<ArcsineModel>, evaluations: usize) -> Self {
        Self { model, d_stat: 1.0, converged: false, failure: Some(reason), evaluations }
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.model.as_ref().map(|m| (m.lo, m.hi))
    }
}

/// Allocation-free objective for the support search.
struct Objective {
    counts: Vec<f64>,
    total: f64,
    rule: BinRule,
    bounds: (f64, f64),
    scratch: Vec<f64>,
    evaluations: usize,
}

impl Objective {
    fn new(hist: &IntensityHistogram, rule: BinRule) -> Self {
        let bins = hist.bin_count() as f64;
        Self {
            counts: hist.counts().iter().map(|&n| n as f64).collect(),
            total: hist.total() as f64,
            rule,
            bounds: (-bins / 2.0, 1.5 * bins),
            scratch: Vec::with_capacity(hist.bin_count()),
            evaluations: 0,
        }
    }

    fn feasible(&self, lo: f64, hi: f64) -> bool {
        lo >= self.bounds.0 && hi <= self.bounds.1 && hi - lo >= 1.0
    }

    fn eval(&mut self, lo: f64, hi: f64) -> f64 {
        self.evaluations += 1;
        if !self.feasible(lo, hi) {
            return f64::INFINITY;
        }
        let range = raw_weights(lo, hi, self.counts.len(), self.rule, &mut self.scratch);
        let sum: f64 = self.scratch.iter().sum();
        if range.is_empty() || !(sum > 0.0) {
            return 1.0;
        }
        let scale = self.total / sum;
        let mut l1 = 0.0;
        let mut inside = 0.0;
        for (&n, &r) in self.counts[range].iter().zip(&self.scratch) {
            l1 += (r * scale - n).abs();
            inside += n;
        }
        l1 += self.total - inside;
        (l1 / (2.0 * self.total)).clamp(0.0, 1.0)
    }
}

const DIRECTIONS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (-1.0, 1.0),
    (1.0, -1.0),
];

/// Compass search from `start`; returns the local minimum and its value.
fn pattern_search(
    obj: &mut Objective,
    start: (f64, f64, f64),
    initial_step: f64,
    tolerance: f64,
    max_evaluations: usize,
) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut best) = start;
    let mut step = initial_step;
    while step >= tolerance && obj.evaluations < max_evaluations {
        let mut improved = false;
        for (dl, dh) in DIRECTIONS {
            let (l, h) = (lo + dl * step, hi + dh * step);
            let v = obj.eval(l, h);
            if v < best {
                lo = l;
                hi = h;
                best = v;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (lo, hi, best)
}

/// Fits an ideal arcsine of the histogram's mass by minimizing the statistical distance
/// over the support edges.
pub fn fit_arcsine(hist: &IntensityHistogram, cfg: &FitConfig) -> FitResult {
    if hist.total() < cfg.min_samples.max(1) {
        return FitResult::failed(FitFailure::TooFewSamples, None, 0);
    }
    if hist.occupied_bins() < 3 {
        return FitResult::failed(FitFailure::DegenerateHistogram, None, 0);
    }
    let (first, last) = hist.occupied_range().expect("occupied bins checked above");
    let lo0 = first as f64;
    let hi0 = last as f64 + 1.0;
    let width = hi0 - lo0;

    let mut obj = Objective::new(hist, cfg.bin_rule);
    let n = cfg.grid_points.max(1);
    let offsets: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n).map(|k| -cfg.grid_span + 2.0 * cfg.grid_span * k as f64 / (n - 1) as f64).collect()
    };
    let mut starts: Vec<(f64, f64, f64)> = Vec::with_capacity(n * n + cfg.extra_starts.len());
    for &dl in &offsets {
        for &dh in &offsets {
            let (l, h) = (lo0 + dl * width, hi0 + dh * width);
            let v = obj.eval(l, h);
            starts.push((l, h, v));
        }
    }
    starts.sort_by(|a, b| a.2.total_cmp(&b.2));
    starts.truncate(cfg.refine_starts.max(1));
    for &(l, h) in &cfg.extra_starts {
        let v = obj.eval(l, h);
        if v.is_finite() {
            starts.push((l, h, v));
        }
    }

    let initial_step = (0.02 * width).max(0.5);
    let mut best = (lo0, hi0, f64::INFINITY);
    for start in starts {
        let r = pattern_search(&mut obj, start, initial_step, cfg.tolerance, cfg.max_evaluations);
        if r.2 < best.2 {
            best = r;
        }
    }
    let evaluations = obj.evaluations;
    let model = if best.2.is_finite() {
        ArcsineModel::new(best.0, best.1, hist.total() as f64, hist.bin_count(), cfg.bin_rule).ok()
    } else {
        None
    };
    if evaluations >= cfg.max_evaluations {
        return FitResult::failed(FitFailure::EvaluationCap, model, evaluations);
    }
    if !(best.2 <= cfg.fail_threshold) {
        return FitResult::failed(FitFailure::DistanceAboveThreshold, model, evaluations);
    }
    FitResult { model, d_stat: best.2, converged: true, failure: None, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adc::{build_histogram, AdcModel, SampleSequence};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hist(counts: Vec<u64>) -> IntensityHistogram {
        IntensityHistogram::from_counts(counts).unwrap()
    }

    /// Arcsine samples on codes `[lo, hi]` via x = sin^2(pi U / 2).
    fn arcsine_histogram(lo: f64, hi: f64, n: usize, seed: u64) -> IntensityHistogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; 1024];
        for _ in 0..n {
            let u: f64 = rng.random();
            let x = (PI * u / 2.0).sin().powi(2);
            let code = (lo + x * (hi - lo)).floor().clamp(0.0, 1023.0) as usize;
            counts[code] += 1;
        }
        hist(counts)
    }

    #[test]
    fn two_bin_support_splits_mass() {
        let m = arcsine_expected_counts(10.0, 12.0, 8.0, 32).unwrap();
        assert_eq!(m.expected[10], 4.0);
        assert_eq!(m.expected[11], 4.0);
        assert_eq!(m.expected.iter().filter(|&&a| a > 0.0).count(), 2);
    }

    #[test]
    fn full_range_peaks_at_edges() {
        let m = arcsine_expected_counts(0.0, 1024.0, 10_000.0, 1024).unwrap();
        let max = m.expected.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(m.expected[0], max);
        assert!((m.expected[1023] - max).abs() < 1e-9 * max);
        assert!((m.expected.iter().sum::<f64>() - 10_000.0).abs() < 1e-9 * 10_000.0);
        // symmetric about the center
        for i in 0..512 {
            assert!((m.expected[i] - m.expected[1023 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn support_errors() {
        assert!(matches!(arcsine_expected_counts(5.0, 5.0, 1.0, 16), Err(Error::InvalidSupport { .. })));
        assert!(matches!(arcsine_expected_counts(6.0, 2.0, 1.0, 16), Err(Error::InvalidSupport { .. })));
        // no bin center strictly inside (5.6, 5.9)
        assert!(matches!(
            arcsine_expected_counts(5.6, 5.9, 1.0, 16),
            Err(Error::DegenerateSupport { .. })
        ));
        assert!(matches!(
            arcsine_expected_counts(2000.0, 3000.0, 1.0, 1024),
            Err(Error::DegenerateSupport { .. })
        ));
    }

    #[test]
    fn cdf_rule_conserves_mass() {
        let m = ArcsineModel::new(-40.3, 700.2, 1234.0, 1024, BinRule::CdfDifference).unwrap();
        assert!((m.expected.iter().sum::<f64>() - 1234.0).abs() < 1e-9 * 1234.0);
        assert_eq!(m.expected[701], 0.0);
        assert!(m.expected[700] > 0.0);
    }

    #[test]
    fn stat_distance_examples() {
        let m = ArcsineModel { lo: 0.0, hi: 2.0, mass: 4.0, expected: vec![2.0, 2.0] };
        assert_eq!(stat_distance(&hist(vec![1, 3]), &m).unwrap(), 0.25);
        assert_eq!(stat_distance(&hist(vec![2, 2]), &m).unwrap(), 0.0);
        let disjoint = ArcsineModel { expected: vec![0.0, 4.0], ..m.clone() };
        assert_eq!(stat_distance(&hist(vec![4, 0]), &disjoint).unwrap(), 1.0);
    }

    #[test]
    fn stat_distance_errors() {
        let m = ArcsineModel { lo: 0.0, hi: 2.0, mass: 5.0, expected: vec![2.5, 2.5] };
        assert!(matches!(stat_distance(&hist(vec![1, 3]), &m), Err(Error::MassMismatch { .. })));
        let m = ArcsineModel { lo: 0.0, hi: 3.0, mass: 4.0, expected: vec![2.0, 1.0, 1.0] };
        assert!(matches!(stat_distance(&hist(vec![1, 3]), &m), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn min_entropy_examples() {
        assert!((min_entropy(&hist(vec![7; 1024])).unwrap() - 10.0).abs() < 1e-12);
        let mut one = vec![0; 1024];
        one[3] = 12;
        assert_eq!(min_entropy(&hist(one)).unwrap(), 0.0);
        assert_eq!(min_entropy(&hist(vec![2, 1, 1])).unwrap(), 1.0);
        assert_eq!(min_entropy(&hist(vec![0, 0])), Err(Error::EmptyInput));
    }

    #[test]
    fn recovers_planted_support() {
        let h = arcsine_histogram(100.0, 900.0, 1_000_000, 7);
        let fit = fit_arcsine(&h, &FitConfig::default());
        assert!(fit.converged);
        let (lo, hi) = fit.support().unwrap();
        assert!((lo - 100.0).abs() <= 5.0, "lo = {lo}");
        assert!((hi - 900.0).abs() <= 5.0, "hi = {hi}");
        assert!(fit.d_stat < 0.03, "d = {}", fit.d_stat);
    }

    #[test]
    fn single_bin_fails() {
        let mut counts = vec![0; 1024];
        counts[400] = 10_000;
        let fit = fit_arcsine(&hist(counts), &FitConfig::default());
        assert!(!fit.converged);
        assert_eq!(fit.d_stat, 1.0);
        assert_eq!(fit.failure, Some(FitFailure::DegenerateHistogram));
    }

    #[test]
    fn too_few_samples_fails() {
        let h = arcsine_histogram(100.0, 900.0, 50, 1);
        let fit = fit_arcsine(&h, &FitConfig::default());
        assert_eq!(fit.failure, Some(FitFailure::TooFewSamples));
        assert_eq!(fit.d_stat, 1.0);
    }

    /// Exhaustive search over integer supports; independent of the pattern search.
    fn grid_oracle(h: &IntensityHistogram, lo_range: std::ops::RangeInclusive<i32>, hi_range: std::ops::RangeInclusive<i32>) -> f64 {
        let mut best = 1.0f64;
        for lo in lo_range {
            for hi in hi_range.clone() {
                if hi - lo < 2 {
                    continue;
                }
                if let Ok(m) = arcsine_expected_counts(lo as f64, hi as f64, h.total() as f64, h.bin_count()) {
                    best = best.min(stat_distance(h, &m).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn uniform_histogram_matches_grid_oracle() {
        // Exact uniform counts: N = 1024 * 977 ~ 1e6.
        let h = hist(vec![977; 1024]);
        let fit = fit_arcsine(&h, &FitConfig::default());
        // coarse pass over the whole feasible plane, then 1-code resolution near its best
        let mut coarse = (1.0, 0, 0);
        for lo in (-512..=1000).step_by(16) {
            for hi in (lo + 16..=1536).step_by(16) {
                let Ok(m) = arcsine_expected_counts(lo as f64, hi as f64, h.total() as f64, 1024) else {
                    continue;
                };
                let d = stat_distance(&h, &m).unwrap();
                if d < coarse.0 {
                    coarse = (d, lo, hi);
                }
            }
        }
        let oracle = grid_oracle(&h, coarse.1 - 24..=coarse.1 + 24, coarse.2 - 24..=coarse.2 + 24);
        assert!(fit.converged);
        assert!((fit.d_stat - oracle).abs() <= 0.02, "fit {} oracle {}", fit.d_stat, oracle);
    }

    #[test]
    fn quantized_samples_through_adc() {
        // codes via the ADC path rather than direct flooring
        let adc = AdcModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| 0.2 + 0.6 * (PI * rng.random::<f64>() / 2.0).sin().powi(2))
            .collect();
        let seq = SampleSequence::from_intensities(&xs, &adc).unwrap();
        let h = build_histogram(&seq, &adc).unwrap();
        let fit = fit_arcsine(&h, &FitConfig::default());
        let (lo, hi) = fit.support().unwrap();
        assert!((lo - 204.8).abs() < 6.0 && (hi - 819.2).abs() < 6.0, "{lo} {hi}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stat_distance_bounds_and_symmetry(counts in prop::collection::vec(0u64..50, 8..40), lo in 0.0f64..4.0, width in 4.0f64..30.0) {
            let total: u64 = counts.iter().sum();
            prop_assume!(total > 0);
            let bins = counts.len();
            let h = hist(counts.clone());
            if let Ok(m) = arcsine_expected_counts(lo, lo + width, total as f64, bins) {
                let d = stat_distance(&h, &m).unwrap();
                prop_assert!((0.0..=1.0).contains(&d));
                // scale invariance
                let h2 = hist(counts.iter().map(|n| 2 * n).collect());
                let m2 = arcsine_expected_counts(lo, lo + width, 2.0 * total as f64, bins).unwrap();
                prop_assert!((stat_distance(&h2, &m2).unwrap() - d).abs() < 1e-12);
                prop_assert!((m.expected.iter().sum::<f64>() - total as f64).abs() < 1e-9 * total as f64);
            }
        }

        #[test]
        fn stat_distance_zero_iff_equal(counts in prop::collection::vec(0u64..20, 2..20)) {
            let total: u64 = counts.iter().sum();
            prop_assume!(total > 0);
            let m = ArcsineModel { lo: 0.0, hi: counts.len() as f64, mass: total as f64, expected: counts.iter().map(|&n| n as f64).collect() };
            prop_assert_eq!(stat_distance(&hist(counts.clone()), &m).unwrap(), 0.0);
        }

        #[test]
        fn min_entropy_bounds_and_flattening(counts in prop::collection::vec(0u64..40, 16..=16), add in 1u64..30) {
            let total: u64 = counts.iter().sum();
            prop_assume!(total > 0);
            let h = min_entropy(&hist(counts.clone())).unwrap();
            prop_assert!((0.0..=4.0 + 1e-12).contains(&h));
            let flatter = min_entropy(&hist(counts.iter().map(|n| n + add).collect())).unwrap();
            prop_assert!(flatter >= h - 1e-12);
        }

        #[test]
        fn fit_never_worse_than_supplied_start(lo in 80.0f64..160.0, width in 500.0f64..800.0, seed in 0u64..1000) {
            let h = arcsine_histogram(120.0, 820.0, 5_000, seed);
            let m0 = arcsine_expected_counts(lo, lo + width, h.total() as f64, 1024).unwrap();
            let d0 = stat_distance(&h, &m0).unwrap();
            prop_assume!(d0 < 0.9);
            let cfg = FitConfig { extra_starts: vec![(lo, lo + width)], ..FitConfig::default() };
            let fit = fit_arcsine(&h, &cfg);
            prop_assert!(fit.d_stat <= d0 + 1e-12, "fit {} > start {}", fit.d_stat, d0);
        }
    }
}
