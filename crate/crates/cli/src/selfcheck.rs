//! `selfcheck`: built-in consistency suites comparing the library against
//! cell-by-cell reference computations.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use specmix_core::augment::{
    cutmix, cutout, mixup, specaugment, specmix_classify, Augmented, CutmixMode, LabeledExample,
    Provenance, SpecAugmentConfig,
};
use specmix_core::dsp::{
    apply_psm, istft_with_len, phase_sensitive_mask, stft, FeatureKind, FeatureMeta,
    FeatureTensor, StftConfig, WaveBuffer,
};
use specmix_core::mask::{build_specmix_mask, Axis, Band, GammaSpec, MaskVariant, TFMask};
use specmix_core::RngStream;

const SEED: u64 = 0x5eed_0001;
const UNION_CASES: u64 = 1000;
const LAMBDA_CASES: u64 = 10_000;
const STRATEGY_CASES: u64 = 200;
const PSM_CASES: u64 = 20;
const GAMMAS: [GammaSpec; 6] = [
    GammaSpec::Fixed(0.1),
    GammaSpec::Fixed(0.3),
    GammaSpec::Fixed(0.5),
    GammaSpec::Fixed(0.7),
    GammaSpec::Fixed(1.0),
    GammaSpec::Uniform,
];
const VARIANTS: [MaskVariant; 3] = [MaskVariant::Full, MaskVariant::TimeOnly, MaskVariant::FreqOnly];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelfcheckOptions {
    /// Corrupt one cell of the first generated mask so the union suite must
    /// report a failure.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfcheckReport {
    pub suites: Vec<SuiteResult>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<28} {:>7} {:>7} {:>9}  status", "suite", "cases", "failed", "ms");
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{:<28} {:>7} {:>7} {:>9}  {}",
                s.name,
                s.cases,
                s.failures,
                s.elapsed.as_millis(),
                if s.passed() { "ok" } else { "FAILED" }
            );
            if let Some(msg) = &s.first_failure {
                let _ = writeln!(out, "    first failure: {msg}");
            }
        }
        out
    }
}

struct Suite {
    name: String,
    cases: u64,
    failures: u64,
    first_failure: Option<String>,
    start: Instant,
}

impl Suite {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            failures: 0,
            first_failure: None,
            start: Instant::now(),
        }
    }

    fn record(&mut self, outcome: Result<(), String>) {
        self.cases += 1;
        if let Err(msg) = outcome {
            self.failures += 1;
            self.first_failure.get_or_insert(format!("case {}: {msg}", self.cases - 1));
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            first_failure: self.first_failure,
            elapsed: self.start.elapsed(),
        }
    }
}

fn band_covers(b: &Band, f: usize, t: usize) -> bool {
    let i = match b.axis {
        Axis::Frequency => f,
        Axis::Time => t,
    };
    i >= b.start && i < b.start + b.width
}

fn oracle_grid(f_bins: usize, frames: usize, bands: &[Band]) -> Vec<u8> {
    let mut grid = vec![0u8; f_bins * frames];
    for f in 0..f_bins {
        for t in 0..frames {
            grid[f * frames + t] = bands.iter().any(|b| band_covers(b, f, t)) as u8;
        }
    }
    grid
}

fn random_mask(case: u64) -> TFMask {
    let mut pick = RngStream::new(SEED, case);
    let f = 1 + pick.below(64) as usize;
    let t = 1 + pick.below(64) as usize;
    let gamma = GAMMAS[pick.below(GAMMAS.len() as u64) as usize];
    let variant = VARIANTS[pick.below(VARIANTS.len() as u64) as usize];
    build_specmix_mask(f, t, &gamma, variant, &mut RngStream::new(SEED + 1, case))
        .expect("positive dims")
}

fn union_suite(inject_fault: bool) -> SuiteResult {
    let mut suite = Suite::new("mask union");
    for case in 0..UNION_CASES {
        let mask = random_mask(case);
        let mut grid = mask.to_u8_grid();
        if inject_fault && case == 0 {
            grid[0] ^= 1;
        }
        let expected = oracle_grid(mask.freq_bins(), mask.frames(), mask.bands());
        suite.record(match grid.iter().zip(&expected).position(|(a, b)| a != b) {
            None => Ok(()),
            Some(i) => Err(format!(
                "{} x {} mask differs at cell ({}, {})",
                mask.freq_bins(),
                mask.frames(),
                i / mask.frames(),
                i % mask.frames()
            )),
        });
    }
    suite.finish()
}

fn lambda_suite() -> SuiteResult {
    let mut suite = Suite::new("lambda exactness");
    for case in 0..LAMBDA_CASES {
        let mask = random_mask(case);
        let cells = (mask.freq_bins() * mask.frames()) as u64;
        let ones = oracle_grid(mask.freq_bins(), mask.frames(), mask.bands())
            .iter()
            .map(|&v| v as u64)
            .sum::<u64>();
        let frac = mask.fraction();
        let comp = mask.complement().fraction();
        suite.record(if frac.ones != ones || frac.cells != cells {
            Err(format!("fraction {}/{} vs counted {ones}/{cells}", frac.ones, frac.cells))
        } else if frac.value() != ones as f64 / cells as f64 {
            Err(format!("value {} vs {ones}/{cells}", frac.value()))
        } else if comp.ones + frac.ones != cells {
            Err(format!("complement has {} ones", comp.ones))
        } else {
            Ok(())
        });
    }
    suite.finish()
}

fn noise(len: usize, rate: u32, rng: &mut RngStream) -> WaveBuffer {
    let samples = (0..len).map(|_| (rng.uniform() * 2.0 - 1.0) as f32 * 0.5).collect();
    WaveBuffer::new(samples, rate).expect("valid buffer")
}

fn stft_suite() -> SuiteResult {
    let mut suite = Suite::new("stft round trip");
    let settings = [(2048, 1024, 44_100, 44_100), (512, 256, 16_000, 16_384)];
    for (k, &(nfft, hop, rate, len)) in settings.iter().enumerate() {
        let cfg = StftConfig::new(nfft, hop).expect("valid config");
        for s in 0..3 {
            let mut rng = RngStream::new(SEED + 2, (k * 3 + s) as u64);
            let x = noise(len - s * 37, rate, &mut rng);
            let outcome = stft(&x, &cfg)
                .and_then(|spec| istft_with_len(&spec, x.len()))
                .map_err(|e| e.to_string())
                .and_then(|y| {
                    let err = x
                        .samples()
                        .iter()
                        .zip(y.samples())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f32, f32::max);
                    if err <= 1e-4 {
                        Ok(())
                    } else {
                        Err(format!("nfft {nfft} hop {hop}: max error {err:e}"))
                    }
                });
            suite.record(outcome);
        }
    }
    suite.finish()
}

fn psm_case(case: u64) -> Result<(), String> {
    let cfg = StftConfig::new(512, 256).expect("valid config");
    let mut rng = RngStream::new(SEED + 3, case);
    let clean = noise(4096, 16_000, &mut rng);
    let extra = noise(4096, 16_000, &mut rng);
    let noisy_samples: Vec<f32> =
        clean.samples().iter().zip(extra.samples()).map(|(s, n)| s + n).collect();
    let noisy = WaveBuffer::new(noisy_samples, 16_000).map_err(|e| e.to_string())?;
    let y = stft(&noisy, &cfg).map_err(|e| e.to_string())?;
    let s = stft(&clean, &cfg).map_err(|e| e.to_string())?;

    let identity = phase_sensitive_mask(&y, &y).map_err(|e| e.to_string())?;
    for (i, &m) in identity.data().iter().enumerate() {
        let expected = if y.bins()[i].norm() == 0.0 { 0.0 } else { 1.0 };
        if (m - expected).abs() > 1e-12 {
            return Err(format!("mask(Y, Y) is {m} at bin {i}"));
        }
    }
    let rebuilt = apply_psm(&y, &identity).map_err(|e| e.to_string())?;
    if rebuilt != y {
        return Err("applying mask(Y, Y) changed Y".into());
    }

    let quiet = WaveBuffer::new(vec![0.0; clean.len()], 16_000).map_err(|e| e.to_string())?;
    let silent = stft(&quiet, &cfg).map_err(|e| e.to_string())?;
    let zero = phase_sensitive_mask(&y, &silent).map_err(|e| e.to_string())?;
    if zero.data().iter().any(|&m| m != 0.0) {
        return Err("mask(Y, 0) is not zero".into());
    }

    // Rectangular form: Re(S conj(Y)) / |Y|^2.
    let m = phase_sensitive_mask(&y, &s).map_err(|e| e.to_string())?;
    for (i, (&yb, &sb)) in y.bins().iter().zip(s.bins()).enumerate() {
        let p = yb.norm_sqr();
        let expected = if p == 0.0 {
            0.0
        } else {
            ((sb.re * yb.re + sb.im * yb.im) / p).clamp(0.0, 1.0)
        };
        if (m.data()[i] - expected).abs() > 1e-9 {
            return Err(format!("bin {i}: mask {} vs {expected}", m.data()[i]));
        }
    }
    Ok(())
}

fn psm_suite() -> SuiteResult {
    let mut suite = Suite::new("psm identities");
    for case in 0..PSM_CASES {
        suite.record(psm_case(case));
    }
    suite.finish()
}

fn random_example(f: usize, t: usize, k: usize, rng: &mut RngStream) -> LabeledExample {
    let meta = FeatureMeta {
        kind: FeatureKind::LogMel,
        sample_rate: 44_100,
        stft: StftConfig::new(2048, 1024).expect("valid config"),
    };
    let data = (0..f * t * 3).map(|_| (rng.uniform() * 20.0 - 10.0) as f32).collect();
    let x = FeatureTensor::new(f, t, data, meta).expect("finite data");
    LabeledExample::one_hot(x, rng.below(k as u64) as usize, k).expect("valid label")
}

/// Expected feature value of one output cell, recomputed from the inputs
/// and the logged provenance.
fn naive_cell(p: &Provenance, a: &FeatureTensor, b: &FeatureTensor, f: usize, t: usize, c: usize) -> f32 {
    use specmix_core::augment::Strategy::*;
    match p.strategy {
        SpecMix => {
            if p.bands.iter().any(|band| band_covers(band, f, t)) {
                a.get(f, t, c)
            } else {
                b.get(f, t, c)
            }
        }
        Cutmix => {
            let r = p.cutmix.expect("cutmix region logged");
            let d = r.dest();
            if d.contains(f, t) {
                a.get(f - r.dest_f + r.source.f0, t - r.dest_t + r.source.t0, c)
            } else {
                b.get(f, t, c)
            }
        }
        Mixup => {
            let l = p.lambda.expect("lambda logged");
            (l * a.get(f, t, c) as f64 + (1.0 - l) * b.get(f, t, c) as f64) as f32
        }
        SpecAugment => {
            if p.bands.iter().any(|band| band_covers(band, f, t)) {
                0.0
            } else {
                a.get(f, t, c)
            }
        }
        Cutout => {
            if p.cutout.expect("cutout logged").contains(f, t) {
                0.0
            } else {
                a.get(f, t, c)
            }
        }
        RandomPixel | None => a.get(f, t, c),
    }
}

fn naive_lambda(p: &Provenance) -> Option<f64> {
    use specmix_core::augment::Strategy::*;
    let cells = (p.freq_bins * p.frames) as f64;
    match p.strategy {
        SpecMix => {
            let grid = oracle_grid(p.freq_bins, p.frames, &p.bands);
            Some(grid.iter().map(|&v| v as f64).sum::<f64>() / cells)
        }
        Cutmix => p.cutmix.map(|r| r.source.area() as f64 / cells),
        Mixup => p.lambda,
        _ => Option::None,
    }
}

fn check_against_naive(
    a: &LabeledExample,
    b: &LabeledExample,
    out: &Augmented<LabeledExample>,
) -> Result<(), String> {
    let p = &out.provenance;
    let x = out.example.features();
    let (fa, fb) = (a.features(), b.features());
    for f in 0..p.freq_bins {
        for t in 0..p.frames {
            for c in 0..x.channels() {
                let want = naive_cell(p, fa, fb, f, t, c);
                if x.get(f, t, c) != want {
                    return Err(format!("cell ({f}, {t}, {c}): {} vs {want}", x.get(f, t, c)));
                }
            }
        }
    }
    let expected_label: Vec<f64> = match naive_lambda(p) {
        Some(l) => {
            if p.lambda.map_or(true, |v| (v - l).abs() > 1e-12) {
                return Err(format!("lambda {:?} vs recomputed {l}", p.lambda));
            }
            a.label().iter().zip(b.label()).map(|(x, y)| l * x + (1.0 - l) * y).collect()
        }
        Option::None => a.label().to_vec(),
    };
    for (k, (got, want)) in out.example.label().iter().zip(&expected_label).enumerate() {
        if (got - want).abs() > 1e-12 {
            return Err(format!("label[{k}] {got} vs {want}"));
        }
    }
    Ok(())
}

type Runner = fn(&LabeledExample, &LabeledExample, &mut RngStream) -> specmix_core::Result<Augmented<LabeledExample>>;

fn strategy_runners() -> Vec<(&'static str, Runner)> {
    vec![
        ("specmix", |a, b, rng| {
            let g = GAMMAS[rng.below(GAMMAS.len() as u64) as usize];
            specmix_classify(a, b, &g, MaskVariant::Full, rng)
        }),
        ("cutmix aligned", |a, b, rng| cutmix(a, b, CutmixMode::Aligned, rng)),
        ("cutmix shifted", |a, b, rng| cutmix(a, b, CutmixMode::Shifted, rng)),
        ("mixup", |a, b, rng| mixup(a, b, 0.2 + rng.uniform() * 2.0, rng)),
        ("specaugment", |a, _, rng| {
            let (f, t, _) = a.features().shape();
            let cfg = SpecAugmentConfig {
                freq_masks: rng.below(3) as usize,
                max_freq_width: rng.below(f as u64 + 1) as usize,
                time_masks: rng.below(3) as usize,
                max_time_width: rng.below(t as u64 + 1) as usize,
            };
            specaugment(a, &cfg, rng)
        }),
        ("cutout", |a, _, rng| {
            let (f, t, _) = a.features().shape();
            let side = rng.below(f.min(t) as u64 + 1) as usize;
            cutout(a, side, rng)
        }),
    ]
}

fn strategy_suites() -> Vec<SuiteResult> {
    strategy_runners()
        .into_iter()
        .enumerate()
        .map(|(s, (name, run))| {
            let mut suite = Suite::new(format!("{name} vs reference"));
            for case in 0..STRATEGY_CASES {
                let mut rng = RngStream::new(SEED + 10 + s as u64, case);
                let f = 1 + rng.below(32) as usize;
                let t = 1 + rng.below(32) as usize;
                let k = 1 + rng.below(5) as usize;
                let a = random_example(f, t, k, &mut rng);
                let b = random_example(f, t, k, &mut rng);
                let outcome = run(&a, &b, &mut rng)
                    .map_err(|e| e.to_string())
                    .and_then(|out| check_against_naive(&a, &b, &out));
                suite.record(outcome);
            }
            suite.finish()
        })
        .collect()
}

pub fn run_selfcheck(opts: &SelfcheckOptions) -> SelfcheckReport {
    let mut suites = vec![
        union_suite(opts.inject_fault),
        lambda_suite(),
        stft_suite(),
        psm_suite(),
    ];
    suites.extend(strategy_suites());
    SelfcheckReport { suites }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_grid_by_hand() {
        let bands = [
            Band { axis: Axis::Frequency, start: 1, width: 1 },
            Band { axis: Axis::Time, start: 2, width: 2 },
        ];
        assert_eq!(oracle_grid(3, 4, &bands), vec![0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 1, 1]);
    }

    #[test]
    fn injected_fault_fails_union_only() {
        let clean = union_suite(false);
        let faulty = union_suite(true);
        assert!(clean.passed());
        assert_eq!(faulty.failures, 1);
        assert_eq!(faulty.cases, UNION_CASES);
    }
}
