//! Reference computations that share no code with the library.

use specmix_core::augment::{Provenance, Strategy};
use specmix_core::dsp::FeatureTensor;
use specmix_core::mask::{Axis, Band};

/// SplitMix64: a generator unrelated to the library's ChaCha streams.
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform on `0..n` by rejection from the top bits.
    pub fn below(&mut self, n: u64) -> u64 {
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }
}

pub fn in_band(b: &Band, f: usize, t: usize) -> bool {
    let i = if b.axis == Axis::Frequency { f } else { t };
    b.start <= i && i < b.start + b.width
}

/// Per-pixel band membership, row-major over `f`.
pub fn membership(f_bins: usize, frames: usize, bands: &[Band]) -> Vec<u8> {
    (0..f_bins * frames)
        .map(|i| bands.iter().any(|b| in_band(b, i / frames, i % frames)) as u8)
        .collect()
}

/// One mask of the SpecMix generative process with a fixed band width,
/// drawn with `rng` and materialised pixel by pixel; returns the ones
/// count and the band counts per axis.
pub fn brute_force_mask(
    f_bins: usize,
    frames: usize,
    gamma: f64,
    rng: &mut SplitMix64,
) -> (u64, usize, usize) {
    let mut draw = |len: usize| -> Vec<(usize, usize)> {
        let n = rng.below(4) as usize;
        (0..n)
            .map(|_| {
                let start = (rng.uniform() * len as f64) as usize;
                let width = ((gamma * len as f64).round() as usize).min(len - start);
                (start, start + width)
            })
            .collect()
    };
    let fb = draw(f_bins);
    let tb = draw(frames);
    let mut ones = 0;
    for f in 0..f_bins {
        let row = fb.iter().any(|&(s, e)| s <= f && f < e);
        for t in 0..frames {
            if row || tb.iter().any(|&(s, e)| s <= t && t < e) {
                ones += 1;
            }
        }
    }
    (ones, fb.len(), tb.len())
}

/// Expected value of output cell `(f, t, c)` given both inputs and the
/// logged provenance.
pub fn expected_cell(
    p: &Provenance,
    a: &FeatureTensor,
    b: &FeatureTensor,
    f: usize,
    t: usize,
    c: usize,
) -> f32 {
    match p.strategy {
        Strategy::SpecMix => {
            if p.bands.iter().any(|band| in_band(band, f, t)) {
                a.get(f, t, c)
            } else {
                b.get(f, t, c)
            }
        }
        Strategy::Cutmix => {
            let r = p.cutmix.unwrap();
            let (df, dt) = (r.dest_f, r.dest_t);
            let inside = f >= df && f < df + r.source.height && t >= dt && t < dt + r.source.width;
            if inside {
                a.get(r.source.f0 + (f - df), r.source.t0 + (t - dt), c)
            } else {
                b.get(f, t, c)
            }
        }
        Strategy::Mixup => {
            let l = p.lambda.unwrap();
            (l * a.get(f, t, c) as f64 + (1.0 - l) * b.get(f, t, c) as f64) as f32
        }
        Strategy::SpecAugment => {
            if p.bands.iter().any(|band| in_band(band, f, t)) {
                0.0
            } else {
                a.get(f, t, c)
            }
        }
        Strategy::Cutout => {
            let r = p.cutout.unwrap();
            let inside = f >= r.f0 && f < r.f0 + r.height && t >= r.t0 && t < r.t0 + r.width;
            if inside {
                0.0
            } else {
                a.get(f, t, c)
            }
        }
        Strategy::RandomPixel | Strategy::None => a.get(f, t, c),
    }
}

/// λ recomputed from the logged geometry, or `None` when labels are not
/// mixed.
pub fn expected_lambda(p: &Provenance) -> Option<f64> {
    let cells = (p.freq_bins * p.frames) as f64;
    match p.strategy {
        Strategy::SpecMix => {
            let ones: u64 = membership(p.freq_bins, p.frames, &p.bands).iter().map(|&v| v as u64).sum();
            Some(ones as f64 / cells)
        }
        Strategy::Cutmix => p.cutmix.map(|r| (r.source.height * r.source.width) as f64 / cells),
        Strategy::Mixup => p.lambda,
        _ => None,
    }
}

pub fn expected_label(lambda: f64, ya: &[f64], yb: &[f64]) -> Vec<f64> {
    ya.iter().zip(yb).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect()
}
