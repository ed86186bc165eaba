//! Center-padded short-time Fourier transform and its overlap-add inverse.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::wav::WaveBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2πn/N)`.
    Hann,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::Hann => "hann",
        }
    }

    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StftConfig {
    nfft: usize,
    hop: usize,
    window: Window,
}

impl StftConfig {
    pub fn new(nfft: usize, hop: usize) -> Result<Self> {
        Self::with_window(nfft, hop, Window::Hann)
    }

    pub fn with_window(nfft: usize, hop: usize, window: Window) -> Result<Self> {
        if nfft < 2 || !nfft.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "nfft {nfft} must be a power of two >= 2"
            )));
        }
        if hop == 0 || hop > nfft {
            return Err(Error::InvalidConfig(format!(
                "hop {hop} must be in 1..={nfft}"
            )));
        }
        Ok(Self { nfft, hop, window })
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }
}

/// Number of center-aligned frames for a signal of `len` samples.
pub fn frame_count(len: usize, cfg: &StftConfig) -> usize {
    // Padded length is len + nfft, so 1 + (len + nfft - nfft) / hop.
    1 + len / cfg.hop
}

/// Complex STFT, stored frequency-major: `bins[f * frames + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    bins: Vec<Complex64>,
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn from_bins(
        bins: Vec<Complex64>,
        frames: usize,
        config: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        if frames == 0 || bins.len() != config.bins() * frames {
            return Err(Error::ShapeMismatch(format!(
                "expected {} x {} bins, got {} values",
                config.bins(),
                frames,
                bins.len()
            )));
        }
        Ok(Self {
            bins,
            frames,
            config,
            sample_rate,
        })
    }

    pub fn zeros(frames: usize, config: StftConfig, sample_rate: u32) -> Result<Self> {
        Self::from_bins(
            vec![Complex64::new(0.0, 0.0); config.bins() * frames],
            frames,
            config,
            sample_rate,
        )
    }

    pub fn freq_bins(&self) -> usize {
        self.config.bins()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn get(&self, f: usize, t: usize) -> Complex64 {
        self.bins[f * self.frames + t]
    }

    pub fn frame(&self, t: usize) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.freq_bins()).map(move |f| self.get(f, t))
    }

    pub(crate) fn same_layout(&self, other: &Self) -> bool {
        self.frames == other.frames
            && self.config == other.config
            && self.sample_rate == other.sample_rate
    }

    pub(crate) fn map_bins(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        Self {
            bins: self
                .bins
                .iter()
                .enumerate()
                .map(|(i, &c)| f(i, c))
                .collect(),
            ..self.clone()
        }
    }
}

fn reflect(idx: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = idx;
    if i < 0 {
        i = -i;
    }
    if i >= len {
        i = 2 * (len - 1) - i;
    }
    i as usize
}

pub fn stft(buffer: &WaveBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let len = buffer.len();
    let nfft = cfg.nfft;
    let pad = nfft / 2;
    // Reflection by nfft/2 needs at least nfft/2 + 1 samples.
    if len <= pad {
        return Err(Error::SignalTooShort { len, nfft });
    }
    let samples = buffer.samples();
    let padded: Vec<f64> = (0..len + nfft)
        .map(|i| samples[reflect(i as isize - pad as isize, len)] as f64)
        .collect();

    let window = cfg.window.coefficients(nfft);
    let frames = frame_count(len, cfg);
    let bins = cfg.bins();
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut frame = vec![Complex64::new(0.0, 0.0); nfft];
    let mut out = vec![Complex64::new(0.0, 0.0); bins * frames];

    for t in 0..frames {
        let start = t * cfg.hop;
        for (n, slot) in frame.iter_mut().enumerate() {
            *slot = Complex64::new(padded[start + n] * window[n], 0.0);
        }
        fft.process_with_scratch(&mut frame, &mut scratch);
        for f in 0..bins {
            out[f * frames + t] = frame[f];
        }
    }

    ComplexSpectrogram::from_bins(out, frames, *cfg, buffer.sample_rate())
}

/// Sum of squared windows over one hop period; zero anywhere means some
/// output sample is not recoverable.
fn check_invertible(cfg: &StftConfig, window: &[f64]) -> Result<()> {
    let envelope: Vec<f64> = (0..cfg.hop)
        .map(|n| {
            (n..cfg.nfft)
                .step_by(cfg.hop)
                .map(|i| window[i] * window[i])
                .sum()
        })
        .collect();
    let max = envelope.iter().cloned().fold(0.0, f64::max);
    let min = envelope.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-10 * max {
        return Err(Error::NotInvertible {
            nfft: cfg.nfft,
            hop: cfg.hop,
        });
    }
    Ok(())
}

/// Inverse STFT producing `(frames - 1) * hop` samples.
pub fn istft(spec: &ComplexSpectrogram) -> Result<WaveBuffer> {
    istft_with_len(spec, (spec.frames - 1).max(1) * spec.config.hop)
}

/// Inverse STFT trimmed or zero-extended to exactly `len` samples.
pub fn istft_with_len(spec: &ComplexSpectrogram, len: usize) -> Result<WaveBuffer> {
    let cfg = spec.config;
    let nfft = cfg.nfft;
    let window = cfg.window.coefficients(nfft);
    check_invertible(&cfg, &window)?;

    let frames = spec.frames;
    let total = (frames - 1) * cfg.hop + nfft;
    let mut acc = vec![0.0f64; total];
    let mut norm = vec![0.0f64; total];

    let ifft = FftPlanner::new().plan_fft_inverse(nfft);
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut frame = vec![Complex64::new(0.0, 0.0); nfft];
    let half = nfft / 2;

    for t in 0..frames {
        for (f, slot) in frame.iter_mut().enumerate().take(half + 1) {
            *slot = spec.get(f, t);
        }
        frame[0].im = 0.0;
        frame[half].im = 0.0;
        for f in 1..half {
            frame[nfft - f] = frame[f].conj();
        }
        ifft.process_with_scratch(&mut frame, &mut scratch);
        let start = t * cfg.hop;
        for n in 0..nfft {
            acc[start + n] += frame[n].re / nfft as f64 * window[n];
            norm[start + n] += window[n] * window[n];
        }
    }

    let tiny = f64::MIN_POSITIVE.sqrt();
    let samples: Vec<f32> = (0..len)
        .map(|i| {
            let j = i + half;
            if j < total && norm[j] > tiny {
                (acc[j] / norm[j]) as f32
            } else {
                0.0
            }
        })
        .collect();
    WaveBuffer::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn noise(len: usize, seed: u64, rate: u32) -> WaveBuffer {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        WaveBuffer::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), rate).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(500, 250).is_err());
        assert!(StftConfig::new(512, 0).is_err());
        assert!(StftConfig::new(512, 513).is_err());
        assert!(StftConfig::new(512, 512).is_ok());
    }

    #[test]
    fn frame_count_ten_seconds() {
        let cfg = StftConfig::new(2048, 1024).unwrap();
        assert_eq!(frame_count(441_000, &cfg), 431);
        let spec = stft(&WaveBuffer::new(vec![0.0; 441_000], 44100).unwrap(), &cfg).unwrap();
        assert_eq!(spec.frames(), 431);
        assert_eq!(spec.freq_bins(), 1025);
    }

    #[test]
    fn zero_in_zero_out() {
        let cfg = StftConfig::new(512, 256).unwrap();
        let spec = stft(&WaveBuffer::new(vec![0.0; 4000], 16000).unwrap(), &cfg).unwrap();
        assert!(spec.bins().iter().all(|c| c.norm() == 0.0));
        let back = istft(&spec).unwrap();
        assert!(back.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn bin_centered_sinusoid_lands_in_main_lobe() {
        let cfg = StftConfig::new(512, 256).unwrap();
        let rate = 16000;
        let k = 37;
        let freq = k as f64 * rate as f64 / 512.0;
        let samples: Vec<f32> = (0..8000)
            .map(|n| (2.0 * PI * freq * n as f64 / rate as f64).sin() as f32)
            .collect();
        let spec = stft(&WaveBuffer::new(samples, rate).unwrap(), &cfg).unwrap();
        for t in 2..spec.frames() - 2 {
            let energy: Vec<f64> = spec.frame(t).map(|c| c.norm_sqr()).collect();
            let total: f64 = energy.iter().sum();
            let lobe = energy[k - 1] + energy[k] + energy[k + 1];
            let peak = energy
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(peak, k);
            assert!(lobe / total >= 0.99, "frame {t}: {}", lobe / total);
            // Periodic Hann: coefficients 1/2 at k, 1/4 at k±1 => 2/3 of lobe energy at k.
            assert!((energy[k] / lobe - 2.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::new(256, 128).unwrap();
        let buf = noise(3000, 3, 8000);
        let spec = stft(&buf, &cfg).unwrap();
        let window = cfg.window().coefficients(256);
        let s = buf.samples();
        for t in 0..spec.frames() {
            let half: Vec<f64> = spec.frame(t).map(|c| c.norm_sqr()).collect();
            let full = half[0] + half[128] + 2.0 * half[1..128].iter().sum::<f64>();
            let time_energy: f64 = (0..256)
                .map(|n| {
                    let idx = reflect((t * 128 + n) as isize - 128, s.len());
                    (s[idx] as f64 * window[n]).powi(2)
                })
                .sum();
            let rel = (full / 256.0 - time_energy).abs() / time_energy;
            assert!(rel < 1e-6, "frame {t}: {rel}");
        }
    }

    #[test]
    fn round_trip_interior() {
        for (nfft, hop, rate) in [(2048, 1024, 44100), (512, 256, 16000)] {
            let cfg = StftConfig::new(nfft, hop).unwrap();
            let buf = noise(20_000, nfft as u64, rate);
            let back = istft_with_len(&stft(&buf, &cfg).unwrap(), buf.len()).unwrap();
            let x = buf.samples();
            let y = back.samples();
            let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
            let err = (nfft..x.len() - nfft)
                .map(|i| (x[i] - y[i]).abs() as f64)
                .fold(0.0, f64::max);
            assert!(err / peak <= 1e-4, "nfft {nfft}: {}", err / peak);
        }
    }

    #[test]
    fn no_overlap_hann_is_rejected() {
        let cfg = StftConfig::new(512, 512).unwrap();
        let spec = stft(&noise(4096, 1, 16000), &cfg).unwrap();
        assert!(matches!(istft(&spec), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn too_short_for_reflection() {
        let cfg = StftConfig::new(512, 256).unwrap();
        let buf = WaveBuffer::new(vec![0.1; 256], 16000).unwrap();
        assert!(matches!(stft(&buf, &cfg), Err(Error::SignalTooShort { .. })));
        let buf = WaveBuffer::new(vec![0.1; 257], 16000).unwrap();
        assert_eq!(stft(&buf, &cfg).unwrap().frames(), 2);
    }
}
