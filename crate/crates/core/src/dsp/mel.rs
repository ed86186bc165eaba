//! HTK mel filterbank, log-mel spectrogram and regression deltas.

use serde::{Deserialize, Serialize};

use super::features::{FeatureKind, FeatureMeta, FeatureTensor};
use super::plane::Plane;
use super::stft::{stft, StftConfig};
use super::wav::WaveBuffer;
use crate::{Error, Result};

/// Floor added to mel power before the log.
pub const LOG_FLOOR: f64 = 1e-10;

const DELTA_WIDTH: usize = 2;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with peak weight 1, evenly spaced on the HTK mel
/// scale between 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, nfft: usize, n_mels: usize) -> Result<Self> {
        if n_mels == 0 || n_mels > nfft / 2 {
            return Err(Error::InvalidParameter(format!(
                "n_mels {n_mels} must be in 1..={}",
                nfft / 2
            )));
        }
        let n_bins = nfft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / nfft as f64;

        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let rising = (f - lo) / (center - lo);
                let falling = (hi - f) / (hi - center);
                weights[m * n_bins + k] = rising.min(falling).max(0.0);
            }
        }
        Ok(Self {
            n_mels,
            n_bins,
            weights,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn filter(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        (0..self.n_mels)
            .map(|m| {
                self.filter(m)
                    .iter()
                    .zip(power)
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelSettings {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub stft: StftConfig,
}

impl MelSettings {
    /// 44.1 kHz, nfft 2048, hop 1024, 128 mels.
    pub fn classification() -> Self {
        Self {
            sample_rate: 44_100,
            n_mels: 128,
            stft: StftConfig::new(2048, 1024).expect("valid config"),
        }
    }
}

/// Log-mel spectrogram with delta and delta-delta channels: `[n_mels, T, 3]`.
pub fn mel_features(buffer: &WaveBuffer, settings: &MelSettings) -> Result<FeatureTensor> {
    if buffer.sample_rate() != settings.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: settings.sample_rate,
            actual: buffer.sample_rate(),
        });
    }
    let bank = MelFilterbank::new(
        settings.sample_rate,
        settings.stft.nfft(),
        settings.n_mels,
    )?;
    let spec = stft(buffer, &settings.stft)?;
    let frames = spec.frames();

    let mut log_mel = vec![0.0; settings.n_mels * frames];
    for t in 0..frames {
        let power: Vec<f64> = spec.frame(t).map(|c| c.norm_sqr()).collect();
        for (m, e) in bank.apply(&power).into_iter().enumerate() {
            log_mel[m * frames + t] = (e + LOG_FLOOR).ln();
        }
    }
    let c0 = Plane::new(settings.n_mels, frames, log_mel)?;
    let c1 = delta(&c0, DELTA_WIDTH);
    let c2 = delta(&c1, DELTA_WIDTH);

    FeatureTensor::from_planes(
        &[c0, c1, c2],
        FeatureMeta {
            kind: FeatureKind::LogMel,
            sample_rate: settings.sample_rate,
            stft: settings.stft,
        },
    )
}

/// Regression delta along the time axis with replicate padding:
/// `d_t = Σ_{n=1..N} n (c_{t+n} - c_{t-n}) / (2 Σ n²)`.
pub fn delta(plane: &Plane, half_width: usize) -> Plane {
    let n = half_width.max(1);
    let frames = plane.cols();
    let denom = 2.0 * (1..=n).map(|k| (k * k) as f64).sum::<f64>();
    Plane::from_fn(plane.rows(), frames, |r, t| {
        let row = plane.row(r);
        let at = |i: isize| row[i.clamp(0, frames as isize - 1) as usize];
        let num: f64 = (1..=n)
            .map(|k| {
                let k = k as isize;
                k as f64 * (at(t as isize + k) - at(t as isize - k))
            })
            .sum();
        num / denom
    })
}
