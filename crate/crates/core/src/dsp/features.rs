use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::plane::Plane;
use super::stft::{stft, ComplexSpectrogram, StftConfig};
use super::wav::WaveBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Log-mel, delta, delta-delta.
    LogMel,
    /// Real and imaginary STFT parts, Nyquist bin dropped.
    ComplexChannels,
}

impl FeatureKind {
    pub fn channels(&self) -> usize {
        match self {
            FeatureKind::LogMel => 3,
            FeatureKind::ComplexChannels => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::LogMel => "log-mel",
            FeatureKind::ComplexChannels => "complex-channels",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "log-mel" => Some(FeatureKind::LogMel),
            "complex-channels" => Some(FeatureKind::ComplexChannels),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub kind: FeatureKind,
    pub sample_rate: u32,
    pub stft: StftConfig,
}

/// `F x T x C` block of finite `f32` values, row-major with channels
/// innermost: index `(f * T + t) * C + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    freq_bins: usize,
    frames: usize,
    channels: usize,
    data: Vec<f32>,
    meta: FeatureMeta,
}

impl FeatureTensor {
    pub fn new(
        freq_bins: usize,
        frames: usize,
        data: Vec<f32>,
        meta: FeatureMeta,
    ) -> Result<Self> {
        let channels = meta.kind.channels();
        if freq_bins == 0 || frames == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature tensor dims must be positive, got {freq_bins} x {frames}"
            )));
        }
        if data.len() != freq_bins * frames * channels {
            return Err(Error::ShapeMismatch(format!(
                "{freq_bins} x {frames} x {channels} tensor needs {} values, got {}",
                freq_bins * frames * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            freq_bins,
            frames,
            channels,
            data,
            meta,
        })
    }

    pub fn filled(freq_bins: usize, frames: usize, value: f32, meta: FeatureMeta) -> Result<Self> {
        let n = freq_bins * frames * meta.kind.channels();
        Self::new(freq_bins, frames, vec![value; n], meta)
    }

    pub fn from_planes(planes: &[Plane], meta: FeatureMeta) -> Result<Self> {
        let channels = meta.kind.channels();
        if planes.len() != channels {
            return Err(Error::ShapeMismatch(format!(
                "{} features need {channels} planes, got {}",
                meta.kind.name(),
                planes.len()
            )));
        }
        let (rows, cols) = (planes[0].rows(), planes[0].cols());
        if planes.iter().any(|p| p.rows() != rows || p.cols() != cols) {
            return Err(Error::ShapeMismatch("planes differ in shape".into()));
        }
        let mut data = Vec::with_capacity(rows * cols * channels);
        for f in 0..rows {
            for t in 0..cols {
                for p in planes {
                    data.push(p.get(f, t) as f32);
                }
            }
        }
        Self::new(rows, cols, data, meta)
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(F, T, C)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.freq_bins, self.frames, self.channels)
    }

    pub fn meta(&self) -> &FeatureMeta {
        &self.meta
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn index(&self, f: usize, t: usize, c: usize) -> usize {
        (f * self.frames + t) * self.channels + c
    }

    pub fn get(&self, f: usize, t: usize, c: usize) -> f32 {
        self.data[self.index(f, t, c)]
    }

    /// The `C` channel values at cell `(f, t)`.
    pub fn cell(&self, f: usize, t: usize) -> &[f32] {
        let i = self.index(f, t, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.meta == other.meta
    }

    /// Copy with `data` replaced; shape and metadata are kept.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.freq_bins, self.frames, data, self.meta)
    }

    /// Right-pad the time axis with zeros up to `frames`.
    pub fn pad_frames(&self, frames: usize) -> Result<Self> {
        if frames < self.frames {
            return Err(Error::ShapeMismatch(format!(
                "cannot pad {} frames down to {frames}",
                self.frames
            )));
        }
        let c = self.channels;
        let mut data = vec![0.0; self.freq_bins * frames * c];
        for f in 0..self.freq_bins {
            let src = f * self.frames * c;
            let dst = f * frames * c;
            data[dst..dst + self.frames * c]
                .copy_from_slice(&self.data[src..src + self.frames * c]);
        }
        Self::new(self.freq_bins, frames, data, self.meta)
    }
}

/// Split a spectrogram into real/imaginary channels, dropping the Nyquist
/// bin: `nfft/2 + 1` bins become `F = nfft/2`.
pub fn complex_to_channels(spec: &ComplexSpectrogram) -> Result<FeatureTensor> {
    let bins = spec.config().bins();
    if spec.freq_bins() != bins {
        return Err(Error::ShapeMismatch(format!(
            "expected {bins} bins, got {}",
            spec.freq_bins()
        )));
    }
    let kept = bins - 1;
    let frames = spec.frames();
    let mut data = Vec::with_capacity(kept * frames * 2);
    for f in 0..kept {
        for t in 0..frames {
            let c = spec.get(f, t);
            data.push(c.re as f32);
            data.push(c.im as f32);
        }
    }
    FeatureTensor::new(
        kept,
        frames,
        data,
        FeatureMeta {
            kind: FeatureKind::ComplexChannels,
            sample_rate: spec.sample_rate(),
            stft: *spec.config(),
        },
    )
}

/// Inverse of [`complex_to_channels`]; the Nyquist bin comes back as zero.
pub fn channels_to_complex(features: &FeatureTensor) -> Result<ComplexSpectrogram> {
    let meta = features.meta();
    if meta.kind != FeatureKind::ComplexChannels {
        return Err(Error::ShapeMismatch(format!(
            "expected complex-channels features, got {}",
            meta.kind.name()
        )));
    }
    let bins = meta.stft.bins();
    if features.freq_bins() + 1 != bins {
        return Err(Error::ShapeMismatch(format!(
            "{} bins do not match nfft {}",
            features.freq_bins(),
            meta.stft.nfft()
        )));
    }
    let frames = features.frames();
    let mut out = vec![Complex64::new(0.0, 0.0); bins * frames];
    for f in 0..features.freq_bins() {
        for t in 0..frames {
            let cell = features.cell(f, t);
            out[f * frames + t] = Complex64::new(cell[0] as f64, cell[1] as f64);
        }
    }
    ComplexSpectrogram::from_bins(out, frames, meta.stft, meta.sample_rate)
}

/// STFT then [`complex_to_channels`], checking the sample rate first.
pub fn complex_features(
    buffer: &WaveBuffer,
    cfg: &StftConfig,
    sample_rate: u32,
) -> Result<FeatureTensor> {
    if buffer.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: sample_rate,
            actual: buffer.sample_rate(),
        });
    }
    complex_to_channels(&stft(buffer, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_512(frames: usize, f: impl Fn(usize, usize) -> Complex64) -> ComplexSpectrogram {
        let cfg = StftConfig::new(512, 256).unwrap();
        let mut bins = Vec::new();
        for k in 0..257 {
            for t in 0..frames {
                bins.push(f(k, t));
            }
        }
        ComplexSpectrogram::from_bins(bins, frames, cfg, 16000).unwrap()
    }

    #[test]
    fn enhancement_shape() {
        let buf = WaveBuffer::new(vec![0.01; 32768], 16000).unwrap();
        let cfg = StftConfig::new(512, 256).unwrap();
        let feats = complex_features(&buf, &cfg, 16000).unwrap();
        assert_eq!(feats.shape(), (256, 129, 2));
    }

    #[test]
    fn real_spectrogram_has_zero_imag_channel() {
        let spec = spec_512(5, |k, t| Complex64::new((k * 7 + t) as f64 * 0.5, 0.0));
        let feats = complex_to_channels(&spec).unwrap();
        for f in 0..256 {
            for t in 0..5 {
                assert_eq!(feats.get(f, t, 1), 0.0);
            }
        }
    }

    #[test]
    fn channel_round_trip_drops_only_nyquist() {
        // Values exactly representable in f32 survive the round trip.
        let spec = spec_512(4, |k, t| Complex64::new(k as f64 + 0.25, -(t as f64) - 0.5));
        let back = channels_to_complex(&complex_to_channels(&spec).unwrap()).unwrap();
        for k in 0..256 {
            for t in 0..4 {
                assert_eq!(back.get(k, t), spec.get(k, t));
            }
        }
        for t in 0..4 {
            assert_eq!(back.get(256, t), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn rejects_non_finite() {
        let meta = FeatureMeta {
            kind: FeatureKind::ComplexChannels,
            sample_rate: 16000,
            stft: StftConfig::new(512, 256).unwrap(),
        };
        assert!(matches!(
            FeatureTensor::new(1, 1, vec![f32::NAN, 0.0], meta),
            Err(Error::NonFinite)
        ));
        assert!(FeatureTensor::new(1, 1, vec![0.0], meta).is_err());
    }

    #[test]
    fn pad_frames_appends_zeros() {
        let meta = FeatureMeta {
            kind: FeatureKind::ComplexChannels,
            sample_rate: 16000,
            stft: StftConfig::new(4, 2).unwrap(),
        };
        let x = FeatureTensor::new(2, 2, (1..=8).map(|v| v as f32).collect(), meta).unwrap();
        let p = x.pad_frames(3).unwrap();
        assert_eq!(p.shape(), (2, 3, 2));
        assert_eq!(p.data(), &[1., 2., 3., 4., 0., 0., 5., 6., 7., 8., 0., 0.]);
        assert!(x.pad_frames(1).is_err());
    }
}
