//! Phase-sensitive mask target for enhancement.

use super::plane::Plane;
use super::stft::ComplexSpectrogram;
use crate::{Error, Result};

/// `(|S| / |Y|) cos(θ_S - θ_Y)` clipped to `[0, 1]`, zero where `|Y| = 0`.
/// The mask is `freq_bins x frames`.
pub fn phase_sensitive_mask(
    noisy: &ComplexSpectrogram,
    clean: &ComplexSpectrogram,
) -> Result<Plane> {
    if !noisy.same_layout(clean) {
        return Err(Error::ShapeMismatch(format!(
            "noisy {} x {} vs clean {} x {}",
            noisy.freq_bins(),
            noisy.frames(),
            clean.freq_bins(),
            clean.frames()
        )));
    }
    let values = noisy
        .bins()
        .iter()
        .zip(clean.bins())
        .map(|(y, s)| {
            let ny = y.norm();
            if ny == 0.0 {
                return 0.0;
            }
            let ratio = s.norm() / ny;
            (ratio * (s.arg() - y.arg()).cos()).clamp(0.0, 1.0)
        })
        .collect();
    Plane::new(noisy.freq_bins(), noisy.frames(), values)
}

/// Scale each noisy bin by the real mask; noisy phase is kept.
pub fn apply_psm(noisy: &ComplexSpectrogram, mask: &Plane) -> Result<ComplexSpectrogram> {
    if mask.rows() != noisy.freq_bins() || mask.cols() != noisy.frames() {
        return Err(Error::ShapeMismatch(format!(
            "mask {} x {} vs spectrogram {} x {}",
            mask.rows(),
            mask.cols(),
            noisy.freq_bins(),
            noisy.frames()
        )));
    }
    let m = mask.data();
    Ok(noisy.map_bins(|i, c| c * m[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftConfig;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn random_spec(cfg: StftConfig, frames: usize, seed: u64) -> ComplexSpectrogram {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let bins = (0..cfg.bins() * frames)
            .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        ComplexSpectrogram::from_bins(bins, frames, cfg, 16000).unwrap()
    }

    #[test]
    fn identical_inputs_give_unit_mask() {
        let cfg = StftConfig::new(8, 4).unwrap();
        let y = random_spec(cfg, 6, 1);
        let m = phase_sensitive_mask(&y, &y).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
        assert_eq!(apply_psm(&y, &m).unwrap(), y);
    }

    #[test]
    fn zero_clean_gives_zero_mask() {
        let cfg = StftConfig::new(8, 4).unwrap();
        let y = random_spec(cfg, 6, 2);
        let s = ComplexSpectrogram::zeros(6, cfg, 16000).unwrap();
        let m = phase_sensitive_mask(&y, &s).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
        assert!(apply_psm(&y, &m).unwrap().bins().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn silent_noisy_cells_are_zero() {
        let cfg = StftConfig::new(8, 4).unwrap();
        let y = ComplexSpectrogram::zeros(3, cfg, 16000).unwrap();
        let s = random_spec(cfg, 3, 3);
        let m = phase_sensitive_mask(&y, &s).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_in_unit_interval() {
        let cfg = StftConfig::new(16, 8).unwrap();
        let m = phase_sensitive_mask(&random_spec(cfg, 20, 4), &random_spec(cfg, 20, 5)).unwrap();
        assert!(m.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn shape_mismatch() {
        let cfg = StftConfig::new(8, 4).unwrap();
        let a = random_spec(cfg, 3, 1);
        let b = random_spec(cfg, 4, 1);
        assert!(phase_sensitive_mask(&a, &b).is_err());
        assert!(apply_psm(&a, &Plane::filled(5, 4, 1.0)).is_err());
    }
}
