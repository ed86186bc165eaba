//! Mixup, Cutmix, SpecAugment-style zero masking and Cutout.

use rand_distr::{Beta, Distribution};

use super::{
    check_same_shape, mix_labels, Augmented, CutmixMode, CutmixRegion, LabeledExample,
    PairedExample, Provenance, Rect, SpecAugmentConfig, Strategy,
};
use crate::dsp::FeatureTensor;
use crate::mask::{Axis, Band};
use crate::{Error, Result, RngStream};

/// `λ·a + (1 - λ)·b` per cell, evaluated in `f64` and rounded to `f32`.
pub fn mixup_with_lambda(
    a: &LabeledExample,
    b: &LabeledExample,
    lambda: f64,
) -> Result<LabeledExample> {
    a.check_compatible(b)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    let data = a
        .features()
        .data()
        .iter()
        .zip(b.features().data())
        .map(|(&xa, &xb)| (lambda * xa as f64 + (1.0 - lambda) * xb as f64) as f32)
        .collect();
    let x = a.features().with_data(data)?;
    LabeledExample::new(x, mix_labels(a.label(), b.label(), lambda))
}

/// Mixup with `λ ~ Beta(α, α)`.
pub fn mixup(
    a: &LabeledExample,
    b: &LabeledExample,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<Augmented<LabeledExample>> {
    a.check_compatible(b)?;
    let beta = Beta::new(alpha, alpha)
        .map_err(|_| Error::InvalidParameter(format!("mixup alpha {alpha} must be positive")))?;
    let lambda: f64 = beta.sample(rng);
    let example = mixup_with_lambda(a, b, lambda)?;
    let mut provenance = Provenance::new(Strategy::Mixup, rng, a.features());
    provenance.lambda = Some(lambda);
    Ok(Augmented {
        example,
        provenance,
    })
}

/// Draw a Cutmix patch: area fraction `r ~ U[0, 1)`, sides `round(F·√r)`
/// by `round(T·√r)`, centre uniform over the grid, clipped at the edges.
/// Shifted mode then draws a paste location where the patch fits whole.
pub fn sample_cutmix_region(
    freq_bins: usize,
    frames: usize,
    mode: CutmixMode,
    rng: &mut RngStream,
) -> CutmixRegion {
    let scale = rng.uniform().sqrt();
    let h = ((freq_bins as f64 * scale).round() as usize).min(freq_bins);
    let w = ((frames as f64 * scale).round() as usize).min(frames);
    let cf = rng.below(freq_bins as u64) as usize;
    let ct = rng.below(frames as u64) as usize;
    let source = Rect::centered_clipped(cf, ct, h, w, freq_bins, frames);
    match mode {
        CutmixMode::Aligned => CutmixRegion::aligned(source),
        CutmixMode::Shifted => CutmixRegion {
            source,
            dest_f: rng.below((freq_bins - source.height + 1) as u64) as usize,
            dest_t: rng.below((frames - source.width + 1) as u64) as usize,
        },
    }
}

fn paste(a: &FeatureTensor, b: &FeatureTensor, region: &CutmixRegion) -> Result<FeatureTensor> {
    check_same_shape(a, b)?;
    let (f_bins, frames, c) = a.shape();
    let src = region.source;
    let dst = region.dest();
    if src.f0 + src.height > f_bins
        || src.t0 + src.width > frames
        || dst.f0 + dst.height > f_bins
        || dst.t0 + dst.width > frames
    {
        return Err(Error::InvalidParameter(format!(
            "cutmix region {region:?} exceeds {f_bins} x {frames}"
        )));
    }
    let mut out = b.data().to_vec();
    for i in 0..src.height {
        let s = a.index(src.f0 + i, src.t0, 0);
        let d = b.index(dst.f0 + i, dst.t0, 0);
        out[d..d + src.width * c].copy_from_slice(&a.data()[s..s + src.width * c]);
    }
    b.with_data(out)
}

fn cutmix_lambda(region: &CutmixRegion, x: &FeatureTensor) -> (u64, f64) {
    let ones = region.source.area() as u64;
    let cells = (x.freq_bins() * x.frames()) as u64;
    (ones, ones as f64 / cells as f64)
}

pub fn cutmix_with_region(
    a: &LabeledExample,
    b: &LabeledExample,
    region: &CutmixRegion,
) -> Result<LabeledExample> {
    a.check_compatible(b)?;
    let x = paste(a.features(), b.features(), region)?;
    let (_, lambda) = cutmix_lambda(region, a.features());
    LabeledExample::new(x, mix_labels(a.label(), b.label(), lambda))
}

pub fn cutmix(
    a: &LabeledExample,
    b: &LabeledExample,
    mode: CutmixMode,
    rng: &mut RngStream,
) -> Result<Augmented<LabeledExample>> {
    a.check_compatible(b)?;
    let (f, t, _) = a.features().shape();
    let region = sample_cutmix_region(f, t, mode, rng);
    let example = cutmix_with_region(a, b, &region)?;
    let (ones, lambda) = cutmix_lambda(&region, a.features());
    let mut provenance = Provenance::new(Strategy::Cutmix, rng, a.features());
    provenance.lambda = Some(lambda);
    provenance.mask_ones = Some(ones);
    provenance.cutmix = Some(region);
    Ok(Augmented {
        example,
        provenance,
    })
}

/// Aligned Cutmix on noisy/clean pairs: the same patch moves in both.
pub fn cutmix_paired(
    a: &PairedExample,
    b: &PairedExample,
    rng: &mut RngStream,
) -> Result<Augmented<PairedExample>> {
    a.check_compatible(b)?;
    let (f, t, _) = a.noisy().shape();
    let region = sample_cutmix_region(f, t, CutmixMode::Aligned, rng);
    let example = PairedExample::new(
        paste(a.noisy(), b.noisy(), &region)?,
        paste(a.clean(), b.clean(), &region)?,
    )?;
    let (ones, lambda) = cutmix_lambda(&region, a.noisy());
    let mut provenance = Provenance::new(Strategy::Cutmix, rng, a.noisy());
    provenance.lambda = Some(lambda);
    provenance.mask_ones = Some(ones);
    provenance.cutmix = Some(region);
    Ok(Augmented {
        example,
        provenance,
    })
}

fn zero_bands(x: &FeatureTensor, bands: &[Band]) -> Result<FeatureTensor> {
    let (f_bins, frames, c) = x.shape();
    let mut out = x.data().to_vec();
    for band in bands {
        match band.axis {
            Axis::Frequency => {
                for f in band.start.min(f_bins)..band.end().min(f_bins) {
                    let i = x.index(f, 0, 0);
                    out[i..i + frames * c].fill(0.0);
                }
            }
            Axis::Time => {
                for f in 0..f_bins {
                    for t in band.start.min(frames)..band.end().min(frames) {
                        let i = x.index(f, t, 0);
                        out[i..i + c].fill(0.0);
                    }
                }
            }
        }
    }
    x.with_data(out)
}

fn sample_zero_bands(
    x: &FeatureTensor,
    cfg: &SpecAugmentConfig,
    rng: &mut RngStream,
) -> Result<Vec<Band>> {
    let (f_bins, frames, _) = x.shape();
    if cfg.max_freq_width > f_bins || cfg.max_time_width > frames {
        return Err(Error::InvalidParameter(format!(
            "specaugment widths ({}, {}) exceed {f_bins} x {frames}",
            cfg.max_freq_width, cfg.max_time_width
        )));
    }
    let mut bands = Vec::with_capacity(cfg.freq_masks + cfg.time_masks);
    let mut draw = |axis, count, max_width: usize, len: usize| {
        for _ in 0..count {
            let width = rng.below(max_width as u64 + 1) as usize;
            let start = rng.below((len - width + 1) as u64) as usize;
            bands.push(Band { axis, start, width });
        }
    };
    draw(Axis::Frequency, cfg.freq_masks, cfg.max_freq_width, f_bins);
    draw(Axis::Time, cfg.time_masks, cfg.max_time_width, frames);
    Ok(bands)
}

/// Zero the given bands in every channel; the label is untouched.
pub fn specaugment_with_bands(a: &LabeledExample, bands: &[Band]) -> Result<LabeledExample> {
    LabeledExample::new(zero_bands(a.features(), bands)?, a.label().to_vec())
}

pub fn specaugment(
    a: &LabeledExample,
    cfg: &SpecAugmentConfig,
    rng: &mut RngStream,
) -> Result<Augmented<LabeledExample>> {
    let bands = sample_zero_bands(a.features(), cfg, rng)?;
    let example = specaugment_with_bands(a, &bands)?;
    let mut provenance = Provenance::new(Strategy::SpecAugment, rng, a.features());
    provenance.bands = bands;
    Ok(Augmented {
        example,
        provenance,
    })
}

/// Only the noisy input is masked; the clean target stays intact.
pub fn specaugment_paired(
    a: &PairedExample,
    cfg: &SpecAugmentConfig,
    rng: &mut RngStream,
) -> Result<Augmented<PairedExample>> {
    let bands = sample_zero_bands(a.noisy(), cfg, rng)?;
    let example = PairedExample::new(zero_bands(a.noisy(), &bands)?, a.clean().clone())?;
    let mut provenance = Provenance::new(Strategy::SpecAugment, rng, a.noisy());
    provenance.bands = bands;
    Ok(Augmented {
        example,
        provenance,
    })
}

pub fn cutout_with_rect(a: &LabeledExample, rect: &Rect) -> Result<LabeledExample> {
    let x = a.features();
    let (f_bins, frames, c) = x.shape();
    if rect.f0 + rect.height > f_bins || rect.t0 + rect.width > frames {
        return Err(Error::InvalidParameter(format!(
            "cutout {rect:?} exceeds {f_bins} x {frames}"
        )));
    }
    let mut out = x.data().to_vec();
    for f in rect.f0..rect.f0 + rect.height {
        let i = x.index(f, rect.t0, 0);
        out[i..i + rect.width * c].fill(0.0);
    }
    LabeledExample::new(x.with_data(out)?, a.label().to_vec())
}

/// Zero one `side x side` square centred uniformly on the grid.
pub fn cutout(
    a: &LabeledExample,
    side: usize,
    rng: &mut RngStream,
) -> Result<Augmented<LabeledExample>> {
    let (f_bins, frames, _) = a.features().shape();
    if side > f_bins.min(frames) {
        return Err(Error::InvalidParameter(format!(
            "cutout side {side} exceeds min({f_bins}, {frames})"
        )));
    }
    let cf = rng.below(f_bins as u64) as usize;
    let ct = rng.below(frames as u64) as usize;
    let rect = Rect::centered_clipped(cf, ct, side, side, f_bins, frames);
    let example = cutout_with_rect(a, &rect)?;
    let mut provenance = Provenance::new(Strategy::Cutout, rng, a.features());
    provenance.cutout = Some(rect);
    Ok(Augmented {
        example,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{FeatureKind, FeatureMeta, StftConfig};

    fn meta() -> FeatureMeta {
        FeatureMeta {
            kind: FeatureKind::LogMel,
            sample_rate: 44100,
            stft: StftConfig::new(2048, 1024).unwrap(),
        }
    }

    fn ramp(f: usize, t: usize, offset: f32) -> FeatureTensor {
        let n = f * t * 3;
        FeatureTensor::new(f, t, (0..n).map(|i| i as f32 + offset).collect(), meta()).unwrap()
    }

    fn labeled(x: FeatureTensor, class: usize) -> LabeledExample {
        LabeledExample::one_hot(x, class, 3).unwrap()
    }

    #[test]
    fn mixup_scalar_blend() {
        let a = labeled(FeatureTensor::filled(4, 4, 2.0, meta()).unwrap(), 0);
        let b = labeled(FeatureTensor::filled(4, 4, 0.0, meta()).unwrap(), 1);
        let out = mixup_with_lambda(&a, &b, 0.25).unwrap();
        assert!(out.features().data().iter().all(|&v| v == 0.5));
        assert_eq!(out.label(), &[0.25, 0.75, 0.0]);
        assert_eq!(mixup_with_lambda(&a, &b, 1.0).unwrap(), a);
    }

    #[test]
    fn mixup_is_convex() {
        let a = labeled(ramp(5, 6, -40.0), 0);
        let b = labeled(ramp(5, 6, 17.5).with_data((0..90).map(|i| (i as f32 * 1.37).sin() * 50.0).collect()).unwrap(), 2);
        for s in 0..50 {
            let out = mixup(&a, &b, 0.4, &mut RngStream::new(s, 0)).unwrap();
            for ((x, xa), xb) in out.example.features().data().iter().zip(a.features().data()).zip(b.features().data()) {
                assert!(*x >= xa.min(*xb) && *x <= xa.max(*xb));
            }
        }
        assert!(mixup(&a, &b, 0.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn cutmix_zero_area_is_b() {
        let a = labeled(ramp(6, 8, 0.0), 0);
        let b = labeled(ramp(6, 8, 500.0), 1);
        let region = CutmixRegion::aligned(Rect { f0: 2, t0: 3, height: 0, width: 0 });
        assert_eq!(cutmix_with_region(&a, &b, &region).unwrap(), b);
    }

    #[test]
    fn cutmix_full_aligned_is_a() {
        let a = labeled(ramp(6, 8, 0.0), 0);
        let b = labeled(ramp(6, 8, 500.0), 1);
        let region = CutmixRegion::aligned(Rect { f0: 0, t0: 0, height: 6, width: 8 });
        let out = cutmix_with_region(&a, &b, &region).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn cutmix_aligned_cells() {
        let a = labeled(ramp(9, 11, 0.0), 0);
        let b = labeled(ramp(9, 11, 1000.0), 1);
        for s in 0..100 {
            let out = cutmix(&a, &b, CutmixMode::Aligned, &mut RngStream::new(s, 3)).unwrap();
            let rect = out.provenance.cutmix.unwrap().source;
            for f in 0..9 {
                for t in 0..11 {
                    let src = if rect.contains(f, t) { &a } else { &b };
                    assert_eq!(out.example.features().cell(f, t), src.features().cell(f, t));
                }
            }
            let lambda = out.provenance.lambda.unwrap();
            assert_eq!(lambda, rect.area() as f64 / 99.0);
        }
    }

    #[test]
    fn cutmix_shifted_patch_fits() {
        for s in 0..500 {
            let r = sample_cutmix_region(13, 7, CutmixMode::Shifted, &mut RngStream::new(s, 0));
            let d = r.dest();
            assert!(d.f0 + d.height <= 13 && d.t0 + d.width <= 7);
            assert!(r.source.f0 + r.source.height <= 13 && r.source.t0 + r.source.width <= 7);
        }
    }

    #[test]
    fn specaugment_single_band() {
        let a = labeled(ramp(16, 12, 1.0), 2);
        let band = Band { axis: Axis::Frequency, start: 5, width: 5 };
        let out = specaugment_with_bands(&a, &[band]).unwrap();
        for f in 0..16 {
            for t in 0..12 {
                let want: Vec<f32> = if (5..10).contains(&f) { vec![0.0; 3] } else { a.features().cell(f, t).to_vec() };
                assert_eq!(out.features().cell(f, t), &want[..]);
            }
        }
        assert_eq!(out.label(), a.label());
        assert_eq!(specaugment_with_bands(&a, &[Band { axis: Axis::Time, start: 3, width: 0 }]).unwrap(), a);
    }

    #[test]
    fn specaugment_keeps_label_and_checks_widths() {
        let a = labeled(ramp(16, 40, 1.0), 1);
        for s in 0..50 {
            let out = specaugment(&a, &SpecAugmentConfig::default(), &mut RngStream::new(s, 0)).unwrap();
            assert_eq!(out.example.label(), a.label());
            assert_eq!(out.provenance.bands.len(), 4);
        }
        let too_wide = SpecAugmentConfig { max_freq_width: 17, ..Default::default() };
        assert!(specaugment(&a, &too_wide, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn specaugment_paired_leaves_clean() {
        let x = ramp(16, 40, 1.0);
        let p = PairedExample::new(x.clone(), x).unwrap();
        let out = specaugment_paired(&p, &SpecAugmentConfig::default(), &mut RngStream::new(4, 4)).unwrap();
        assert_eq!(out.example.clean(), p.clean());
    }

    #[test]
    fn cutout_corner_geometry() {
        let (f_bins, frames) = (10, 14);
        let side = 10;
        let a = labeled(FeatureTensor::filled(f_bins, frames, 1.0, meta()).unwrap(), 0);
        for (cf, ct) in [(0, 0), (9, 13), (0, 13), (9, 0), (5, 7)] {
            let rect = Rect::centered_clipped(cf, ct, side, side, f_bins, frames);
            let out = cutout_with_rect(&a, &rect).unwrap();
            let zero_cells = out.features().data().iter().filter(|&&v| v == 0.0).count() / 3;
            assert!(zero_cells >= (side / 2) * (side / 2), "{cf},{ct}: {zero_cells}");
            assert_eq!(out.label(), a.label());
        }
    }

    #[test]
    fn cutout_zero_side_is_identity() {
        let a = labeled(ramp(6, 6, 1.0), 0);
        let out = cutout(&a, 0, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out.example, a);
        assert!(cutout(&a, 7, &mut RngStream::new(0, 0)).is_err());
    }
}
