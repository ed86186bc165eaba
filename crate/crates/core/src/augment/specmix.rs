use super::{mix_labels, Augmented, LabeledExample, PairedExample, Provenance, Strategy};
use crate::dsp::FeatureTensor;
use crate::mask::{build_random_pixel_mask, build_specmix_mask, GammaSpec, MaskVariant, TFMask};
use crate::{Error, Result, RngStream};

/// Take every channel of cell `(f, t)` from `a` where the mask is set and
/// from `b` elsewhere.
pub fn mix_features(a: &FeatureTensor, b: &FeatureTensor, mask: &TFMask) -> Result<FeatureTensor> {
    super::check_same_shape(a, b)?;
    let (f_bins, frames, channels) = a.shape();
    if mask.freq_bins() != f_bins || mask.frames() != frames {
        return Err(Error::ShapeMismatch(format!(
            "mask {} x {} vs features {f_bins} x {frames}",
            mask.freq_bins(),
            mask.frames()
        )));
    }
    let mut out = b.data().to_vec();
    for f in 0..f_bins {
        for t in 0..frames {
            if mask.get(f, t) {
                let i = a.index(f, t, 0);
                out[i..i + channels].copy_from_slice(&a.data()[i..i + channels]);
            }
        }
    }
    b.with_data(out)
}

fn mask_provenance(strategy: Strategy, rng: &RngStream, mask: &TFMask, x: &FeatureTensor) -> Provenance {
    let fraction = mask.fraction();
    let mut prov = Provenance::new(strategy, rng, x);
    prov.gamma = mask.gamma();
    prov.lambda = Some(fraction.value());
    prov.mask_ones = Some(fraction.ones);
    prov.bands = mask.bands().to_vec();
    prov
}

/// Mix two labelled examples with a given mask. λ is the mask's cell
/// fraction.
pub fn specmix_classify_with_mask(
    a: &LabeledExample,
    b: &LabeledExample,
    mask: &TFMask,
) -> Result<LabeledExample> {
    a.check_compatible(b)?;
    let x = mix_features(a.features(), b.features(), mask)?;
    let lambda = mask.fraction().value();
    LabeledExample::new(x, mix_labels(a.label(), b.label(), lambda))
}

pub fn specmix_paired_with_mask(
    a: &PairedExample,
    b: &PairedExample,
    mask: &TFMask,
) -> Result<PairedExample> {
    a.check_compatible(b)?;
    PairedExample::new(
        mix_features(a.noisy(), b.noisy(), mask)?,
        mix_features(a.clean(), b.clean(), mask)?,
    )
}

pub fn specmix_classify(
    a: &LabeledExample,
    b: &LabeledExample,
    gamma: &GammaSpec,
    variant: MaskVariant,
    rng: &mut RngStream,
) -> Result<Augmented<LabeledExample>> {
    a.check_compatible(b)?;
    let (f, t, _) = a.features().shape();
    let mask = build_specmix_mask(f, t, gamma, variant, rng)?;
    let example = specmix_classify_with_mask(a, b, &mask)?;
    let mut provenance = mask_provenance(Strategy::SpecMix, rng, &mask, a.features());
    provenance.variant = Some(variant);
    Ok(Augmented {
        example,
        provenance,
    })
}

/// One mask, applied identically to the noisy and the clean tensors.
pub fn specmix_paired(
    a: &PairedExample,
    b: &PairedExample,
    gamma: &GammaSpec,
    variant: MaskVariant,
    rng: &mut RngStream,
) -> Result<Augmented<PairedExample>> {
    a.check_compatible(b)?;
    let (f, t, _) = a.noisy().shape();
    let mask = build_specmix_mask(f, t, gamma, variant, rng)?;
    let example = specmix_paired_with_mask(a, b, &mask)?;
    let mut provenance = mask_provenance(Strategy::SpecMix, rng, &mask, a.noisy());
    provenance.variant = Some(variant);
    Ok(Augmented {
        example,
        provenance,
    })
}

fn pixel_mask(
    x: &FeatureTensor,
    pixels: Option<usize>,
    rng: &mut RngStream,
) -> Result<TFMask> {
    let (f, t, _) = x.shape();
    let n = match pixels {
        Some(n) => n,
        None => rng.below((f * t) as u64 + 1) as usize,
    };
    build_random_pixel_mask(f, t, n, rng)
}

/// Random-pixel ablation: `n` uniformly chosen cells come from `a`.
pub fn random_pixel_classify(
    a: &LabeledExample,
    b: &LabeledExample,
    pixels: Option<usize>,
    rng: &mut RngStream,
) -> Result<Augmented<LabeledExample>> {
    a.check_compatible(b)?;
    let mask = pixel_mask(a.features(), pixels, rng)?;
    let example = specmix_classify_with_mask(a, b, &mask)?;
    Ok(Augmented {
        example,
        provenance: mask_provenance(Strategy::RandomPixel, rng, &mask, a.features()),
    })
}

pub fn random_pixel_paired(
    a: &PairedExample,
    b: &PairedExample,
    pixels: Option<usize>,
    rng: &mut RngStream,
) -> Result<Augmented<PairedExample>> {
    a.check_compatible(b)?;
    let mask = pixel_mask(a.noisy(), pixels, rng)?;
    let example = specmix_paired_with_mask(a, b, &mask)?;
    Ok(Augmented {
        example,
        provenance: mask_provenance(Strategy::RandomPixel, rng, &mask, a.noisy()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{FeatureKind, FeatureMeta, StftConfig};
    use crate::mask::{band_at, Axis};

    fn meta(kind: FeatureKind) -> FeatureMeta {
        FeatureMeta {
            kind,
            sample_rate: 16000,
            stft: StftConfig::new(64, 32).unwrap(),
        }
    }

    fn ramp(f: usize, t: usize, offset: f32) -> FeatureTensor {
        let n = f * t * 3;
        FeatureTensor::new(f, t, (0..n).map(|i| i as f32 + offset).collect(), meta(FeatureKind::LogMel)).unwrap()
    }

    fn constant(f: usize, t: usize, v: f32, kind: FeatureKind) -> FeatureTensor {
        FeatureTensor::filled(f, t, v, meta(kind)).unwrap()
    }

    #[test]
    fn empty_mask_returns_b() {
        let a = LabeledExample::one_hot(ramp(6, 5, 0.0), 0, 3).unwrap();
        let b = LabeledExample::one_hot(ramp(6, 5, 1000.0), 2, 3).unwrap();
        let mask = TFMask::from_bands(6, 5, vec![]).unwrap();
        assert_eq!(specmix_classify_with_mask(&a, &b, &mask).unwrap(), b);
        assert_eq!(specmix_classify_with_mask(&a, &b, &mask.complement()).unwrap(), a);
    }

    #[test]
    fn witness_mean_equals_lambda() {
        let a = LabeledExample::one_hot(constant(16, 10, 1.0, FeatureKind::LogMel), 0, 2).unwrap();
        let b = LabeledExample::one_hot(constant(16, 10, 0.0, FeatureKind::LogMel), 1, 2).unwrap();
        for s in 0..100 {
            let out = specmix_classify(&a, &b, &GammaSpec::Uniform, MaskVariant::Full, &mut RngStream::new(s, 0)).unwrap();
            let x = out.example.features();
            let mean = x.data().iter().map(|&v| v as f64).sum::<f64>() / x.data().len() as f64;
            let lambda = out.provenance.lambda.unwrap();
            assert_eq!(mean, lambda);
            assert_eq!(out.example.label(), &[lambda, 1.0 - lambda]);
        }
    }

    #[test]
    fn same_input_is_fixed_point() {
        let a = LabeledExample::one_hot(ramp(8, 9, 0.5), 1, 4).unwrap();
        for s in 0..20 {
            let out = specmix_classify(&a, &a, &GammaSpec::Fixed(0.3), MaskVariant::Full, &mut RngStream::new(s, s)).unwrap();
            assert_eq!(out.example, a);
        }
    }

    #[test]
    fn paired_uses_one_mask() {
        let one = constant(12, 14, 1.0, FeatureKind::ComplexChannels);
        let zero = constant(12, 14, 0.0, FeatureKind::ComplexChannels);
        let a = PairedExample::new(one.clone(), one).unwrap();
        let b = PairedExample::new(zero.clone(), zero).unwrap();
        for s in 0..100 {
            let out = specmix_paired(&a, &b, &GammaSpec::Fixed(0.3), MaskVariant::Full, &mut RngStream::new(s, 1)).unwrap();
            assert_eq!(out.example.noisy().data(), out.example.clean().data());
        }
        let out = specmix_paired_with_mask(&a, &b, &TFMask::from_bands(12, 14, vec![]).unwrap()).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn channels_move_together() {
        let a = ramp(10, 7, 0.0);
        let b = ramp(10, 7, 5000.0);
        let mask = TFMask::from_bands(10, 7, vec![band_at(Axis::Frequency, 10, 0.3, 2), band_at(Axis::Time, 7, 0.3, 5)]).unwrap();
        let x = mix_features(&a, &b, &mask).unwrap();
        for f in 0..10 {
            for t in 0..7 {
                let src = if mask.get(f, t) { &a } else { &b };
                assert_eq!(x.cell(f, t), src.cell(f, t));
            }
        }
    }

    #[test]
    fn mismatches_are_errors() {
        let a = LabeledExample::one_hot(ramp(4, 4, 0.0), 0, 2).unwrap();
        let b = LabeledExample::one_hot(ramp(4, 5, 0.0), 0, 2).unwrap();
        let c = LabeledExample::one_hot(ramp(4, 4, 0.0), 0, 3).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(specmix_classify(&a, &b, &GammaSpec::Uniform, MaskVariant::Full, &mut rng), Err(Error::ShapeMismatch(_))));
        assert!(matches!(specmix_classify(&a, &c, &GammaSpec::Uniform, MaskVariant::Full, &mut rng), Err(Error::ClassCountMismatch(2, 3))));
    }

    #[test]
    fn random_pixel_lambda() {
        let a = LabeledExample::one_hot(constant(8, 8, 1.0, FeatureKind::LogMel), 0, 2).unwrap();
        let b = LabeledExample::one_hot(constant(8, 8, 0.0, FeatureKind::LogMel), 1, 2).unwrap();
        let out = random_pixel_classify(&a, &b, Some(16), &mut RngStream::new(1, 2)).unwrap();
        assert_eq!(out.provenance.lambda, Some(0.25));
        assert_eq!(out.provenance.mask_ones, Some(16));
        assert_eq!(out.example.features().data().iter().filter(|&&v| v == 1.0).count(), 48);
    }
}
