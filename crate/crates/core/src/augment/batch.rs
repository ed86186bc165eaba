use rayon::prelude::*;

use super::{
    cutmix, cutmix_paired, cutout, mixup, random_pixel_classify, random_pixel_paired,
    specaugment, specaugment_paired, specmix_classify, specmix_paired, Augmented, Example,
    Provenance, Strategy, StrategyConfig,
};
use crate::rng::domain;
use crate::{Error, Result, RngStream};

/// Uniform permutation of `0..n` (Fisher-Yates), keyed by `(seed, stream)`
/// in the pairing domain.
pub fn partner_permutation(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = RngStream::with_domain(seed, domain::PAIRING, stream);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

fn check_batch(batch: &[Example], cfg: &StrategyConfig) -> Result<()> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidParameter("batch is empty".into()))?;
    for (i, e) in batch.iter().enumerate().skip(1) {
        match (first, e) {
            (Example::Labeled(a), Example::Labeled(b)) => a.check_compatible(b),
            (Example::Paired(a), Example::Paired(b)) => a.check_compatible(b),
            _ => Err(Error::ShapeMismatch(
                "batch mixes labelled and paired examples".into(),
            )),
        }
        .map_err(|err| Error::ShapeMismatch(format!("batch element {i}: {err}")))?;
    }
    if matches!(first, Example::Paired(_)) && !cfg.supports_paired() {
        return Err(Error::InvalidParameter(format!(
            "strategy {} is not defined for paired examples",
            cfg.strategy.name()
        )));
    }
    Ok(())
}

fn passthrough(a: &Example, strategy: Strategy, rng: &RngStream, applied: bool) -> Augmented<Example> {
    let mut provenance = Provenance::new(strategy, rng, a.features());
    provenance.applied = applied;
    Augmented {
        example: a.clone(),
        provenance,
    }
}

fn lift<E: Into<Example>>(r: Result<Augmented<E>>) -> Result<Augmented<Example>> {
    r.map(|aug| Augmented {
        example: aug.example.into(),
        provenance: aug.provenance,
    })
}

fn augment_one(
    a: &Example,
    b: &Example,
    cfg: &StrategyConfig,
    rng: &mut RngStream,
) -> Result<Augmented<Example>> {
    use Example::{Labeled, Paired};
    match (cfg.strategy, a, b) {
        (Strategy::None, _, _) => Ok(passthrough(a, Strategy::None, rng, true)),
        (Strategy::SpecMix, Labeled(a), Labeled(b)) => {
            lift(specmix_classify(a, b, &cfg.gamma, cfg.variant, rng))
        }
        (Strategy::SpecMix, Paired(a), Paired(b)) => {
            lift(specmix_paired(a, b, &cfg.gamma, cfg.variant, rng))
        }
        (Strategy::RandomPixel, Labeled(a), Labeled(b)) => {
            lift(random_pixel_classify(a, b, cfg.random_pixels, rng))
        }
        (Strategy::RandomPixel, Paired(a), Paired(b)) => {
            lift(random_pixel_paired(a, b, cfg.random_pixels, rng))
        }
        (Strategy::Mixup, Labeled(a), Labeled(b)) => lift(mixup(a, b, cfg.mixup_alpha, rng)),
        (Strategy::Cutmix, Labeled(a), Labeled(b)) => lift(cutmix(a, b, cfg.cutmix_mode, rng)),
        (Strategy::Cutmix, Paired(a), Paired(b)) => lift(cutmix_paired(a, b, rng)),
        (Strategy::SpecAugment, Labeled(a), _) => lift(specaugment(a, &cfg.specaugment, rng)),
        (Strategy::SpecAugment, Paired(a), _) => {
            lift(specaugment_paired(a, &cfg.specaugment, rng))
        }
        (Strategy::Cutout, Labeled(a), _) => lift(cutout(a, cfg.cutout_side, rng)),
        (strategy, _, _) => Err(Error::InvalidParameter(format!(
            "strategy {} is not defined for these examples",
            strategy.name()
        ))),
    }
}

/// Augment a batch against a permutation of itself.
///
/// Element `i` is mixed with `batch[perm[i]]` using the stream
/// `base_stream + i`, so the result does not depend on how elements are
/// scheduled across threads. The permutation itself is drawn from stream
/// `base_stream` in the pairing domain.
pub fn batch_augment(
    batch: &[Example],
    cfg: &StrategyConfig,
    seed: u64,
    base_stream: u64,
) -> Result<Vec<Augmented<Example>>> {
    cfg.validate()?;
    check_batch(batch, cfg)?;
    let perm = partner_permutation(batch.len(), seed, base_stream);

    (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let stream = base_stream + i as u64;
            let mut rng = RngStream::new(seed, stream);
            let a = &batch[i];
            let b = &batch[perm[i]];
            let applied = cfg.apply_prob >= 1.0
                || RngStream::with_domain(seed, domain::APPLY, stream).uniform() < cfg.apply_prob;
            let mut out = if applied {
                augment_one(a, b, cfg, &mut rng)?
            } else {
                passthrough(a, cfg.strategy, &rng, false)
            };
            out.provenance.source = Some(i as u64);
            if cfg.strategy.mixes() && applied {
                out.provenance.partner = Some(perm[i] as u64);
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{CutmixMode, LabeledExample, PairedExample};
    use crate::dsp::{FeatureKind, FeatureMeta, FeatureTensor, StftConfig};

    fn meta(kind: FeatureKind) -> FeatureMeta {
        FeatureMeta {
            kind,
            sample_rate: 16000,
            stft: StftConfig::new(512, 256).unwrap(),
        }
    }

    fn labeled_batch(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                let data = (0..20 * 24 * 3).map(|j| (i * 10_000 + j) as f32).collect();
                let x = FeatureTensor::new(20, 24, data, meta(FeatureKind::LogMel)).unwrap();
                LabeledExample::one_hot(x, i % 4, 4).unwrap().into()
            })
            .collect()
    }

    fn paired_batch(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                let data: Vec<f32> = (0..8 * 6 * 2).map(|j| (i * 1000 + j) as f32).collect();
                let x = FeatureTensor::new(8, 6, data.clone(), meta(FeatureKind::ComplexChannels)).unwrap();
                let z = x.with_data(data.iter().map(|v| -v).collect()).unwrap();
                PairedExample::new(x, z).unwrap().into()
            })
            .collect()
    }

    #[test]
    fn permutation_is_a_permutation() {
        for n in [1, 2, 5, 32] {
            let mut p = partner_permutation(n, 3, 0);
            p.sort_unstable();
            assert_eq!(p, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn none_is_identity() {
        let batch = labeled_batch(5);
        let out = batch_augment(&batch, &StrategyConfig::new(Strategy::None), 1, 0).unwrap();
        for (o, e) in out.iter().zip(&batch) {
            assert_eq!(&o.example, e);
            assert_eq!(o.provenance.strategy, Strategy::None);
        }
    }

    #[test]
    fn single_element_batch_mixes_with_itself() {
        let batch = labeled_batch(1);
        let out = batch_augment(&batch, &StrategyConfig::default(), 9, 0).unwrap();
        assert_eq!(out[0].example, batch[0]);
        assert_eq!(out[0].provenance.partner, Some(0));
    }

    #[test]
    fn deterministic_across_pools() {
        let batch = labeled_batch(12);
        for strategy in Strategy::ALL {
            let cfg = StrategyConfig {
                specaugment: crate::augment::SpecAugmentConfig {
                    max_freq_width: 8,
                    max_time_width: 8,
                    ..Default::default()
                },
                ..StrategyConfig::new(strategy)
            };
            let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
            let a = one.install(|| batch_augment(&batch, &cfg, 77, 100)).unwrap();
            let b = many.install(|| batch_augment(&batch, &cfg, 77, 100)).unwrap();
            assert_eq!(a, b, "{}", strategy.name());
        }
    }

    #[test]
    fn stream_ids_follow_base() {
        let out = batch_augment(&labeled_batch(4), &StrategyConfig::default(), 5, 40).unwrap();
        let streams: Vec<u64> = out.iter().map(|o| o.provenance.stream).collect();
        assert_eq!(streams, vec![40, 41, 42, 43]);
    }

    #[test]
    fn paired_rejects_label_strategies() {
        let batch = paired_batch(3);
        for strategy in [Strategy::Mixup, Strategy::Cutout] {
            assert!(batch_augment(&batch, &StrategyConfig::new(strategy), 0, 0).is_err());
        }
        let shifted = StrategyConfig { cutmix_mode: CutmixMode::Shifted, ..StrategyConfig::new(Strategy::Cutmix) };
        assert!(batch_augment(&batch, &shifted, 0, 0).is_err());
        let aligned = StrategyConfig { cutmix_mode: CutmixMode::Aligned, ..shifted };
        assert!(batch_augment(&batch, &aligned, 0, 0).is_ok());
        assert!(batch_augment(&batch, &StrategyConfig::default(), 0, 0).is_ok());
    }

    #[test]
    fn heterogeneous_batch_rejected() {
        let mut batch = labeled_batch(2);
        batch.extend(paired_batch(1));
        assert!(batch_augment(&batch, &StrategyConfig::default(), 0, 0).is_err());
        assert!(batch_augment(&[], &StrategyConfig::default(), 0, 0).is_err());
    }

    #[test]
    fn apply_probability_zero_passes_through() {
        let batch = labeled_batch(6);
        let cfg = StrategyConfig { apply_prob: 0.0, ..StrategyConfig::default() };
        let out = batch_augment(&batch, &cfg, 3, 0).unwrap();
        for (o, e) in out.iter().zip(&batch) {
            assert_eq!(&o.example, e);
            assert!(!o.provenance.applied);
        }
    }

    #[test]
    fn apply_probability_is_roughly_respected() {
        let batch = labeled_batch(400);
        let cfg = StrategyConfig { apply_prob: 0.5, ..StrategyConfig::default() };
        let out = batch_augment(&batch, &cfg, 3, 0).unwrap();
        let applied = out.iter().filter(|o| o.provenance.applied).count();
        assert!((150..250).contains(&applied), "{applied}");
    }
}
