//! Mixed-sample and masking augmentations on feature tensors.
//!
//! Every operation returns the augmented example together with a
//! [`Provenance`] record holding everything needed to replay it: the
//! strategy, RNG keys, λ, and the mask bands or rectangles that were applied.

mod baselines;
mod batch;
mod specmix;

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureTensor;
use crate::mask::{Band, GammaSpec, MaskVariant};
use crate::{Error, Result};

pub use baselines::{
    cutmix, cutmix_paired, cutmix_with_region, cutout, cutout_with_rect, mixup,
    mixup_with_lambda, sample_cutmix_region, specaugment, specaugment_paired,
    specaugment_with_bands,
};
pub use batch::{batch_augment, partner_permutation};
pub use specmix::{
    mix_features, random_pixel_classify, random_pixel_paired, specmix_classify,
    specmix_classify_with_mask, specmix_paired, specmix_paired_with_mask,
};

const LABEL_TOLERANCE: f64 = 1e-9;

/// Features with a probability vector over `K` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    features: FeatureTensor,
    label: Vec<f64>,
}

impl LabeledExample {
    pub fn new(features: FeatureTensor, label: Vec<f64>) -> Result<Self> {
        if label.is_empty() {
            return Err(Error::InvalidLabel("label vector is empty".into()));
        }
        if label.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidLabel(
                "label entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = label.iter().sum();
        if (sum - 1.0).abs() > LABEL_TOLERANCE {
            return Err(Error::InvalidLabel(format!("label sums to {sum}, not 1")));
        }
        Ok(Self { features, label })
    }

    pub fn one_hot(features: FeatureTensor, class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::InvalidLabel(format!(
                "class {class} out of range for {num_classes} classes"
            )));
        }
        let mut label = vec![0.0; num_classes];
        label[class] = 1.0;
        Self::new(features, label)
    }

    pub fn features(&self) -> &FeatureTensor {
        &self.features
    }

    pub fn label(&self) -> &[f64] {
        &self.label
    }

    pub fn num_classes(&self) -> usize {
        self.label.len()
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        check_same_shape(&self.features, &other.features)?;
        if self.label.len() != other.label.len() {
            return Err(Error::ClassCountMismatch(self.label.len(), other.label.len()));
        }
        Ok(())
    }
}

/// Noisy features with their clean counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedExample {
    noisy: FeatureTensor,
    clean: FeatureTensor,
}

impl PairedExample {
    pub fn new(noisy: FeatureTensor, clean: FeatureTensor) -> Result<Self> {
        check_same_shape(&noisy, &clean)?;
        Ok(Self { noisy, clean })
    }

    pub fn noisy(&self) -> &FeatureTensor {
        &self.noisy
    }

    pub fn clean(&self) -> &FeatureTensor {
        &self.clean
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        check_same_shape(&self.noisy, &other.noisy)
    }
}

pub(crate) fn check_same_shape(a: &FeatureTensor, b: &FeatureTensor) -> Result<()> {
    if !a.same_shape(b) {
        let (fa, ta, ca) = a.shape();
        let (fb, tb, cb) = b.shape();
        return Err(Error::ShapeMismatch(format!(
            "[{fa}, {ta}, {ca}] {} vs [{fb}, {tb}, {cb}] {}",
            a.meta().kind.name(),
            b.meta().kind.name()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Example {
    Labeled(LabeledExample),
    Paired(PairedExample),
}

impl Example {
    /// The tensor that strategies operate on (noisy side for pairs).
    pub fn features(&self) -> &FeatureTensor {
        match self {
            Example::Labeled(e) => e.features(),
            Example::Paired(e) => e.noisy(),
        }
    }

    pub fn as_labeled(&self) -> Option<&LabeledExample> {
        match self {
            Example::Labeled(e) => Some(e),
            Example::Paired(_) => None,
        }
    }

    pub fn as_paired(&self) -> Option<&PairedExample> {
        match self {
            Example::Paired(e) => Some(e),
            Example::Labeled(_) => None,
        }
    }
}

impl From<LabeledExample> for Example {
    fn from(e: LabeledExample) -> Self {
        Example::Labeled(e)
    }
}

impl From<PairedExample> for Example {
    fn from(e: PairedExample) -> Self {
        Example::Paired(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "specmix")]
    SpecMix,
    #[serde(rename = "random-pixel")]
    RandomPixel,
    #[serde(rename = "mixup")]
    Mixup,
    #[serde(rename = "cutmix")]
    Cutmix,
    #[serde(rename = "specaugment")]
    SpecAugment,
    #[serde(rename = "cutout")]
    Cutout,
    #[serde(rename = "none")]
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::SpecMix,
        Strategy::RandomPixel,
        Strategy::Mixup,
        Strategy::Cutmix,
        Strategy::SpecAugment,
        Strategy::Cutout,
        Strategy::None,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::SpecMix => "specmix",
            Strategy::RandomPixel => "random-pixel",
            Strategy::Mixup => "mixup",
            Strategy::Cutmix => "cutmix",
            Strategy::SpecAugment => "specaugment",
            Strategy::Cutout => "cutout",
            Strategy::None => "none",
        }
    }

    /// Strategies that need a partner sample.
    pub fn mixes(&self) -> bool {
        matches!(
            self,
            Strategy::SpecMix | Strategy::RandomPixel | Strategy::Mixup | Strategy::Cutmix
        )
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutmixMode {
    /// Paste at the location the patch was cut from.
    Aligned,
    /// Paste at an independently drawn location.
    #[default]
    Shifted,
}

impl std::str::FromStr for CutmixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(CutmixMode::Aligned),
            "shifted" => Ok(CutmixMode::Shifted),
            _ => Err(Error::InvalidParameter(format!("unknown cutmix mode {s:?}"))),
        }
    }
}

/// Zero-masking widths for the SpecAugment baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecAugmentConfig {
    pub freq_masks: usize,
    pub max_freq_width: usize,
    pub time_masks: usize,
    pub max_time_width: usize,
}

impl Default for SpecAugmentConfig {
    fn default() -> Self {
        Self {
            freq_masks: 2,
            max_freq_width: 16,
            time_masks: 2,
            max_time_width: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub gamma: GammaSpec,
    pub variant: MaskVariant,
    pub mixup_alpha: f64,
    pub cutmix_mode: CutmixMode,
    pub specaugment: SpecAugmentConfig,
    pub cutout_side: usize,
    /// Pixel count for the random-pixel ablation; drawn from `0..=F·T`
    /// when absent.
    pub random_pixels: Option<usize>,
    /// Probability that an element is augmented at all.
    pub apply_prob: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::SpecMix,
            gamma: GammaSpec::Fixed(0.3),
            variant: MaskVariant::Full,
            mixup_alpha: 1.0,
            cutmix_mode: CutmixMode::Shifted,
            specaugment: SpecAugmentConfig::default(),
            cutout_side: 16,
            random_pixels: None,
            apply_prob: 1.0,
        }
    }
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mixup_alpha > 0.0) || !self.mixup_alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mixup alpha {} must be positive",
                self.mixup_alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.apply_prob) {
            return Err(Error::InvalidParameter(format!(
                "apply probability {} must lie in [0, 1]",
                self.apply_prob
            )));
        }
        if let GammaSpec::Fixed(g) = self.gamma {
            GammaSpec::fixed(g)?;
        }
        Ok(())
    }

    /// Whether the strategy is defined on noisy/clean pairs.
    pub fn supports_paired(&self) -> bool {
        match self.strategy {
            Strategy::SpecMix | Strategy::RandomPixel | Strategy::SpecAugment | Strategy::None => {
                true
            }
            Strategy::Cutmix => self.cutmix_mode == CutmixMode::Aligned,
            Strategy::Mixup | Strategy::Cutout => false,
        }
    }
}

/// Half-open rectangle `[f0, f0 + height) x [t0, t0 + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub f0: usize,
    pub t0: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, f: usize, t: usize) -> bool {
        f >= self.f0 && f < self.f0 + self.height && t >= self.t0 && t < self.t0 + self.width
    }

    /// Rectangle of `height x width` centred on `(cf, ct)`, clipped to the
    /// `freq_bins x frames` grid.
    pub fn centered_clipped(
        cf: usize,
        ct: usize,
        height: usize,
        width: usize,
        freq_bins: usize,
        frames: usize,
    ) -> Self {
        let clip = |c: usize, side: usize, len: usize| {
            let lo = c as i64 - (side / 2) as i64;
            let hi = lo + side as i64;
            let lo = lo.clamp(0, len as i64) as usize;
            let hi = hi.clamp(0, len as i64) as usize;
            (lo, hi - lo)
        };
        let (f0, h) = clip(cf, height, freq_bins);
        let (t0, w) = clip(ct, width, frames);
        Rect {
            f0,
            t0,
            height: h,
            width: w,
        }
    }
}

/// Patch cut from the first sample and the location it is pasted at in
/// the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CutmixRegion {
    pub source: Rect,
    pub dest_f: usize,
    pub dest_t: usize,
}

impl CutmixRegion {
    pub fn aligned(source: Rect) -> Self {
        Self {
            source,
            dest_f: source.f0,
            dest_t: source.t0,
        }
    }

    pub fn dest(&self) -> Rect {
        Rect {
            f0: self.dest_f,
            t0: self.dest_t,
            ..self.source
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: Strategy,
    pub seed: u64,
    pub stream: u64,
    pub applied: bool,
    pub freq_bins: usize,
    pub frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<MaskVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Weight of the first sample in the mixed label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Numerator of λ as a cell count, for mask-based strategies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ones: Option<u64>,
    /// SpecMix bands (cells from the first sample) or SpecAugment bands
    /// (zeroed cells).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bands: Vec<Band>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutmix: Option<CutmixRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutout: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<u64>,
}

impl Provenance {
    pub(crate) fn new(
        strategy: Strategy,
        rng: &crate::RngStream,
        features: &FeatureTensor,
    ) -> Self {
        Self {
            strategy,
            seed: rng.seed(),
            stream: rng.stream(),
            applied: true,
            freq_bins: features.freq_bins(),
            frames: features.frames(),
            variant: None,
            gamma: None,
            lambda: None,
            mask_ones: None,
            bands: Vec::new(),
            cutmix: None,
            cutout: None,
            source: None,
            partner: None,
        }
    }
}

/// An augmented example and the record of how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented<E> {
    pub example: E,
    pub provenance: Provenance,
}

pub(crate) fn mix_labels(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(ya, yb)| lambda * ya + (1.0 - lambda) * yb)
        .collect()
}
