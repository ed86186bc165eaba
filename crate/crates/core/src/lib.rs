//! SpecMix: mixed-sample augmentation for time-frequency audio features.
//!
//! The crate is split into three layers:
//!
//! - [`dsp`]: WAV I/O, STFT/ISTFT, log-mel with delta channels, complex
//!   spectrogram channels and phase-sensitive masks.
//! - [`mask`]: band masks built from random frequency and time stripes,
//!   plus the random-pixel ablation mask.
//! - [`augment`]: SpecMix for labelled and paired (noisy/clean) data, and the
//!   Mixup, Cutmix, SpecAugment and Cutout baselines.
//!
//! Every random decision goes through an explicit [`RngStream`] keyed by a
//! `(seed, stream)` pair, so results are reproducible regardless of how work
//! is spread across threads.

pub mod augment;
pub mod dsp;
mod error;
pub mod mask;
mod rng;

pub use error::{Error, Result};
pub use rng::{domain, RngStream};
