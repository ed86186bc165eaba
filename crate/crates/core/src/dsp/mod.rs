//! Audio ingestion and time-frequency feature extraction.

mod features;
mod mel;
mod plane;
mod psm;
mod stft;
mod wav;

pub use features::{
    channels_to_complex, complex_features, complex_to_channels, FeatureKind, FeatureMeta,
    FeatureTensor,
};
pub use mel::{delta, hz_to_mel, mel_features, mel_to_hz, MelFilterbank, MelSettings, LOG_FLOOR};
pub use plane::Plane;
pub use psm::{apply_psm, phase_sensitive_mask};
pub use stft::{frame_count, istft, istft_with_len, stft, ComplexSpectrogram, StftConfig, Window};
pub use wav::{read_wav, read_wav_bytes, write_wav, write_wav_bytes, WaveBuffer};
