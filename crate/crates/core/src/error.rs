use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed wav header: {0}")]
    MalformedWav(String),

    #[error("unsupported wav codec: format tag {format_tag}, {bits_per_sample} bits per sample")]
    UnsupportedCodec { format_tag: u16, bits_per_sample: u16 },

    #[error("wav data chunk is empty")]
    EmptyData,

    #[error("audio buffer is empty")]
    EmptyBuffer,

    #[error("invalid sample rate {0}")]
    InvalidSampleRate(u32),

    #[error("invalid stft config: {0}")]
    InvalidConfig(String),

    #[error("signal of {len} samples is too short for nfft {nfft} (needs more than {} samples)", nfft / 2)]
    SignalTooShort { len: usize, nfft: usize },

    #[error("hop {hop} with window length {nfft} violates the overlap-add reconstruction constraint")]
    NotInvertible { nfft: usize, hop: usize },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class count mismatch: {0} vs {1}")]
    ClassCountMismatch(usize, usize),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature tensor contains non-finite values")]
    NonFinite,
}
