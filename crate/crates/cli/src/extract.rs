//! `extract`: manifest -> one feature tensor file per entry plus an index.

use std::path::Path;

use rayon::prelude::*;
use specmix_core::dsp::{complex_features, mel_features, read_wav, MelSettings, StftConfig, WaveBuffer};
use specmix_core::dsp::FeatureTensor;

use crate::error::{CliError, Result};
use crate::fsutil::create_dir;
use crate::manifest::{Index, IndexEntry, Manifest, ManifestEntry, Task};
use crate::tensorfile::{Metadata, TensorFile};

/// Waveform length used for enhancement clips when none is given.
pub const ENHANCEMENT_CLIP_LEN: usize = 32_768;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSettings {
    pub task: Task,
    pub sample_rate: u32,
    pub stft: StftConfig,
    /// Mel bands; classification only.
    pub n_mels: usize,
    /// Cut or zero-pad every waveform to this many samples first.
    pub clip_len: Option<usize>,
}

impl ExtractSettings {
    /// 44.1 kHz log-mel (nfft 2048, hop 1024, 128 mels) for classification;
    /// 16 kHz complex channels (nfft 512, hop 256, 32768-sample clips) for
    /// enhancement.
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => Self {
                task,
                sample_rate: 44_100,
                stft: StftConfig::new(2048, 1024).expect("valid"),
                n_mels: 128,
                clip_len: None,
            },
            Task::Enhancement => Self {
                task,
                sample_rate: 16_000,
                stft: StftConfig::new(512, 256).expect("valid"),
                n_mels: 0,
                clip_len: Some(ENHANCEMENT_CLIP_LEN),
            },
        }
    }

    fn load(&self, path: &Path) -> Result<WaveBuffer> {
        let wave = read_wav(path).map_err(|e| match e {
            specmix_core::Error::Io(io) => CliError::io(path, io),
            other => other.into(),
        })?;
        Ok(match self.clip_len {
            Some(n) => wave.fit_to_len(n)?,
            None => wave,
        })
    }

    fn features(&self, wave: &WaveBuffer) -> Result<FeatureTensor> {
        Ok(match self.task {
            Task::Classification => mel_features(
                wave,
                &MelSettings {
                    sample_rate: self.sample_rate,
                    n_mels: self.n_mels,
                    stft: self.stft,
                },
            )?,
            Task::Enhancement => complex_features(wave, &self.stft, self.sample_rate)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryFailure {
    pub id: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractReport {
    pub index: Index,
    pub failures: Vec<EntryFailure>,
}

fn extract_entry(
    id: u64,
    entry: &ManifestEntry,
    manifest: &Manifest,
    settings: &ExtractSettings,
    out_dir: &Path,
) -> Result<IndexEntry> {
    match entry {
        ManifestEntry::Labeled { audio, label } => {
            let class = manifest
                .class_index(label)
                .ok_or_else(|| CliError::Config(format!("label {label:?} not in vocabulary")))?;
            let x = settings.features(&settings.load(audio)?)?;
            let name = format!("{id:06}.tft");
            let mut meta = Metadata::new();
            meta.push("id", id)
                .push("source", audio.display())
                .push("label", label)
                .push("label_index", class);
            TensorFile::from_features(&x, meta).write(&out_dir.join(&name))?;
            Ok(IndexEntry {
                id,
                source: audio.display().to_string(),
                features: name,
                label: Some(class),
                clean_source: None,
                clean: None,
            })
        }
        ManifestEntry::Paired { noisy, clean } => {
            let x = settings.features(&settings.load(noisy)?)?;
            let z = settings.features(&settings.load(clean)?)?;
            if x.shape() != z.shape() {
                return Err(specmix_core::Error::ShapeMismatch(format!(
                    "noisy {:?} vs clean {:?}",
                    x.shape(),
                    z.shape()
                ))
                .into());
            }
            let noisy_name = format!("{id:06}.noisy.tft");
            let clean_name = format!("{id:06}.clean.tft");
            for (tensor, name, src, role) in
                [(&x, &noisy_name, noisy, "noisy"), (&z, &clean_name, clean, "clean")]
            {
                let mut meta = Metadata::new();
                meta.push("id", id).push("role", role).push("source", src.display());
                TensorFile::from_features(tensor, meta).write(&out_dir.join(name))?;
            }
            Ok(IndexEntry {
                id,
                source: noisy.display().to_string(),
                features: noisy_name,
                label: None,
                clean_source: Some(clean.display().to_string()),
                clean: Some(clean_name),
            })
        }
    }
}

/// Extract every manifest entry. Per-entry failures are collected rather
/// than aborting; failed entries are left out of the index.
pub fn cmd_extract(
    manifest: &Manifest,
    settings: &ExtractSettings,
    out_dir: &Path,
) -> Result<ExtractReport> {
    if manifest.task != settings.task {
        return Err(CliError::Config(format!(
            "manifest task {} does not match requested task {}",
            manifest.task, settings.task
        )));
    }
    if settings.task == Task::Classification {
        specmix_core::dsp::MelFilterbank::new(settings.sample_rate, settings.stft.nfft(), settings.n_mels)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    create_dir(out_dir)?;

    let results: Vec<Result<IndexEntry>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| extract_entry(i as u64, entry, manifest, settings, out_dir))
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => entries.push(e),
            Err(err) => failures.push(EntryFailure {
                id: i as u64,
                message: err.to_string(),
            }),
        }
    }
    let index = Index {
        task: manifest.task,
        classes: manifest.classes.clone(),
        entries,
    };
    index.save(&out_dir.join(Index::FILE_NAME))?;
    Ok(ExtractReport { index, failures })
}
