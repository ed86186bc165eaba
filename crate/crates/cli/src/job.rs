//! `augment`: run a strategy over an extracted index, batch by batch.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use specmix_core::augment::{
    batch_augment, Augmented, Example, LabeledExample, PairedExample, Provenance, StrategyConfig,
};
use specmix_core::dsp::FeatureTensor;
use specmix_core::mask::Band;

use crate::error::{CliError, Result};
use crate::fsutil::{create_dir, write_atomic};
use crate::manifest::{Index, IndexEntry, Task};
use crate::tensorfile::{Metadata, TensorFile};

pub const PROVENANCE_LOG: &str = "provenance.jsonl";
pub const JOB_FILE: &str = "job.json";

/// Everything that determines an augmentation run's output bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    pub strategy: StrategyConfig,
    pub seed: u64,
    pub batch_size: usize,
}

impl JobConfig {
    pub fn validate(&self, task: Task) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CliError::Config("batch size must be at least 1".into()));
        }
        self.strategy
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if task == Task::Enhancement && !self.strategy.supports_paired() {
            return Err(CliError::Config(format!(
                "strategy {} ({:?} cutmix mode) is not valid for the enhancement task; \
                 use specmix, random-pixel, specaugment, cutmix with --cutmix-mode aligned, or none",
                self.strategy.strategy.name(),
                self.strategy.cutmix_mode
            )));
        }
        Ok(())
    }
}

/// One line of the provenance log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    /// Output position; also the file name stem.
    pub output: u64,
    #[serde(flatten)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentReport {
    pub outputs: usize,
    pub batches: usize,
}

fn read_features(dir: &Path, rel: &str) -> Result<FeatureTensor> {
    let path = dir.join(rel);
    TensorFile::read(&path)?
        .to_features()
        .map_err(|reason| CliError::TensorFile { path, reason })
}

fn load_example(dir: &Path, index: &Index, entry: &IndexEntry) -> Result<Example> {
    let x = read_features(dir, &entry.features)?;
    match index.task {
        Task::Classification => {
            let class = entry.label.ok_or_else(|| {
                CliError::Config(format!("index entry {} has no label", entry.id))
            })?;
            Ok(LabeledExample::one_hot(x, class, index.classes.len())?.into())
        }
        Task::Enhancement => {
            let clean = entry.clean.as_deref().ok_or_else(|| {
                CliError::Config(format!("index entry {} has no clean tensor", entry.id))
            })?;
            Ok(PairedExample::new(x, read_features(dir, clean)?)?.into())
        }
    }
}

fn pad_example(e: &Example, frames: usize) -> Result<Example> {
    Ok(match e {
        Example::Labeled(l) => {
            LabeledExample::new(l.features().pad_frames(frames)?, l.label().to_vec())?.into()
        }
        Example::Paired(p) => {
            PairedExample::new(p.noisy().pad_frames(frames)?, p.clean().pad_frames(frames)?)?
                .into()
        }
    })
}

fn bands_text(bands: &[Band]) -> String {
    bands
        .iter()
        .map(|b| format!("{}:{}:{}", b.axis.name(), b.start, b.width))
        .collect::<Vec<_>>()
        .join(";")
}

fn provenance_metadata(output: u64, p: &Provenance) -> Metadata {
    let mut m = Metadata::new();
    m.push("output", output)
        .push("strategy", p.strategy.name())
        .push("seed", p.seed)
        .push("stream", p.stream)
        .push("applied", p.applied);
    if let Some(v) = p.variant {
        m.push("variant", v.name());
    }
    if let Some(g) = p.gamma {
        m.push("gamma", g);
    }
    if let Some(l) = p.lambda {
        m.push("lambda", l);
    }
    if let Some(o) = p.mask_ones {
        m.push("mask_ones", o);
    }
    if !p.bands.is_empty() {
        m.push("bands", bands_text(&p.bands));
    }
    if let Some(c) = p.cutmix {
        let s = c.source;
        m.push(
            "cutmix",
            format!("{}:{}:{}:{}->{}:{}", s.f0, s.t0, s.height, s.width, c.dest_f, c.dest_t),
        );
    }
    if let Some(r) = p.cutout {
        m.push("cutout", format!("{}:{}:{}:{}", r.f0, r.t0, r.height, r.width));
    }
    if let Some(s) = p.source {
        m.push("source", s);
    }
    if let Some(s) = p.partner {
        m.push("partner", s);
    }
    m
}

fn write_output(out_dir: &Path, output: u64, aug: &Augmented<Example>) -> Result<()> {
    let meta = || provenance_metadata(output, &aug.provenance);
    match &aug.example {
        Example::Labeled(l) => {
            TensorFile::from_features(l.features(), meta())
                .write(&out_dir.join(format!("{output:06}.x.tft")))?;
            let label: Vec<f32> = l.label().iter().map(|&p| p as f32).collect();
            TensorFile::new(vec![label.len() as u32], label, meta())
                .write(&out_dir.join(format!("{output:06}.y.tft")))?;
        }
        Example::Paired(p) => {
            TensorFile::from_features(p.noisy(), meta())
                .write(&out_dir.join(format!("{output:06}.noisy.tft")))?;
            TensorFile::from_features(p.clean(), meta())
                .write(&out_dir.join(format!("{output:06}.clean.tft")))?;
        }
    }
    Ok(())
}

/// Augment every entry of the index at `index_path` into `out_dir`.
///
/// Entries are batched in index order. Within a batch, tensors are
/// right-padded with zeros to the longest one before mixing, and element
/// `k` of the whole run uses RNG stream `k`.
pub fn cmd_augment(job: &JobConfig, index_path: &Path, out_dir: &Path) -> Result<AugmentReport> {
    let index = Index::load(index_path)?;
    job.validate(index.task)?;
    if index.task == Task::Classification && index.classes.is_empty() && !index.entries.is_empty() {
        return Err(CliError::Config("classification index has no classes".into()));
    }
    let dir = index_path.parent().unwrap_or(Path::new("."));
    create_dir(out_dir)?;

    let examples: Vec<Example> = index
        .entries
        .par_iter()
        .map(|e| load_example(dir, &index, e))
        .collect::<Result<_>>()?;

    let mut log = String::new();
    let mut batches = 0;
    for (b, chunk) in examples.chunks(job.batch_size).enumerate() {
        let start = b * job.batch_size;
        let frames = chunk.iter().map(|e| e.features().frames()).max().unwrap_or(0);
        let padded: Vec<Example> = chunk
            .iter()
            .map(|e| pad_example(e, frames))
            .collect::<Result<_>>()?;

        let mut outputs = batch_augment(&padded, &job.strategy, job.seed, start as u64)?;
        for aug in &mut outputs {
            let p = &mut aug.provenance;
            p.source = p.source.map(|i| index.entries[start + i as usize].id);
            p.partner = p.partner.map(|i| index.entries[start + i as usize].id);
        }
        outputs
            .par_iter()
            .enumerate()
            .try_for_each(|(i, aug)| write_output(out_dir, (start + i) as u64, aug))?;

        for (i, aug) in outputs.into_iter().enumerate() {
            let record = ProvenanceRecord {
                output: (start + i) as u64,
                provenance: aug.provenance,
            };
            let line = serde_json::to_string(&record).expect("provenance serializes");
            writeln!(log, "{line}").expect("write to string");
        }
        batches += 1;
    }

    write_atomic(&out_dir.join(PROVENANCE_LOG), log.as_bytes())?;
    let mut job_text = serde_json::to_string_pretty(job).expect("job serializes");
    job_text.push('\n');
    write_atomic(&out_dir.join(JOB_FILE), job_text.as_bytes())?;

    Ok(AugmentReport {
        outputs: examples.len(),
        batches,
    })
}
