//! Dataset manifests and the extraction index.
//!
//! A manifest is UTF-8 text. The first non-comment line names the task
//! (`classification` or `enhancement`); every following line is
//! `audio_path<TAB>label` or `noisy_path<TAB>clean_path`. Lines starting
//! with `#` are comments. Relative paths resolve against the manifest's
//! directory.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Enhancement,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Enhancement => "enhancement",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "classification" => Ok(Task::Classification),
            "enhancement" => Ok(Task::Enhancement),
            other => Err(CliError::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestEntry {
    Labeled { audio: PathBuf, label: String },
    Paired { noisy: PathBuf, clean: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub task: Task,
    pub entries: Vec<ManifestEntry>,
    /// Sorted label names; empty for enhancement.
    pub classes: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| CliError::Config("manifest has no task header".into()))?;
        let task: Task = header.parse()?;

        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut entries = Vec::new();
        for (n, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            let [first, second] = cols[..] else {
                return Err(CliError::Config(format!(
                    "manifest line {}: expected two tab-separated columns",
                    n + 1
                )));
            };
            if first.is_empty() || second.is_empty() {
                return Err(CliError::Config(format!("manifest line {}: empty column", n + 1)));
            }
            entries.push(match task {
                Task::Classification => ManifestEntry::Labeled {
                    audio: resolve(first),
                    label: second.to_string(),
                },
                Task::Enhancement => ManifestEntry::Paired {
                    noisy: resolve(first),
                    clean: resolve(second),
                },
            });
        }
        let classes: BTreeSet<String> = entries
            .iter()
            .filter_map(|e| match e {
                ManifestEntry::Labeled { label, .. } => Some(label.clone()),
                ManifestEntry::Paired { .. } => None,
            })
            .collect();
        Ok(Self {
            task,
            entries,
            classes: classes.into_iter().collect(),
        })
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Position of the entry in the manifest.
    pub id: u64,
    pub source: String,
    /// Feature tensor, relative to the index directory (noisy side for
    /// enhancement).
    pub features: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<String>,
}

/// Output of `extract`: where each entry's tensors ended up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub task: Task,
    pub classes: Vec<String>,
    pub entries: Vec<IndexEntry>,
}

impl Index {
    pub const FILE_NAME: &'static str = "index.json";

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: bad index: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("index serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}
