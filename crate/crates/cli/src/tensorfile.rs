//! `TFT1` tensor files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "TFT1" | dtype u8 (1 = f32) | rank u8 | dims: rank x u32 | payload: f32 x prod(dims)
//!        | metadata length u32 | metadata: UTF-8 `key=value` lines
//! ```

use std::fs;
use std::path::Path;

use specmix_core::dsp::{FeatureKind, FeatureMeta, FeatureTensor, StftConfig, Window};

use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;

pub const MAGIC: &[u8; 4] = b"TFT1";
pub const DTYPE_F32: u8 = 1;

/// Ordered `key=value` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata(Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn render(&self) -> std::result::Result<String, String> {
        let mut out = String::new();
        for (k, v) in &self.0 {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(format!("metadata entry {k:?} is not a key=value line"));
            }
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        Ok(out)
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        text.lines()
            .filter(|l| !l.is_empty())
            .map(|line| {
                line.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| format!("metadata line {line:?} has no '='"))
            })
            .collect::<std::result::Result<_, _>>()
            .map(Metadata)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
    pub metadata: Metadata,
}

impl TensorFile {
    pub fn new(dims: Vec<u32>, data: Vec<f32>, metadata: Metadata) -> Self {
        debug_assert_eq!(
            dims.iter().map(|&d| d as usize).product::<usize>(),
            data.len()
        );
        Self {
            dims,
            data,
            metadata,
        }
    }

    pub fn to_bytes(&self) -> std::result::Result<Vec<u8>, String> {
        if self.dims.len() > u8::MAX as usize {
            return Err(format!("rank {} exceeds 255", self.dims.len()));
        }
        let expected: usize = self.dims.iter().map(|&d| d as usize).product();
        if expected != self.data.len() {
            return Err(format!(
                "dims {:?} need {expected} values, have {}",
                self.dims,
                self.data.len()
            ));
        }
        let meta = self.metadata.render()?;
        let mut out = Vec::with_capacity(6 + 4 * self.dims.len() + 4 * self.data.len() + 4 + meta.len());
        out.extend_from_slice(MAGIC);
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err("bad magic".into());
        }
        let dtype = cur.take(1)?[0];
        if dtype != DTYPE_F32 {
            return Err(format!("unsupported dtype code {dtype}"));
        }
        let rank = cur.take(1)?[0] as usize;
        let dims: Vec<u32> = (0..rank)
            .map(|_| cur.u32())
            .collect::<std::result::Result<_, _>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or("dims overflow")?;
        let payload = cur.take(count.checked_mul(4).ok_or("dims overflow")?)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let meta_len = cur.u32()? as usize;
        let meta_bytes = cur.take(meta_len)?;
        if cur.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
        }
        let text = std::str::from_utf8(meta_bytes).map_err(|_| "metadata is not UTF-8")?;
        Ok(Self {
            dims,
            data,
            metadata: Metadata::parse(text)?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| CliError::TensorFile {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes().map_err(|reason| CliError::TensorFile {
            path: path.to_path_buf(),
            reason,
        })?;
        write_atomic(path, &bytes)
    }

    pub fn from_features(x: &FeatureTensor, mut metadata: Metadata) -> Self {
        let (f, t, c) = x.shape();
        let meta = x.meta();
        let mut m = Metadata::new();
        m.push("kind", meta.kind.name())
            .push("sample_rate", meta.sample_rate)
            .push("nfft", meta.stft.nfft())
            .push("hop", meta.stft.hop())
            .push("window", meta.stft.window().name());
        m.0.append(&mut metadata.0);
        Self::new(vec![f as u32, t as u32, c as u32], x.data().to_vec(), m)
    }

    pub fn to_features(&self) -> std::result::Result<FeatureTensor, String> {
        let [f, t, _c] = self.dims[..] else {
            return Err(format!("feature tensors have rank 3, got {:?}", self.dims));
        };
        let field = |key: &str| {
            self.metadata
                .get(key)
                .ok_or_else(|| format!("missing metadata key {key}"))
        };
        let num = |key: &str| -> std::result::Result<usize, String> {
            field(key)?
                .parse()
                .map_err(|_| format!("metadata key {key} is not an integer"))
        };
        let kind = FeatureKind::parse(field("kind")?)
            .ok_or_else(|| format!("unknown feature kind {:?}", self.metadata.get("kind")))?;
        if field("window")? != Window::Hann.name() {
            return Err("only hann windows are supported".into());
        }
        let stft = StftConfig::new(num("nfft")?, num("hop")?).map_err(|e| e.to_string())?;
        let meta = FeatureMeta {
            kind,
            sample_rate: num("sample_rate")? as u32,
            stft,
        };
        FeatureTensor::new(f as usize, t as usize, self.data.clone(), meta).map_err(|e| e.to_string())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
