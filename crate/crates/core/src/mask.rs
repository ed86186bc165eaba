//! SpecMix band masks.
//!
//! A mask is the union of up to three frequency stripes (each spanning every
//! frame) and up to three time stripes (each spanning every bin). Cells set to
//! one are taken from the first sample, the rest from the second.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, RngStream};

/// Largest number of bands drawn per axis.
pub const MAX_BANDS_PER_AXIS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[serde(rename = "freq")]
    Frequency,
    Time,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Frequency => "freq",
            Axis::Time => "time",
        }
    }
}

/// A stripe `[start, start + width)` along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Band {
    pub axis: Axis,
    pub start: usize,
    pub width: usize,
}

impl Band {
    pub fn end(&self) -> usize {
        self.start + self.width
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index < self.end()
    }
}

/// Band width policy: a fixed fraction of the axis, or a fraction drawn from
/// `U[0, 1)` once per mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaSpec {
    Fixed(f64),
    Uniform,
}

impl GammaSpec {
    pub fn fixed(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(GammaSpec::Fixed(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "gamma {value} must lie in (0, 1]"
            )))
        }
    }

    /// Resolve to a concrete γ. Only the uniform mode consumes a draw.
    pub fn resolve(&self, rng: &mut RngStream) -> f64 {
        match *self {
            GammaSpec::Fixed(v) => v,
            GammaSpec::Uniform => rng.uniform(),
        }
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Fixed(v) => write!(f, "{v}"),
            GammaSpec::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for GammaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") || s.eq_ignore_ascii_case("u[0,1]") {
            return Ok(GammaSpec::Uniform);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse gamma {s:?}")))?;
        GammaSpec::fixed(v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskVariant {
    #[default]
    Full,
    TimeOnly,
    FreqOnly,
}

impl MaskVariant {
    pub fn name(&self) -> &'static str {
        match self {
            MaskVariant::Full => "full",
            MaskVariant::TimeOnly => "time-only",
            MaskVariant::FreqOnly => "freq-only",
        }
    }
}

impl FromStr for MaskVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MaskVariant::Full),
            "time" | "time-only" | "time_only" => Ok(MaskVariant::TimeOnly),
            "freq" | "freq-only" | "freq_only" => Ok(MaskVariant::FreqOnly),
            _ => Err(Error::InvalidParameter(format!("unknown mask variant {s:?}"))),
        }
    }
}

/// Fraction of cells set in a mask, kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskFraction {
    pub ones: u64,
    pub cells: u64,
}

impl MaskFraction {
    pub fn new(ones: u64, cells: u64) -> Self {
        debug_assert!(ones <= cells && cells > 0);
        Self { ones, cells }
    }

    pub fn value(&self) -> f64 {
        self.ones as f64 / self.cells as f64
    }

    pub fn complement(&self) -> Self {
        Self::new(self.cells - self.ones, self.cells)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    Bands(Vec<Band>),
    Pixels,
}

/// Binary `F x T` mask with the bands that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TFMask {
    freq_bins: usize,
    frames: usize,
    shape: Shape,
    inverted: bool,
    gamma: Option<f64>,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl TFMask {
    fn empty(freq_bins: usize, frames: usize, shape: Shape) -> Result<Self> {
        if freq_bins == 0 || frames == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dims must be positive, got {freq_bins} x {frames}"
            )));
        }
        let words_per_row = frames.div_ceil(64);
        Ok(Self {
            freq_bins,
            frames,
            shape,
            inverted: false,
            gamma: None,
            words_per_row,
            bits: vec![0; freq_bins * words_per_row],
        })
    }

    /// Materialize the union of `bands`. Bands are clamped to the grid.
    pub fn from_bands(freq_bins: usize, frames: usize, bands: Vec<Band>) -> Result<Self> {
        let mut mask = Self::empty(freq_bins, frames, Shape::Bands(Vec::new()))?;
        let wpr = mask.words_per_row;

        let mut time_row = vec![0u64; wpr];
        let mut freq_rows = vec![false; freq_bins];
        for band in &bands {
            match band.axis {
                Axis::Frequency => {
                    for r in band.start.min(freq_bins)..band.end().min(freq_bins) {
                        freq_rows[r] = true;
                    }
                }
                Axis::Time => {
                    for t in band.start.min(frames)..band.end().min(frames) {
                        time_row[t / 64] |= 1 << (t % 64);
                    }
                }
            }
        }
        let mut full_row = vec![u64::MAX; wpr];
        if frames % 64 != 0 {
            full_row[wpr - 1] = (1u64 << (frames % 64)) - 1;
        }
        for (r, &is_freq) in freq_rows.iter().enumerate() {
            let src = if is_freq { &full_row } else { &time_row };
            mask.bits[r * wpr..(r + 1) * wpr].copy_from_slice(src);
        }
        mask.shape = Shape::Bands(bands);
        Ok(mask)
    }

    fn set(&mut self, f: usize, t: usize) {
        self.bits[f * self.words_per_row + t / 64] |= 1 << (t % 64);
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Bands that generated the mask; empty for pixel masks.
    pub fn bands(&self) -> &[Band] {
        match &self.shape {
            Shape::Bands(b) => b,
            Shape::Pixels => &[],
        }
    }

    pub fn is_pixel_mask(&self) -> bool {
        matches!(self.shape, Shape::Pixels)
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    /// γ used to size the bands, when the mask came from the band sampler.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn band_count(&self, axis: Axis) -> usize {
        self.bands().iter().filter(|b| b.axis == axis).count()
    }

    pub fn get(&self, f: usize, t: usize) -> bool {
        self.bits[f * self.words_per_row + t / 64] >> (t % 64) & 1 == 1
    }

    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn cells(&self) -> u64 {
        (self.freq_bins * self.frames) as u64
    }

    pub fn fraction(&self) -> MaskFraction {
        MaskFraction::new(self.ones(), self.cells())
    }

    /// Row-major `F x T` view as bytes (1 = from the first sample).
    pub fn to_u8_grid(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.freq_bins * self.frames);
        for f in 0..self.freq_bins {
            for t in 0..self.frames {
                out.push(self.get(f, t) as u8);
            }
        }
        out
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        out.inverted = !out.inverted;
        let wpr = self.words_per_row;
        let tail = self.frames % 64;
        for (i, w) in out.bits.iter_mut().enumerate() {
            *w = !*w;
            if tail != 0 && i % wpr == wpr - 1 {
                *w &= (1u64 << tail) - 1;
            }
        }
        out
    }

    /// Debug text form: `F T` header, then one `axis start width` line per
    /// band (`pixel f t` for pixel masks), then `invert` if complemented.
    pub fn to_debug_text(&self) -> String {
        let mut out = format!("{} {}\n", self.freq_bins, self.frames);
        match &self.shape {
            Shape::Bands(bands) => {
                for b in bands {
                    out.push_str(&format!("{} {} {}\n", b.axis.name(), b.start, b.width));
                }
            }
            Shape::Pixels => {
                let base = if self.inverted { self.complement() } else { self.clone() };
                for f in 0..self.freq_bins {
                    for t in 0..self.frames {
                        if base.get(f, t) {
                            out.push_str(&format!("pixel {f} {t}\n"));
                        }
                    }
                }
            }
        }
        if self.inverted {
            out.push_str("invert\n");
        }
        out
    }

    pub fn from_debug_text(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::InvalidParameter(format!("bad mask line {line:?}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad(""))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad(header)))
            .collect::<Result<_>>()?;
        let [freq_bins, frames] = dims[..] else {
            return Err(bad(header));
        };

        let mut bands = Vec::new();
        let mut pixels = Vec::new();
        let mut invert = false;
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad(line));
            match parts[..] {
                ["invert"] => invert = true,
                [axis @ ("freq" | "time"), start, width] => bands.push(Band {
                    axis: if axis == "freq" { Axis::Frequency } else { Axis::Time },
                    start: num(start)?,
                    width: num(width)?,
                }),
                ["pixel", f, t] => pixels.push((num(f)?, num(t)?)),
                _ => return Err(bad(line)),
            }
        }
        let mask = if pixels.is_empty() {
            Self::from_bands(freq_bins, frames, bands)?
        } else {
            if !bands.is_empty() {
                return Err(Error::InvalidParameter(
                    "mask mixes bands and pixels".into(),
                ));
            }
            let mut m = Self::empty(freq_bins, frames, Shape::Pixels)?;
            for (f, t) in pixels {
                if f >= freq_bins || t >= frames {
                    return Err(bad(&format!("pixel {f} {t}")));
                }
                m.set(f, t);
            }
            m
        };
        Ok(if invert { mask.complement() } else { mask })
    }
}

/// Number of bands for one axis, uniform over `{0, 1, 2, 3}`.
pub fn sample_band_count(rng: &mut RngStream) -> usize {
    rng.below(MAX_BANDS_PER_AXIS as u64 + 1) as usize
}

/// Band starting at `start` with width `round(γ·len)`, clamped to the axis.
pub fn band_at(axis: Axis, axis_len: usize, gamma: f64, start: usize) -> Band {
    let start = start.min(axis_len.saturating_sub(1));
    let width = ((gamma * axis_len as f64).round() as usize).min(axis_len - start);
    Band { axis, start, width }
}

/// Draw one band: start is `floor(u·len)` for `u ~ U[0, 1)`.
pub fn sample_band(axis: Axis, axis_len: usize, gamma: f64, rng: &mut RngStream) -> Band {
    let start = (rng.uniform() * axis_len as f64).floor() as usize;
    band_at(axis, axis_len, gamma, start)
}

/// Build a SpecMix mask.
///
/// Draw order: γ (uniform mode only), frequency band count, frequency
/// starts, time band count, time starts. The variant skips an axis entirely,
/// including its draws.
pub fn build_specmix_mask(
    freq_bins: usize,
    frames: usize,
    gamma: &GammaSpec,
    variant: MaskVariant,
    rng: &mut RngStream,
) -> Result<TFMask> {
    if freq_bins == 0 || frames == 0 {
        return Err(Error::InvalidParameter(format!(
            "mask dims must be positive, got {freq_bins} x {frames}"
        )));
    }
    let g = gamma.resolve(rng);
    let mut bands = Vec::with_capacity(2 * MAX_BANDS_PER_AXIS);
    if variant != MaskVariant::TimeOnly {
        for _ in 0..sample_band_count(rng) {
            bands.push(sample_band(Axis::Frequency, freq_bins, g, rng));
        }
    }
    if variant != MaskVariant::FreqOnly {
        for _ in 0..sample_band_count(rng) {
            bands.push(sample_band(Axis::Time, frames, g, rng));
        }
    }
    let mut mask = TFMask::from_bands(freq_bins, frames, bands)?;
    mask.gamma = Some(g);
    Ok(mask)
}

/// Exactly `n` distinct cells set, chosen uniformly without replacement.
pub fn build_random_pixel_mask(
    freq_bins: usize,
    frames: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<TFMask> {
    let mut mask = TFMask::empty(freq_bins, frames, Shape::Pixels)?;
    let cells = freq_bins * frames;
    if n > cells {
        return Err(Error::InvalidParameter(format!(
            "cannot select {n} of {cells} cells"
        )));
    }
    // Partial Fisher-Yates over cell indices.
    let mut idx: Vec<usize> = (0..cells).collect();
    for i in 0..n {
        let j = i + rng.below((cells - i) as u64) as usize;
        idx.swap(i, j);
        mask.set(idx[i] / frames, idx[i] % frames);
    }
    Ok(mask)
}

pub fn mask_fraction(mask: &TFMask) -> MaskFraction {
    mask.fraction()
}

pub fn complement(mask: &TFMask) -> TFMask {
    mask.complement()
}
