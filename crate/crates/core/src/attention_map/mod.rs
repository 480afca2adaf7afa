//! Click logs to attention maps.
//!
//! A [`SessionLog`] holds the clicks one participant made on one chart. The
//! rasterizer stamps a disk ("bubble") at every click and blurs the stamp
//! image with a truncated Gaussian, producing a RAW [`AttentionMap`] in image
//! pixel space. Maps are then normalized, aggregated into group maps or
//! binarized for overlap analyses.

mod format;
mod raster;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use format::{read_amap, write_amap, write_pgm16, AMAP_MAGIC, AMAP_VERSION};
pub use raster::{blur, gaussian_kernel, rasterize, stamp_disks};

/// One click, in intrinsic image pixels, timed from chart onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub x: u32,
    pub y: u32,
    /// Milliseconds since the chart was shown.
    pub t: u64,
}

/// A participant's response to a question item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Choice(u32),
    Skipped,
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Answer::Choice(c) => s.serialize_u32(*c),
            Answer::Skipped => s.serialize_str("SKIPPED"),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Choice(u32),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Choice(c) => Ok(Answer::Choice(c)),
            Repr::Tag(t) if t == "SKIPPED" => Ok(Answer::Skipped),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!(
                "expected a choice index or \"SKIPPED\", got {t:?}"
            ))),
        }
    }
}

/// One participant on one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub participant_id: String,
    pub chart_id: String,
    pub clicks: Vec<ClickEvent>,
    pub answer: Answer,
    pub duration_s: f64,
    pub image_w: u32,
    pub image_h: u32,
    /// Effective bubble radius in image pixels after screen scaling, when the
    /// capture client reported one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bubble_radius: Option<f64>,
}

impl SessionLog {
    pub fn click_count(&self) -> usize {
        self.clicks.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Accumulation {
    /// Overlapping bubbles add up.
    Additive,
    /// Overlapping bubbles saturate at 1.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub bubble_radius: f64,
    pub blur_sigma: f64,
    pub accumulation: Accumulation,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            bubble_radius: 32.0,
            blur_sigma: 19.0,
            accumulation: Accumulation::Additive,
        }
    }
}

impl RasterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bubble_radius > 0.0 && self.bubble_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bubble_radius must be positive, got {}",
                self.bubble_radius
            )));
        }
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "blur_sigma must be positive, got {}",
                self.blur_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NormMode {
    Raw,
    Sum1,
    Max1,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::Raw => "RAW",
            NormMode::Sum1 => "SUM1",
            NormMode::Max1 => "MAX1",
        })
    }
}

/// Dense non-negative row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    norm: NormMode,
}

impl AttentionMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        AttentionMap {
            width,
            height,
            values: vec![0.0; width * height],
            norm: NormMode::Raw,
        }
    }

    /// Wraps `values` as a RAW map, rejecting negative or non-finite entries.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "value {} at index {i} is negative or non-finite",
                values[i]
            )));
        }
        Ok(AttentionMap {
            width,
            height,
            values,
            norm: NormMode::Raw,
        })
    }

    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>, norm: NormMode) -> Self {
        debug_assert_eq!(values.len(), width * height);
        AttentionMap {
            width,
            height,
            values,
            norm,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> NormMode {
        self.norm
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Location of the first maximal pixel in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn ensure_same_dims(&self, other: &AttentionMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Rescales to unit sum (`Sum1`) or unit maximum (`Max1`).
    pub fn normalize(&self, mode: NormMode) -> Result<AttentionMap> {
        let divisor = match mode {
            NormMode::Raw => return Ok(self.clone()),
            NormMode::Sum1 => self.total(),
            NormMode::Max1 => self.max(),
        };
        if divisor <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(AttentionMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v / divisor).collect(),
            norm: mode,
        })
    }

    /// Uniform SUM1 map.
    pub fn uniform(width: usize, height: usize) -> AttentionMap {
        let n = (width * height) as f64;
        AttentionMap {
            width,
            height,
            values: vec![1.0 / n; width * height],
            norm: NormMode::Sum1,
        }
    }
}

/// Element-wise mean of the SUM1-normalized inputs, re-normalized to SUM1.
pub fn aggregate(maps: &[AttentionMap]) -> Result<AttentionMap> {
    let first = maps.first().ok_or(Error::Empty("map list"))?;
    let mut acc = vec![0.0; first.len()];
    for m in maps {
        first.ensure_same_dims(m)?;
        let n = m.normalize(NormMode::Sum1)?;
        for (a, v) in acc.iter_mut().zip(n.values()) {
            *a += v;
        }
    }
    let count = maps.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    AttentionMap::from_parts(first.width, first.height, acc, NormMode::Raw).normalize(NormMode::Sum1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binarize {
    /// The ⌈f·N⌉ highest-valued pixels, ties to the lower row-major index.
    TopFraction(f64),
    /// Pixels strictly above the threshold.
    AbsThreshold(f64),
}

impl Default for Binarize {
    fn default() -> Self {
        Binarize::TopFraction(0.10)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    /// Mask with the half-open rectangle `[x0, x1) × [y0, y1)` set.
    pub fn from_rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        let mut bits = vec![false; width * height];
        for y in y0.min(height)..y1.min(height) {
            for x in x0.min(width)..x1.min(width) {
                bits[y * width + x] = true;
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn union_with(&mut self, other: &BinaryMask) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }
}

pub fn binarize(map: &AttentionMap, strategy: Binarize) -> Result<BinaryMask> {
    let n = map.len();
    let bits = match strategy {
        Binarize::TopFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "top fraction must lie in (0, 1], got {f}"
                )));
            }
            // Guard against f·N landing a hair above an integer.
            let keep = ((f * n as f64) - 1e-9).ceil().max(0.0) as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| map.values[b].total_cmp(&map.values[a]).then(a.cmp(&b)));
            let mut bits = vec![false; n];
            for &i in order.iter().take(keep.min(n)) {
                bits[i] = true;
            }
            bits
        }
        Binarize::AbsThreshold(eps) => map.values.iter().map(|v| *v > eps).collect(),
    };
    Ok(BinaryMask {
        width: map.width,
        height: map.height,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, v: &[f64]) -> AttentionMap {
        AttentionMap::from_values(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn sum1_of_constant_grid() {
        let n = map(2, 2, &[2.0; 4]).normalize(NormMode::Sum1).unwrap();
        assert_eq!(n.values(), &[0.25; 4]);
        assert_eq!(n.norm(), NormMode::Sum1);
    }

    #[test]
    fn max1_scales_by_peak() {
        let n = map(2, 2, &[0.0, 4.0, 0.0, 0.0]).normalize(NormMode::Max1).unwrap();
        assert_eq!(n.values(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_map_cannot_be_normalized() {
        let z = AttentionMap::zeros(3, 3);
        assert!(matches!(z.normalize(NormMode::Sum1), Err(Error::ZeroMass)));
        assert!(matches!(z.normalize(NormMode::Max1), Err(Error::ZeroMass)));
    }

    #[test]
    fn negative_values_rejected() {
        assert!(AttentionMap::from_values(2, 1, vec![1.0, -0.5]).is_err());
        assert!(AttentionMap::from_values(2, 1, vec![1.0]).is_err());
    }

    #[test]
    fn aggregate_single_is_normalize() {
        let m = map(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(aggregate(std::slice::from_ref(&m)).unwrap(), m.normalize(NormMode::Sum1).unwrap());
    }

    #[test]
    fn aggregate_disjoint_deltas() {
        let a = map(2, 1, &[5.0, 0.0]);
        let b = map(2, 1, &[0.0, 0.1]);
        assert_eq!(aggregate(&[a, b]).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(aggregate(&[]), Err(Error::Empty(_))));
        let a = map(2, 1, &[1.0, 0.0]);
        let b = map(1, 2, &[1.0, 0.0]);
        assert!(matches!(aggregate(&[a, b]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn top_fraction_quarter() {
        let m = map(2, 2, &[4.0, 3.0, 2.0, 1.0]);
        let mask = binarize(&m, Binarize::TopFraction(0.25)).unwrap();
        assert_eq!(mask.bits(), &[true, false, false, false]);
    }

    #[test]
    fn top_fraction_one_marks_everything() {
        let m = map(3, 2, &[0.1, 0.5, 0.2, 0.9, 0.3, 0.3]);
        assert_eq!(binarize(&m, Binarize::TopFraction(1.0)).unwrap().count(), 6);
    }

    #[test]
    fn top_fraction_ties_go_to_lower_index() {
        let m = map(4, 1, &[1.0, 2.0, 2.0, 2.0]);
        let mask = binarize(&m, Binarize::TopFraction(0.5)).unwrap();
        assert_eq!(mask.bits(), &[false, true, true, false]);
    }

    #[test]
    fn threshold_zero_on_empty_map() {
        let mask = binarize(&AttentionMap::zeros(3, 3), Binarize::AbsThreshold(0.0)).unwrap();
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn top_fraction_out_of_range() {
        let m = map(1, 1, &[1.0]);
        assert!(binarize(&m, Binarize::TopFraction(0.0)).is_err());
        assert!(binarize(&m, Binarize::TopFraction(1.5)).is_err());
    }

    #[test]
    fn answer_serde_forms() {
        assert_eq!(serde_json::to_string(&Answer::Choice(2)).unwrap(), "2");
        assert_eq!(serde_json::to_string(&Answer::Skipped).unwrap(), "\"SKIPPED\"");
        let a: Answer = serde_json::from_str("\"SKIPPED\"").unwrap();
        assert_eq!(a, Answer::Skipped);
        assert!(serde_json::from_str::<Answer>("\"maybe\"").is_err());
    }
}
