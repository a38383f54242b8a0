//! The soft-threshold classifier.
//!
//! An image is represented by its per-pixel probability map. Pixels whose
//! probability exceeds [`ADMISSION_THRESHOLD`] are *admitted*; each admitted
//! pixel `j` gets two features, its probability `x1` and a normalized rank
//! `x2`. The pixel score is the product of two logistic soft thresholds and
//! the image score is the maximum pixel score.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Pixels must be strictly above this probability to be admitted.
pub const ADMISSION_THRESHOLD: f32 = 0.05;

/// Default cutoff used to binarize an image probability.
pub const DEFAULT_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("probability map must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("expected {expected} values for the map, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f32 },
}

/// A row-major grid of per-pixel probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::EmptyDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or(MapError::EmptyDimensions { width, height })?;
        if values.len() != expected {
            return Err(MapError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        // NaN fails the range test as well.
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(MapError::ValueOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// A map with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, MapError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Sum of absolute pixel differences. `None` when the shapes differ.
    pub fn l1_distance(&self, other: &ProbMap) -> Option<f64> {
        if self.width != other.width || self.height != other.height {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (f64::from(*a) - f64::from(*b)).abs())
                .sum(),
        )
    }
}

/// The four soft-threshold parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub w1: f64,
    pub b1: f64,
    pub w2: f64,
    pub b2: f64,
}

impl ThetaParams {
    pub const ZERO: ThetaParams = ThetaParams {
        w1: 0.0,
        b1: 0.0,
        w2: 0.0,
        b2: 0.0,
    };

    pub fn new(w1: f64, b1: f64, w2: f64, b2: f64) -> Self {
        Self { w1, b1, w2, b2 }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl Default for ThetaParams {
    /// Both thresholds centred at 0.5 with slope 10.
    fn default() -> Self {
        Self::new(10.0, 5.0, 10.0, 5.0)
    }
}

/// Features of one admitted pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelFeatures {
    pub pixel_index: usize,
    /// Probability of the pixel.
    pub x1: f64,
    /// Admitted pixels with probability `<= x1`, over the total pixel count.
    pub x2: f64,
}

/// Binary image label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Absent,
    Present,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Absent => 0.0,
            Label::Present => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Absent => Label::Present,
            Label::Present => Label::Absent,
        }
    }

    pub fn is_present(self) -> bool {
        self == Label::Present
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Absent => "absent",
            Label::Present => "present",
        })
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Admitted-pixel features in ascending pixel order.
pub fn compute_features(map: &ProbMap) -> Vec<PixelFeatures> {
    let total = map.len() as f64;
    let mut admitted: Vec<f32> = map
        .values()
        .iter()
        .copied()
        .filter(|v| *v > ADMISSION_THRESHOLD)
        .collect();
    admitted.sort_by(f32::total_cmp);

    map.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > ADMISSION_THRESHOLD)
        .map(|(pixel_index, &v)| {
            let rank = admitted.partition_point(|a| *a <= v);
            PixelFeatures {
                pixel_index,
                x1: f64::from(v),
                x2: rank as f64 / total,
            }
        })
        .collect()
}

/// `σ(w1·x1 − b1) · σ(w2·x2 − b2)`.
pub fn pixel_prob(f: &PixelFeatures, theta: &ThetaParams) -> f64 {
    sigmoid(theta.w1 * f.x1 - theta.b1) * sigmoid(theta.w2 * f.x2 - theta.b2)
}

/// Image probability: the maximum pixel probability over admitted pixels,
/// or 0 when nothing is admitted.
pub fn image_prob(map: &ProbMap, theta: &ThetaParams) -> f64 {
    ImageFeatures::from_map(map).prob(theta)
}

/// `present` iff `p > cutoff`.
pub fn classify(p: f64, cutoff: f64) -> Label {
    if p > cutoff {
        Label::Present
    } else {
        Label::Absent
    }
}

/// Precomputed, deduplicated features of one image.
///
/// Admitted pixels with equal probability share both features, so only the
/// lowest-indexed pixel of each distinct value is kept. The points are
/// sorted by `x1`; `x2` is non-decreasing along the chain (strictly
/// increasing between distinct values), which lets the arg-max be found in
/// constant time whenever both slopes agree in sign.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    points: Vec<PixelFeatures>,
    /// Position in `points` of the lowest pixel index overall.
    lowest_index_point: usize,
}

impl ImageFeatures {
    pub fn from_map(map: &ProbMap) -> Self {
        let mut feats = compute_features(map);
        feats.sort_by(|a, b| a.x1.total_cmp(&b.x1).then(a.pixel_index.cmp(&b.pixel_index)));
        feats.dedup_by(|later, earlier| later.x1 == earlier.x1);
        let lowest_index_point = feats
            .iter()
            .enumerate()
            .min_by_key(|(_, f)| f.pixel_index)
            .map(|(i, _)| i)
            .unwrap_or(0);
        Self {
            points: feats,
            lowest_index_point,
        }
    }

    /// Distinct admitted feature points, ascending by `x1`.
    pub fn points(&self) -> &[PixelFeatures] {
        &self.points
    }

    pub fn admitted_is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The pixel attaining the maximum, ties broken by lowest pixel index.
    pub fn argmax(&self, theta: &ThetaParams) -> Option<(PixelFeatures, f64)> {
        let last = self.points.len().checked_sub(1)?;
        let (w1, w2) = (theta.w1, theta.w2);
        let increasing = (w1 > 0.0 && w2 >= 0.0) || (w1 >= 0.0 && w2 > 0.0);
        let decreasing = (w1 < 0.0 && w2 <= 0.0) || (w1 <= 0.0 && w2 < 0.0);
        let at = |i: usize| pixel_prob(&self.points[i], theta);

        if increasing {
            // Walk back over floating-point ties at the top of the chain.
            let best = at(last);
            let mut pick = last;
            let mut i = last;
            while i > 0 && at(i - 1) == best {
                i -= 1;
                if self.points[i].pixel_index < self.points[pick].pixel_index {
                    pick = i;
                }
            }
            Some((self.points[pick], best))
        } else if decreasing {
            let best = at(0);
            let mut pick = 0;
            let mut i = 0;
            while i < last && at(i + 1) == best {
                i += 1;
                if self.points[i].pixel_index < self.points[pick].pixel_index {
                    pick = i;
                }
            }
            Some((self.points[pick], best))
        } else if w1 == 0.0 && w2 == 0.0 {
            let p = self.points[self.lowest_index_point];
            Some((p, pixel_prob(&p, theta)))
        } else {
            self.scan(theta)
        }
    }

    /// Exhaustive arg-max over every stored point.
    pub fn scan(&self, theta: &ThetaParams) -> Option<(PixelFeatures, f64)> {
        let mut best: Option<(PixelFeatures, f64)> = None;
        for f in &self.points {
            let p = pixel_prob(f, theta);
            best = match best {
                Some((bf, bp)) if bp > p || (bp == p && bf.pixel_index < f.pixel_index) => {
                    Some((bf, bp))
                }
                _ => Some((*f, p)),
            };
        }
        best
    }

    pub fn prob(&self, theta: &ThetaParams) -> f64 {
        self.argmax(theta).map_or(0.0, |(_, p)| p)
    }
}
