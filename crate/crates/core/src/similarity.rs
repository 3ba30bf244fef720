//! Histogram, point-set and composite feature distances.
//!
//! Only [`composite_distance`] is used for index pruning. Histogram
//! intersection and Hausdorff distance are available for re-ranking the
//! results of a query.

use serde::{Deserialize, Serialize};

use crate::antipole::Metric;
use crate::error::{invalid, Error, Result};
use crate::texture::{TextureStats, WaveletSignature};

pub fn hist_euclidean(h: &[f64], g: &[f64]) -> Result<f64> {
    if h.len() != g.len() {
        return Err(invalid(format!(
            "histogram lengths differ: {} vs {}",
            h.len(),
            g.len()
        )));
    }
    Ok(squared_l2(h, g).sqrt())
}

fn squared_l2(h: &[f64], g: &[f64]) -> f64 {
    h.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Normalized histogram intersection: `Σ min(h_i, g_i) / min(Σh, Σg)`.
/// A similarity in `[0, 1]`, not a distance.
pub fn hist_intersection(h: &[f64], g: &[f64]) -> Result<f64> {
    if h.len() != g.len() {
        return Err(invalid(format!(
            "histogram lengths differ: {} vs {}",
            h.len(),
            g.len()
        )));
    }
    let (th, tg): (f64, f64) = (h.iter().sum(), g.iter().sum());
    if th <= 0.0 && tg <= 0.0 {
        return Err(Error::DegenerateInput("both histograms are empty".into()));
    }
    let denom = th.min(tg);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    let overlap: f64 = h.iter().zip(g).map(|(a, b)| a.min(*b)).sum();
    Ok((overlap / denom).clamp(0.0, 1.0))
}

pub type Point2 = (f64, f64);

fn nearest(a: Point2, set: &[Point2]) -> f64 {
    set.iter()
        .map(|b| (a.0 - b.0).hypot(a.1 - b.1))
        .fold(f64::INFINITY, f64::min)
}

/// `max_{a ∈ A} min_{b ∈ B} |a − b|`.
pub fn hausdorff_directed(a: &[Point2], b: &[Point2]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Hausdorff distance needs non-empty point sets"));
    }
    Ok(a.iter().map(|&p| nearest(p, b)).fold(0.0, f64::max))
}

pub fn hausdorff(a: &[Point2], b: &[Point2]) -> Result<f64> {
    Ok(hausdorff_directed(a, b)?.max(hausdorff_directed(b, a)?))
}

/// One image's descriptor, laid out as
/// `[color | energy, entropy, contrast, homogeneity | 10 wavelet | orientation]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: u64,
    /// Color histogram as frequencies.
    pub color: Vec<f64>,
    pub texture: TextureStats,
    pub wavelet: WaveletSignature,
    /// Orientation histogram scaled to unit mass (all zero for flat images).
    pub orientation: Vec<f64>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.color.len() + 4 + 10 + self.orientation.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dimension());
        v.extend_from_slice(&self.color);
        v.extend_from_slice(&self.texture.to_array());
        v.extend_from_slice(self.wavelet.values());
        v.extend_from_slice(&self.orientation);
        v
    }

    pub fn same_layout(&self, other: &FeatureVector) -> bool {
        self.color.len() == other.color.len() && self.orientation.len() == other.orientation.len()
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Per-block weights, normalized to sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeights {
    pub color: f64,
    pub texture: f64,
    pub wavelet: f64,
    pub orientation: f64,
}

impl FeatureWeights {
    pub fn new(color: f64, texture: f64, wavelet: f64, orientation: f64) -> Result<Self> {
        let all = [color, texture, wavelet, orientation];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("feature weights must be finite and non-negative"));
        }
        let sum: f64 = all.iter().sum();
        if sum <= 0.0 {
            return Err(invalid("feature weights must not all be zero"));
        }
        Ok(Self {
            color: color / sum,
            texture: texture / sum,
            wavelet: wavelet / sum,
            orientation: orientation / sum,
        })
    }
}

impl Default for FeatureWeights {
    fn default() -> Self {
        Self {
            color: 0.25,
            texture: 0.25,
            wavelet: 0.25,
            orientation: 0.25,
        }
    }
}

fn weighted_squared(u: &FeatureVector, v: &FeatureVector, w: &FeatureWeights) -> f64 {
    w.color * squared_l2(&u.color, &v.color)
        + w.texture * squared_l2(&u.texture.to_array(), &v.texture.to_array())
        + w.wavelet * squared_l2(u.wavelet.values(), v.wavelet.values())
        + w.orientation * squared_l2(&u.orientation, &v.orientation)
}

/// Weighted L2 over the four blocks: `sqrt(Σ w_b · |u_b − v_b|²)`.
pub fn composite_distance(u: &FeatureVector, v: &FeatureVector, w: &FeatureWeights) -> Result<f64> {
    if !u.same_layout(v) {
        return Err(invalid(format!(
            "feature layouts differ: {} vs {} dimensions",
            u.dimension(),
            v.dimension()
        )));
    }
    let sum = w.color + w.texture + w.wavelet + w.orientation;
    if !(sum > 0.0) {
        return Err(invalid("feature weights must not all be zero"));
    }
    Ok(weighted_squared(u, v, w).sqrt())
}

/// Per-feature divisors for the texture and wavelet blocks, fixed once over
/// an indexed collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactors {
    pub texture: [f64; 4],
    pub wavelet: [f64; 10],
}

impl Default for ScaleFactors {
    fn default() -> Self {
        Self {
            texture: [1.0; 4],
            wavelet: [1.0; 10],
        }
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

impl ScaleFactors {
    /// Population standard deviation of each texture and wavelet feature,
    /// falling back to 1 where a feature does not vary.
    pub fn fit(features: &[FeatureVector]) -> Result<Self> {
        if features.is_empty() {
            return Err(invalid("cannot fit scale factors to an empty collection"));
        }
        let guard = |s: f64| if s.is_finite() && s > 1e-12 { s } else { 1.0 };
        let mut out = Self::default();
        for k in 0..4 {
            out.texture[k] = guard(std_dev(features.iter().map(|f| f.texture.to_array()[k])));
        }
        for k in 0..10 {
            out.wavelet[k] = guard(std_dev(features.iter().map(|f| f.wavelet.values()[k])));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .texture
            .iter()
            .chain(&self.wavelet)
            .all(|s| s.is_finite() && *s > 0.0)
        {
            Ok(())
        } else {
            Err(invalid(
                "scale factors must be finite and strictly positive",
            ))
        }
    }

    pub fn apply(&self, f: &FeatureVector) -> FeatureVector {
        let t = f.texture.to_array();
        let w = f.wavelet.values();
        FeatureVector {
            id: f.id,
            color: f.color.clone(),
            texture: TextureStats::from_array(std::array::from_fn(|k| t[k] / self.texture[k])),
            wavelet: WaveletSignature(std::array::from_fn(|k| w[k] / self.wavelet[k])),
            orientation: f.orientation.clone(),
        }
    }
}

/// [`composite_distance`] as an index metric over vectors already checked to
/// share one layout.
#[derive(Clone, Copy, Debug)]
pub struct CompositeMetric {
    pub weights: FeatureWeights,
}

impl Metric<FeatureVector> for CompositeMetric {
    fn distance(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        debug_assert!(a.same_layout(b));
        weighted_squared(a, b, &self.weights).sqrt()
    }
}
