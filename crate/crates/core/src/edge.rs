//! Gaussian smoothing, Sobel gradients and the edge-derived descriptors:
//! magnitude-weighted orientation histograms and chamfer distance-transform
//! histograms.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{convolve3, Kernel3, Raster, SignedField};

pub const GAUSSIAN_3X3: Kernel3 = [
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
    [2.0 / 16.0, 4.0 / 16.0, 2.0 / 16.0],
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
];

pub const SOBEL_X: Kernel3 = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: Kernel3 = [[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]];

/// Binomial 3×3 blur, rounded half away from zero and clamped to `u8`.
pub fn gaussian_blur3(img: &Raster) -> Result<Raster> {
    img.require_gray("gaussian_blur3")?;
    let field = convolve3(img, &GAUSSIAN_3X3)?;
    let data = field
        .values()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    Raster::gray(img.width(), img.height(), data)
}

/// Signed horizontal and vertical Sobel responses.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub gx: SignedField,
    pub gy: SignedField,
}

impl GradientField {
    pub fn new(gx: SignedField, gy: SignedField) -> Result<Self> {
        if gx.width() != gy.width() || gx.height() != gy.height() {
            return Err(invalid("gradient components differ in size"));
        }
        Ok(Self { gx, gy })
    }

    pub fn width(&self) -> usize {
        self.gx.width()
    }

    pub fn height(&self) -> usize {
        self.gx.height()
    }
}

pub fn sobel(img: &Raster) -> Result<GradientField> {
    img.require_gray("sobel")?;
    Ok(GradientField {
        gx: convolve3(img, &SOBEL_X)?,
        gy: convolve3(img, &SOBEL_Y)?,
    })
}

pub fn gradient_magnitude(g: &GradientField) -> SignedField {
    let values =
        g.gx.values()
            .iter()
            .zip(g.gy.values())
            .map(|(x, y)| x.hypot(*y))
            .collect();
    SignedField::new(g.width(), g.height(), values).expect("gradient components share dimensions")
}

/// Pixels whose gradient magnitude clears a threshold, in row-major order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeMap {
    pub points: Vec<(usize, usize)>,
    pub magnitudes: Vec<f64>,
}

impl EdgeMap {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point coordinates as reals, for set distances.
    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|&(x, y)| (x as f64, y as f64))
            .collect()
    }
}

/// Keeps pixels with `mag >= threshold_fraction * max(mag)`. An all-zero field
/// has no edges.
pub fn edge_map(mag: &SignedField, threshold_fraction: f64) -> Result<EdgeMap> {
    if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
        return Err(invalid(format!(
            "threshold fraction must be in (0, 1], got {threshold_fraction}"
        )));
    }
    let max = mag.max();
    let mut map = EdgeMap::default();
    if !(max > 0.0) {
        return Ok(map);
    }
    let cut = threshold_fraction * max;
    for y in 0..mag.height() {
        for x in 0..mag.width() {
            let m = mag.get(x, y);
            if m >= cut {
                map.points.push((x, y));
                map.magnitudes.push(m);
            }
        }
    }
    Ok(map)
}

/// Gradient directions over `[0, 2π)` weighted by magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationHistogram {
    weights: Vec<f64>,
}

impl OrientationHistogram {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid(
                "orientation weights must be non-empty, finite and non-negative",
            ));
        }
        Ok(Self { weights })
    }

    pub fn bin_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights scaled to sum to one; an empty histogram stays all zero.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            self.weights.iter().map(|w| w / total).collect()
        } else {
            self.weights.clone()
        }
    }

    /// Circular shift to the right: `out[i] = w[(i - s) mod n]`.
    pub fn rotate(&self, s: usize) -> OrientationHistogram {
        let n = self.weights.len();
        let s = s % n;
        let weights = (0..n).map(|i| self.weights[(i + n - s) % n]).collect();
        OrientationHistogram { weights }
    }
}

pub fn orientation_histogram(g: &GradientField, bins: usize) -> Result<OrientationHistogram> {
    if bins < 4 {
        return Err(invalid(format!(
            "orientation histogram needs at least 4 bins, got {bins}"
        )));
    }
    let mut weights = vec![0.0; bins];
    for (&gx, &gy) in g.gx.values().iter().zip(g.gy.values()) {
        let mag = gx.hypot(gy);
        if mag <= 0.0 {
            continue;
        }
        let mut angle = gy.atan2(gx);
        if angle < 0.0 {
            angle += TAU;
        }
        let bin = ((angle * bins as f64 / TAU) as usize).min(bins - 1);
        weights[bin] += mag;
    }
    Ok(OrientationHistogram { weights })
}

/// Smallest L2 distance between `h1` and any circular shift of `h2`, with the
/// smallest shift that attains it.
pub fn match_orientation(
    h1: &OrientationHistogram,
    h2: &OrientationHistogram,
) -> Result<(f64, usize)> {
    let n = h1.bin_count();
    if n != h2.bin_count() {
        return Err(invalid(format!(
            "bin counts differ: {n} vs {}",
            h2.bin_count()
        )));
    }
    let mut best = (f64::INFINITY, 0);
    for s in 0..n {
        let d2: f64 = (0..n)
            .map(|i| {
                let d = h1.weights[i] - h2.weights[(i + n - s) % n];
                d * d
            })
            .sum();
        if d2 < best.0 {
            best = (d2, s);
        }
    }
    Ok((best.0.sqrt(), best.1))
}

const AXIAL: u32 = 3;
const DIAGONAL: u32 = 4;

/// Two-pass 3-4 chamfer distance to the nearest edge pixel, scaled to pixel
/// units (divided by 3).
pub fn distance_transform(edges: &EdgeMap, width: usize, height: usize) -> Result<SignedField> {
    if edges.is_empty() {
        return Err(Error::DegenerateInput(
            "distance transform of an empty edge map".into(),
        ));
    }
    if let Some(&(x, y)) = edges
        .points
        .iter()
        .find(|&&(x, y)| x >= width || y >= height)
    {
        return Err(invalid(format!(
            "edge point ({x}, {y}) outside {width}x{height}"
        )));
    }
    let (w, h) = (width, height);
    let inf = u32::MAX / 2;
    let mut d = vec![inf; w * h];
    for &(x, y) in &edges.points {
        d[y * w + x] = 0;
    }

    for y in 0..h {
        for x in 0..w {
            let mut v = d[y * w + x];
            if x > 0 {
                v = v.min(d[y * w + x - 1] + AXIAL);
            }
            if y > 0 {
                let up = (y - 1) * w;
                v = v.min(d[up + x] + AXIAL);
                if x > 0 {
                    v = v.min(d[up + x - 1] + DIAGONAL);
                }
                if x + 1 < w {
                    v = v.min(d[up + x + 1] + DIAGONAL);
                }
            }
            d[y * w + x] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let mut v = d[y * w + x];
            if x + 1 < w {
                v = v.min(d[y * w + x + 1] + AXIAL);
            }
            if y + 1 < h {
                let down = (y + 1) * w;
                v = v.min(d[down + x] + AXIAL);
                if x + 1 < w {
                    v = v.min(d[down + x + 1] + DIAGONAL);
                }
                if x > 0 {
                    v = v.min(d[down + x - 1] + DIAGONAL);
                }
            }
            d[y * w + x] = v;
        }
    }

    SignedField::new(
        w,
        h,
        d.into_iter().map(|v| v as f64 / AXIAL as f64).collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub counts: Vec<u64>,
}

/// Bins every pixel of a distance map into `bins` equal cells over
/// `[0, max_d)`; distances at or past `max_d` land in the last bin.
pub fn distance_histogram(dt: &SignedField, bins: usize, max_d: f64) -> Result<DistanceHistogram> {
    if bins < 2 {
        return Err(invalid(format!(
            "distance histogram needs at least 2 bins, got {bins}"
        )));
    }
    if !(max_d > 0.0) {
        return Err(invalid(format!(
            "max distance must be positive, got {max_d}"
        )));
    }
    let mut counts = vec![0u64; bins];
    for &d in dt.values() {
        let bin = ((d.max(0.0) * bins as f64 / max_d) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Ok(DistanceHistogram { counts })
}
