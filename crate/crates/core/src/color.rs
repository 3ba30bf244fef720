//! Color histograms and color correlograms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::Raster;

/// Pixel counts per color bin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl ColorHistogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Counts divided by the pixel total.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// 256-bin histogram of a gray raster.
pub fn intensity_histogram(img: &Raster) -> Result<ColorHistogram> {
    img.require_gray("intensity_histogram")?;
    let mut counts = vec![0u64; 256];
    for &v in img.data() {
        counts[v as usize] += 1;
    }
    Ok(ColorHistogram {
        counts,
        total: img.pixel_count() as u64,
    })
}

#[inline]
fn quantize(v: u8, levels: usize) -> usize {
    v as usize * levels / 256
}

/// Joint RGB histogram with `bins` levels per channel, flattened with red as
/// the outermost axis: bin = (r * bins + g) * bins + b.
pub fn rgb_histogram(img: &Raster, bins: usize) -> Result<ColorHistogram> {
    if !(2..=16).contains(&bins) {
        return Err(invalid(format!(
            "bins per channel must be in [2, 16], got {bins}"
        )));
    }
    if img.channels() != 3 {
        return Err(invalid("rgb_histogram requires a 3-channel raster"));
    }
    let mut counts = vec![0u64; bins * bins * bins];
    for p in img.data().chunks_exact(3) {
        let (r, g, b) = (
            quantize(p[0], bins),
            quantize(p[1], bins),
            quantize(p[2], bins),
        );
        counts[(r * bins + g) * bins + b] += 1;
    }
    Ok(ColorHistogram {
        counts,
        total: img.pixel_count() as u64,
    })
}

/// Counts of ordered pixel pairs by (color i, color j, distance d), with
/// chessboard distance between pixels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correlogram {
    levels: usize,
    distances: Vec<usize>,
    entries: Vec<u64>,
}

impl Correlogram {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn distances(&self) -> &[usize] {
        &self.distances
    }

    /// Pair count for colors `(i, j)` at the `k`-th configured distance.
    pub fn get(&self, i: usize, j: usize, k: usize) -> u64 {
        self.entries[(k * self.levels + i) * self.levels + j]
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }
}

pub fn correlogram(img: &Raster, levels: usize, distances: &[usize]) -> Result<Correlogram> {
    img.require_gray("correlogram")?;
    if !(2..=64).contains(&levels) {
        return Err(invalid(format!(
            "correlogram levels must be in [2, 64], got {levels}"
        )));
    }
    if distances.is_empty() {
        return Err(invalid("correlogram needs at least one distance"));
    }
    if distances[0] == 0 || distances.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(
            "correlogram distances must be positive and strictly increasing",
        ));
    }

    let (w, h) = (img.width() as isize, img.height() as isize);
    let q: Vec<usize> = img.data().iter().map(|&v| quantize(v, levels)).collect();
    let at = |x: isize, y: isize| q[(y * w + x) as usize];
    let mut entries = vec![0u64; distances.len() * levels * levels];

    for (k, &d) in distances.iter().enumerate() {
        let d = d as isize;
        let plane = &mut entries[k * levels * levels..(k + 1) * levels * levels];
        for y in 0..h {
            for x in 0..w {
                let ci = at(x, y);
                let row = &mut plane[ci * levels..(ci + 1) * levels];
                // Walk the square ring of radius d: top and bottom rows in
                // full, then the left and right columns without corners.
                for dx in -d..=d {
                    let nx = x + dx;
                    if nx < 0 || nx >= w {
                        continue;
                    }
                    for ny in [y - d, y + d] {
                        if ny >= 0 && ny < h {
                            row[at(nx, ny)] += 1;
                        }
                    }
                }
                for dy in (-d + 1)..d {
                    let ny = y + dy;
                    if ny < 0 || ny >= h {
                        continue;
                    }
                    for nx in [x - d, x + d] {
                        if nx >= 0 && nx < w {
                            row[at(nx, ny)] += 1;
                        }
                    }
                }
            }
        }
    }

    Ok(Correlogram {
        levels,
        distances: distances.to_vec(),
        entries,
    })
}
