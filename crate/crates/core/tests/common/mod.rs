#![allow(dead_code)]

use std::path::Path;

use cbir_core::antipole::MetricPoint;
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random scene of rectangles and discs over a gradient background.
pub fn synthetic_image(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(48..=96);
    let h = rng.gen_range(48..=96);
    let base: [u8; 3] = rng.gen();
    let slope: [i32; 3] = std::array::from_fn(|_| rng.gen_range(-2..=2));
    let mut img = RgbImage::from_fn(w, h, |x, y| {
        Rgb(std::array::from_fn(|c| {
            (base[c] as i32 + slope[c] * (x as i32 + y as i32)).clamp(0, 255) as u8
        }))
    });
    for _ in 0..rng.gen_range(2..=6) {
        let color = Rgb(rng.gen::<[u8; 3]>());
        let cx = rng.gen_range(0..w) as i64;
        let cy = rng.gen_range(0..h) as i64;
        let r = rng.gen_range(4..=w.min(h) / 2) as i64;
        let disc = rng.gen_bool(0.5);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let (dx, dy) = (x - cx, y - cy);
                let inside = if disc {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= r / 2
                };
                if inside {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    img
}

/// Writes `n` synthetic PNGs named `img_000.png`, ... into `dir`.
pub fn write_corpus(dir: &Path, n: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        synthetic_image(seed * 10_000 + i as u64)
            .save(dir.join(format!("img_{i:03}.png")))
            .unwrap();
    }
}

pub fn euclid(a: &Vec<f64>, b: &Vec<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<MetricPoint<Vec<f64>>> {
    (0..n)
        .map(|i| MetricPoint::new(i as u64, (0..dim).map(|_| rng.gen::<f64>()).collect()))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Cluster centers drawn uniformly in `[0, spread)^dim`.
pub fn cluster_centers(
    rng: &mut ChaCha8Rng,
    clusters: usize,
    dim: usize,
    spread: f64,
) -> Vec<Vec<f64>> {
    (0..clusters)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..spread)).collect())
        .collect()
}

pub fn sample_around(rng: &mut ChaCha8Rng, centers: &[Vec<f64>], std: f64) -> Vec<f64> {
    let c = &centers[rng.gen_range(0..centers.len())];
    c.iter().map(|v| v + std * gaussian(rng)).collect()
}

pub fn clustered_points(
    rng: &mut ChaCha8Rng,
    centers: &[Vec<f64>],
    n: usize,
    std: f64,
) -> Vec<MetricPoint<Vec<f64>>> {
    (0..n)
        .map(|i| MetricPoint::new(i as u64, sample_around(rng, centers, std)))
        .collect()
}
