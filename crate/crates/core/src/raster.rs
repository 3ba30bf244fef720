//! Raster images and the handful of pixel operations every extractor builds on.

use std::path::Path;

use crate::error::{invalid, Error, Result};

/// A 3×3 convolution kernel indexed as `kernel[row][col]`, where row 0 is the
/// pixel above the center and col 0 the pixel to its left.
pub type Kernel3 = [[f64; 3]; 3];

/// Row-major 8-bit image with 1 (gray) or 3 (interleaved RGB) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(invalid(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(invalid(format!(
                "raster data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    /// Builds a gray raster by evaluating `f(x, y)` at every pixel.
    pub fn gray_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::gray(width, height, data)
    }

    /// Decodes an image file into an 8-bit gray or RGB raster. Alpha is dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_dynamic(img))
    }

    pub fn from_dynamic(img: image::DynamicImage) -> Self {
        use image::DynamicImage::*;
        match img {
            ImageLuma8(buf) => {
                let (w, h) = buf.dimensions();
                Self {
                    width: w as usize,
                    height: h as usize,
                    channels: 1,
                    data: buf.into_raw(),
                }
            }
            other => {
                let buf = other.to_rgb8();
                let (w, h) = buf.dimensions();
                Self {
                    width: w as usize,
                    height: h as usize,
                    channels: 3,
                    data: buf.into_raw(),
                }
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Channel values of the pixel at `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Intensity of a single-channel raster at `(x, y)`.
    pub fn intensity(&self, x: usize, y: usize) -> u8 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    pub(crate) fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(invalid(format!(
                "{op} requires a single-channel raster, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    /// Luma conversion with ITU-601 weights. Gray rasters are returned as-is.
    pub fn to_grayscale(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Nearest-neighbor resampling: output `(x, y)` copies input
    /// `(floor(x * W / new_w), floor(y * H / new_h))`.
    pub fn resize(&self, new_w: usize, new_h: usize) -> Result<Raster> {
        if new_w == 0 || new_h == 0 {
            return Err(invalid(format!(
                "resize target must be positive, got {new_w}x{new_h}"
            )));
        }
        if new_w == self.width && new_h == self.height {
            return Ok(self.clone());
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(new_w * new_h * c);
        let src_x: Vec<usize> = (0..new_w).map(|x| x * self.width / new_w).collect();
        for y in 0..new_h {
            let sy = y * self.height / new_h;
            let row = &self.data[sy * self.width * c..(sy + 1) * self.width * c];
            for &sx in &src_x {
                data.extend_from_slice(&row[sx * c..sx * c + c]);
            }
        }
        Ok(Raster {
            width: new_w,
            height: new_h,
            channels: c,
            data,
        })
    }

    /// Real-valued copy of a gray raster.
    pub fn to_field(&self) -> Result<SignedField> {
        self.require_gray("to_field")?;
        Ok(SignedField {
            width: self.width,
            height: self.height,
            values: self.data.iter().map(|&v| v as f64).collect(),
        })
    }
}

/// A width×height grid of real values, row-major. Carries convolution
/// outputs, gradient magnitudes, wavelet subbands and distance maps.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SignedField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(invalid(format!(
                "field data length {} does not match {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SignedField {
        SignedField {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// 3×3 convolution with replicated borders. No rounding or clamping is applied.
pub fn convolve3(img: &Raster, kernel: &Kernel3) -> Result<SignedField> {
    img.require_gray("convolve3")?;
    let (w, h) = (img.width, img.height);
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (ki, row) in kernel.iter().enumerate() {
                let sy = clamp_y(y + ki as isize - 1);
                for (kj, &k) in row.iter().enumerate() {
                    if k != 0.0 {
                        let sx = clamp_x(x + kj as isize - 1);
                        acc += k * img.data[sy * w + sx] as f64;
                    }
                }
            }
            values.push(acc);
        }
    }
    Ok(SignedField {
        width: w,
        height: h,
        values,
    })
}
