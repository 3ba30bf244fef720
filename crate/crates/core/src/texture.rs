//! Gray-level co-occurrence statistics and Haar wavelet subband signatures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{Raster, SignedField};

/// Normalized gray-level co-occurrence matrix for one pixel offset.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    levels: usize,
    offset: (isize, isize),
    probs: Vec<f64>,
}

impl CooccurrenceMatrix {
    /// Builds a matrix from explicit probabilities, `probs[i * levels + j]`.
    pub fn from_probs(levels: usize, offset: (isize, isize), probs: Vec<f64>) -> Result<Self> {
        if levels == 0 || probs.len() != levels * levels {
            return Err(invalid(format!(
                "expected {levels}x{levels} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid(
                "co-occurrence probabilities must be finite and non-negative",
            ));
        }
        Ok(Self {
            levels,
            offset,
            probs,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn offset(&self) -> (isize, isize) {
        self.offset
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Co-occurrence of quantized levels for pixel pairs `(p, p + offset)` that
/// both fall inside the image.
pub fn cooccurrence(
    img: &Raster,
    levels: usize,
    offset: (isize, isize),
) -> Result<CooccurrenceMatrix> {
    img.require_gray("cooccurrence")?;
    if !(2..=256).contains(&levels) {
        return Err(invalid(format!(
            "co-occurrence levels must be in [2, 256], got {levels}"
        )));
    }
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (dx, dy) = offset;
    if dx.abs() >= w || dy.abs() >= h {
        return Err(invalid(format!(
            "offset ({dx}, {dy}) exceeds the {w}x{h} image"
        )));
    }
    let mut counts = vec![0u64; levels * levels];
    let mut pairs = 0u64;
    let data = img.data();
    let q = |v: u8| v as usize * levels / 256;
    for y in 0.max(-dy)..h.min(h - dy) {
        for x in 0.max(-dx)..w.min(w - dx) {
            let a = q(data[(y * w + x) as usize]);
            let b = q(data[((y + dy) * w + x + dx) as usize]);
            counts[a * levels + b] += 1;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::DegenerateInput(format!(
            "no pixel pairs at offset ({dx}, {dy})"
        )));
    }
    let n = pairs as f64;
    Ok(CooccurrenceMatrix {
        levels,
        offset,
        probs: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureStats {
    pub energy: f64,
    pub entropy: f64,
    pub contrast: f64,
    pub homogeneity: f64,
}

impl TextureStats {
    pub fn to_array(self) -> [f64; 4] {
        [self.energy, self.entropy, self.contrast, self.homogeneity]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            energy: v[0],
            entropy: v[1],
            contrast: v[2],
            homogeneity: v[3],
        }
    }

    /// Component-wise mean of several stat sets.
    pub fn mean(stats: &[TextureStats]) -> Option<TextureStats> {
        if stats.is_empty() {
            return None;
        }
        let n = stats.len() as f64;
        let mut acc = [0.0; 4];
        for s in stats {
            for (a, v) in acc.iter_mut().zip(s.to_array()) {
                *a += v;
            }
        }
        Some(Self::from_array(acc.map(|a| a / n)))
    }
}

/// Energy, entropy (base 2), contrast and homogeneity of a co-occurrence matrix.
pub fn texture_stats(p: &CooccurrenceMatrix) -> TextureStats {
    let mut s = TextureStats {
        energy: 0.0,
        entropy: 0.0,
        contrast: 0.0,
        homogeneity: 0.0,
    };
    let l = p.levels;
    for i in 0..l {
        for j in 0..l {
            let v = p.probs[i * l + j];
            if v == 0.0 {
                continue;
            }
            let diff = i.abs_diff(j) as f64;
            s.energy += v * v;
            s.entropy -= v * v.log2();
            s.contrast += diff * diff * v;
            s.homogeneity += v / (1.0 + diff);
        }
    }
    // -0.0 for a single-cell matrix
    s.entropy = s.entropy.max(0.0);
    s
}

/// One level of the 2-D orthonormal Haar transform.
///
/// Band names give the vertical filter first and the horizontal filter
/// second, so `lh` holds horizontal detail and `hl` vertical detail.
#[derive(Clone, Debug, PartialEq)]
pub struct Subbands {
    pub ll: SignedField,
    pub lh: SignedField,
    pub hl: SignedField,
    pub hh: SignedField,
}

/// Pairs rows then columns as `((a + b) / √2, (a − b) / √2)`.
pub fn haar2_level(field: &SignedField) -> Result<Subbands> {
    let (w, h) = (field.width(), field.height());
    if w == 0 || h == 0 || w % 2 != 0 || h % 2 != 0 {
        return Err(invalid(format!(
            "Haar transform needs even dimensions, got {w}x{h}"
        )));
    }
    let (hw, hh) = (w / 2, h / 2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = field.values();

    // horizontal pass: low half then high half per row
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let src = &v[y * w..(y + 1) * w];
        let dst = &mut rows[y * w..(y + 1) * w];
        for k in 0..hw {
            let (a, b) = (src[2 * k], src[2 * k + 1]);
            dst[k] = (a + b) * s;
            dst[hw + k] = (a - b) * s;
        }
    }

    let mut bands = [
        SignedField::zeros(hw, hh),
        SignedField::zeros(hw, hh),
        SignedField::zeros(hw, hh),
        SignedField::zeros(hw, hh),
    ];
    for k in 0..hh {
        for x in 0..w {
            let a = rows[2 * k * w + x];
            let b = rows[(2 * k + 1) * w + x];
            let (lo, hi) = ((a + b) * s, (a - b) * s);
            let (horiz_band, bx) = if x < hw { (0, x) } else { (1, x - hw) };
            // [ll, lh, hl, hh]: vertical low → 0/1, vertical high → 2/3
            bands[horiz_band].set(bx, k, lo);
            bands[2 + horiz_band].set(bx, k, hi);
        }
    }
    let [ll, lh, hl, hh] = bands;
    Ok(Subbands { ll, lh, hl, hh })
}

/// Inverse of [`haar2_level`].
pub fn inverse_haar2_level(bands: &Subbands) -> Result<SignedField> {
    let (hw, hh) = (bands.ll.width(), bands.ll.height());
    for b in [&bands.lh, &bands.hl, &bands.hh] {
        if b.width() != hw || b.height() != hh {
            return Err(invalid("subband dimensions differ"));
        }
    }
    let (w, h) = (hw * 2, hh * 2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = SignedField::zeros(w, h);
    for y in 0..hh {
        for x in 0..hw {
            let (ll, lh, hl, hhv) = (
                bands.ll.get(x, y),
                bands.lh.get(x, y),
                bands.hl.get(x, y),
                bands.hh.get(x, y),
            );
            // undo vertical pass for the low and high horizontal halves
            let lo_top = (ll + hl) * s;
            let lo_bot = (ll - hl) * s;
            let hi_top = (lh + hhv) * s;
            let hi_bot = (lh - hhv) * s;
            out.set(2 * x, 2 * y, (lo_top + hi_top) * s);
            out.set(2 * x + 1, 2 * y, (lo_top - hi_top) * s);
            out.set(2 * x, 2 * y + 1, (lo_bot + hi_bot) * s);
            out.set(2 * x + 1, 2 * y + 1, (lo_bot - hi_bot) * s);
        }
    }
    Ok(out)
}

/// Ten band signatures in the order
/// `[I2, I3, I4, I12, I13, I14, I111, I112, I113, I114]`: the three detail
/// bands of levels one and two, then the deepest approximation band and the
/// three level-three detail bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletSignature(pub [f64; 10]);

impl WaveletSignature {
    pub fn values(&self) -> &[f64; 10] {
        &self.0
    }

    /// The nine detail-band signatures (everything except I111).
    pub fn details(&self) -> [f64; 9] {
        let v = &self.0;
        [v[0], v[1], v[2], v[3], v[4], v[5], v[7], v[8], v[9]]
    }
}

/// Root-mean-square of the band coefficients.
pub fn band_signature(band: &SignedField) -> f64 {
    let n = band.values().len();
    if n == 0 {
        return 0.0;
    }
    (band.energy() / n as f64).sqrt()
}

/// Three-level Haar decomposition recursing on the approximation band.
pub fn wavelet_signatures(img: &Raster) -> Result<WaveletSignature> {
    img.require_gray("wavelet_signatures")?;
    if img.width() % 8 != 0 || img.height() % 8 != 0 {
        return Err(invalid(format!(
            "wavelet signatures need dimensions divisible by 8, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let l1 = haar2_level(&img.to_field()?)?;
    let l2 = haar2_level(&l1.ll)?;
    let l3 = haar2_level(&l2.ll)?;
    let sig = |b: &SignedField| band_signature(b);
    Ok(WaveletSignature([
        sig(&l1.lh),
        sig(&l1.hl),
        sig(&l1.hh),
        sig(&l2.lh),
        sig(&l2.hl),
        sig(&l2.hh),
        sig(&l3.ll),
        sig(&l3.lh),
        sig(&l3.hl),
        sig(&l3.hh),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_cooccurrence(img: &Raster, levels: usize, (dx, dy): (isize, isize)) -> Vec<f64> {
        let mut counts = vec![0.0; levels * levels];
        let mut n = 0.0;
        for y in 0..img.height() as isize {
            for x in 0..img.width() as isize {
                let (qx, qy) = (x + dx, y + dy);
                if qx < 0 || qy < 0 || qx >= img.width() as isize || qy >= img.height() as isize {
                    continue;
                }
                let a = img.intensity(x as usize, y as usize) as usize * levels / 256;
                let b = img.intensity(qx as usize, qy as usize) as usize * levels / 256;
                counts[a * levels + b] += 1.0;
                n += 1.0;
            }
        }
        counts.into_iter().map(|c| c / n).collect()
    }

    #[test]
    fn cooccurrence_constant_and_two_by_two() {
        let img = Raster::gray(4, 4, vec![100; 16]).unwrap();
        let p = cooccurrence(&img, 8, (1, 0)).unwrap();
        let c = 100 * 8 / 256;
        assert_eq!(p.get(c, c), 1.0);
        assert_eq!(p.probs().iter().sum::<f64>(), 1.0);

        let img = Raster::gray(2, 2, vec![0, 255, 0, 255]).unwrap();
        let p = cooccurrence(&img, 2, (1, 0)).unwrap();
        assert_eq!(p.probs(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn cooccurrence_errors() {
        let img = Raster::gray(3, 3, vec![0; 9]).unwrap();
        assert!(matches!(
            cooccurrence(&img, 8, (3, 0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(cooccurrence(&img, 1, (1, 0)).is_err());
        let row = Raster::gray(1, 1, vec![0]).unwrap();
        assert!(matches!(cooccurrence(&row, 8, (0, 0)), Ok(_)));
    }

    #[test]
    fn cooccurrence_random_matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Raster::gray_from_fn(8, 8, |_, _| rng.gen()).unwrap();
        for offset in [(1, 0), (0, 1), (-2, 3), (1, -1)] {
            let p = cooccurrence(&img, 8, offset).unwrap();
            let expected = brute_cooccurrence(&img, 8, offset);
            for (a, b) in p.probs().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stats_single_and_uniform() {
        let mut probs = vec![0.0; 4];
        probs[3] = 1.0;
        let s = texture_stats(&CooccurrenceMatrix::from_probs(2, (1, 0), probs).unwrap());
        assert_eq!(s.energy, 1.0);
        assert_eq!(s.entropy, 0.0);
        assert_eq!(s.contrast, 0.0);
        assert_eq!(s.homogeneity, 1.0);

        let s = texture_stats(&CooccurrenceMatrix::from_probs(2, (1, 0), vec![0.25; 4]).unwrap());
        assert_eq!(s.energy, 0.25);
        assert_eq!(s.entropy, 2.0);
        assert_eq!(s.contrast, 0.5);
        assert_eq!(s.homogeneity, 0.25 + 0.125 + 0.125 + 0.25);
    }

    #[test]
    fn stats_match_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let raw: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let s = texture_stats(&CooccurrenceMatrix::from_probs(4, (1, 0), probs.clone()).unwrap());

        let (mut e, mut h, mut c, mut hom) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..4i32 {
            for j in 0..4i32 {
                let p = probs[(i * 4 + j) as usize];
                e += p.powi(2);
                h += -p * p.ln() / std::f64::consts::LN_2;
                c += ((i - j) * (i - j)) as f64 * p;
                hom += p / (1.0 + (i - j).abs() as f64);
            }
        }
        assert!((s.energy - e).abs() < 1e-12);
        assert!((s.entropy - h).abs() < 1e-12);
        assert!((s.contrast - c).abs() < 1e-12);
        assert!((s.homogeneity - hom).abs() < 1e-12);
    }

    #[test]
    fn haar_constant_and_row_symmetric() {
        let f = SignedField::new(2, 2, vec![3.0; 4]).unwrap();
        let b = haar2_level(&f).unwrap();
        assert!((b.ll.get(0, 0) - 6.0).abs() < 1e-12);
        assert_eq!(
            (b.lh.get(0, 0), b.hl.get(0, 0), b.hh.get(0, 0)),
            (0.0, 0.0, 0.0)
        );

        let f = SignedField::new(2, 2, vec![1.0, 5.0, 1.0, 5.0]).unwrap();
        let b = haar2_level(&f).unwrap();
        assert_eq!(b.hl.get(0, 0), 0.0);
        assert_eq!(b.hh.get(0, 0), 0.0);
        assert!(b.lh.get(0, 0).abs() > 1.0);

        assert!(haar2_level(&SignedField::zeros(3, 2)).is_err());
    }

    /// Level-one Haar analysis matrix: averages in the top half, differences below.
    fn haar_matrix(n: usize) -> Vec<Vec<f64>> {
        let s = 0.5f64.sqrt();
        let mut m = vec![vec![0.0; n]; n];
        for k in 0..n / 2 {
            m[k][2 * k] = s;
            m[k][2 * k + 1] = s;
            m[n / 2 + k][2 * k] = s;
            m[n / 2 + k][2 * k + 1] = -s;
        }
        m
    }

    /// `H · X · Hᵀ` split into quadrants [ll, lh, hl, hh].
    fn matrix_level(x: &[Vec<f64>]) -> [Vec<Vec<f64>>; 4] {
        let n = x.len();
        let hm = haar_matrix(n);
        let mut tmp = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                tmp[i][j] = (0..n).map(|k| hm[i][k] * x[k][j]).sum();
            }
        }
        let mut y = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                y[i][j] = (0..n).map(|k| tmp[i][k] * hm[j][k]).sum();
            }
        }
        let h = n / 2;
        let quad = |r0: usize, c0: usize| -> Vec<Vec<f64>> {
            (0..h)
                .map(|i| (0..h).map(|j| y[r0 + i][c0 + j]).collect())
                .collect()
        };
        [quad(0, 0), quad(0, h), quad(h, 0), quad(h, h)]
    }

    fn rms(b: &[Vec<f64>]) -> f64 {
        let n = (b.len() * b.len()) as f64;
        (b.iter().flatten().map(|v| v * v).sum::<f64>() / n).sqrt()
    }

    #[test]
    fn ramp_signature_matches_matrix_oracle() {
        let img = Raster::gray_from_fn(8, 8, |x, y| (x * 20 + y * 7) as u8).unwrap();
        let sig = wavelet_signatures(&img).unwrap();

        let x0: Vec<Vec<f64>> = (0..8)
            .map(|y| (0..8).map(|x| (x * 20 + y * 7) as f64).collect())
            .collect();
        let [ll1, lh1, hl1, hh1] = matrix_level(&x0);
        let [ll2, lh2, hl2, hh2] = matrix_level(&ll1);
        let [ll3, lh3, hl3, hh3] = matrix_level(&ll2);
        let expected = [
            rms(&lh1),
            rms(&hl1),
            rms(&hh1),
            rms(&lh2),
            rms(&hl2),
            rms(&hh2),
            rms(&ll3),
            rms(&lh3),
            rms(&hl3),
            rms(&hh3),
        ];
        for (a, b) in sig.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn constant_image_signature() {
        let img = Raster::gray(16, 16, vec![10; 256]).unwrap();
        let sig = wavelet_signatures(&img).unwrap();
        assert!(sig.details().iter().all(|&v| v.abs() < 1e-9));
        assert!((sig.values()[6] - 80.0).abs() < 1e-9);
        assert!(wavelet_signatures(&Raster::gray(12, 16, vec![0; 192]).unwrap()).is_err());
    }

    #[test]
    fn inverted_image_keeps_details() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = Raster::gray_from_fn(16, 16, |_, _| rng.gen()).unwrap();
        let inv = Raster::gray(16, 16, img.data().iter().map(|v| 255 - v).collect()).unwrap();
        let a = wavelet_signatures(&img).unwrap().details();
        let b = wavelet_signatures(&inv).unwrap().details();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    fn arb_field() -> impl Strategy<Value = SignedField> {
        (1usize..9, 1usize..9).prop_flat_map(|(hw, hh)| {
            proptest::collection::vec(-500.0f64..500.0, 4 * hw * hh)
                .prop_map(move |v| SignedField::new(2 * hw, 2 * hh, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip(f in arb_field()) {
            let b = haar2_level(&f).unwrap();
            let e = b.ll.energy() + b.lh.energy() + b.hl.energy() + b.hh.energy();
            prop_assert!((e - f.energy()).abs() <= 1e-9 * f.energy().max(1.0));
            let back = inverse_haar2_level(&b).unwrap();
            for (a, c) in back.values().iter().zip(f.values()) {
                prop_assert!((a - c).abs() <= 1e-9 * c.abs().max(1.0));
            }
        }

        #[test]
        fn stats_bounds(raw in proptest::collection::vec(0.0f64..1.0, 9)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let p = CooccurrenceMatrix::from_probs(3, (1, 0), raw.iter().map(|v| v / total).collect()).unwrap();
            let s = texture_stats(&p);
            prop_assert!(s.energy > 0.0 && s.energy <= 1.0 + 1e-12);
            prop_assert!(s.entropy >= 0.0 && s.entropy <= 9f64.log2() + 1e-12);
            prop_assert!(s.contrast >= 0.0);
            prop_assert!(s.homogeneity > 0.0 && s.homogeneity <= 1.0 + 1e-12);
        }

        #[test]
        fn brightness_shift_only_moves_ll(seed in any::<u64>(), shift in 1u8..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = Raster::gray_from_fn(16, 8, |_, _| rng.gen_range(0..=195)).unwrap();
            let up = Raster::gray(16, 8, img.data().iter().map(|v| v + shift).collect()).unwrap();
            let a = wavelet_signatures(&img).unwrap().details();
            let b = wavelet_signatures(&up).unwrap().details();
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
