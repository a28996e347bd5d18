//! Resolution-robust latent codec.
//!
//! Images are reflection-padded to multiples of 64, mapped by a pluggable
//! analysis transform to an `M x H/16 x W/16` latent, uniformly quantized
//! against the global extrema, and packed for transmission. The reference
//! transform is a 16x16 blockwise orthonormal DCT truncated to the first
//! 64 zigzag coefficients per color channel (3 * 64 = 192 latent channels),
//! so it needs no trained weights, inverts exactly on its kept subspace,
//! and reproduces the shape arithmetic of the learned encoder it stands
//! in for. Neural transforms plug in behind [`Transform`].

mod dct;
pub mod wire;

pub use dct::BlockDct16;

use crate::ratio::CompressionRatio;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("latent contains non-finite values")]
    NonFinite,
    #[error("malformed wire payload: {0}")]
    Wire(String),
}

/// H x W x 3 raster, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub const CHANNELS: usize = 3;

    pub fn new(h: usize, w: usize) -> Self {
        assert!(h >= 1 && w >= 1, "image dims must be >= 1");
        Self {
            h,
            w,
            data: vec![0.0; h * w * Self::CHANNELS],
        }
    }

    pub fn constant(h: usize, w: usize, value: f64) -> Self {
        assert!(h >= 1 && w >= 1, "image dims must be >= 1");
        Self {
            h,
            w,
            data: vec![value; h * w * Self::CHANNELS],
        }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f64>) -> Result<Self, CodecError> {
        if h == 0 || w == 0 || data.len() != h * w * Self::CHANNELS {
            return Err(CodecError::Shape(format!(
                "data length {} does not match {h}x{w}x3",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(CodecError::Shape("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { h, w, data })
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.w + x) * Self::CHANNELS + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.idx(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.idx(y, x, c);
        self.data[i] = v;
    }

    /// Rec. 601 luma.
    pub fn luma(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.h * self.w);
        for px in self.data.chunks_exact(Self::CHANNELS) {
            out.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
        }
        out
    }

    /// Copies the rectangle `[y0, y0+h) x [x0, x0+w)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<ImageBuffer, CodecError> {
        if h == 0 || w == 0 || y0 + h > self.h || x0 + w > self.w {
            return Err(CodecError::Shape(format!(
                "crop {h}x{w}+{y0}+{x0} exceeds {}x{}",
                self.h, self.w
            )));
        }
        let mut out = ImageBuffer::new(h, w);
        for y in 0..h {
            for x in 0..w {
                for c in 0..Self::CHANNELS {
                    out.set(y, x, c, self.get(y0 + y, x0 + x, c));
                }
            }
        }
        Ok(out)
    }

    pub fn clamp_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// `M x lh x lw` real tensor produced by the analysis transform, plus the
/// pre-padding dimensions needed to crop the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    pub m: usize,
    pub lh: usize,
    pub lw: usize,
    pub data: Vec<f64>,
    pub orig_h: usize,
    pub orig_w: usize,
}

impl LatentTensor {
    #[inline]
    pub fn idx(&self, ch: usize, by: usize, bx: usize) -> usize {
        (ch * self.lh + by) * self.lw + bx
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Padded spatial dims `(lh * 16, lw * 16)`.
    pub fn padded_dims(&self) -> (usize, usize) {
        (self.lh * 16, self.lw * 16)
    }
}

/// Uniformly quantized latent with its global extrema as side information.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLatent {
    pub levels: Vec<u32>,
    pub ratio: CompressionRatio,
    pub y_min: f64,
    pub y_max: f64,
    pub m: usize,
    pub lh: usize,
    pub lw: usize,
    pub orig_h: usize,
    pub orig_w: usize,
}

impl QuantizedLatent {
    pub fn bits(&self) -> u32 {
        self.ratio.bits()
    }

    /// Quantizer step `(y_max - y_min) / (2^b - 1)`; zero for a degenerate range.
    pub fn step(&self) -> f64 {
        (self.y_max - self.y_min) / self.ratio.max_level() as f64
    }
}

/// Next multiple of 64 at or above `d`.
pub fn pad_to_64(d: usize) -> usize {
    d.div_ceil(64) * 64
}

/// Latent element count for an `h x w` input at `m` channels:
/// `m * (pad(h)/16) * (pad(w)/16)`.
pub fn latent_size(h: usize, w: usize, m: usize) -> usize {
    m * (pad_to_64(h) / 16) * (pad_to_64(w) / 16)
}

/// Mirror index into `0..len` without repeating the border sample.
#[inline]
fn reflect_index(i: usize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    let m = i % period;
    if m < len {
        m
    } else {
        period - m
    }
}

/// Reflection-pads the image on the bottom and right to the next multiples
/// of 64. The top-left `h x w` region equals the input exactly.
pub fn pad_reflect(img: &ImageBuffer) -> ImageBuffer {
    let ph = pad_to_64(img.h);
    let pw = pad_to_64(img.w);
    if ph == img.h && pw == img.w {
        return img.clone();
    }
    let mut out = ImageBuffer::new(ph, pw);
    for y in 0..ph {
        let sy = reflect_index(y, img.h);
        for x in 0..pw {
            let sx = reflect_index(x, img.w);
            for c in 0..ImageBuffer::CHANNELS {
                out.set(y, x, c, img.get(sy, sx, c));
            }
        }
    }
    out
}

/// Analysis/synthesis pair operating on padded images.
pub trait Transform {
    /// Latent channel count `M`.
    fn num_channels(&self) -> usize;

    /// Maps a padded image (dims multiples of 64) to its latent; `orig_h`
    /// and `orig_w` are recorded for the eventual crop.
    fn analyze(
        &self,
        padded: &ImageBuffer,
        orig_h: usize,
        orig_w: usize,
    ) -> Result<LatentTensor, CodecError>;

    /// Inverts the analysis on the kept subspace, crops to the original
    /// dimensions, and clamps to `[0, 1]`.
    fn synthesize(&self, latent: &LatentTensor) -> Result<ImageBuffer, CodecError>;
}

/// Pads and analyzes in one step.
pub fn encode_latent<T: Transform>(img: &ImageBuffer, transform: &T) -> Result<LatentTensor, CodecError> {
    let padded = pad_reflect(img);
    transform.analyze(&padded, img.h, img.w)
}

/// Uniform global min-max quantization to `b = 32/n` bits. Ties round half
/// away from zero; a degenerate range encodes as all-zero levels.
pub fn quantize(latent: &LatentTensor, ratio: CompressionRatio) -> Result<QuantizedLatent, CodecError> {
    if latent.data.iter().any(|v| !v.is_finite()) {
        return Err(CodecError::NonFinite);
    }
    let y_min = latent.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = latent.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_level = ratio.max_level();
    let levels = if y_max > y_min {
        let scale = max_level as f64 / (y_max - y_min);
        latent
            .data
            .iter()
            .map(|&y| {
                let q = ((y - y_min) * scale).round();
                (q.clamp(0.0, max_level as f64)) as u32
            })
            .collect()
    } else {
        vec![0u32; latent.data.len()]
    };
    Ok(QuantizedLatent {
        levels,
        ratio,
        y_min,
        y_max,
        m: latent.m,
        lh: latent.lh,
        lw: latent.lw,
        orig_h: latent.orig_h,
        orig_w: latent.orig_w,
    })
}

/// Linear reconstruction `level * (y_max - y_min) / (2^b - 1) + y_min`.
pub fn dequantize(q: &QuantizedLatent) -> LatentTensor {
    let data = if q.y_max > q.y_min {
        let step = (q.y_max - q.y_min) / q.ratio.max_level() as f64;
        q.levels.iter().map(|&l| l as f64 * step + q.y_min).collect()
    } else {
        vec![q.y_min; q.levels.len()]
    };
    LatentTensor {
        m: q.m,
        lh: q.lh,
        lw: q.lw,
        data,
        orig_h: q.orig_h,
        orig_w: q.orig_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_dimensions() {
        let img = ImageBuffer::new(700, 1000);
        let padded = pad_reflect(&img);
        assert_eq!((padded.h, padded.w), (704, 1024));

        let img = ImageBuffer::new(704, 1024);
        assert_eq!(pad_reflect(&img), img);
    }

    #[test]
    fn pad_preserves_top_left_and_mirrors() {
        let mut img = ImageBuffer::new(3, 5);
        for y in 0..3 {
            for x in 0..5 {
                for c in 0..3 {
                    img.set(y, x, c, ((y * 5 + x) as f64 + c as f64 * 0.1) / 20.0);
                }
            }
        }
        let padded = pad_reflect(&img);
        assert_eq!((padded.h, padded.w), (64, 64));
        for y in 0..3 {
            for x in 0..5 {
                for c in 0..3 {
                    assert_eq!(padded.get(y, x, c), img.get(y, x, c));
                }
            }
        }
        // First mirrored column repeats column w-2.
        assert_eq!(padded.get(0, 5, 0), img.get(0, 3, 0));
        assert_eq!(padded.get(3, 0, 0), img.get(1, 0, 0));
    }

    #[test]
    fn pad_single_pixel_is_constant() {
        let img = ImageBuffer::constant(1, 1, 0.42);
        let padded = pad_reflect(&img);
        assert_eq!((padded.h, padded.w), (64, 64));
        assert!(padded.data.iter().all(|&v| v == 0.42));
    }

    #[test]
    fn latent_size_examples() {
        assert_eq!(latent_size(704, 1024, 192), 540_672);
        assert_eq!(latent_size(64, 64, 192), 3_072);
        assert_eq!(latent_size(700, 1000, 192), 540_672);
        assert_eq!(latent_size(1, 1, 192), 3_072);
    }

    #[test]
    fn quantize_frozen_example() {
        // y = [0, 0.4, 1.0] at b = 2 -> levels [0, 1, 3] -> [0, 1/3, 1].
        let latent = LatentTensor {
            m: 3,
            lh: 1,
            lw: 1,
            data: vec![0.0, 0.4, 1.0],
            orig_h: 16,
            orig_w: 16,
        };
        let q = quantize(&latent, CompressionRatio::N16).unwrap();
        assert_eq!(q.levels, vec![0, 1, 3]);
        let back = dequantize(&q);
        assert!((back.data[0] - 0.0).abs() < 1e-15);
        assert!((back.data[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((back.data[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantize_degenerate_range() {
        let latent = LatentTensor {
            m: 1,
            lh: 2,
            lw: 2,
            data: vec![0.7; 4],
            orig_h: 32,
            orig_w: 32,
        };
        let q = quantize(&latent, CompressionRatio::N4).unwrap();
        assert!(q.levels.iter().all(|&l| l == 0));
        let back = dequantize(&q);
        assert!(back.data.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn quantize_rejects_non_finite() {
        let latent = LatentTensor {
            m: 1,
            lh: 1,
            lw: 2,
            data: vec![0.0, f64::NAN],
            orig_h: 16,
            orig_w: 32,
        };
        assert_eq!(quantize(&latent, CompressionRatio::N2), Err(CodecError::NonFinite));
    }

    #[test]
    fn dequantize_extreme_levels() {
        let q = QuantizedLatent {
            levels: vec![0, 15],
            ratio: CompressionRatio::N8,
            y_min: -2.5,
            y_max: 3.5,
            m: 1,
            lh: 1,
            lw: 2,
            orig_h: 16,
            orig_w: 32,
        };
        let back = dequantize(&q);
        assert_eq!(back.data[0], -2.5);
        assert!((back.data[1] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn reflect_index_walks_a_triangle_wave() {
        let idx: Vec<usize> = (0..8).map(|i| reflect_index(i, 3)).collect();
        assert_eq!(idx, vec![0, 1, 2, 1, 0, 1, 2, 1]);
        assert!((0..100).all(|i| reflect_index(i, 1) == 0));
    }

    #[test]
    fn crop_is_exact_subregion() {
        let mut img = ImageBuffer::new(10, 12);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i % 97) as f64 / 97.0;
        }
        let crop = img.crop(2, 3, 5, 6).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                for c in 0..3 {
                    assert_eq!(crop.get(y, x, c), img.get(2 + y, 3 + x, c));
                }
            }
        }
        assert!(img.crop(8, 0, 3, 1).is_err());
    }
}
