//! Reference analysis/synthesis transform: 16x16 blockwise orthonormal
//! type-II DCT per color channel, truncated to the first 64 zigzag
//! coefficients (3 channels * 64 = 192 latent channels, /16 spatial).

use super::{CodecError, ImageBuffer, LatentTensor, Transform};

pub const BLOCK: usize = 16;
pub const KEPT_PER_CHANNEL: usize = 64;
pub const LATENT_CHANNELS: usize = 3 * KEPT_PER_CHANNEL;

/// Blockwise DCT transform with zigzag coefficient truncation.
#[derive(Debug, Clone)]
pub struct BlockDct16 {
    /// Orthonormal DCT-II basis, `basis[k][n] = s_k cos(pi (2n+1) k / 32)`.
    basis: [[f64; BLOCK]; BLOCK],
    /// Zigzag scan positions of the kept coefficients.
    zigzag: [(usize, usize); KEPT_PER_CHANNEL],
}

impl Default for BlockDct16 {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockDct16 {
    pub fn new() -> Self {
        let mut basis = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (k, row) in basis.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for (i, v) in row.iter_mut().enumerate() {
                *v = scale
                    * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * n)).cos();
            }
        }
        let order = zigzag_order(BLOCK);
        let mut zigzag = [(0usize, 0usize); KEPT_PER_CHANNEL];
        zigzag.copy_from_slice(&order[..KEPT_PER_CHANNEL]);
        Self { basis, zigzag }
    }

    /// Forward 2D DCT of one block: `coeff = C * block * C^T`.
    fn forward(&self, block: &[[f64; BLOCK]; BLOCK]) -> [[f64; BLOCK]; BLOCK] {
        let mut tmp = [[0.0; BLOCK]; BLOCK];
        for i in 0..BLOCK {
            for k in 0..BLOCK {
                let mut acc = 0.0;
                for j in 0..BLOCK {
                    acc += block[i][j] * self.basis[k][j];
                }
                tmp[i][k] = acc;
            }
        }
        let mut out = [[0.0; BLOCK]; BLOCK];
        for k in 0..BLOCK {
            for l in 0..BLOCK {
                let mut acc = 0.0;
                for i in 0..BLOCK {
                    acc += self.basis[k][i] * tmp[i][l];
                }
                out[k][l] = acc;
            }
        }
        out
    }

    /// Inverse 2D DCT: `block = C^T * coeff * C`.
    fn inverse(&self, coeff: &[[f64; BLOCK]; BLOCK]) -> [[f64; BLOCK]; BLOCK] {
        let mut tmp = [[0.0; BLOCK]; BLOCK];
        for k in 0..BLOCK {
            for j in 0..BLOCK {
                let mut acc = 0.0;
                for l in 0..BLOCK {
                    acc += coeff[k][l] * self.basis[l][j];
                }
                tmp[k][j] = acc;
            }
        }
        let mut out = [[0.0; BLOCK]; BLOCK];
        for i in 0..BLOCK {
            for j in 0..BLOCK {
                let mut acc = 0.0;
                for k in 0..BLOCK {
                    acc += self.basis[k][i] * tmp[k][j];
                }
                out[i][j] = acc;
            }
        }
        out
    }
}

impl Transform for BlockDct16 {
    fn num_channels(&self) -> usize {
        LATENT_CHANNELS
    }

    fn analyze(
        &self,
        padded: &ImageBuffer,
        orig_h: usize,
        orig_w: usize,
    ) -> Result<LatentTensor, CodecError> {
        if padded.h % 64 != 0 || padded.w % 64 != 0 {
            return Err(CodecError::Shape(format!(
                "padded dims {}x{} are not multiples of 64",
                padded.h, padded.w
            )));
        }
        if orig_h > padded.h || orig_w > padded.w {
            return Err(CodecError::Shape(
                "original dims exceed padded dims".into(),
            ));
        }
        let lh = padded.h / BLOCK;
        let lw = padded.w / BLOCK;
        let mut latent = LatentTensor {
            m: LATENT_CHANNELS,
            lh,
            lw,
            data: vec![0.0; LATENT_CHANNELS * lh * lw],
            orig_h,
            orig_w,
        };
        let mut block = [[0.0; BLOCK]; BLOCK];
        for c in 0..ImageBuffer::CHANNELS {
            for by in 0..lh {
                for bx in 0..lw {
                    for (i, row) in block.iter_mut().enumerate() {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = padded.get(by * BLOCK + i, bx * BLOCK + j, c);
                        }
                    }
                    let coeff = self.forward(&block);
                    for (z, &(u, v)) in self.zigzag.iter().enumerate() {
                        let ch = c * KEPT_PER_CHANNEL + z;
                        let idx = latent.idx(ch, by, bx);
                        latent.data[idx] = coeff[u][v];
                    }
                }
            }
        }
        Ok(latent)
    }

    fn synthesize(&self, latent: &LatentTensor) -> Result<ImageBuffer, CodecError> {
        if latent.m != LATENT_CHANNELS {
            return Err(CodecError::Shape(format!(
                "expected {} latent channels, got {}",
                LATENT_CHANNELS, latent.m
            )));
        }
        if latent.data.len() != latent.m * latent.lh * latent.lw {
            return Err(CodecError::Shape("latent data length mismatch".into()));
        }
        let (ph, pw) = latent.padded_dims();
        if latent.orig_h == 0 || latent.orig_w == 0 || latent.orig_h > ph || latent.orig_w > pw {
            return Err(CodecError::Shape(format!(
                "original dims {}x{} incompatible with padded {}x{}",
                latent.orig_h, latent.orig_w, ph, pw
            )));
        }
        let mut out = ImageBuffer::new(ph, pw);
        let mut coeff = [[0.0; BLOCK]; BLOCK];
        for c in 0..ImageBuffer::CHANNELS {
            for by in 0..latent.lh {
                for bx in 0..latent.lw {
                    for row in coeff.iter_mut() {
                        row.fill(0.0);
                    }
                    for (z, &(u, v)) in self.zigzag.iter().enumerate() {
                        let ch = c * KEPT_PER_CHANNEL + z;
                        coeff[u][v] = latent.data[latent.idx(ch, by, bx)];
                    }
                    let block = self.inverse(&coeff);
                    for (i, row) in block.iter().enumerate() {
                        for (j, &v) in row.iter().enumerate() {
                            out.set(by * BLOCK + i, bx * BLOCK + j, c, v);
                        }
                    }
                }
            }
        }
        let mut cropped = out.crop(0, 0, latent.orig_h, latent.orig_w)?;
        cropped.clamp_in_place();
        Ok(cropped)
    }
}

/// Diagonal scan order: even anti-diagonals walk bottom-left to top-right.
fn zigzag_order(size: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(size * size);
    for s in 0..(2 * size - 1) {
        let lo = s.saturating_sub(size - 1);
        let hi = s.min(size - 1);
        if s % 2 == 0 {
            for u in (lo..=hi).rev() {
                order.push((u, s - u));
            }
        } else {
            for u in lo..=hi {
                order.push((u, s - u));
            }
        }
    }
    order
}
