//! Codec properties checked against brute-force oracles that are
//! independent of the implementation path: a naive double-sum DCT for
//! coefficient energies and a scripted reference quantizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semlink_core::codec::{
    dequantize, encode_latent, latent_size, pad_reflect, quantize, BlockDct16, ImageBuffer,
    LatentTensor, Transform,
};
use semlink_core::CompressionRatio;

const BLOCK: usize = 16;

/// Naive type-II orthonormal DCT coefficient, computed by direct summation.
fn naive_dct_coeff(block: &[[f64; BLOCK]; BLOCK], u: usize, v: usize) -> f64 {
    let scale = |k: usize| -> f64 {
        if k == 0 {
            (1.0 / BLOCK as f64).sqrt()
        } else {
            (2.0 / BLOCK as f64).sqrt()
        }
    };
    let mut acc = 0.0;
    for (i, row) in block.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            acc += x
                * (std::f64::consts::PI * (2 * i + 1) as f64 * u as f64 / (2.0 * BLOCK as f64)).cos()
                * (std::f64::consts::PI * (2 * j + 1) as f64 * v as f64 / (2.0 * BLOCK as f64)).cos();
        }
    }
    scale(u) * scale(v) * acc
}

/// Independent re-derivation of the kept zigzag positions.
fn kept_positions() -> Vec<(usize, usize)> {
    let mut order = Vec::new();
    for s in 0..(2 * BLOCK - 1) {
        let lo = s.saturating_sub(BLOCK - 1);
        let hi = s.min(BLOCK - 1);
        let diag: Vec<(usize, usize)> = if s % 2 == 0 {
            (lo..=hi).rev().map(|u| (u, s - u)).collect()
        } else {
            (lo..=hi).map(|u| (u, s - u)).collect()
        };
        order.extend(diag);
    }
    order.truncate(64);
    order
}

/// Energy in the coefficients the codec discards, summed over every block
/// and color channel of the padded image.
fn discarded_energy_oracle(padded: &ImageBuffer) -> f64 {
    let kept = kept_positions();
    let keep = |u: usize, v: usize| kept.contains(&(u, v));
    let mut energy = 0.0;
    for c in 0..3 {
        for by in 0..padded.h / BLOCK {
            for bx in 0..padded.w / BLOCK {
                let mut block = [[0.0; BLOCK]; BLOCK];
                for (i, row) in block.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = padded.get(by * BLOCK + i, bx * BLOCK + j, c);
                    }
                }
                for u in 0..BLOCK {
                    for v in 0..BLOCK {
                        if !keep(u, v) {
                            let coeff = naive_dct_coeff(&block, u, v);
                            energy += coeff * coeff;
                        }
                    }
                }
            }
        }
    }
    energy
}

fn squared_error(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Smooth in-range test image: low frequencies plus a controlled ripple
/// that lands outside the kept coefficient set.
fn smooth_image(h: usize, w: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f1x: f64 = rng.gen_range(0.5..3.0);
    let f1y: f64 = rng.gen_range(0.5..3.0);
    let p1: f64 = rng.gen_range(0.0..6.28);
    let p2: f64 = rng.gen_range(0.0..6.28);
    let mut img = ImageBuffer::new(h, w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let s = 0.5
                    + 0.17
                        * (6.2832 * f1x * x as f64 / w as f64 + p1 + c as f64).sin()
                        * (6.2832 * f1y * y as f64 / h as f64 + p2).sin()
                    + 0.06
                        * (6.2832 * 23.0 * x as f64 / w as f64).sin()
                        * (6.2832 * 19.0 * y as f64 / h as f64).cos();
                img.set(y, x, c, s.clamp(0.0, 1.0));
            }
        }
    }
    img
}

fn noise_image(h: usize, w: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = ImageBuffer::new(h, w);
    for v in img.data.iter_mut() {
        *v = rng.gen();
    }
    img
}

#[test]
fn truncation_error_equals_discarded_energy() {
    // Multiple-of-64 dims: no padding, no crop, and amplitudes that keep
    // the reconstruction inside [0, 1], so Parseval holds with equality.
    let t = BlockDct16::new();
    for (h, w, seed) in [(64, 128, 1u64), (128, 64, 2), (192, 192, 3)] {
        let img = smooth_image(h, w, seed);
        let latent = t.analyze(&img, h, w).unwrap();
        let back = t.synthesize(&latent).unwrap();
        let err = squared_error(&img, &back);
        let oracle = discarded_energy_oracle(&img);
        assert!(oracle > 1e-9, "test image should have out-of-band energy");
        let rel = (err - oracle).abs() / oracle.max(1e-30);
        assert!(rel < 1e-6, "{h}x{w}: err={err} oracle={oracle} rel={rel}");
    }
}

#[test]
fn end_to_end_error_within_parseval_bound() {
    // Noisy images, random dims, all four ratios:
    // error <= discarded energy + L * (step/2)^2.
    let t = BlockDct16::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..24 {
        let h = rng.gen_range(1..=257);
        let w = rng.gen_range(1..=257);
        let img = noise_image(h, w, 1000 + trial);
        let padded = pad_reflect(&img);
        let oracle = discarded_energy_oracle(&padded);
        let latent = t.analyze(&padded, h, w).unwrap();
        for ratio in CompressionRatio::ALL {
            let q = quantize(&latent, ratio).unwrap();
            let back = t.synthesize(&dequantize(&q)).unwrap();
            assert_eq!((back.h, back.w), (h, w));
            let err = squared_error(&img, &back);
            let half_step = q.step() / 2.0;
            let bound = oracle + latent.len() as f64 * half_step * half_step;
            assert!(
                err <= bound * (1.0 + 1e-6),
                "{h}x{w} n={ratio}: err={err} bound={bound}"
            );
        }
    }
}

#[test]
fn resolution_robustness_grid() {
    // 50 random resolutions in 1..=257 per dim: encode/decode succeeds and
    // reconstruction dims equal input dims exactly.
    let t = BlockDct16::new();
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for trial in 0..50 {
        let h = rng.gen_range(1..=257);
        let w = rng.gen_range(1..=257);
        let img = noise_image(h, w, 2000 + trial);
        let latent = encode_latent(&img, &t).unwrap();
        assert_eq!(latent.len(), latent_size(h, w, 192));
        let (ph, pw) = latent.padded_dims();
        assert_eq!((ph, pw), (h.div_ceil(64) * 64, w.div_ceil(64) * 64));
        let back = t.synthesize(&latent).unwrap();
        assert_eq!((back.h, back.w), (h, w), "dims for {h}x{w}");
        assert!(back.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn quantizer_bound_and_idempotence() {
    // |y - y_hat| <= step/2 elementwise; re-quantizing the reconstruction
    // reproduces the exact levels.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for ratio in CompressionRatio::ALL {
        for _ in 0..100 {
            let len = rng.gen_range(2..400);
            let lo: f64 = rng.gen_range(-50.0..50.0);
            let hi: f64 = lo + rng.gen_range(1e-6..100.0);
            let latent = LatentTensor {
                m: 1,
                lh: 1,
                lw: len,
                data: (0..len).map(|_| rng.gen_range(lo..hi)).collect(),
                orig_h: 16,
                orig_w: 16 * len,
            };
            let q = quantize(&latent, ratio).unwrap();
            let back = dequantize(&q);
            let half_step = q.step() / 2.0;
            for (y, y_hat) in latent.data.iter().zip(&back.data) {
                assert!(
                    (y - y_hat).abs() <= half_step * (1.0 + 1e-12),
                    "n={ratio}: |{y} - {y_hat}| > {half_step}"
                );
            }
            let q2 = quantize(&back, ratio).unwrap();
            assert_eq!(q2.levels, q.levels, "idempotence at n={ratio}");
        }
    }
}

#[test]
fn quantizer_matches_scripted_reference() {
    // Brute-force reference quantizer evaluated positionally.
    let reference = |data: &[f64], bits: u32| -> Vec<u32> {
        let mn = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let levels = (1u64 << bits) - 1;
        data.iter()
            .map(|&y| {
                if mx == mn {
                    0
                } else {
                    let exact = (y - mn) / (mx - mn) * levels as f64;
                    // Round half away from zero, then clamp.
                    let r = if exact - exact.floor() >= 0.5 {
                        exact.floor() + 1.0
                    } else {
                        exact.floor()
                    };
                    r.min(levels as f64) as u32
                }
            })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for ratio in CompressionRatio::ALL {
        for _ in 0..200 {
            let len = rng.gen_range(1..64);
            let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let latent = LatentTensor {
                m: 1,
                lh: 1,
                lw: len,
                data: data.clone(),
                orig_h: 16,
                orig_w: 16 * len,
            };
            let q = quantize(&latent, ratio).unwrap();
            assert_eq!(q.levels, reference(&data, ratio.bits()));
        }
    }
}

#[test]
fn quantizer_levels_monotone_in_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for ratio in CompressionRatio::ALL {
        let mut data: Vec<f64> = (0..300).map(|_| rng.gen_range(-5.0..5.0)).collect();
        data.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let latent = LatentTensor {
            m: 1,
            lh: 1,
            lw: data.len(),
            data: data.clone(),
            orig_h: 16,
            orig_w: 16 * data.len(),
        };
        let q = quantize(&latent, ratio).unwrap();
        for pair in q.levels.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
    }
}
