//! Latent wire layout: a 4-byte magic, a 32-byte side-information block
//! (shape, original dims, ratio, global extrema as f32), then the packed
//! 32-bit words. All fields little-endian. The side-information block is
//! the part the transport carries error-free.

use super::{CodecError, QuantizedLatent};
use crate::ratio::CompressionRatio;
use crate::transport::{pack_latent, unpack_latent, SymbolStream};

pub const MAGIC: [u8; 4] = *b"SLNK";
/// Error-free side-information block size.
pub const SIDE_INFO_LEN: usize = 32;
/// Total wire header: magic + side info.
pub const HEADER_LEN: usize = 4 + SIDE_INFO_LEN;

/// The error-free header fields of one latent payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideInfo {
    pub m: u32,
    pub lh: u32,
    pub lw: u32,
    pub orig_h: u32,
    pub orig_w: u32,
    pub ratio: CompressionRatio,
    pub y_min: f32,
    pub y_max: f32,
}

impl SideInfo {
    /// Captures the header of a quantized latent; extrema are rounded to
    /// f32 exactly as the wire carries them.
    pub fn of(q: &QuantizedLatent) -> Self {
        Self {
            m: q.m as u32,
            lh: q.lh as u32,
            lw: q.lw as u32,
            orig_h: q.orig_h as u32,
            orig_w: q.orig_w as u32,
            ratio: q.ratio,
            y_min: q.y_min as f32,
            y_max: q.y_max as f32,
        }
    }

    /// Number of latent elements implied by the shape.
    pub fn num_elements(&self) -> usize {
        self.m as usize * self.lh as usize * self.lw as usize
    }

    /// Reassembles a quantized latent from received levels plus this header.
    pub fn rebuild(&self, levels: Vec<u32>) -> Result<QuantizedLatent, CodecError> {
        if levels.len() != self.num_elements() {
            return Err(CodecError::Wire(format!(
                "level count {} does not match shape {}x{}x{}",
                levels.len(),
                self.m,
                self.lh,
                self.lw
            )));
        }
        Ok(QuantizedLatent {
            levels,
            ratio: self.ratio,
            y_min: self.y_min as f64,
            y_max: self.y_max as f64,
            m: self.m as usize,
            lh: self.lh as usize,
            lw: self.lw as usize,
            orig_h: self.orig_h as usize,
            orig_w: self.orig_w as usize,
        })
    }

    pub fn to_bytes(&self) -> [u8; SIDE_INFO_LEN] {
        let mut out = [0u8; SIDE_INFO_LEN];
        out[0..4].copy_from_slice(&self.m.to_le_bytes());
        out[4..8].copy_from_slice(&self.lh.to_le_bytes());
        out[8..12].copy_from_slice(&self.lw.to_le_bytes());
        out[12..16].copy_from_slice(&self.orig_h.to_le_bytes());
        out[16..20].copy_from_slice(&self.orig_w.to_le_bytes());
        out[20..24].copy_from_slice(&self.ratio.divisor().to_le_bytes());
        out[24..28].copy_from_slice(&self.y_min.to_le_bytes());
        out[28..32].copy_from_slice(&self.y_max.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < SIDE_INFO_LEN {
            return Err(CodecError::Wire("truncated side info".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let n = u32_at(20);
        let ratio = CompressionRatio::from_divisor(n)
            .ok_or_else(|| CodecError::Wire(format!("invalid compression ratio {n}")))?;
        Ok(Self {
            m: u32_at(0),
            lh: u32_at(4),
            lw: u32_at(8),
            orig_h: u32_at(12),
            orig_w: u32_at(16),
            ratio,
            y_min: f32::from_le_bytes(bytes[24..28].try_into().unwrap()),
            y_max: f32::from_le_bytes(bytes[28..32].try_into().unwrap()),
        })
    }
}

/// Serializes a quantized latent to its wire form.
pub fn to_bytes(q: &QuantizedLatent) -> Result<Vec<u8>, CodecError> {
    let stream = pack_latent(&q.levels, q.ratio)
        .map_err(|e| CodecError::Wire(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * stream.words.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&SideInfo::of(q).to_bytes());
    for w in &stream.words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

/// Parses a wire payload back into a quantized latent (extrema at f32
/// precision, as transmitted).
pub fn from_bytes(bytes: &[u8]) -> Result<QuantizedLatent, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Wire("payload shorter than header".into()));
    }
    if bytes[..4] != MAGIC {
        return Err(CodecError::Wire("bad magic".into()));
    }
    let side = SideInfo::from_bytes(&bytes[4..HEADER_LEN])?;
    let body = &bytes[HEADER_LEN..];
    if body.len() % 4 != 0 {
        return Err(CodecError::Wire("word payload not 32-bit aligned".into()));
    }
    let words: Vec<u32> = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let n = side.ratio.divisor() as usize;
    let num_elements = side.num_elements();
    let stream = SymbolStream {
        words,
        ratio: side.ratio,
        num_elements,
        num_complex_symbols: num_elements / (2 * n),
    };
    let levels = unpack_latent(&stream).map_err(|e| CodecError::Wire(e.to_string()))?;
    if levels.len() != num_elements {
        return Err(CodecError::Wire(format!(
            "carried {} levels for shape of {} elements",
            levels.len(),
            num_elements
        )));
    }
    side.rebuild(levels)
}

/// Wire size in bytes of a latent with `num_elements` elements at ratio `n`.
pub fn wire_bytes(num_elements: usize, ratio: CompressionRatio) -> usize {
    let n = ratio.divisor() as usize;
    let n_sym = num_elements / (2 * n);
    HEADER_LEN + 8 * n_sym
}
