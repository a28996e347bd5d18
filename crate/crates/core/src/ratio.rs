//! Compression ratio shared by the quantizer and the symbol packer.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Latent bit-width divisor `n`: each element carries `b = 32/n` bits and
/// `n` elements share one packed 32-bit word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum CompressionRatio {
    N2,
    N4,
    N8,
    N16,
}

impl CompressionRatio {
    pub const ALL: [CompressionRatio; 4] = [Self::N2, Self::N4, Self::N8, Self::N16];

    /// The divisor `n`.
    pub fn divisor(self) -> u32 {
        match self {
            Self::N2 => 2,
            Self::N4 => 4,
            Self::N8 => 8,
            Self::N16 => 16,
        }
    }

    /// Bits per element, `b = 32 / n`.
    pub fn bits(self) -> u32 {
        32 / self.divisor()
    }

    /// Largest representable level, `2^b - 1`.
    pub fn max_level(self) -> u32 {
        match self {
            Self::N2 => u16::MAX as u32,
            _ => (1u32 << self.bits()) - 1,
        }
    }

    pub fn from_divisor(n: u32) -> Option<Self> {
        match n {
            2 => Some(Self::N2),
            4 => Some(Self::N4),
            8 => Some(Self::N8),
            16 => Some(Self::N16),
            _ => None,
        }
    }
}

impl fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.divisor())
    }
}

impl TryFrom<u32> for CompressionRatio {
    type Error = String;

    fn try_from(n: u32) -> Result<Self, Self::Error> {
        Self::from_divisor(n).ok_or_else(|| format!("compression ratio must be one of 2,4,8,16, got {n}"))
    }
}

impl From<CompressionRatio> for u32 {
    fn from(r: CompressionRatio) -> u32 {
        r.divisor()
    }
}
