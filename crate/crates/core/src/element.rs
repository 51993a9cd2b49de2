use std::fmt;

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Element precision of a grid.
///
/// Binary32 is the default campaign precision; binary64 is used by the
/// oracle and tolerance studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    /// Tag stored in the `ABFTGRID` file header.
    pub fn file_tag(self) -> u32 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    /// Width of the IEEE-754 representation in bits.
    pub fn bit_width(self) -> u32 {
        match self {
            Dtype::F32 => 32,
            Dtype::F64 => 64,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dtype::F32 => write!(f, "f32"),
            Dtype::F64 => write!(f, "f64"),
        }
    }
}

/// Grid element type: an IEEE-754 float with access to its bit pattern.
pub trait Element: Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static {
    const DTYPE: Dtype;
    const BIT_WIDTH: u32;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn to_bits_u64(self) -> u64;
    fn from_bits_u64(bits: u64) -> Self;
}

impl Element for f32 {
    const DTYPE: Dtype = Dtype::F32;
    const BIT_WIDTH: u32 = 32;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn to_bits_u64(self) -> u64 {
        self.to_bits() as u64
    }

    #[inline]
    fn from_bits_u64(bits: u64) -> Self {
        f32::from_bits(bits as u32)
    }
}

impl Element for f64 {
    const DTYPE: Dtype = Dtype::F64;
    const BIT_WIDTH: u32 = 64;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }

    #[inline]
    fn from_bits_u64(bits: u64) -> Self {
        f64::from_bits(bits)
    }
}
