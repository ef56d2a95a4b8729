//! Floating-point abstraction.
//!
//! All numeric code is generic over [`Scalar`] so the same kernels run in
//! 64-bit mode (gradient checking, tests, the default pipeline) and in 32-bit
//! mode (faster training when configured). Constants are written as `f64` and
//! converted once at use sites via [`real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Floating-point element type for matrices, models, and losses.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Name recorded in persisted model documents ("f32" or "f64").
    const NAME: &'static str;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Convert an `f64` literal into the active scalar type.
#[inline]
pub fn real<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 constant must convert into the scalar type")
}

/// Convert a scalar back to `f64` (for reports and persisted artifacts).
#[inline]
pub fn as_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Which scalar width a run uses. Serialized as the literal numbers 32/64 so
/// config files read `float_mode = 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FloatMode {
    F32,
    #[default]
    F64,
}

impl FloatMode {
    pub fn bits(self) -> u8 {
        match self {
            FloatMode::F32 => 32,
            FloatMode::F64 => 64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FloatMode::F32 => "f32",
            FloatMode::F64 => "f64",
        }
    }

    pub fn from_bits(bits: u64) -> Option<Self> {
        match bits {
            32 => Some(FloatMode::F32),
            64 => Some(FloatMode::F64),
            _ => None,
        }
    }
}

impl Serialize for FloatMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.bits())
    }
}

impl<'de> Deserialize<'de> for FloatMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let bits = u64::deserialize(deserializer)?;
        FloatMode::from_bits(bits)
            .ok_or_else(|| serde::de::Error::custom(format!("float mode must be 32 or 64, got {bits}")))
    }
}
