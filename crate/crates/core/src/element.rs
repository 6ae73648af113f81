//! Element roles a grid can store: 64/32-bit floats, signed integers, booleans.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// The closed set of value roles grids are generic over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementRole {
    Float64,
    Float32,
    Int,
    Bool,
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for f32 {}
    impl Sealed for i64 {}
    impl Sealed for bool {}
}

/// A value type grids can store. Sealed: the library supports exactly
/// `f64`, `f32`, `i64` and `bool`.
pub trait Element:
    sealed::Sealed + Copy + PartialEq + Debug + Display + Send + Sync + 'static
{
    const ROLE: ElementRole;
    /// Value returned by checked accessors after recording a violation.
    const FALLBACK: Self;
    /// Bit pattern used for bitwise comparisons and checksums.
    fn bits(self) -> u64;
}

impl Element for f64 {
    const ROLE: ElementRole = ElementRole::Float64;
    const FALLBACK: Self = 0.0;
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

impl Element for f32 {
    const ROLE: ElementRole = ElementRole::Float32;
    const FALLBACK: Self = 0.0;
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Element for i64 {
    const ROLE: ElementRole = ElementRole::Int;
    const FALLBACK: Self = 0;
    fn bits(self) -> u64 {
        self as u64
    }
}

impl Element for bool {
    const ROLE: ElementRole = ElementRole::Bool;
    const FALLBACK: Self = false;
    fn bits(self) -> u64 {
        self as u64
    }
}

/// Floating element role, for operators that do arithmetic.
pub trait FloatElement:
    Element
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialOrd
{
    const ZERO: Self;
    fn from_f64(x: f64) -> Self;
    fn abs(self) -> Self;
}

impl FloatElement for f64 {
    const ZERO: Self = 0.0;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl FloatElement for f32 {
    const ZERO: Self = 0.0;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
}

/// Elements with an additive sum, for the sum reduction.
pub trait Summable: Element + Add<Output = Self> {
    const ADD_IDENTITY: Self;
}

impl Summable for f64 {
    const ADD_IDENTITY: Self = 0.0;
}
impl Summable for f32 {
    const ADD_IDENTITY: Self = 0.0;
}
impl Summable for i64 {
    const ADD_IDENTITY: Self = 0;
}

/// Elements with a total order and a minimum, for the max reduction.
pub trait Ordered: Element + PartialOrd {
    /// Identity of max: the least value of the role (−∞ for floats).
    const MIN_IDENTITY: Self;
}

impl Ordered for f64 {
    const MIN_IDENTITY: Self = f64::NEG_INFINITY;
}
impl Ordered for f32 {
    const MIN_IDENTITY: Self = f32::NEG_INFINITY;
}
impl Ordered for i64 {
    const MIN_IDENTITY: Self = i64::MIN;
}
