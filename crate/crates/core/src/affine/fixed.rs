//! Q16.16 fixed point and the 1024-entry sine table.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Neg;
use std::sync::OnceLock;

use thiserror::Error;

pub const FRAC_BITS: u32 = 16;
pub const ONE_RAW: i32 = 1 << FRAC_BITS;
const HALF_RAW: i64 = 1 << (FRAC_BITS - 1);

pub const LUT_SIZE: usize = 1024;
pub const LUT_MASK: usize = LUT_SIZE - 1;
/// Cosine is read a quarter turn ahead of sine.
pub const QUARTER_TURN: usize = LUT_SIZE / 4;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FixedError {
    #[error("fixed overflow")]
    Overflow,
}

/// Signed fixed point with 16 fractional bits in a 32-bit word.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FixedQ16(i32);

impl FixedQ16 {
    pub const ZERO: FixedQ16 = FixedQ16(0);
    pub const ONE: FixedQ16 = FixedQ16(ONE_RAW);

    pub const fn from_raw(raw: i32) -> Self {
        FixedQ16(raw)
    }

    pub const fn raw(self) -> i32 {
        self.0
    }

    /// `Int2fixed`: integer pixel coordinate to Q16.16.
    pub fn from_int(v: i32) -> Result<Self, FixedError> {
        v.checked_mul(ONE_RAW)
            .map(FixedQ16)
            .ok_or(FixedError::Overflow)
    }

    /// Nearest Q16.16 value to `v`.
    pub fn from_f64(v: f64) -> Result<Self, FixedError> {
        let raw = (v * ONE_RAW as f64).round();
        if raw >= i32::MIN as f64 && raw <= i32::MAX as f64 {
            Ok(FixedQ16(raw as i32))
        } else {
            Err(FixedError::Overflow)
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / ONE_RAW as f64
    }

    /// `fixed2Int`: round to the nearest integer, halves toward +∞.
    pub fn round_to_int(self) -> i32 {
        ((self.0 as i64 + HALF_RAW) >> FRAC_BITS) as i32
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, FixedError> {
        self.0
            .checked_add(rhs.0)
            .map(FixedQ16)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, FixedError> {
        self.0
            .checked_sub(rhs.0)
            .map(FixedQ16)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_neg(self) -> Result<Self, FixedError> {
        self.0
            .checked_neg()
            .map(FixedQ16)
            .ok_or(FixedError::Overflow)
    }
}

impl Neg for FixedQ16 {
    type Output = FixedQ16;

    /// Panics on `i32::MIN`; use [`FixedQ16::checked_neg`] for untrusted values.
    fn neg(self) -> FixedQ16 {
        FixedQ16(-self.0)
    }
}

impl fmt::Debug for FixedQ16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedQ16({} = {})", self.0, self.to_f64())
    }
}

impl fmt::Display for FixedQ16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// `FixedMult`: widened product, arithmetic shift right by 16 (floor).
pub fn fixed_mult(a: FixedQ16, b: FixedQ16) -> Result<FixedQ16, FixedError> {
    let wide = (a.0 as i64 * b.0 as i64) >> FRAC_BITS;
    i32::try_from(wide)
        .map(FixedQ16)
        .map_err(|_| FixedError::Overflow)
}

/// Sine samples at `2πk/1024` in Q16.16.
pub struct TrigLut {
    sin: [FixedQ16; LUT_SIZE],
}

impl TrigLut {
    pub fn new() -> Self {
        let mut sin = [FixedQ16::ZERO; LUT_SIZE];
        for (k, e) in sin.iter_mut().enumerate() {
            let v = (2.0 * PI * k as f64 / LUT_SIZE as f64).sin();
            *e = FixedQ16((v * ONE_RAW as f64).round() as i32);
        }
        // exact at the quarter points regardless of libm rounding
        sin[0] = FixedQ16::ZERO;
        sin[QUARTER_TURN] = FixedQ16::ONE;
        sin[2 * QUARTER_TURN] = FixedQ16::ZERO;
        sin[3 * QUARTER_TURN] = -FixedQ16::ONE;
        Self { sin }
    }

    /// Shared table.
    pub fn global() -> &'static TrigLut {
        static LUT: OnceLock<TrigLut> = OnceLock::new();
        LUT.get_or_init(TrigLut::new)
    }

    pub fn sin(&self, index: usize) -> FixedQ16 {
        self.sin[index & LUT_MASK]
    }

    pub fn cos(&self, index: usize) -> FixedQ16 {
        self.sin[(index + QUARTER_TURN) & LUT_MASK]
    }

    pub fn entries(&self) -> &[FixedQ16; LUT_SIZE] {
        &self.sin
    }
}

impl Default for TrigLut {
    fn default() -> Self {
        Self::new()
    }
}

/// Table sine; the index is masked to 10 bits.
pub fn lut_sin(index: usize) -> FixedQ16 {
    TrigLut::global().sin(index)
}

pub fn lut_cos(index: usize) -> FixedQ16 {
    TrigLut::global().cos(index)
}

/// Nearest table index for an angle in radians.
pub fn angle_to_index(theta: f64) -> usize {
    let turns = theta / (2.0 * PI) * LUT_SIZE as f64;
    (turns.round() as i64).rem_euclid(LUT_SIZE as i64) as usize
}

pub fn index_to_angle(index: usize) -> f64 {
    2.0 * PI * (index & LUT_MASK) as f64 / LUT_SIZE as f64
}

/// Index of the opposite rotation.
pub fn negate_index(index: usize) -> usize {
    (LUT_SIZE - (index & LUT_MASK)) & LUT_MASK
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lut_examples() {
        assert_eq!(lut_sin(0).raw(), 0);
        assert_eq!(lut_sin(256).raw(), 65536);
        assert_eq!(lut_sin(128).raw(), 46341);
        assert_eq!(lut_sin(512).raw(), 0);
        assert_eq!(lut_sin(768).raw(), -65536);
        assert_eq!(lut_cos(0).raw(), 65536);
        assert_eq!(lut_sin(1024 + 256), lut_sin(256));
    }

    #[test]
    fn lut_matches_rounded_sine() {
        for k in 0..LUT_SIZE {
            let expected = ((2.0 * PI * k as f64 / 1024.0).sin() * 65536.0).round() as i32;
            assert!((lut_sin(k).raw() - expected).abs() <= 0, "entry {k}");
        }
    }

    #[test]
    fn lut_symmetries() {
        for k in 0..LUT_SIZE {
            assert_eq!(
                lut_sin(k).raw(),
                -lut_sin((k + 512) & LUT_MASK).raw(),
                "odd at {k}"
            );
            assert_eq!(
                lut_sin((512 + LUT_SIZE - k) & LUT_MASK),
                lut_sin(k),
                "mirror at {k}"
            );
        }
    }

    #[test]
    fn mult_examples() {
        let one = FixedQ16::from_raw(65536);
        assert_eq!(fixed_mult(one, one).unwrap().raw(), 65536);
        let half = FixedQ16::from_raw(32768);
        assert_eq!(fixed_mult(half, half).unwrap().raw(), 16384);
        let r = FixedQ16::from_raw(46341);
        assert_eq!(46341i64 * 46341, 2_147_488_281);
        assert_eq!(fixed_mult(r, r).unwrap().raw(), 32768);
    }

    #[test]
    fn mult_floors_negative_products() {
        // -1/65536 * 0.5 = -0.5 LSB, floors to -1 LSB
        let tiny = FixedQ16::from_raw(-1);
        assert_eq!(
            fixed_mult(tiny, FixedQ16::from_raw(32768)).unwrap().raw(),
            -1
        );
    }

    #[test]
    fn mult_overflow_detected() {
        let big = FixedQ16::from_int(20_000).unwrap();
        assert_eq!(fixed_mult(big, big), Err(FixedError::Overflow));
        assert_eq!(FixedQ16::from_int(40_000), Err(FixedError::Overflow));
        assert_eq!(
            FixedQ16::from_raw(i32::MAX).checked_add(FixedQ16::from_raw(1)),
            Err(FixedError::Overflow)
        );
    }

    #[test]
    fn rounding_to_int() {
        assert_eq!(FixedQ16::from_f64(7.0711).unwrap().round_to_int(), 7);
        assert_eq!(FixedQ16::from_f64(6.5).unwrap().round_to_int(), 7);
        assert_eq!(FixedQ16::from_f64(-6.5).unwrap().round_to_int(), -6);
        assert_eq!(FixedQ16::from_f64(-6.51).unwrap().round_to_int(), -7);
        assert_eq!(FixedQ16::from_int(-3).unwrap().round_to_int(), -3);
    }

    #[test]
    fn index_conversions() {
        assert_eq!(angle_to_index(0.0), 0);
        assert_eq!(angle_to_index(PI / 2.0), 256);
        assert_eq!(angle_to_index(-PI / 2.0), 768);
        assert_eq!(angle_to_index(2f64.to_radians()), 6);
        assert_eq!(negate_index(16), 1008);
        assert_eq!(negate_index(0), 0);
        assert_eq!(index_to_angle(512), PI);
    }

    proptest! {
        #[test]
        fn mult_matches_wide_floor(a in -(1i32 << 24)..(1i32 << 24), b in -65536i32..=65536) {
            let got = fixed_mult(FixedQ16::from_raw(a), FixedQ16::from_raw(b)).unwrap().raw();
            let exact = a as f64 * b as f64 / 65536.0;
            prop_assert_eq!(got as f64, exact.floor());
        }
    }
}
