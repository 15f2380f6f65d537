//! Exact arithmetic on dyadic rationals `m · 2^e`.
//!
//! Every finite `f64` is a dyadic rational, and sums and products of dyadic
//! rationals stay dyadic, so the fiber recursion can be replayed without
//! rounding when the multipliers, the noise and the start point are floats.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    fn new(mantissa: BigInt, exponent: i64) -> Self {
        let mut d = Self { mantissa, exponent };
        d.strip();
        d
    }

    fn strip(&mut self) {
        match self.mantissa.trailing_zeros() {
            None => self.exponent = 0,
            Some(0) => {}
            Some(tz) => {
                self.mantissa >>= tz;
                self.exponent += tz as i64;
            }
        }
    }

    /// Exact conversion.
    ///
    /// # Panics
    ///
    /// On NaN or infinite input.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "cannot represent {x} exactly");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let fraction = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1u64 << 52), biased - 1075)
        };
        let mut mantissa = BigInt::from(m);
        if x < 0.0 {
            mantissa = -mantissa;
        }
        Self::new(mantissa, e)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.sign() == Sign::Minus
    }

    pub fn abs(&self) -> Self {
        Self {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Exact halving.
    pub fn half(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self {
            mantissa: self.mantissa.clone(),
            exponent: self.exponent - 1,
        }
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self {
            mantissa: self.mantissa.clone(),
            exponent: self.exponent + k,
        }
    }

    /// Bit length of the mantissa.
    pub fn bits(&self) -> u64 {
        self.mantissa.bits()
    }

    /// `floor(log2 |x|)`; `None` for zero.
    pub fn log2_floor(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.bits() as i64 - 1 + self.exponent)
        }
    }

    fn aligned(a: &Self, b: &Self) -> (BigInt, BigInt, i64) {
        let e = a.exponent.min(b.exponent);
        let ma = &a.mantissa << ((a.exponent - e) as u64);
        let mb = &b.mantissa << ((b.exponent - e) as u64);
        (ma, mb, e)
    }

    /// Nearest-ish `f64` (within one ulp); saturates to ±inf.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.bits();
        let magnitude = self.mantissa.magnitude();
        let (top, shift) = if bits > 64 {
            let shift = bits - 64;
            // mantissas are odd after stripping, so dropped bits are never all
            // zero; the sticky bit keeps the final rounding correct
            let top = (magnitude >> shift).to_u64().unwrap_or(u64::MAX) | 1;
            (top, shift as i64)
        } else {
            (magnitude.to_u64().unwrap_or(u64::MAX), 0)
        };
        let value = ldexp(top as f64, self.exponent + shift);
        if self.is_negative() {
            -value
        } else {
            value
        }
    }

    /// `self / other` truncated to roughly `precision` significant bits.
    ///
    /// # Panics
    ///
    /// If `other` is zero.
    pub fn div_approx(&self, other: &Self, precision: u64) -> Self {
        assert!(!other.is_zero(), "division by zero");
        if self.is_zero() {
            return Self::zero();
        }
        let shift = (precision + other.bits()).saturating_sub(self.bits());
        let q = (&self.mantissa << shift) / &other.mantissa;
        Self::new(q, self.exponent - other.exponent - shift as i64)
    }
}

fn ldexp(mut x: f64, mut k: i64) -> f64 {
    const STEP: i64 = 1000;
    while k > STEP {
        x *= 2f64.powi(STEP as i32);
        k -= STEP;
        if x.is_infinite() {
            return x;
        }
    }
    while k < -STEP {
        x *= 2f64.powi(-STEP as i32);
        k += STEP;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(k as i32)
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.mantissa.sign(), other.mantissa.sign()) {
            (a, b) if a != b => return a.cmp(&b),
            (Sign::NoSign, _) => return Ordering::Equal,
            _ => {}
        }
        let (a, b, _) = Self::aligned(self, other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let (a, b, e) = Dyadic::aligned(self, rhs);
        Dyadic::new(a + b, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;

    fn sub(self, rhs: &Dyadic) -> Dyadic {
        if rhs.is_zero() {
            return self.clone();
        }
        let (a, b, e) = Dyadic::aligned(self, rhs);
        Dyadic::new(a - b, e)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() || rhs.is_zero() {
            return Dyadic::zero();
        }
        Dyadic {
            mantissa: &self.mantissa * &rhs.mantissa,
            exponent: self.exponent + rhs.exponent,
        }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;

    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_small_values() {
        let third = Dyadic::from_f64(0.5);
        let three = Dyadic::from_f64(3.0);
        let p = &third * &three;
        assert_eq!(p.to_f64(), 1.5);
        assert_eq!((&p - &Dyadic::from_f64(1.5)), Dyadic::zero());
        assert!(Dyadic::from_f64(-2.0) < Dyadic::from_f64(0.25));
        assert_eq!(Dyadic::from_f64(0.75).half().to_f64(), 0.375);
        assert_eq!(Dyadic::from_f64(f64::MIN_POSITIVE / 4.0).to_f64(), f64::MIN_POSITIVE / 4.0);
    }

    #[test]
    fn sums_beyond_f64_precision() {
        let big = Dyadic::from_f64(1e300);
        let tiny = Dyadic::from_f64(1e-300);
        let s = &big + &tiny;
        assert_eq!(&s - &big, tiny);
        assert!(s > big);
    }

    #[test]
    fn division_is_close() {
        let a = Dyadic::from_f64(1.0);
        let b = Dyadic::from_f64(3.0);
        let q = a.div_approx(&b, 80).to_f64();
        assert!((q - 1.0 / 3.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn huge_products_saturate() {
        let mut x = Dyadic::from_f64(3.0);
        for _ in 0..12 {
            x = &x * &x;
        }
        assert_eq!(x.to_f64(), f64::INFINITY);
        assert_eq!(x.log2_floor(), Some((4096.0 * 3f64.log2()).floor() as i64));
    }

    proptest! {
        #[test]
        fn round_trips_f64(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(Dyadic::from_f64(x).to_f64().to_bits(), x.to_bits());
        }

        #[test]
        fn add_mul_match_f64_when_exact(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let da = Dyadic::from_f64(a);
            let db = Dyadic::from_f64(b);
            prop_assert_eq!((&da + &db).to_f64(), a + b);
            prop_assert_eq!((&da * &db).to_f64(), a * b);
            prop_assert_eq!(da.cmp(&db), a.partial_cmp(&b).unwrap());
        }
    }
}
