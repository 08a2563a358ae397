//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The algorithms only need an ordered field with an absolute value and
//! exact powers of two. Exact rationals are the reference scalar; `f64` and
//! `f32` are supported for quick exploratory runs.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Ordered field used for coefficients, norms and thresholds.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `2^exp`, exact whenever the type can represent it.
    fn pow2(exp: i64) -> Self;

    /// `num / den` built from machine integers.
    fn ratio(num: i64, den: i64) -> Self;

    /// Lossy conversion used for plotting fields and summaries.
    fn approx_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Maximum of two values by `PartialOrd`, preferring `self` on ties.
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for BigRational {
    fn pow2(exp: i64) -> Self {
        let p = BigInt::one() << exp.unsigned_abs();
        if exp >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn approx_f64(&self) -> f64 {
        if let Some(v) = self.to_f64() {
            return v;
        }
        // Fall back to a shifted division when numerator or denominator overflow f64.
        let n = self.numer().bits() as i64;
        let d = self.denom().bits() as i64;
        let shift = (n - d) - 60;
        let scaled = self / Self::pow2(shift);
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    }
}

impl Scalar for f64 {
    fn pow2(exp: i64) -> Self {
        2f64.powi(exp as i32)
    }

    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for f32 {
    fn pow2(exp: i64) -> Self {
        2f32.powi(exp as i32)
    }

    fn ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }
}

/// Parses `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let r = match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).ok()?;
            let q = BigInt::from_str(q.trim()).ok()?;
            if q.is_zero() {
                return None;
            }
            BigRational::new(p, q)
        }
        None => BigRational::from_integer(BigInt::from_str(s).ok()?),
    };
    Some(r)
}

/// Canonical `"p/q"` text form (the denominator is always written).
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Deterministic 17-significant-digit decimal rendering.
pub fn format_decimal(x: f64) -> String {
    format!("{x:.16e}")
}
