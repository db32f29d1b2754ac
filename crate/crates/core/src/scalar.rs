//! Exact rationals, tracked-precision floats and the arithmetic trait that
//! lets the combinatorial routines run on either.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Working precision used when nothing else is requested.
pub const DEFAULT_PRECISION_BITS: u32 = 128;
/// Smallest accepted working precision (an IEEE double mantissa).
pub const MIN_PRECISION_BITS: u32 = 53;

/// Arbitrary-size rational in lowest terms with a positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactScalar(Rational);

impl ExactScalar {
    pub fn new(numerator: impl Into<Integer>, denominator: impl Into<Integer>) -> Result<Self> {
        let den: Integer = denominator.into();
        if den == 0 {
            return Err(Error::domain("ExactScalar::new", "zero denominator"));
        }
        Ok(ExactScalar(Rational::from((numerator.into(), den))))
    }

    pub fn from_int(v: i64) -> Self {
        ExactScalar(Rational::from(v))
    }

    pub fn numerator(&self) -> &Integer {
        self.0.numer()
    }

    pub fn denominator(&self) -> &Integer {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &Rational {
        &self.0
    }

    pub fn into_rational(self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn to_float(&self, bits: u32) -> Float {
        Float::with_val(bits, &self.0)
    }

    pub fn is_integer(&self) -> bool {
        *self.0.denom() == 1
    }
}

impl From<Rational> for ExactScalar {
    fn from(q: Rational) -> Self {
        ExactScalar(q)
    }
}

impl From<i64> for ExactScalar {
    fn from(v: i64) -> Self {
        ExactScalar::from_int(v)
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Accepts `p/q`, integers, and finite decimals such as `0.25` or `-1.5e-3`;
/// decimals are converted exactly.
impl FromStr for ExactScalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse {
            what: "rational",
            input: s.to_string(),
        };
        let t = s.trim();
        if t.is_empty() {
            return Err(err());
        }
        if let Some((p, q)) = t.split_once('/') {
            let p: Integer = p.trim().parse().map_err(|_| err())?;
            let q: Integer = q.trim().parse().map_err(|_| err())?;
            return ExactScalar::new(p, q).map_err(|_| err());
        }
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(pos) => {
                let e: i32 = t[pos + 1..].parse().map_err(|_| err())?;
                (&t[..pos], e)
            }
            None => (t, 0),
        };
        let (negative, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let joined = format!("{int_part}{frac_part}");
        let mut value = Rational::from(joined.parse::<Integer>().map_err(|_| err())?);
        let scale = exp - frac_part.len() as i32;
        let ten = Integer::from(10);
        let factor = Integer::from(rug::ops::Pow::pow(ten, scale.unsigned_abs()));
        if scale >= 0 {
            value *= factor;
        } else {
            value /= factor;
        }
        if negative {
            value = -value;
        }
        Ok(ExactScalar(value))
    }
}

impl Serialize for ExactScalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                return Err(serde::de::Error::custom(format!(
                    "expected a rational string or number, got {other}"
                )))
            }
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Multi-precision float that carries its working precision.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct ApproxScalar {
    value: Float,
}

impl ApproxScalar {
    pub fn new(value: Float) -> Self {
        ApproxScalar { value }
    }

    pub fn value(&self) -> &Float {
        &self.value
    }

    pub fn into_float(self) -> Float {
        self.value
    }

    pub fn precision_bits(&self) -> u32 {
        self.value.prec()
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

impl From<Float> for ApproxScalar {
    fn from(value: Float) -> Self {
        ApproxScalar { value }
    }
}

impl fmt::Display for ApproxScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_float(&self.value))
    }
}

/// Formats with 17 significant digits in Rust's `{:e}` style.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// 17 significant digits; values outside the double range keep their
/// full exponent.
pub fn format_float(v: &Float) -> String {
    let d = v.to_f64();
    if d.is_finite() && (d != 0.0 || v.is_zero()) {
        format_f64(d)
    } else {
        format!("{v:.16e}")
    }
}

/// Result of an evaluation that is either exact or floating.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(ExactScalar),
    Approx(ApproxScalar),
}

impl Number {
    pub fn exact(q: Rational) -> Self {
        Number::Exact(ExactScalar(q))
    }

    pub fn approx(v: Float) -> Self {
        Number::Approx(ApproxScalar::new(v))
    }

    pub fn as_exact(&self) -> Option<&ExactScalar> {
        match self {
            Number::Exact(q) => Some(q),
            Number::Approx(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(q) => q.to_f64(),
            Number::Approx(a) => a.to_f64(),
        }
    }

    /// Converts to a float at `bits` of precision (exact values round once).
    pub fn to_float(&self, bits: u32) -> Float {
        match self {
            Number::Exact(q) => q.to_float(bits),
            Number::Approx(a) => Float::with_val(bits, a.value()),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn cmp_zero(&self) -> Option<Ordering> {
        match self {
            Number::Exact(q) => Some(q.as_rational().cmp0()),
            Number::Approx(a) => a.value().cmp0(),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(q) => q.fmt(f),
            Number::Approx(a) => a.fmt(f),
        }
    }
}

impl From<ExactScalar> for Number {
    fn from(q: ExactScalar) -> Self {
        Number::Exact(q)
    }
}

impl From<ApproxScalar> for Number {
    fn from(a: ApproxScalar) -> Self {
        Number::Approx(a)
    }
}

/// How a quantity should be evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Rational arithmetic; fails for quantities that are not rational.
    Exact,
    /// Floating arithmetic at (at least) the given number of bits.
    Approx { precision_bits: u32 },
}

impl Mode {
    pub fn approx(precision_bits: u32) -> Self {
        Mode::Approx {
            precision_bits: precision_bits.max(MIN_PRECISION_BITS),
        }
    }
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Approx {
            precision_bits: DEFAULT_PRECISION_BITS,
        }
    }
}

/// Field operations shared by [`Rational`] and [`Float`].
///
/// Float results use the larger precision of the two operands.
pub trait Field: Clone + fmt::Debug {
    fn from_u64_like(&self, v: u64) -> Self;
    fn from_integer_like(&self, v: &Integer) -> Self;
    fn add_ref(&self, rhs: &Self) -> Self;
    fn sub_ref(&self, rhs: &Self) -> Self;
    fn mul_ref(&self, rhs: &Self) -> Self;
    /// Panics on an exact division by zero; callers check first.
    fn div_ref(&self, rhs: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn sign(&self) -> Ordering;

    fn zero_like(&self) -> Self {
        self.from_u64_like(0)
    }

    fn one_like(&self) -> Self {
        self.from_u64_like(1)
    }

    fn pow_u(&self, e: u32) -> Self {
        let mut acc = self.one_like();
        for _ in 0..e {
            acc = acc.mul_ref(self);
        }
        acc
    }
}

impl Field for Rational {
    fn from_u64_like(&self, v: u64) -> Self {
        Rational::from(v)
    }
    fn from_integer_like(&self, v: &Integer) -> Self {
        Rational::from(v)
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        Rational::from(self + rhs)
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        Rational::from(self - rhs)
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        Rational::from(self * rhs)
    }
    fn div_ref(&self, rhs: &Self) -> Self {
        Rational::from(self / rhs)
    }
    fn neg_ref(&self) -> Self {
        Rational::from(-self)
    }
    fn sign(&self) -> Ordering {
        self.cmp0()
    }
    fn pow_u(&self, e: u32) -> Self {
        use rug::ops::Pow;
        Rational::from(self.pow(e))
    }
}

impl Field for Float {
    fn from_u64_like(&self, v: u64) -> Self {
        Float::with_val(self.prec(), v)
    }
    fn from_integer_like(&self, v: &Integer) -> Self {
        Float::with_val(self.prec(), v)
    }
    fn add_ref(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec().max(rhs.prec()), self + rhs)
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec().max(rhs.prec()), self - rhs)
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec().max(rhs.prec()), self * rhs)
    }
    fn div_ref(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec().max(rhs.prec()), self / rhs)
    }
    fn neg_ref(&self) -> Self {
        Float::with_val(self.prec(), -self)
    }
    fn sign(&self) -> Ordering {
        self.cmp0().unwrap_or(Ordering::Equal)
    }
    fn pow_u(&self, e: u32) -> Self {
        use rug::ops::Pow;
        Float::with_val(self.prec(), self.pow(e))
    }
}
