use std::fmt;

use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::scalar::{ExactScalar, Number};

/// Sample size `n`, discount `alpha` in (0, 1) and concentration `theta > -alpha`.
///
/// `alpha` and `theta` are kept exactly when they are rational so that the
/// exact evaluation path is available; irrational values (for instance
/// `theta = n^beta` along a regime path) are stored as floats.
#[derive(Clone, Debug, PartialEq)]
pub struct PitmanParams {
    n: u64,
    alpha: Number,
    theta: Number,
}

impl PitmanParams {
    pub fn new(n: u64, alpha: Number, theta: Number) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("PitmanParams", "n must be a positive integer"));
        }
        let (a, t) = (alpha.to_float(256), theta.to_float(256));
        if !a.is_finite() || !t.is_finite() {
            return Err(Error::domain("PitmanParams", "alpha and theta must be finite"));
        }
        if a <= 0 || a >= 1 {
            return Err(Error::domain(
                "PitmanParams",
                format!("alpha must lie in (0, 1), got {alpha}"),
            ));
        }
        if Float::with_val(256, &t + &a) <= 0 {
            return Err(Error::domain(
                "PitmanParams",
                format!("theta must exceed -alpha, got theta = {theta}, alpha = {alpha}"),
            ));
        }
        Ok(PitmanParams { n, alpha, theta })
    }

    /// Rational parameters, so both evaluation modes are available.
    pub fn exact(n: u64, alpha: ExactScalar, theta: ExactScalar) -> Result<Self> {
        Self::new(n, Number::Exact(alpha), Number::Exact(theta))
    }

    /// Convenience constructor from `"p/q"` or decimal strings.
    pub fn parse(n: u64, alpha: &str, theta: &str) -> Result<Self> {
        Self::exact(n, alpha.parse()?, theta.parse()?)
    }

    pub fn from_f64(n: u64, alpha: f64, theta: f64) -> Result<Self> {
        let conv = |v: f64| {
            Rational::from_f64(v)
                .map(|q| Number::exact(q))
                .ok_or_else(|| Error::domain("PitmanParams", format!("non-finite value {v}")))
        };
        Self::new(n, conv(alpha)?, conv(theta)?)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> &Number {
        &self.alpha
    }

    pub fn theta(&self) -> &Number {
        &self.theta
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(n, self.alpha.clone(), self.theta.clone())
    }

    pub fn is_exact(&self) -> bool {
        self.alpha.is_exact() && self.theta.is_exact()
    }

    /// `(alpha, theta)` as rationals, or an error naming the irrational one.
    pub fn exact_parts(&self) -> Result<(&Rational, &Rational)> {
        match (&self.alpha, &self.theta) {
            (Number::Exact(a), Number::Exact(t)) => Ok((a.as_rational(), t.as_rational())),
            (Number::Exact(_), _) => Err(Error::NotRational(format!("theta = {}", self.theta))),
            _ => Err(Error::NotRational(format!("alpha = {}", self.alpha))),
        }
    }

    pub fn alpha_float(&self, bits: u32) -> Float {
        self.alpha.to_float(bits)
    }

    pub fn theta_float(&self, bits: u32) -> Float {
        self.theta.to_float(bits)
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    pub fn theta_f64(&self) -> f64 {
        self.theta.to_f64()
    }

    /// Fails unless `theta > 0`, which the large-concentration formulas need.
    pub fn require_positive_theta(&self, op: &'static str) -> Result<()> {
        match self.theta.cmp_zero() {
            Some(std::cmp::Ordering::Greater) => Ok(()),
            _ => Err(Error::domain(op, format!("requires theta > 0, got {}", self.theta))),
        }
    }
}

impl fmt::Display for PitmanParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}, alpha={}, theta={}", self.n, self.alpha, self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_ranges() {
        assert!(PitmanParams::parse(3, "1/2", "1/2").is_ok());
        assert!(PitmanParams::parse(3, "1/2", "-3/8").is_ok());
        assert!(PitmanParams::parse(3, "1/2", "-1/2").is_err());
        assert!(PitmanParams::parse(3, "0", "1").is_err());
        assert!(PitmanParams::parse(3, "1", "1").is_err());
        assert!(PitmanParams::parse(0, "1/2", "1").is_err());
    }

    #[test]
    fn exact_parts_require_rational_inputs() {
        let p = PitmanParams::parse(4, "1/3", "2/3").unwrap();
        let (a, t) = p.exact_parts().unwrap();
        assert_eq!(a.to_string(), "1/3");
        assert_eq!(t.to_string(), "2/3");
        let q = PitmanParams::new(
            4,
            Number::exact(Rational::from((1, 2))),
            Number::approx(Float::with_val(64, 2).sqrt()),
        )
        .unwrap();
        assert!(matches!(q.exact_parts(), Err(Error::NotRational(_))));
    }
}
