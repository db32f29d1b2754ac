//! Special-function kernel: rising factorials, log-gamma, the two-term
//! Stirling approximation, gamma-function ratios and their large-parameter
//! expansions.
//!
//! Floating evaluations go through [`evaluate_stable`], which repeats a
//! computation at doubled precision until two consecutive results agree.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::params::PitmanParams;
use crate::scalar::{ApproxScalar, Field, Mode, Number, MIN_PRECISION_BITS};

/// Bits of the requested precision that may be lost to rounding before a
/// result counts as unstable.
pub const GUARD_BITS: u32 = 16;
/// Number of precision doublings attempted before giving up.
pub const MAX_ESCALATIONS: u32 = 6;

/// Runs `eval` at `bits` and at successively doubled precisions until two
/// consecutive results agree to `bits - GUARD_BITS` relative bits.
///
/// `eval` returns `Ok(None)` when it detects cancellation on its own; that
/// attempt never counts as agreeing. The accepted value is rounded to `bits`.
pub fn evaluate_stable<F>(context: &str, bits: u32, mut eval: F) -> Result<ApproxScalar>
where
    F: FnMut(u32) -> Result<Option<Float>>,
{
    let bits = bits.max(MIN_PRECISION_BITS);
    let target = bits - GUARD_BITS.min(bits / 2);
    let mut p = bits;
    let mut prev = eval(p)?;
    for _ in 0..MAX_ESCALATIONS {
        let q = p * 2;
        let next = eval(q)?;
        if let (Some(a), Some(b)) = (&prev, &next) {
            if agrees(a, b, target) {
                return Ok(ApproxScalar::new(Float::with_val(bits, b)));
            }
        }
        prev = next;
        p = q;
    }
    Err(Error::PrecisionExhausted {
        context: context.to_string(),
        bits: p,
    })
}

fn agrees(a: &Float, b: &Float, target_bits: u32) -> bool {
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    if b.is_zero() {
        return a.is_zero();
    }
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let scale = Float::with_val(prec, b.abs_ref()) >> target_bits;
    diff <= scale
}

/// `x (x + y) (x + 2y) ... (x + (i - 1) y)`, with the empty product for `i = 0`.
///
/// For `i >= 1` the arguments must satisfy `y >= 0` and `x > -y`.
pub fn rising_factorial<T: Field>(x: &T, i: u64, y: &T) -> Result<T> {
    if i == 0 {
        return Ok(x.one_like());
    }
    if y.sign() == std::cmp::Ordering::Less {
        return Err(Error::domain("rising_factorial", "step must be nonnegative"));
    }
    if x.add_ref(y).sign() != std::cmp::Ordering::Greater {
        return Err(Error::domain(
            "rising_factorial",
            format!("requires x > -y, got x = {x:?}, y = {y:?}"),
        ));
    }
    let mut acc = x.clone();
    let mut term = x.clone();
    for _ in 1..i {
        term = term.add_ref(y);
        acc = acc.mul_ref(&term);
    }
    Ok(acc)
}

/// Natural log of the gamma function for positive arguments, correctly
/// rounded at the precision of `x`.
pub fn log_gamma(x: &Float) -> Result<ApproxScalar> {
    if !x.is_finite() || *x <= 0 {
        return Err(Error::domain("log_gamma", format!("requires x > 0, got {x}")));
    }
    Ok(ApproxScalar::new(ln_gamma_unchecked(x)))
}

pub(crate) fn ln_gamma_unchecked(x: &Float) -> Float {
    Float::with_val(x.prec(), x.ln_gamma_ref())
}

/// Two-term Stirling approximation `sqrt(2 pi) e^-x x^(x - 1/2) (1 + 1/(12x))`.
pub fn stirling_gamma(x: &Float) -> Result<ApproxScalar> {
    if !x.is_finite() || *x <= 0 {
        return Err(Error::domain("stirling_gamma", format!("requires x > 0, got {x}")));
    }
    let p = x.prec();
    let two_pi = Float::with_val(p, Constant::Pi) * 2u32;
    let mut log = Float::with_val(p, two_pi.ln()) / 2u32;
    log -= x;
    log += Float::with_val(p, x - 0.5f64) * Float::with_val(p, x.ln_ref());
    let correction = Float::with_val(p, 1u32 + Float::with_val(p, 12u32 * x).recip());
    log += correction.ln();
    Ok(ApproxScalar::new(log.exp()))
}

/// `Gamma(a + s) / Gamma(a)` through log-gamma, at the precision of `a`.
fn gamma_shift_ratio(a: &Float, s: &Float) -> Float {
    let p = a.prec().max(s.prec());
    let hi = Float::with_val(p, a + s);
    let diff = ln_gamma_unchecked(&hi) - ln_gamma_unchecked(&Float::with_val(p, a));
    diff.exp()
}

/// The product
/// `[Gamma(l + 1 + i) / Gamma(l + 1)] [Gamma(theta + n + i alpha) / Gamma(theta + n)]
///  [Gamma(theta + 1) / Gamma(theta + 1 + i alpha)]` with `l = theta / alpha`.
///
/// Exact mode reduces the product to rising factorials,
/// `(l + 1)_i (theta + i alpha + 1)_{n-1} / (theta + 1)_{n-1}`, so no
/// transcendental value is involved. Floating mode works in log space.
pub fn gamma_ratio_product(params: &PitmanParams, i: u64, mode: Mode) -> Result<Number> {
    match mode {
        Mode::Exact => {
            let (alpha, theta) = params.exact_parts()?;
            Ok(Number::exact(gamma_ratio_product_exact(
                params.n(),
                alpha,
                theta,
                i,
            )?))
        }
        Mode::Approx { precision_bits } => {
            let v = evaluate_stable("gamma_ratio_product", precision_bits, |p| {
                Ok(Some(gamma_ratio_product_float(
                    params.n(),
                    &params.alpha_float(p),
                    &params.theta_float(p),
                    i,
                )?))
            })?;
            Ok(Number::Approx(v))
        }
    }
}

pub(crate) fn gamma_ratio_product_exact(
    n: u64,
    alpha: &Rational,
    theta: &Rational,
    i: u64,
) -> Result<Rational> {
    let one = Rational::from(1);
    let lambda1 = Rational::from(theta / alpha) + 1u32;
    let lead = rising_factorial(&lambda1, i, &one)?;
    if n == 1 {
        return Ok(lead);
    }
    let shifted = Rational::from(theta + Rational::from(alpha * i)) + 1u32;
    let num = rising_factorial(&shifted, n - 1, &one)?;
    let den = rising_factorial(&Rational::from(theta + 1u32), n - 1, &one)?;
    Ok(lead * num / den)
}

pub(crate) fn gamma_ratio_product_float(
    n: u64,
    alpha: &Float,
    theta: &Float,
    i: u64,
) -> Result<Float> {
    let p = alpha.prec().max(theta.prec());
    let one = Float::with_val(p, 1);
    let lambda1 = Float::with_val(p, theta / alpha) + 1u32;
    let lead = rising_factorial(&lambda1, i, &one)?;
    Ok(lead * gamma_ratio_sample_theta(n, theta, alpha, i))
}

/// `[Gamma(theta + n + i alpha) / Gamma(theta + n)] [Gamma(theta + 1) / Gamma(theta + 1 + i alpha)]`
fn gamma_ratio_sample_theta(n: u64, theta: &Float, alpha: &Float, i: u64) -> Float {
    let p = alpha.prec().max(theta.prec());
    if i == 0 || n == 1 {
        return Float::with_val(p, 1);
    }
    let shift = Float::with_val(p, alpha * i);
    let top = Float::with_val(p, theta + n);
    let bottom = Float::with_val(p, theta + 1u32);
    let ln = ln_gamma_unchecked(&Float::with_val(p, &top + &shift)) - ln_gamma_unchecked(&top)
        + ln_gamma_unchecked(&bottom)
        - ln_gamma_unchecked(&Float::with_val(p, &bottom + &shift));
    ln.exp()
}

fn check_lemma_inputs(op: &'static str, theta: &Float, alpha: &Float, strict: bool) -> Result<()> {
    if !(*alpha > 0 && *alpha < 1) {
        return Err(Error::domain(op, format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ok = if strict { *theta > 0 } else { *theta >= 0 };
    if !ok {
        let bound = if strict { "theta > 0" } else { "theta >= 0" };
        return Err(Error::domain(op, format!("requires {bound}, got {theta}")));
    }
    Ok(())
}

fn prec_of(a: &Float, b: &Float) -> u32 {
    a.prec().max(b.prec())
}

/// `Gamma(theta + n + i alpha) / Gamma(theta + n)`, evaluated stably.
pub fn gamma_ratio_sample(n: u64, theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("gamma_ratio_sample", theta, alpha, false)?;
    if n == 0 {
        return Err(Error::domain("gamma_ratio_sample", "n must be positive"));
    }
    evaluate_stable("gamma_ratio_sample", prec_of(theta, alpha), |p| {
        let a = Float::with_val(p, theta + n);
        let s = Float::with_val(p, alpha * i);
        Ok(Some(gamma_shift_ratio(&a, &s)))
    })
}

/// `Gamma(theta + 1) / Gamma(theta + 1 + i alpha)`, evaluated stably.
pub fn gamma_ratio_theta(theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("gamma_ratio_theta", theta, alpha, false)?;
    evaluate_stable("gamma_ratio_theta", prec_of(theta, alpha), |p| {
        let a = Float::with_val(p, theta + 1u32);
        let s = Float::with_val(p, alpha * i);
        Ok(Some(gamma_shift_ratio(&a, &s).recip()))
    })
}

/// `Gamma(theta/alpha + 1 + i) / Gamma(theta/alpha + 1)`, i.e. the rising
/// factorial `(theta/alpha + 1)_i`.
pub fn gamma_ratio_lambda(theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("gamma_ratio_lambda", theta, alpha, false)?;
    let p = prec_of(theta, alpha);
    let x = Float::with_val(p, theta / alpha) + 1u32;
    let v = rising_factorial(&x, u64::from(i), &Float::with_val(p, 1))?;
    Ok(ApproxScalar::new(v))
}

/// Large-`n`, large-`theta` expansion of the full product of
/// [`gamma_ratio_product`]:
/// `(theta/alpha * n^alpha / theta^alpha)^i {1 + i alpha theta / n + i^2 alpha (1 - alpha) / (2 theta)}`.
pub fn lemma41_expansion(n: u64, theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("lemma41_expansion", theta, alpha, true)?;
    if n == 0 {
        return Err(Error::domain("lemma41_expansion", "n must be positive"));
    }
    let p = prec_of(theta, alpha);
    let nf = Float::with_val(p, n);
    let ratio = Float::with_val(p, &nf / theta);
    let base = Float::with_val(p, theta / alpha) * Float::with_val(p, ratio.pow(alpha));
    let lead = base.pow(i);
    let fi = Float::with_val(p, i);
    let c1 = Float::with_val(p, &fi * alpha) * theta / &nf;
    let one_minus = Float::with_val(p, 1u32 - alpha);
    let c2 = Float::with_val(p, fi.square_ref()) * alpha * one_minus / Float::with_val(p, 2u32 * theta);
    Ok(ApproxScalar::new(lead * (c1 + c2 + 1u32)))
}

/// `Gamma(theta + n + i alpha) / Gamma(theta + n) ~ n^(i alpha) (1 + i alpha theta / n)`.
pub fn lemma42_expansion(n: u64, theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("lemma42_expansion", theta, alpha, false)?;
    if n == 0 {
        return Err(Error::domain("lemma42_expansion", "n must be positive"));
    }
    let p = prec_of(theta, alpha);
    let nf = Float::with_val(p, n);
    let ia = Float::with_val(p, alpha * i);
    let lead = Float::with_val(p, (&nf).pow(&ia));
    let corr = Float::with_val(p, &ia * theta) / &nf + 1u32;
    Ok(ApproxScalar::new(lead * corr))
}

/// `Gamma(theta + 1) / Gamma(theta + 1 + i alpha) ~ theta^(-i alpha) (1 - i alpha (i alpha + 1) / (2 theta))`.
pub fn lemma43_expansion(theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("lemma43_expansion", theta, alpha, true)?;
    let p = prec_of(theta, alpha);
    if i == 0 {
        return Ok(ApproxScalar::new(Float::with_val(p, 1)));
    }
    let ia = Float::with_val(p, alpha * i);
    let lead = Float::with_val(p, theta.pow(Float::with_val(p, -&ia)));
    let corr = Float::with_val(p, &ia * Float::with_val(p, &ia + 1u32))
        / Float::with_val(p, 2u32 * theta);
    Ok(ApproxScalar::new(lead * (1u32 - corr)))
}

/// `Gamma(theta/alpha + 1 + i) / Gamma(theta/alpha + 1) ~ (theta/alpha)^i (1 + i (i + 1) alpha / (2 theta))`.
pub fn lemma44_expansion(theta: &Float, alpha: &Float, i: u32) -> Result<ApproxScalar> {
    check_lemma_inputs("lemma44_expansion", theta, alpha, true)?;
    if i == 0 {
        return Err(Error::domain("lemma44_expansion", "requires i >= 1"));
    }
    let p = prec_of(theta, alpha);
    let lead = Float::with_val(p, theta / alpha).pow(i);
    let corr =
        Float::with_val(p, alpha * (u64::from(i) * u64::from(i + 1))) / Float::with_val(p, 2u32 * theta);
    Ok(ApproxScalar::new(lead * (corr + 1u32)))
}
