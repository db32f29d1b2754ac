use std::collections::BTreeMap;
use std::sync::Mutex;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Assign, Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::{ln_gamma_unchecked, rising_factorial};
use crate::quadrature::{integrate_half_line, QuadOptions, QuadResult};
use crate::scalar::{ApproxScalar, ExactScalar, Number, DEFAULT_PRECISION_BITS};

use super::diversity_moment_float;

pub const DEFAULT_SERIES_TOL: f64 = 1e-15;
pub const DEFAULT_MAX_TERMS: usize = 10_000;

const MAX_SERIES_BITS: u32 = 1 << 14;

fn check_params(op: &'static str, alpha: &Number, theta: &Number) -> Result<()> {
    let (a, t) = (alpha.to_float(256), theta.to_float(256));
    if !(a > 0 && a < 1) {
        return Err(Error::domain(op, format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if Float::with_val(256, &t + &a) <= 0 {
        return Err(Error::domain(op, format!("theta must exceed -alpha, got {theta}")));
    }
    Ok(())
}

/// `E[S^r] = (1 + theta/alpha)_r Gamma(theta + 1) / Gamma(theta + r alpha + 1)`,
/// the moments of the limit of `K / n^alpha`.
pub fn diversity_moment(alpha: &Number, theta: &Number, r: u32, bits: u32) -> Result<ApproxScalar> {
    check_params("diversity_moment", alpha, theta)?;
    if r == 0 {
        return Err(Error::domain("diversity_moment", "r must be at least 1"));
    }
    let p = bits + 32;
    let v = diversity_moment_float(&alpha.to_float(p), &theta.to_float(p), r)?;
    Ok(ApproxScalar::new(Float::with_val(bits, v)))
}

/// Exact `E[S^r]` when `r alpha` is an integer `m`, where the gamma ratio
/// collapses to `1 / (theta + 1)_m`; [`Error::NotRational`] otherwise.
pub fn diversity_moment_exact(alpha: &ExactScalar, theta: &ExactScalar, r: u32) -> Result<ExactScalar> {
    check_params(
        "diversity_moment_exact",
        &Number::Exact(alpha.clone()),
        &Number::Exact(theta.clone()),
    )?;
    if r == 0 {
        return Err(Error::domain("diversity_moment_exact", "r must be at least 1"));
    }
    let (a, t) = (alpha.as_rational(), theta.as_rational());
    let shift = Rational::from(a * r);
    if *shift.denom() != 1 {
        return Err(Error::NotRational(format!(
            "diversity moment with r * alpha = {shift} (not an integer)"
        )));
    }
    let m = shift.numer().to_u64().expect("r alpha < r");
    let one = Rational::from(1);
    let lead = rising_factorial(&(Rational::from(t / a) + 1u32), u64::from(r), &one)?;
    let den = rising_factorial(&(t.clone() + 1u32), m, &one)?;
    Ok(ExactScalar::from(lead / den))
}

/// `alpha` reduced for `sin(pi i alpha)`: exact rationals are reduced mod 2
/// without rounding so that the zeros of the sine come out exactly.
#[derive(Clone, Debug)]
enum SinePhase {
    Rational { num: Integer, den: Integer },
    Float(Float),
}

impl SinePhase {
    fn sin_pi(&self, i: u64, p: u32) -> Float {
        match self {
            SinePhase::Rational { num, den } => {
                let two_den = Integer::from(den * 2u32);
                let k = Integer::from(num * i).modulo(&two_den);
                if k.is_zero() || k == *den {
                    return Float::with_val(p, 0);
                }
                let w = p + 16;
                let angle = Float::with_val(w, Constant::Pi) * Float::with_val(w, &k) / Float::with_val(w, den);
                Float::with_val(p, angle.sin())
            }
            SinePhase::Float(alpha) => {
                let w = p + 64 + alpha.prec();
                let x = Float::with_val(w, alpha * i);
                let two = Float::with_val(w, 2);
                let reduced = Float::with_val(w, &x - Float::with_val(w, &x / &two).floor() * &two);
                let angle = reduced * Float::with_val(w, Constant::Pi);
                Float::with_val(p, angle.sin())
            }
        }
    }
}

struct CoeffCache {
    /// `ln(Gamma(i alpha + 1) / (pi alpha i!))` for `i = 1, 2, ...`
    ln_envelope: Vec<f64>,
    /// signed coefficients `(-1)^(i+1) Gamma(i alpha + 1) sin(pi i alpha) / (pi alpha i!)`, keyed by precision
    signed: BTreeMap<u32, Vec<Float>>,
    /// unsigned `Gamma(i alpha + 1) / i!` with guard bits, keyed like `signed`
    magnitudes: BTreeMap<u32, Vec<Float>>,
}

/// The series
/// `g_alpha(x) = (1 / (pi alpha)) sum_{i>=1} (-1)^(i+1) Gamma(i alpha + 1) x^(i-1) sin(pi i alpha) / i!`
/// with coefficients cached per working precision.
pub struct GAlphaSeries {
    alpha: Number,
    phase: SinePhase,
    cache: Mutex<CoeffCache>,
}

impl std::fmt::Debug for GAlphaSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GAlphaSeries").field("alpha", &self.alpha).finish()
    }
}

impl GAlphaSeries {
    pub fn new(alpha: &Number) -> Result<Self> {
        let a = alpha.to_float(256);
        if !(a > 0 && a < 1) {
            return Err(Error::domain("galpha_density", format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let phase = match alpha {
            Number::Exact(q) => SinePhase::Rational {
                num: q.numerator().clone(),
                den: q.denominator().clone(),
            },
            Number::Approx(v) => SinePhase::Float(v.value().clone()),
        };
        Ok(GAlphaSeries {
            alpha: alpha.clone(),
            phase,
            cache: Mutex::new(CoeffCache {
                ln_envelope: Vec::new(),
                signed: BTreeMap::new(),
                magnitudes: BTreeMap::new(),
            }),
        })
    }

    pub fn alpha(&self) -> &Number {
        &self.alpha
    }

    fn ln_envelope_coeff(&self, i: u64) -> f64 {
        let p = 64;
        let a = self.alpha.to_float(p);
        let ln = ln_gamma_unchecked(&(Float::with_val(p, &a * i) + 1u32))
            - ln_gamma_unchecked(&Float::with_val(p, i + 1))
            - Float::with_val(p, Float::with_val(p, Constant::Pi) * &a).ln();
        ln.to_f64()
    }

    /// `Gamma(i alpha + 1) / i!` at `w` bits.
    fn magnitude(&self, i: u64, w: u32) -> Float {
        let a = self.alpha.to_float(w);
        let ln = ln_gamma_unchecked(&(Float::with_val(w, &a * i) + 1u32))
            - ln_gamma_unchecked(&Float::with_val(w, i + 1));
        ln.exp()
    }

    /// Extends `mags` (indexed from `i = 1`) to `len` entries. For
    /// `alpha = num/den` with small terms the step
    /// `Gamma((i + den) alpha + 1) = Gamma(i alpha + 1) (i alpha + 1)_num`
    /// replaces the log-gamma calls by products.
    fn extend_magnitudes(&self, mags: &mut Vec<Float>, len: usize, w: u32) {
        let step = match &self.phase {
            SinePhase::Rational { num, den } => match (num.to_u64(), den.to_u64()) {
                (Some(n), Some(d)) if n <= 64 && d <= 64 => Some((n, d)),
                _ => None,
            },
            SinePhase::Float(_) => None,
        };
        let a = self.alpha.to_float(w);
        while mags.len() < len {
            let i = mags.len() as u64 + 1;
            let next = match step {
                Some((num, den)) if i > den => {
                    let prev = i - den;
                    let base = Float::with_val(w, &a * prev) + 1u32;
                    let mut v = mags[prev as usize - 1].clone();
                    for j in 0..num {
                        v *= Float::with_val(w, &base + j);
                    }
                    for j in 1..=den {
                        v /= prev + j;
                    }
                    v
                }
                _ => self.magnitude(i, w),
            };
            mags.push(next);
        }
    }

    fn ensure(&self, cache: &mut CoeffCache, len: usize, p: u32) {
        while cache.ln_envelope.len() < len {
            let i = cache.ln_envelope.len() as u64 + 1;
            let v = self.ln_envelope_coeff(i);
            cache.ln_envelope.push(v);
        }
        if cache.signed.get(&p).map_or(0, Vec::len) >= len {
            return;
        }
        // guard bits cover the rounding accumulated along the recurrence
        let w = p + 32;
        let mags = cache.magnitudes.entry(p).or_default();
        self.extend_magnitudes(mags, len, w);
        let pia = Float::with_val(w, Constant::Pi) * self.alpha.to_float(w);
        // for rational alpha the sine is periodic in i
        let period = match &self.phase {
            SinePhase::Rational { den, .. } => den.to_u64().map(|d| 2 * d),
            SinePhase::Float(_) => None,
        };
        let mut sines: BTreeMap<u64, Float> = BTreeMap::new();
        let list = cache.signed.entry(p).or_default();
        while list.len() < len {
            let i = list.len() as u64 + 1;
            let sin = match period {
                Some(t) => sines.entry(i % t).or_insert_with(|| self.phase.sin_pi(i, w)).clone(),
                None => self.phase.sin_pi(i, w),
            };
            let mut c = Float::with_val(w, &mags[i as usize - 1] * sin) / &pia;
            if i % 2 == 0 {
                c = -c;
            }
            list.push(Float::with_val(p, c));
        }
    }

    /// One pass at working precision `p`. Returns the sum, the number of
    /// terms used, the largest term envelope (natural log) and whether the
    /// stopping rule fired.
    fn pass(&self, x: f64, tol: f64, max_terms: usize, p: u32) -> (Float, usize, f64, bool) {
        const CHUNK: usize = 64;
        let ln_x = x.ln();
        let xf = Float::with_val(p, x);
        let mut pow = Float::with_val(p, 1);
        let mut sum = Float::with_val(p, 0);
        let mut term = Float::new(p);
        let mut max_env = f64::NEG_INFINITY;
        let mut prev_env = f64::INFINITY;
        let mut i = 0usize;
        let mut cache = self.cache.lock().expect("coefficient cache poisoned");
        while i < max_terms {
            let want = (i + CHUNK).min(max_terms);
            self.ensure(&mut cache, want, p);
            let coeffs = &cache.signed[&p];
            for idx in i..want {
                let env = cache.ln_envelope[idx] + idx as f64 * ln_x;
                term.assign(&coeffs[idx] * &pow);
                sum += &term;
                pow *= &xf;
                max_env = max_env.max(env);
                let ln_s = if sum.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    let (m, e) = sum.to_f64_exp();
                    m.abs().ln() + f64::from(e) * std::f64::consts::LN_2
                };
                let ln_tol = tol.ln() + ln_s;
                let ratio = env - prev_env;
                prev_env = env;
                // envelope ratios shrink with i, so the remaining tail is
                // dominated by a geometric series with the current ratio
                if ratio < 0.0 && env < ln_tol {
                    let rho = ratio.exp();
                    let tail = env + rho.ln() - (-rho).ln_1p();
                    if tail <= ln_tol {
                        return (sum, idx + 1, max_env, true);
                    }
                }
            }
            i = want;
        }
        (sum, max_terms, max_env, false)
    }

    /// Evaluates `g_alpha(x)` to relative accuracy about `tol`, raising the
    /// working precision when cancellation between terms eats the margin.
    pub fn eval(&self, x: f64, tol: f64, max_terms: usize) -> Result<Float> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::domain("galpha_density", format!("requires x > 0, got {x}")));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::domain("galpha_density", format!("tol must lie in (0, 1), got {tol}")));
        }
        if max_terms == 0 {
            return Err(Error::domain("galpha_density", "max_terms must be positive"));
        }
        let needed = (-tol.log2()).ceil() as u32 + 16;
        let mut p = DEFAULT_PRECISION_BITS.max((needed + 63) / 64 * 64);
        let mut capped_once = false;
        loop {
            let (sum, terms, max_env, converged) = self.pass(x, tol, max_terms, p);
            let lost = if sum > 0 {
                (max_env - Float::with_val(53, sum.ln_ref()).to_f64()) / std::f64::consts::LN_2
            } else {
                f64::INFINITY
            };
            let enough = lost.is_finite() && (p as f64) - lost >= needed as f64;
            if converged && enough {
                return Ok(sum);
            }
            if !converged && capped_once {
                return Err(Error::NonConvergent {
                    context: format!("galpha_density at x = {x}"),
                    terms,
                });
            }
            capped_once |= !converged;
            let target = if lost.is_finite() {
                (lost.ceil() as u32).saturating_add(needed + 32)
            } else {
                p * 2
            };
            let next = target.max(p * 2).next_power_of_two();
            if next > MAX_SERIES_BITS {
                return Err(Error::PrecisionExhausted {
                    context: format!("galpha_density at x = {x}"),
                    bits: p,
                });
            }
            p = next;
        }
    }

    pub fn eval_f64(&self, x: f64, tol: f64, max_terms: usize) -> Result<f64> {
        self.eval(x, tol, max_terms).map(|v| v.to_f64())
    }

    /// `int_0^inf x^p g_alpha(x) dx` by adaptive quadrature.
    pub fn moment_by_quadrature(&self, p: f64, tol: f64, max_terms: usize, opts: QuadOptions) -> Result<QuadResult> {
        integrate_half_line(|x| Ok(x.powf(p) * self.eval_f64(x, tol, max_terms)?), opts)
    }
}

/// `g_alpha(x)`, the density whose `p`-th moment is `Gamma(p + 1) / Gamma(p alpha + 1)`.
pub fn galpha_density(alpha: &Number, x: f64, tol: f64, max_terms: usize) -> Result<ApproxScalar> {
    let series = GAlphaSeries::new(alpha)?;
    series.eval(x, tol, max_terms).map(ApproxScalar::new)
}

/// Density `Gamma(theta + 1) / Gamma(theta/alpha + 1) x^(theta/alpha) g_alpha(x)`
/// of the limit of `K / n^alpha`.
#[derive(Debug)]
pub struct DiversityDensity {
    theta: Number,
    exponent: Float,
    prefactor: Float,
    series: GAlphaSeries,
}

impl DiversityDensity {
    pub fn new(alpha: &Number, theta: &Number) -> Result<Self> {
        check_params("diversity_density", alpha, theta)?;
        let p = DEFAULT_PRECISION_BITS + 32;
        let a = alpha.to_float(p);
        let t = theta.to_float(p);
        let exponent = Float::with_val(p, &t / &a);
        let ln_pref = ln_gamma_unchecked(&Float::with_val(p, &t + 1u32))
            - ln_gamma_unchecked(&Float::with_val(p, &exponent + 1u32));
        Ok(DiversityDensity {
            theta: theta.clone(),
            exponent,
            prefactor: ln_pref.exp(),
            series: GAlphaSeries::new(alpha)?,
        })
    }

    pub fn theta(&self) -> &Number {
        &self.theta
    }

    pub fn eval(&self, x: f64, tol: f64, max_terms: usize) -> Result<Float> {
        let g = self.series.eval(x, tol, max_terms)?;
        let p = g.prec().max(self.prefactor.prec());
        let xp = Float::with_val(p, x).pow(&self.exponent);
        Ok(Float::with_val(p, &self.prefactor * xp) * g)
    }

    pub fn eval_f64(&self, x: f64, tol: f64, max_terms: usize) -> Result<f64> {
        self.eval(x, tol, max_terms).map(|v| v.to_f64())
    }

    /// `int_0^inf x^r f(x) dx` by adaptive quadrature; `r = 0` is the total mass.
    pub fn moment_by_quadrature(&self, r: u32, tol: f64, max_terms: usize, opts: QuadOptions) -> Result<QuadResult> {
        integrate_half_line(|x| Ok(x.powi(r as i32) * self.eval_f64(x, tol, max_terms)?), opts)
    }
}

pub fn diversity_density(alpha: &Number, theta: &Number, x: f64, tol: f64, max_terms: usize) -> Result<ApproxScalar> {
    DiversityDensity::new(alpha, theta)?.eval(x, tol, max_terms).map(ApproxScalar::new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Number {
        Number::Exact(s.parse().unwrap())
    }

    fn closed_half(x: f64) -> f64 {
        (-x * x / 4.0).exp() / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn moment_fixtures() {
        let pi = std::f64::consts::PI;
        let m = diversity_moment(&q("1/2"), &q("1/2"), 1, 128).unwrap().to_f64();
        assert!((m - pi.sqrt()).abs() < 1e-15);
        let m = diversity_moment(&q("1/2"), &q("1/2"), 2, 128).unwrap().to_f64();
        assert!((m - 4.0).abs() < 1e-14);
        let m = diversity_moment(&q("1/2"), &q("0"), 1, 128).unwrap().to_f64();
        assert!((m - 2.0 / pi.sqrt()).abs() < 1e-15);
        assert!(diversity_moment(&q("1/2"), &q("-1/2"), 1, 128).is_err());
        assert!(diversity_moment(&q("1/2"), &q("1"), 0, 128).is_err());
    }

    #[test]
    fn exact_moment_when_shift_is_integral() {
        let a: ExactScalar = "1/2".parse().unwrap();
        let t: ExactScalar = "1/2".parse().unwrap();
        assert_eq!(diversity_moment_exact(&a, &t, 2).unwrap().to_string(), "4");
        assert!(matches!(
            diversity_moment_exact(&a, &t, 1),
            Err(Error::NotRational(_))
        ));
        let third: ExactScalar = "1/3".parse().unwrap();
        let two: ExactScalar = "2".parse().unwrap();
        // (7)_3 / (3)_1 = 7 * 8 * 9 / 3
        assert_eq!(diversity_moment_exact(&third, &two, 3).unwrap().to_string(), "168");
    }

    #[test]
    fn galpha_half_closed_form() {
        let s = GAlphaSeries::new(&q("1/2")).unwrap();
        let v = s.eval_f64(1.0, DEFAULT_SERIES_TOL, DEFAULT_MAX_TERMS).unwrap();
        assert!((v - 0.25f64.mul_add(-1.0, 0.0).exp() / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        for x in [1e-6, 0.01, 0.5, 3.0, 7.5, 10.0] {
            let v = s.eval_f64(x, DEFAULT_SERIES_TOL, DEFAULT_MAX_TERMS).unwrap();
            assert!((v - closed_half(x)).abs() <= 1e-14 * closed_half(x).max(1e-300), "x={x}");
        }
    }

    #[test]
    fn float_alpha_matches_rational_alpha() {
        let exact = GAlphaSeries::new(&q("1/4")).unwrap();
        let approx = GAlphaSeries::new(&Number::approx(Float::with_val(256, 0.25))).unwrap();
        for x in [0.3, 2.0, 6.0] {
            let a = exact.eval_f64(x, 1e-14, DEFAULT_MAX_TERMS).unwrap();
            let b = approx.eval_f64(x, 1e-14, DEFAULT_MAX_TERMS).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn galpha_rejects_bad_input_and_caps_terms() {
        let s = GAlphaSeries::new(&q("1/2")).unwrap();
        assert!(s.eval(0.0, 1e-10, 100).is_err());
        assert!(s.eval(1.0, 0.0, 100).is_err());
        assert!(matches!(
            s.eval(10.0, 1e-12, 5),
            Err(Error::NonConvergent { .. })
        ));
        assert!(GAlphaSeries::new(&q("1")).is_err());
    }

    #[test]
    fn density_fixture_and_theta_zero() {
        let v = diversity_density(&q("1/2"), &q("1/2"), 1.0, 1e-15, DEFAULT_MAX_TERMS).unwrap().to_f64();
        assert!((v - (-0.25f64).exp() / 2.0).abs() < 1e-14);
        let d = diversity_density(&q("3/4"), &q("0"), 0.7, 1e-15, DEFAULT_MAX_TERMS).unwrap().to_f64();
        let g = galpha_density(&q("3/4"), 0.7, 1e-15, DEFAULT_MAX_TERMS).unwrap().to_f64();
        assert!((d - g).abs() < 1e-15);
    }

    #[test]
    fn quadrature_total_mass() {
        let s = GAlphaSeries::new(&q("1/2")).unwrap();
        let r = s.moment_by_quadrature(0.0, 1e-14, DEFAULT_MAX_TERMS, QuadOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
    }
}
