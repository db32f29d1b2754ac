//! Limiting and approximate formulas for the moments of `K`: the diversity
//! moments and density, the large-`n` refinement, the corrected scaling,
//! the joint-regime expansions, the `Z` statistic and regime paths.

mod diversity;
mod regime;

pub use diversity::{
    diversity_density, diversity_moment, diversity_moment_exact, galpha_density, DiversityDensity,
    GAlphaSeries, DEFAULT_MAX_TERMS, DEFAULT_SERIES_TOL,
};
pub use regime::{regime_path, CrFeasibility, RegimeKind, RegimePath, RegimePoint};

use std::fmt;

use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_gamma_unchecked, rising_factorial};
use crate::params::PitmanParams;
use crate::scalar::{ApproxScalar, Number};

const EXTRA_BITS: u32 = 32;

/// Denominators used to normalize `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    /// `n^alpha`
    NAlpha,
    /// `n^alpha - theta Gamma(theta + alpha) / Gamma(theta + 1)`
    Corrected,
    /// `(theta / alpha) (n / theta)^alpha`
    Kle,
    /// `theta {((n + theta) / theta)^alpha - 1} / alpha`
    #[serde(rename = "mthA")]
    MthA,
    /// `theta log(1 + n / theta)`, the `alpha = 0` normalizer.
    EwensRef,
}

impl ScalingKind {
    pub const ALL: [ScalingKind; 5] = [
        ScalingKind::NAlpha,
        ScalingKind::Corrected,
        ScalingKind::Kle,
        ScalingKind::MthA,
        ScalingKind::EwensRef,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScalingKind::NAlpha => "n_alpha",
            ScalingKind::Corrected => "corrected",
            ScalingKind::Kle => "kle",
            ScalingKind::MthA => "mthA",
            ScalingKind::EwensRef => "ewens_ref",
        }
    }

    /// The scale for `params`; the last three need `theta > 0`.
    pub fn value(self, params: &PitmanParams, bits: u32) -> Result<Float> {
        match self {
            ScalingKind::NAlpha => {
                let alpha = params.alpha_float(bits);
                Ok(Float::with_val(bits, params.n()).pow(alpha))
            }
            ScalingKind::Corrected => corrected_scale(params, bits).map(ApproxScalar::into_float),
            ScalingKind::Kle => kle_scale(params, bits).map(ApproxScalar::into_float),
            ScalingKind::MthA => mth_a_scale(params, bits).map(ApproxScalar::into_float),
            ScalingKind::EwensRef => {
                params.require_positive_theta("ewens_reference_scale")?;
                ewens_reference_scale(&Float::with_val(bits, params.n()), &params.theta_float(bits))
                    .map(ApproxScalar::into_float)
            }
        }
    }
}

impl fmt::Display for ScalingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn ln_gamma(x: &Float) -> Float {
    ln_gamma_unchecked(x)
}

fn rounded(bits: u32, v: Float) -> ApproxScalar {
    ApproxScalar::new(Float::with_val(bits, v))
}

/// Two-term large-`n` approximation of `E[(K / n^alpha)^r]`:
/// `(1 + theta/alpha)_r Gamma(theta + 1) / Gamma(theta + r alpha + 1)
///  [1 - {r (r - 1) alpha / 2 + r theta} Gamma(theta + r alpha) / Gamma(theta + (r - 1) alpha + 1) n^-alpha]`.
pub fn theorem31_approx(params: &PitmanParams, r: u32, bits: u32) -> Result<ApproxScalar> {
    if r == 0 {
        return Err(Error::domain("theorem31_approx", "r must be at least 1"));
    }
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    let lead = diversity_moment_float(&alpha, &theta, r)?;
    let ra = Float::with_val(p, &alpha * r);
    let r1a = Float::with_val(p, &alpha * (r - 1));
    let gamma_ratio = (ln_gamma(&Float::with_val(p, &theta + &ra))
        - ln_gamma(&(Float::with_val(p, &theta + &r1a) + 1u32)))
    .exp();
    let coeff = Float::with_val(p, &alpha * (r * (r - 1))) / 2u32 + Float::with_val(p, &theta * r);
    let n_pow = Float::with_val(p, params.n()).pow(Float::with_val(p, -&alpha));
    let bracket = 1u32 - coeff * gamma_ratio * n_pow;
    Ok(rounded(bits, lead * bracket))
}

pub(crate) fn diversity_moment_float(alpha: &Float, theta: &Float, r: u32) -> Result<Float> {
    let p = alpha.prec().max(theta.prec());
    let lambda1 = Float::with_val(p, theta / alpha) + 1u32;
    let rising = rising_factorial(&lambda1, u64::from(r), &Float::with_val(p, 1))?;
    let t1 = Float::with_val(p, theta + 1u32);
    let ratio = (ln_gamma(&t1) - ln_gamma(&Float::with_val(p, &t1 + Float::with_val(p, alpha * r)))).exp();
    Ok(rising * ratio)
}

/// `theta Gamma(theta + alpha) / Gamma(theta + 1)`, zero at `theta = 0`.
fn corrected_offset(params: &PitmanParams, p: u32) -> Float {
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    if theta.is_zero() {
        return theta;
    }
    let ratio = (ln_gamma(&Float::with_val(p, &theta + &alpha))
        - ln_gamma(&Float::with_val(p, &theta + 1u32)))
    .exp();
    theta * ratio
}

/// `n^alpha - theta Gamma(theta + alpha) / Gamma(theta + 1)`; rejected when
/// not positive, with the smallest admissible `n` in the message.
pub fn corrected_scale(params: &PitmanParams, bits: u32) -> Result<ApproxScalar> {
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let offset = corrected_offset(params, p);
    let n_pow = Float::with_val(p, params.n()).pow(&alpha);
    let scale = Float::with_val(p, &n_pow - &offset);
    if scale <= 0 {
        let threshold = Float::with_val(p, offset.pow(Float::with_val(p, alpha.recip_ref())))
            .floor()
            .to_f64()
            + 1.0;
        return Err(Error::domain(
            "corrected_scale",
            format!("scale is not positive for n = {}; need n >= {threshold}", params.n()),
        ));
    }
    Ok(rounded(bits, scale))
}

/// Limiting mean of `K / corrected_scale`, `Gamma(theta + 1) / (alpha Gamma(theta + alpha))`.
pub fn corrected_mean_limit(alpha: &Number, theta: &Number, bits: u32) -> Result<ApproxScalar> {
    let p = bits + EXTRA_BITS;
    let (a, t) = (alpha.to_float(p), theta.to_float(p));
    check_alpha_theta("corrected_mean_limit", &a, &t)?;
    let ratio = (ln_gamma(&Float::with_val(p, &t + 1u32)) - ln_gamma(&Float::with_val(p, &t + &a))).exp();
    Ok(rounded(bits, ratio / a))
}

fn check_alpha_theta(op: &'static str, alpha: &Float, theta: &Float) -> Result<()> {
    if !(*alpha > 0 && *alpha < 1) {
        return Err(Error::domain(op, format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if Float::with_val(alpha.prec(), theta + alpha) <= 0 {
        return Err(Error::domain(op, format!("theta must exceed -alpha, got {theta}")));
    }
    Ok(())
}

/// `(theta / alpha) (n / theta)^alpha`.
pub fn kle_scale(params: &PitmanParams, bits: u32) -> Result<ApproxScalar> {
    params.require_positive_theta("kle_scale")?;
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    let ratio = Float::with_val(p, params.n()) / &theta;
    Ok(rounded(bits, Float::with_val(p, &theta / &alpha) * ratio.pow(&alpha)))
}

/// Three-term joint-regime approximation of `E[{alpha K / (theta (n/theta)^alpha)}^r]`:
/// `1 - r (theta/n)^alpha + r^2 alpha (1 - alpha) / (2 theta)`.
pub fn kle_normalized_approx(params: &PitmanParams, r: u32, bits: u32) -> Result<ApproxScalar> {
    params.require_positive_theta("kle_normalized_approx")?;
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    let small = (Float::with_val(p, &theta) / params.n()).pow(&alpha);
    let fr = Float::with_val(p, r);
    let var = Float::with_val(p, &alpha * Float::with_val(p, 1u32 - &alpha))
        * Float::with_val(p, fr.square_ref())
        / Float::with_val(p, 2u32 * &theta);
    Ok(rounded(bits, 1u32 - fr * small + var))
}

/// `theta {((n + theta) / theta)^alpha - 1} / alpha`.
pub fn mth_a_scale(params: &PitmanParams, bits: u32) -> Result<ApproxScalar> {
    params.require_positive_theta("mthA_scale")?;
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    Ok(rounded(bits, mth_a_scale_float(params.n(), &alpha, &theta)))
}

fn mth_a_scale_float(n: u64, alpha: &Float, theta: &Float) -> Float {
    let p = alpha.prec().max(theta.prec());
    let x = Float::with_val(p, n) / theta;
    let growth = (x.ln_1p() * alpha).exp_m1();
    Float::with_val(p, theta * growth) / alpha
}

/// `1 + r^2 alpha (1 - alpha) / (2 theta)`, the refined joint-regime value of
/// `E[(alpha K / (theta {((n + theta)/theta)^alpha - 1}))^r]`.
pub fn mth_a_normalized_approx(params: &PitmanParams, r: u32, bits: u32) -> Result<ApproxScalar> {
    params.require_positive_theta("mthA_normalized_approx")?;
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    let var = Float::with_val(p, &alpha * Float::with_val(p, 1u32 - &alpha)) * (r * r)
        / Float::with_val(p, 2u32 * &theta);
    Ok(rounded(bits, var + 1u32))
}

/// Soft check for the joint regime: a message when `theta / n >= 1/2`.
pub fn joint_regime_warning(params: &PitmanParams) -> Option<String> {
    let ratio = params.theta_f64() / params.n() as f64;
    (ratio >= 0.5).then(|| {
        format!("theta/n = {ratio:.3} is not small; joint-regime approximations may be poor")
    })
}

/// `Z = sqrt(theta) [alpha K / (theta {((n + theta)/theta)^alpha - 1}) - 1]`.
pub fn z_statistic(k_observed: u64, params: &PitmanParams, bits: u32) -> Result<ApproxScalar> {
    params.require_positive_theta("z_statistic")?;
    if k_observed == 0 || k_observed > params.n() {
        return Err(Error::domain(
            "z_statistic",
            format!("observed K = {k_observed} outside 1..={}", params.n()),
        ));
    }
    let p = bits + EXTRA_BITS;
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    let scale = mth_a_scale_float(params.n(), &alpha, &theta);
    let centered = Float::with_val(p, k_observed) / scale - 1u32;
    Ok(rounded(bits, theta.sqrt() * centered))
}

/// Plain-f64 evaluator of `Z` for Monte Carlo loops: `z(K) = sqrt(theta) (K / scale - 1)`.
#[derive(Clone, Copy, Debug)]
pub struct ZStatistic {
    sqrt_theta: f64,
    inv_scale: f64,
}

impl ZStatistic {
    pub fn new(params: &PitmanParams) -> Result<Self> {
        let scale = mth_a_scale(params, 128)?.to_f64();
        Ok(ZStatistic {
            sqrt_theta: params.theta_f64().sqrt(),
            inv_scale: scale.recip(),
        })
    }

    pub fn normalized(&self, k: u64) -> f64 {
        k as f64 * self.inv_scale
    }

    pub fn eval(&self, k: u64) -> f64 {
        self.sqrt_theta * (self.normalized(k) - 1.0)
    }
}

/// `theta log(1 + n / theta)`.
pub fn ewens_reference_scale(n: &Float, theta: &Float) -> Result<ApproxScalar> {
    if *n < 1 || *theta <= 0 {
        return Err(Error::domain(
            "ewens_reference_scale",
            format!("requires n >= 1 and theta > 0, got n = {n}, theta = {theta}"),
        ));
    }
    let p = n.prec().max(theta.prec());
    let x = Float::with_val(p, n / theta);
    Ok(ApproxScalar::new(x.ln_1p() * theta))
}
