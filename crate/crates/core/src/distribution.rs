//! Exact laws of a Pitman partition: the sampling-formula pmf of the
//! component counts, the pmf of the number of blocks `K`, the closed-form
//! moments `E[K^r]`, and enumeration oracles for all three.

use rug::{Float, Integer, Rational};

use crate::asymptotics::{
    diversity_moment, kle_normalized_approx, mth_a_normalized_approx, theorem31_approx, ScalingKind,
};
use crate::combinatorics::{
    enumerate_partitions_capped, weighted_stirling_r, CNumberTable, PartitionCounts,
    DEFAULT_ENUMERATION_CAP, EXACT_TABLE_CAP,
};
use crate::error::{Error, Result};
use crate::numerics::{
    evaluate_stable, gamma_ratio_product_exact, gamma_ratio_product_float, ln_gamma_unchecked,
    rising_factorial,
};
use crate::params::PitmanParams;
use crate::scalar::{ApproxScalar, ExactScalar, Field, Mode, Number, DEFAULT_PRECISION_BITS};

fn factorial_like<T: Field>(like: &T, m: u64) -> T {
    like.from_integer_like(&Integer::from(Integer::factorial(m as u32)))
}

/// `(theta)_{k;alpha} / (theta)_n` with the common factor `theta` cancelled,
/// so that `theta = 0` is handled: `(theta + alpha)_{k-1;alpha} / (theta + 1)_{n-1}`.
fn block_weight<T: Field>(alpha: &T, theta: &T, k: u64, n: u64) -> Result<T> {
    let one = alpha.one_like();
    let num = rising_factorial(&theta.add_ref(alpha), k - 1, alpha)?;
    let den = rising_factorial(&theta.add_ref(&one), n - 1, &one)?;
    Ok(num.div_ref(&den))
}

fn psf_pmf_in<T: Field>(counts: &PartitionCounts, alpha: &T, theta: &T) -> Result<T> {
    let n = counts.n();
    let k = counts.length();
    let one = alpha.one_like();
    let one_minus_alpha = one.sub_ref(alpha);
    let mut value = factorial_like(alpha, n).mul_ref(&block_weight(alpha, theta, k, n)?);
    for (idx, &c) in counts.counts().iter().enumerate() {
        if c == 0 {
            continue;
        }
        let size = idx as u64 + 1;
        let part = rising_factorial(&one_minus_alpha, size - 1, &one)?
            .div_ref(&factorial_like(alpha, size));
        value = value
            .mul_ref(&part.pow_u(c as u32))
            .div_ref(&factorial_like(alpha, c));
    }
    Ok(value)
}

/// Probability of the component counts under the Pitman sampling formula.
pub fn psf_pmf(counts: &PartitionCounts, params: &PitmanParams, mode: Mode) -> Result<Number> {
    if counts.n() != params.n() {
        return Err(Error::domain(
            "psf_pmf",
            format!("counts describe n = {}, params have n = {}", counts.n(), params.n()),
        ));
    }
    match mode {
        Mode::Exact => {
            let (a, t) = params.exact_parts()?;
            Ok(Number::exact(psf_pmf_in(counts, a, t)?))
        }
        Mode::Approx { precision_bits } => {
            let p = precision_bits + 32;
            let v = psf_pmf_in(counts, &params.alpha_float(p), &params.theta_float(p))?;
            Ok(Number::approx(Float::with_val(precision_bits, v)))
        }
    }
}

/// pmf of the number of blocks, entry `k - 1` holding `P(K = k)`.
///
/// Exact mode is limited to `n <= EXACT_TABLE_CAP`.
pub fn length_pmf(params: &PitmanParams, mode: Mode) -> Result<Vec<Number>> {
    let n = params.n();
    match mode {
        Mode::Exact => {
            let (alpha, theta) = params.exact_parts()?;
            if n > EXACT_TABLE_CAP {
                return Err(Error::CapExceeded {
                    what: "exact length pmf",
                    n,
                    cap: EXACT_TABLE_CAP,
                    hint: "; use floating mode for larger n",
                });
            }
            let table = CNumberTable::exact(alpha, n)?;
            let mut alpha_pow = Rational::from(1);
            (1..=n)
                .map(|k| {
                    alpha_pow *= alpha;
                    let c = table.get(n, k)?;
                    let c = c.as_exact().expect("exact table").as_rational().clone();
                    let w = block_weight(alpha, theta, k, n)?;
                    Ok(Number::exact(c / &alpha_pow * w))
                })
                .collect()
        }
        Mode::Approx { precision_bits } => {
            let p = precision_bits + 32;
            let alpha = params.alpha_float(p);
            let theta = params.theta_float(p);
            let table = CNumberTable::log_scaled(&alpha, n)?;
            let ln_alpha = Float::with_val(p, alpha.ln_ref());
            let ln_den = ln_gamma_unchecked(&Float::with_val(p, &theta + n))
                - ln_gamma_unchecked(&Float::with_val(p, &theta + 1u32));
            let mut ln_num = Float::with_val(p, 0);
            let mut out = Vec::with_capacity(n as usize);
            for k in 1..=n {
                if k >= 2 {
                    ln_num += Float::with_val(p, &theta + Float::with_val(p, &alpha * (k - 1))).ln();
                }
                let ln_pk = table.ln_value(n, k, p)? - Float::with_val(p, &ln_alpha * k) + &ln_num
                    - &ln_den;
                out.push(Number::approx(Float::with_val(precision_bits, ln_pk.exp_ref())));
            }
            Ok(out)
        }
    }
}

/// `E[K^r] = sum_{i=0}^{r} (-1)^{r-i} R(r, i, theta/alpha) G_i` where `G_i` is
/// [`crate::numerics::gamma_ratio_product`] and `G_0 = 1`.
///
/// Floating mode escalates precision when the alternating sum loses more
/// than half of the working bits to cancellation.
pub fn exact_moment(params: &PitmanParams, r: u32, mode: Mode) -> Result<Number> {
    if r == 0 {
        return Err(Error::domain("exact_moment", "moment order r must be at least 1"));
    }
    let n = params.n();
    match mode {
        Mode::Exact => {
            let (alpha, theta) = params.exact_parts()?;
            let lambda = Rational::from(theta / alpha);
            let mut sum = Rational::new();
            for i in 0..=r {
                let g = gamma_ratio_product_exact(n, alpha, theta, u64::from(i))?;
                let term = weighted_stirling_r(r, i, &lambda) * g;
                if (r - i) % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            Ok(Number::exact(sum))
        }
        Mode::Approx { precision_bits } => {
            let v = evaluate_stable("exact_moment", precision_bits, |p| {
                moment_float_attempt(params, r, p)
            })?;
            Ok(Number::Approx(v))
        }
    }
}

fn moment_float_attempt(params: &PitmanParams, r: u32, p: u32) -> Result<Option<Float>> {
    let alpha = params.alpha_float(p);
    let theta = params.theta_float(p);
    let lambda = Float::with_val(p, &theta / &alpha);
    let mut terms: Vec<Float> = Vec::with_capacity(r as usize + 1);
    for i in 0..=r {
        let g = gamma_ratio_product_float(params.n(), &alpha, &theta, u64::from(i))?;
        let mut term = weighted_stirling_r(r, i, &lambda) * g;
        if (r - i) % 2 == 1 {
            term = -term;
        }
        terms.push(term);
    }
    // largest magnitude first
    terms.sort_by(|a, b| b.cmp_abs(a).unwrap_or(std::cmp::Ordering::Equal));
    let largest = Float::with_val(p, terms[0].abs_ref());
    let sum = Float::with_val(p, Float::sum(terms.iter()));
    if largest.is_zero() {
        return Ok(Some(sum));
    }
    let floor = largest >> (p / 2);
    if Float::with_val(p, sum.abs_ref()) < floor {
        return Ok(None);
    }
    Ok(Some(sum))
}

fn require_exact_oracle(params: &PitmanParams, cap: u64) -> Result<(&Rational, &Rational)> {
    if params.n() > cap {
        return Err(Error::CapExceeded {
            what: "enumeration oracle",
            n: params.n(),
            cap,
            hint: "",
        });
    }
    params.exact_parts()
}

/// `E[K^r]` by summing over every partition of `n`, in rationals.
pub fn oracle_moment(params: &PitmanParams, r: u32) -> Result<ExactScalar> {
    oracle_moment_capped(params, r, DEFAULT_ENUMERATION_CAP)
}

pub fn oracle_moment_capped(params: &PitmanParams, r: u32, cap: u64) -> Result<ExactScalar> {
    if r == 0 {
        return Err(Error::domain("oracle_moment", "moment order r must be at least 1"));
    }
    let (alpha, theta) = require_exact_oracle(params, cap)?;
    let mut sum = Rational::new();
    for counts in enumerate_partitions_capped(params.n(), cap)? {
        let k = Rational::from(counts.length());
        sum += rug::ops::Pow::pow(k, r) * psf_pmf_in(&counts, alpha, theta)?;
    }
    Ok(ExactScalar::from(sum))
}

/// pmf of `K` obtained by grouping sampling-formula probabilities by length.
pub fn length_pmf_oracle(params: &PitmanParams) -> Result<Vec<ExactScalar>> {
    length_pmf_oracle_capped(params, DEFAULT_ENUMERATION_CAP)
}

pub fn length_pmf_oracle_capped(params: &PitmanParams, cap: u64) -> Result<Vec<ExactScalar>> {
    let (alpha, theta) = require_exact_oracle(params, cap)?;
    let mut pmf = vec![Rational::new(); params.n() as usize];
    for counts in enumerate_partitions_capped(params.n(), cap)? {
        pmf[counts.length() as usize - 1] += psf_pmf_in(&counts, alpha, theta)?;
    }
    Ok(pmf.into_iter().map(ExactScalar::from).collect())
}

/// Which approximation an entry of a [`MomentReport`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ApproxLabel {
    /// Limiting moment of the diversity, for `K / n^alpha`.
    Leading,
    /// Two-term large-`n` expansion, for `K / n^alpha`.
    TwoTerm,
    /// Three-term joint-regime expansion, for `alpha K / (theta (n/theta)^alpha)`.
    JointThreeTerm,
    /// `1 + r^2 alpha (1 - alpha) / (2 theta)`, for the refined joint scaling.
    JointRefined,
}

impl ApproxLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ApproxLabel::Leading => "leading",
            ApproxLabel::TwoTerm => "two_term",
            ApproxLabel::JointThreeTerm => "joint_three_term",
            ApproxLabel::JointRefined => "joint_refined",
        }
    }

    pub fn scaling(self) -> ScalingKind {
        match self {
            ApproxLabel::Leading | ApproxLabel::TwoTerm => ScalingKind::NAlpha,
            ApproxLabel::JointThreeTerm => ScalingKind::Kle,
            ApproxLabel::JointRefined => ScalingKind::MthA,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Approximation {
    pub label: ApproxLabel,
    pub scaling: ScalingKind,
    /// `E[(K / scale)^r]` from the exact moment.
    pub normalized: ApproxScalar,
    pub approx: ApproxScalar,
    /// `approx - normalized`.
    pub residual: ApproxScalar,
}

/// Exact `E[K^r]` next to each asymptotic approximation that applies.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub r: u32,
    pub params: PitmanParams,
    pub exact: Number,
    pub approximations: Vec<Approximation>,
}

impl MomentReport {
    /// Recomputes every residual from the stored fields.
    pub fn residuals_consistent(&self) -> bool {
        self.r >= 1
            && self.approximations.iter().all(|a| {
                let p = a.residual.precision_bits();
                Float::with_val(p, a.approx.value() - a.normalized.value()) == *a.residual.value()
            })
    }

    pub fn get(&self, label: ApproxLabel) -> Option<&Approximation> {
        self.approximations.iter().find(|a| a.label == label)
    }
}

/// Builds a [`MomentReport`]. The joint-regime entries need `theta > 0` and
/// are omitted otherwise.
pub fn moment_report(params: &PitmanParams, r: u32, mode: Mode) -> Result<MomentReport> {
    let bits = match mode {
        Mode::Exact => DEFAULT_PRECISION_BITS,
        Mode::Approx { precision_bits } => precision_bits,
    };
    let exact = exact_moment(params, r, mode)?;
    let moment = match &exact {
        Number::Exact(q) => q.to_float(bits),
        Number::Approx(_) => exact_moment(params, r, Mode::approx(bits))?.to_float(bits),
    };
    let mut labels = vec![ApproxLabel::Leading, ApproxLabel::TwoTerm];
    if params.require_positive_theta("moment_report").is_ok() {
        labels.extend([ApproxLabel::JointThreeTerm, ApproxLabel::JointRefined]);
    }
    let mut approximations = Vec::with_capacity(labels.len());
    for label in labels {
        let scaling = label.scaling();
        let scale = scaling.value(params, bits)?;
        let normalized = Float::with_val(bits, &moment / Float::with_val(bits, scale.pow_u(r)));
        let approx = match label {
            ApproxLabel::Leading => diversity_moment(params.alpha(), params.theta(), r, bits)?,
            ApproxLabel::TwoTerm => theorem31_approx(params, r, bits)?,
            ApproxLabel::JointThreeTerm => kle_normalized_approx(params, r, bits)?,
            ApproxLabel::JointRefined => mth_a_normalized_approx(params, r, bits)?,
        };
        let residual = Float::with_val(bits, approx.value() - &normalized);
        approximations.push(Approximation {
            label,
            scaling,
            normalized: ApproxScalar::new(normalized),
            approx,
            residual: ApproxScalar::new(residual),
        });
    }
    Ok(MomentReport {
        r,
        params: params.clone(),
        exact,
        approximations,
    })
}
