//! Adaptive Gauss–Kronrod (7/15) integration in `f64`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::domain("integrate", format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest
/// error estimate until the total estimate meets the tolerance.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_ref(&mut f, a, b, opts)
}

fn integrate_ref<F>(f: &mut F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::domain("integrate", format!("bad interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(f, a, b)?;
    let mut evaluations = 15;
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    let mut splits = 0;
    while error > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if splits >= opts.max_subdivisions {
            return Err(Error::NonConvergent {
                context: format!("integrate on [{a}, {b}], error estimate {error:e}"),
                terms: splits,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        evaluations += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        splits += 1;
    }
    // resum to shed the drift of the running updates
    let value = heap.iter().map(|s| s.value).sum();
    let error_estimate = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        error_estimate,
        evaluations,
    })
}

/// Integrates `f` over `[0, inf)` on the panels `[0, 1], [1, 2], [2, 4], ...`.
///
/// Before a panel `[a, 2a]` is opened the integrand is sampled at `a`; the
/// loop ends once `a f(a)` is below `rel_tol / 1000` of the running total and
/// `f` is falling, so `f` must be eventually decreasing.
pub fn integrate_half_line<F>(mut f: F, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_PANELS: u32 = 60;
    let mut total = integrate_ref(&mut f, 0.0, 1.0, opts)?;
    let mut prev = f(1.0)?;
    let mut a = 1.0;
    for _ in 0..MAX_PANELS {
        let fa = if a == 1.0 { prev } else { f(a)? };
        let negligible = (a * fa).abs() <= 1e-3 * opts.rel_tol * total.value.abs();
        if negligible && fa.abs() <= prev.abs() && a > 1.0 {
            total.evaluations += 1;
            return Ok(total);
        }
        prev = fa;
        let panel = integrate_ref(&mut f, a, 2.0 * a, opts)?;
        total.value += panel.value;
        total.error_estimate += panel.error_estimate;
        total.evaluations += panel.evaluations + 1;
        a *= 2.0;
    }
    Err(Error::NonConvergent {
        context: "integrate_half_line: integrand not negligible".into(),
        terms: MAX_PANELS as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| Ok(x * x * x - 2.0 * x), 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-14);
        let r = integrate(|x| Ok(x.powi(6)), -1.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_and_singular() {
        let r = integrate(|x| Ok(x.sin()), 0.0, std::f64::consts::PI, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = integrate(|x| Ok(1.0 / x.sqrt()), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn half_line_gaussian_and_gamma() {
        let r = integrate_half_line(|x| Ok((-x * x).exp()), QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        let r = integrate_half_line(|x| Ok(x.powi(3) * (-x).exp()), QuadOptions::default()).unwrap();
        assert!((r.value - 6.0).abs() < 1e-9);
    }

    #[test]
    fn errors_propagate() {
        assert!(integrate(|_| Ok(1.0), 1.0, 0.0, QuadOptions::default()).is_err());
        let failing = integrate(
            |x| if x > 0.5 { Err(Error::domain("f", "boom")) } else { Ok(x) },
            0.0,
            1.0,
            QuadOptions::default(),
        );
        assert!(failing.is_err());
        let tight = QuadOptions {
            max_subdivisions: 1,
            rel_tol: 1e-15,
            abs_tol: 0.0,
        };
        assert!(matches!(
            integrate(|x| Ok((1.0 / (x + 1e-9)).sin()), 0.0, 1.0, tight),
            Err(Error::NonConvergent { .. })
        ));
    }
}
