use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PitmanParams;
use crate::scalar::{ExactScalar, Number};

/// How `theta` moves along a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    FixedTheta { theta: ExactScalar },
    /// `theta = n^beta`
    Joint { beta: ExactScalar },
}

/// Conditions for the strengthened joint regime, with `theta = n^beta`.
///
/// Substituting `theta = n^beta` turns each limit into a power of `n`:
/// `theta -> inf` needs `beta > 0`, `theta / n -> 0` needs `beta < 1`,
/// `theta^(2 alpha + 1) / n^(2 alpha) = n^(beta (2 alpha + 1) - 2 alpha) -> 0`
/// needs `beta (2 alpha + 1) < 2 alpha`, and `theta^2 / n = n^(2 beta - 1) -> 0`
/// needs `beta < 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrFeasibility {
    pub alpha: ExactScalar,
    pub beta: ExactScalar,
    pub conditions: Vec<(String, bool)>,
    pub feasible: bool,
}

impl CrFeasibility {
    pub fn check(alpha: &ExactScalar, beta: &ExactScalar) -> Self {
        let a = alpha.as_rational();
        let b = beta.as_rational();
        let lhs = Rational::from(b * (Rational::from(a * 2u32) + 1u32));
        let rhs = Rational::from(a * 2u32);
        let half = Rational::from((1, 2));
        let conditions = vec![
            ("beta > 0".to_string(), *b > 0),
            ("beta < 1".to_string(), *b < 1),
            (format!("beta (2 alpha + 1) < 2 alpha ({lhs} < {rhs})"), lhs < rhs),
            ("2 beta < 1".to_string(), *b < half),
        ];
        let feasible = conditions.iter().all(|(_, ok)| *ok);
        CrFeasibility {
            alpha: alpha.clone(),
            beta: beta.clone(),
            conditions,
            feasible,
        }
    }

    pub fn violated(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimePoint {
    pub n: u64,
    pub theta: Number,
}

/// A sequence of `(n, theta)` along which a limit is taken.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimePath {
    pub kind: RegimeKind,
    pub points: Vec<RegimePoint>,
    /// Present when the path was validated against the strengthened regime.
    pub cr: Option<CrFeasibility>,
}

impl RegimePath {
    pub fn fixed_theta(theta: ExactScalar, n_grid: &[u64]) -> Result<Self> {
        if *theta.as_rational() <= 0 {
            return Err(Error::domain("regime_path", format!("theta must be positive, got {theta}")));
        }
        check_grid(n_grid)?;
        let points = n_grid
            .iter()
            .map(|&n| RegimePoint {
                n,
                theta: Number::Exact(theta.clone()),
            })
            .collect();
        Ok(RegimePath {
            kind: RegimeKind::FixedTheta { theta },
            points,
            cr: None,
        })
    }

    pub fn beta(&self) -> Option<&ExactScalar> {
        match &self.kind {
            RegimeKind::Joint { beta } => Some(beta),
            RegimeKind::FixedTheta { .. } => None,
        }
    }

    pub fn is_cr(&self) -> bool {
        self.cr.as_ref().is_some_and(|c| c.feasible)
    }

    pub fn params(&self, alpha: &Number) -> Result<Vec<PitmanParams>> {
        self.points
            .iter()
            .map(|pt| PitmanParams::new(pt.n, alpha.clone(), pt.theta.clone()))
            .collect()
    }
}

fn check_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::domain("regime_path", "empty n grid"));
    }
    if n_grid[0] == 0 {
        return Err(Error::domain("regime_path", "n must be positive"));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("regime_path", "n grid must be strictly increasing"));
    }
    Ok(())
}

/// `n^beta`, kept exact when it is an integer.
fn power_theta(n: u64, beta: &Rational) -> Number {
    let (num, den) = (beta.numer(), beta.denom());
    if let (Some(p), Some(q)) = (num.to_u32(), den.to_u32()) {
        let target = Integer::from(n).pow(p);
        let (root, rem) = target.clone().root_rem(Integer::new(), q);
        if rem.is_zero() {
            return Number::exact(Rational::from(root));
        }
    }
    let bits = 256;
    let b = Float::with_val(bits, beta);
    Number::approx(Float::with_val(bits, n).pow(b))
}

/// Builds a path over `n_grid`: `beta = 0` gives fixed `theta = 1`,
/// `0 < beta < 1` gives `theta = n^beta`. With `cr_alpha` set, the path must
/// also satisfy the strengthened-regime conditions for that `alpha`.
pub fn regime_path(beta: &ExactScalar, n_grid: &[u64], cr_alpha: Option<&ExactScalar>) -> Result<RegimePath> {
    let b = beta.as_rational();
    if *b < 0 || *b >= 1 {
        return Err(Error::Infeasible(format!(
            "beta = {beta} violates 0 <= beta < 1 (theta / n -> 0)"
        )));
    }
    let cr = match cr_alpha {
        Some(alpha) => {
            let report = CrFeasibility::check(alpha, beta);
            if !report.feasible {
                return Err(Error::Infeasible(format!(
                    "alpha = {alpha}, beta = {beta} violates {}",
                    report.violated().join(" and ")
                )));
            }
            Some(report)
        }
        None => None,
    };
    if b.is_zero() {
        let mut path = RegimePath::fixed_theta(ExactScalar::from(1), n_grid)?;
        path.cr = cr;
        return Ok(path);
    }
    check_grid(n_grid)?;
    let points = n_grid
        .iter()
        .map(|&n| RegimePoint {
            n,
            theta: power_theta(n, b),
        })
        .collect();
    Ok(RegimePath {
        kind: RegimeKind::Joint { beta: beta.clone() },
        points,
        cr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> ExactScalar {
        s.parse().unwrap()
    }

    #[test]
    fn cr_feasibility_examples() {
        assert!(CrFeasibility::check(&e("1/2"), &e("1/4")).feasible);
        assert!(CrFeasibility::check(&e("1/2"), &e("1/5")).feasible);
        let bad = CrFeasibility::check(&e("1/2"), &e("1/2"));
        assert!(!bad.feasible);
        assert_eq!(bad.violated(), ["beta (2 alpha + 1) < 2 alpha (1 < 1)", "2 beta < 1"]);
        // small alpha makes the first strengthened condition bind
        let small = CrFeasibility::check(&e("1/10"), &e("1/4"));
        assert!(!small.feasible);
        assert_eq!(small.violated().len(), 1);
    }

    #[test]
    fn paths() {
        let grid = [16u64, 256, 4096, 5000];
        let path = regime_path(&e("1/4"), &grid, Some(&e("1/2"))).unwrap();
        assert!(path.is_cr());
        assert_eq!(path.points[0].theta.to_string(), "2");
        assert_eq!(path.points[2].theta.to_string(), "8");
        assert!(!path.points[3].theta.is_exact());
        assert!((path.points[3].theta.to_f64() - 5000f64.powf(0.25)).abs() < 1e-12);
        let fixed = regime_path(&e("0"), &grid, None).unwrap();
        assert!(matches!(fixed.kind, RegimeKind::FixedTheta { .. }));
        assert!(fixed.points.iter().all(|p| p.theta.to_string() == "1"));
        let err = regime_path(&e("1/2"), &grid, Some(&e("1/2"))).unwrap_err();
        assert!(err.to_string().contains("2 beta < 1"));
        assert!(regime_path(&e("1"), &grid, None).is_err());
        assert!(regime_path(&e("1/4"), &[4, 4], None).is_err());
        assert_eq!(path.params(&Number::Exact(e("1/2"))).unwrap().len(), 4);
    }
}
