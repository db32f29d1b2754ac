use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{regime_path, RegimePath};
use crate::error::{Error, Result};
use crate::scalar::{ExactScalar, DEFAULT_PRECISION_BITS, MIN_PRECISION_BITS};

/// Environment variable that replaces the default working precision.
pub const PRECISION_ENV: &str = "PITMAN_PRECISION_BITS";

/// `PITMAN_PRECISION_BITS` when set to a valid bit count, else 128.
pub fn default_precision_bits() -> u32 {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .filter(|&b| b >= MIN_PRECISION_BITS)
        .unwrap_or(DEFAULT_PRECISION_BITS)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StudyKind {
    #[serde(rename = "thm31")]
    Thm31,
    #[serde(rename = "corrected")]
    Corrected,
    #[serde(rename = "kle")]
    Kle,
    #[serde(rename = "mthA")]
    MthA,
    #[serde(rename = "corollary34")]
    Corollary34,
    #[serde(rename = "z_moments")]
    ZMoments,
    #[serde(rename = "lemma_expansions")]
    LemmaExpansions,
    #[serde(rename = "verify")]
    Verify,
}

impl StudyKind {
    pub const ALL: [StudyKind; 8] = [
        StudyKind::Thm31,
        StudyKind::Corrected,
        StudyKind::Kle,
        StudyKind::MthA,
        StudyKind::Corollary34,
        StudyKind::ZMoments,
        StudyKind::LemmaExpansions,
        StudyKind::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Thm31 => "thm31",
            StudyKind::Corrected => "corrected",
            StudyKind::Kle => "kle",
            StudyKind::MthA => "mthA",
            StudyKind::Corollary34 => "corollary34",
            StudyKind::ZMoments => "z_moments",
            StudyKind::LemmaExpansions => "lemma_expansions",
            StudyKind::Verify => "verify",
        }
    }

    fn is_joint(self) -> bool {
        matches!(
            self,
            StudyKind::Kle | StudyKind::MthA | StudyKind::Corollary34 | StudyKind::ZMoments
        )
    }

    fn is_monte_carlo(self) -> bool {
        matches!(self, StudyKind::Corollary34 | StudyKind::ZMoments)
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse {
                what: "study name",
                input: s.to_string(),
            })
    }
}

/// Sample sizes: `"2^8..2^16"` (powers of two), `"1..10"` (consecutive
/// integers), `"16,256,4096"`, or a JSON list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<u64>),
    Text(String),
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<u64>> {
        match self {
            GridSpec::List(v) => Ok(v.clone()),
            GridSpec::Text(s) => parse_grid(s),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_grid(s)?;
        Ok(GridSpec::Text(s.trim().to_string()))
    }
}

fn parse_grid(s: &str) -> Result<Vec<u64>> {
    let err = || Error::Parse {
        what: "grid",
        input: s.to_string(),
    };
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let pow = |t: &str| -> Option<u32> { t.trim().strip_prefix("2^")?.parse().ok() };
        return match (pow(lo), pow(hi)) {
            (Some(a), Some(b)) if a <= b && b < 64 => Ok((a..=b).map(|e| 1u64 << e).collect()),
            (None, None) => {
                let a: u64 = lo.trim().parse().map_err(|_| err())?;
                let b: u64 = hi.trim().parse().map_err(|_| err())?;
                if a > b {
                    return Err(err());
                }
                Ok((a..=b).collect())
            }
            _ => Err(err()),
        };
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.strip_prefix("2^") {
                Some(e) => e.parse::<u32>().ok().filter(|&e| e < 64).map(|e| 1u64 << e),
                None => t.parse().ok(),
            }
            .ok_or_else(err)
        })
        .collect()
}

/// How `theta` depends on `n`: fixed `theta`, or `theta = n^beta` when
/// `beta > 0`. `cr` asks for the strengthened joint regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    #[serde(default)]
    pub theta: Option<ExactScalar>,
    #[serde(default = "zero")]
    pub beta: ExactScalar,
    #[serde(default)]
    pub cr: bool,
}

fn zero() -> ExactScalar {
    ExactScalar::from(0)
}

impl PathSpec {
    pub fn fixed(theta: ExactScalar) -> Self {
        PathSpec {
            theta: Some(theta),
            beta: zero(),
            cr: false,
        }
    }

    pub fn joint(beta: ExactScalar, cr: bool) -> Self {
        PathSpec {
            theta: None,
            beta,
            cr,
        }
    }
}

fn default_r_values() -> Vec<u32> {
    vec![1]
}

fn default_tail() -> usize {
    6
}

fn default_replicates() -> u64 {
    10_000
}

/// Everything a study needs; serialised as the JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub alpha: ExactScalar,
    #[serde(default = "default_r_values")]
    pub r_values: Vec<u32>,
    pub path: PathSpec,
    pub grid: GridSpec,
    #[serde(default = "default_precision_bits")]
    pub precision_bits: u32,
    /// Series tolerance; unused by the current studies but recorded.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_tail")]
    pub tail: usize,
    /// Extra `alpha` values for the verify study.
    #[serde(default)]
    pub alphas: Vec<ExactScalar>,
    /// Base path; the study writes `<base>.csv` and `<base>.json`.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(study: StudyKind, alpha: ExactScalar, path: PathSpec, grid: GridSpec) -> Self {
        StudyConfig {
            study,
            alpha,
            r_values: default_r_values(),
            path,
            grid,
            precision_bits: default_precision_bits(),
            tol: None,
            seed: 0,
            replicates: default_replicates(),
            tail: default_tail(),
            alphas: Vec::new(),
            output_path: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "study config",
            input: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks the study-specific requirements and builds the regime path.
    pub fn validate(&self) -> Result<RegimePath> {
        let a = self.alpha.as_rational();
        if !(*a > 0 && *a < 1) {
            return Err(Error::domain("study config", format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.precision_bits < MIN_PRECISION_BITS {
            return Err(Error::domain(
                "study config",
                format!("precision_bits must be at least {MIN_PRECISION_BITS}"),
            ));
        }
        if self.r_values.is_empty() || self.r_values.contains(&0) {
            return Err(Error::domain("study config", "r_values must be nonempty and positive"));
        }
        if self.tail < 3 {
            return Err(Error::domain("study config", "tail must be at least 3"));
        }
        if self.study.is_monte_carlo() && self.replicates < 2 {
            return Err(Error::domain("study config", "replicates must be at least 2"));
        }
        let grid = self.grid.points()?;
        let beta = &self.path.beta;
        let is_joint = *beta.as_rational() > 0;
        if self.study.is_joint() {
            if !is_joint {
                return Err(Error::Infeasible(format!(
                    "{} needs a joint path (beta > 0)",
                    self.study
                )));
            }
            if self.study == StudyKind::ZMoments && !self.path.cr {
                return Err(Error::Infeasible(
                    "z_moments needs a path flagged for the strengthened regime (cr = true)".into(),
                ));
            }
        }
        match self.study {
            StudyKind::Thm31 | StudyKind::Corrected => {
                let theta = self.path.theta.clone().ok_or_else(|| {
                    Error::Infeasible(format!("{} needs a fixed theta", self.study))
                })?;
                if is_joint {
                    return Err(Error::Infeasible(format!("{} runs on a fixed-theta path", self.study)));
                }
                let t = theta.as_rational();
                if *t <= 0 {
                    return Err(Error::Infeasible(format!(
                        "{} needs theta > 0 on the path, got {theta}",
                        self.study
                    )));
                }
                RegimePath::fixed_theta(theta, &grid)
            }
            StudyKind::Verify | StudyKind::LemmaExpansions => {
                let theta = self.path.theta.clone().unwrap_or_else(|| ExactScalar::from(10));
                RegimePath::fixed_theta(theta, &grid)
            }
            _ => {
                let cr_alpha = self.path.cr.then_some(&self.alpha);
                regime_path(beta, &grid, cr_alpha)
            }
        }
    }
}
