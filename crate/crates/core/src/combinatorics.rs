//! Stirling numbers of the second kind, Carlitz's weighted Stirling numbers,
//! the generalized Stirling numbers `c(n, k, alpha)` and enumeration of the
//! integer partitions of `n` in component-count form.

use std::fmt;
use std::io::Write;

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::{format_float, Field, Number};

/// Default bound on `n` for [`enumerate_partitions`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 40;
/// Largest `n` for which the C-number table is built in rationals.
pub const EXACT_TABLE_CAP: u64 = 200;

/// `S2(r, i)` by the triangular recurrence; zero when `i > r`.
pub fn stirling2(r: u32, i: u32) -> Integer {
    if i > r {
        return Integer::new();
    }
    // row[j] holds S2(m, j) for the current m
    let mut row = vec![Integer::new(); (i + 1) as usize];
    row[0] = Integer::from(1);
    for m in 1..=r {
        let top = i.min(m) as usize;
        for j in (1..=top).rev() {
            let prev = row[j - 1].clone();
            row[j] *= j as u32;
            row[j] += prev;
        }
        row[0] = Integer::new();
    }
    row[i as usize].clone()
}

/// Weighted Stirling number `R(r, i, lambda) = sum_j C(r, j) lambda^j S2(r - j, i)`.
pub fn weighted_stirling_r<T: Field>(r: u32, i: u32, lambda: &T) -> T {
    let mut acc = lambda.zero_like();
    if i > r {
        return acc;
    }
    let mut lambda_pow = lambda.one_like();
    for j in 0..=(r - i) {
        let s2 = stirling2(r - j, i);
        if s2 != 0 {
            let binom = Integer::from(Integer::binomial_u(r, j));
            let coeff = lambda.from_integer_like(&(binom * s2));
            acc = acc.add_ref(&coeff.mul_ref(&lambda_pow));
        }
        lambda_pow = lambda_pow.mul_ref(lambda);
    }
    acc
}

/// Component counts `(c_1, ..., c_n)` of an integer partition of `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartitionCounts {
    counts: Vec<u64>,
}

impl PartitionCounts {
    /// Validates `sum_i i c_i = n` where `n = counts.len()`.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::domain("PartitionCounts", "n must be at least 1"));
        }
        let total: u64 = counts
            .iter()
            .enumerate()
            .map(|(idx, &c)| (idx as u64 + 1) * c)
            .sum();
        if total != counts.len() as u64 {
            return Err(Error::domain(
                "PartitionCounts",
                format!("sum of i * c_i is {total}, expected {}", counts.len()),
            ));
        }
        Ok(PartitionCounts { counts })
    }

    pub(crate) fn from_counts_unchecked(counts: Vec<u64>) -> Self {
        PartitionCounts { counts }
    }

    pub fn n(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Number of parts `K = sum_i c_i`.
    pub fn length(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `c_i` for `i = 1..=n`.
    pub fn count(&self, size: usize) -> u64 {
        self.counts.get(size.wrapping_sub(1)).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl fmt::Display for PartitionCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (idx, c) in self.counts.iter().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Every element of the partition set of `n`, each exactly once, ordered by
/// count vector in descending lexicographic order (all singletons first).
pub fn enumerate_partitions(n: u64) -> Result<Vec<PartitionCounts>> {
    enumerate_partitions_capped(n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_partitions_capped(n: u64, cap: u64) -> Result<Vec<PartitionCounts>> {
    if n == 0 {
        return Err(Error::domain("enumerate_partitions", "n must be positive"));
    }
    if n > cap {
        return Err(Error::CapExceeded {
            what: "partition enumeration",
            n,
            cap,
            hint: "; raise the cap explicitly if the runtime is acceptable",
        });
    }
    let n = n as usize;
    let mut out = Vec::new();
    let mut counts = vec![0u64; n];
    fill(1, n, &mut counts, &mut out);
    Ok(out)
}

fn fill(size: usize, remaining: usize, counts: &mut Vec<u64>, out: &mut Vec<PartitionCounts>) {
    let n = counts.len();
    if remaining == 0 {
        out.push(PartitionCounts::from_counts_unchecked(counts.clone()));
        return;
    }
    if size > n {
        return;
    }
    for c in (0..=remaining / size).rev() {
        let rest = remaining - c * size;
        // the larger sizes must be able to absorb what is left
        if rest != 0 && rest <= size {
            continue;
        }
        counts[size - 1] = c as u64;
        fill(size + 1, rest, counts, out);
    }
    counts[size - 1] = 0;
}

#[derive(Clone, Debug)]
enum Storage {
    Exact(Vec<Vec<Rational>>),
    /// Natural logs of the entries.
    Log(Vec<Vec<Float>>),
}

/// Triangular table of `c(n, k, alpha)` for `1 <= k <= n <= n_max`.
///
/// Built from `c(n+1, k) = (n - k alpha) c(n, k) + alpha c(n, k-1)` with
/// `c(1, 1) = alpha`. Every term is nonnegative, so the log-scaled form
/// accumulates without cancellation.
#[derive(Clone, Debug)]
pub struct CNumberTable {
    n_max: u64,
    alpha: Number,
    storage: Storage,
}

fn check_alpha_open_unit<T: Field>(alpha: &T) -> Result<()> {
    let one = alpha.one_like();
    if alpha.sign() != std::cmp::Ordering::Greater
        || one.sub_ref(alpha).sign() != std::cmp::Ordering::Greater
    {
        return Err(Error::domain("CNumberTable", "alpha must lie in (0, 1)"));
    }
    Ok(())
}

impl CNumberTable {
    /// Rational table, capped at [`EXACT_TABLE_CAP`] rows.
    pub fn exact(alpha: &Rational, n_max: u64) -> Result<Self> {
        check_alpha_open_unit(alpha)?;
        if n_max == 0 {
            return Err(Error::domain("CNumberTable", "n_max must be positive"));
        }
        if n_max > EXACT_TABLE_CAP {
            return Err(Error::CapExceeded {
                what: "exact C-number table",
                n: n_max,
                cap: EXACT_TABLE_CAP,
                hint: "; use floating mode for larger n",
            });
        }
        let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(n_max as usize);
        rows.push(vec![alpha.clone()]);
        for m in 1..n_max {
            let prev = &rows[m as usize - 1];
            let mut next = Vec::with_capacity(m as usize + 1);
            for k in 1..=m + 1 {
                let mut v = Rational::new();
                if k <= m {
                    let w = Rational::from(m) - Rational::from(alpha * k);
                    v += w * &prev[k as usize - 1];
                }
                if k >= 2 {
                    v += Rational::from(alpha * &prev[k as usize - 2]);
                }
                next.push(v);
            }
            rows.push(next);
        }
        Ok(CNumberTable {
            n_max,
            alpha: Number::exact(alpha.clone()),
            storage: Storage::Exact(rows),
        })
    }

    /// Log-scaled table at the precision of `alpha`.
    pub fn log_scaled(alpha: &Float, n_max: u64) -> Result<Self> {
        check_alpha_open_unit(alpha)?;
        if n_max == 0 {
            return Err(Error::domain("CNumberTable", "n_max must be positive"));
        }
        let p = alpha.prec();
        let ln_alpha = Float::with_val(p, alpha.ln_ref());
        let mut rows: Vec<Vec<Float>> = Vec::with_capacity(n_max as usize);
        rows.push(vec![ln_alpha.clone()]);
        for m in 1..n_max {
            let prev = &rows[m as usize - 1];
            let mut next = Vec::with_capacity(m as usize + 1);
            for k in 1..=m + 1 {
                let stay = (k <= m).then(|| {
                    let w = Float::with_val(p, m) - Float::with_val(p, alpha * k);
                    w.ln() + &prev[k as usize - 1]
                });
                let open = (k >= 2).then(|| Float::with_val(p, &ln_alpha + &prev[k as usize - 2]));
                next.push(match (stay, open) {
                    (Some(a), Some(b)) => log_add_exp(&a, &b),
                    (Some(a), None) => a,
                    (None, Some(b)) => b,
                    (None, None) => unreachable!("k ranges over 1..=m+1"),
                });
            }
            rows.push(next);
        }
        Ok(CNumberTable {
            n_max,
            alpha: Number::approx(alpha.clone()),
            storage: Storage::Log(rows),
        })
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn alpha(&self) -> &Number {
        &self.alpha
    }

    pub fn is_log_scaled(&self) -> bool {
        matches!(self.storage, Storage::Log(_))
    }

    fn check_index(&self, n: u64, k: u64) -> Result<()> {
        if n == 0 || n > self.n_max {
            return Err(Error::domain(
                "gen_stirling_c",
                format!("n = {n} outside 1..={}", self.n_max),
            ));
        }
        if k == 0 || k > n {
            return Err(Error::domain("gen_stirling_c", format!("k = {k} outside 1..={n}")));
        }
        Ok(())
    }

    /// `c(n, k, alpha)`; exact for exact tables.
    pub fn get(&self, n: u64, k: u64) -> Result<Number> {
        self.check_index(n, k)?;
        let (r, c) = ((n - 1) as usize, (k - 1) as usize);
        Ok(match &self.storage {
            Storage::Exact(rows) => Number::exact(rows[r][c].clone()),
            Storage::Log(rows) => Number::approx(Float::with_val(rows[r][c].prec(), rows[r][c].exp_ref())),
        })
    }

    /// `ln c(n, k, alpha)`, at `bits` for exact tables.
    pub fn ln_value(&self, n: u64, k: u64, bits: u32) -> Result<Float> {
        self.check_index(n, k)?;
        let (r, c) = ((n - 1) as usize, (k - 1) as usize);
        Ok(match &self.storage {
            Storage::Exact(rows) => Float::with_val(bits, &rows[r][c]).ln(),
            Storage::Log(rows) => rows[r][c].clone(),
        })
    }

    /// Debug dump with columns `n,k,value,log_space`; log tables write logs.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,k,value,log_space")?;
        for n in 1..=self.n_max {
            for k in 1..=n {
                let (r, c) = ((n - 1) as usize, (k - 1) as usize);
                match &self.storage {
                    Storage::Exact(rows) => writeln!(out, "{n},{k},{},false", rows[r][c])?,
                    Storage::Log(rows) => {
                        writeln!(out, "{n},{k},{},true", format_float(&rows[r][c]))?
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn log_add_exp(a: &Float, b: &Float) -> Float {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let p = a.prec().max(b.prec());
    let d = Float::with_val(p, lo - hi).exp();
    Float::with_val(p, hi + d.ln_1p())
}

/// `c(n, k, alpha)` as a single value; exact when `alpha` is rational and
/// `n` is within [`EXACT_TABLE_CAP`], log-scaled otherwise at `bits`.
pub fn gen_stirling_c(n: u64, k: u64, alpha: &Number, bits: u32) -> Result<Number> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::domain(
            "gen_stirling_c",
            format!("requires 1 <= k <= n, got n = {n}, k = {k}"),
        ));
    }
    let table = match alpha {
        Number::Exact(a) if n <= EXACT_TABLE_CAP => CNumberTable::exact(a.as_rational(), n)?,
        _ => CNumberTable::log_scaled(&alpha.to_float(bits), n)?,
    };
    table.get(n, k)
}
