use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares slope of `ln y` against `ln x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Fits `ln y = a + b ln x` over the last `tail` points and returns `b`
/// with its standard error.
pub fn fit_slope(points: &[(f64, f64)], tail: usize) -> Result<SlopeFit> {
    if tail < 3 {
        return Err(Error::domain("fit_slope", "need a tail of at least 3 points"));
    }
    if points.len() < tail {
        return Err(Error::domain(
            "fit_slope",
            format!("tail of {tail} requested from {} points", points.len()),
        ));
    }
    let used = &points[points.len() - tail..];
    if let Some((x, y)) = used.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::domain(
            "fit_slope",
            format!("points must be positive and finite, got ({x}, {y})"),
        ));
    }
    let m = tail as f64;
    let lx: Vec<f64> = used.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<f64> = used.iter().map(|(_, y)| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_slope", "x values must not all coincide"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        stderr,
        points: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..6).map(|j| 2f64.powi(8 + j)).map(|x| (x, f(x))).collect()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_slope(&grid(|x| 1.0 / x), 6).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        let fit = fit_slope(&grid(|x| 7.0 / x.sqrt()), 6).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let fit = fit_slope(&grid(|x| (1.0 + 0.01 * x.sin()) / x), 6).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05);
        assert!(fit.stderr > 0.0);
    }

    #[test]
    fn uses_only_the_tail() {
        let mut pts = vec![(1.0, 1e9), (2.0, 1e-9)];
        pts.extend(grid(|x| x * x));
        let fit = fit_slope(&pts, 6).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert_eq!(fit.points, 6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_slope(&grid(|x| x), 2).is_err());
        assert!(fit_slope(&grid(|x| x), 7).is_err());
        assert!(fit_slope(&grid(|x| x - 256.0), 6).is_err());
        assert!(fit_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], 3).is_err());
    }
}
