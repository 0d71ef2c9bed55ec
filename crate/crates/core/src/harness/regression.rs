use serde::{Deserialize, Serialize};

use super::sweep::SweepRecord;
use crate::error::{Error, Result};

/// Fewest points accepted by [`estimate_exponent`].
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares slope of `log(value)` against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub quantity: String,
    pub slope: f64,
    pub stderr: f64,
    pub n_window: [usize; 2],
    pub points: usize,
}

/// Ordinary least squares of `ys` on `xs`; returns `(slope, stderr of slope)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if xs.len() > 2 {
        let intercept = my - slope * mx;
        let ssr: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, stderr)
}

/// Fits `log_values` against `ns` restricted to `window` (inclusive).
pub fn fit_log_slope(
    quantity: &str,
    ns: &[usize],
    log_values: &[f64],
    window: (usize, usize),
) -> Result<ExponentEstimate> {
    if window.0 > window.1 {
        return Err(Error::Usage(format!("empty window [{}, {}]", window.0, window.1)));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(log_values)
        .filter(|(&n, y)| n >= window.0 && n <= window.1 && y.is_finite())
        .map(|(&n, &y)| (n as f64, y))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            found: xs.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let (slope, stderr) = ols(&xs, &ys);
    Ok(ExponentEstimate {
        quantity: quantity.to_string(),
        slope,
        stderr,
        n_window: [window.0, window.1],
        points: xs.len(),
    })
}

/// Natural log of a sweep quantity for one record, when populated.
pub(crate) fn log_quantity(record: &SweepRecord, quantity: &str) -> Result<Option<f64>> {
    let value = match quantity {
        "delta" => return Ok(Some(record.log_delta_n)),
        "m_star" => record.m_star,
        "m_bar" => record.m_bar,
        "ec_mean" => record.ec_mean,
        other => return Err(Error::Usage(format!("unknown quantity {other:?}"))),
    };
    Ok(value.filter(|v| *v > 0.0).map(f64::ln))
}

/// Slope of `log(quantity)` against `n` over the records inside `n_window`.
pub fn estimate_exponent(
    records: &[SweepRecord],
    quantity: &str,
    n_window: (usize, usize),
) -> Result<ExponentEstimate> {
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    for r in records {
        if let Some(log) = log_quantity(r, quantity)? {
            ns.push(r.n);
            logs.push(log);
        }
    }
    fit_log_slope(quantity, &ns, &logs, n_window)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_has_zero_stderr() {
        let ns: Vec<usize> = (3..=10).collect();
        let logs: Vec<f64> = ns.iter().map(|&n| 2.5f64.ln() + 0.37 * n as f64).collect();
        let fit = fit_log_slope("x", &ns, &logs, (3, 10)).unwrap();
        assert!((fit.slope - 0.37).abs() < 1e-13);
        assert!(fit.stderr < 1e-12);
        assert_eq!(fit.points, 8);
    }

    #[test]
    fn too_few_points() {
        let err = fit_log_slope("x", &[1, 2, 3, 4], &[0.0, 1.0, 2.0, 3.0], (2, 4)).unwrap_err();
        assert!(matches!(err, Error::InsufficientPoints { found: 3, needed: 4 }));
    }

    #[test]
    fn stderr_reflects_noise() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (slope, se) = ols(&xs, &[1.0, 2.1, 2.9, 4.0]);
        assert!((slope - 0.98).abs() < 1e-12);
        assert!(se > 0.0 && se < 0.1);
    }
}
