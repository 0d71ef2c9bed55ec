use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::numfmt::sig17;

/// Sample mean, unbiased variance and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Summary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let count = samples.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        Self {
            count,
            mean,
            variance,
            std_error: (variance / count as f64).sqrt(),
        }
    }
}

/// One Monte Carlo observation as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial_id: usize,
    pub n: usize,
    pub statistic: String,
    pub value: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Writes `trial_id,n,statistic,value,seed,stream` rows.
pub fn write_trial_csv<W: Write>(mut out: W, rows: &[TrialRow]) -> std::io::Result<()> {
    writeln!(out, "trial_id,n,statistic,value,seed,stream")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.trial_id,
            r.n,
            r.statistic,
            sig17(r.value),
            r.seed,
            r.stream
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_small_sample() {
        let s = Summary::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::from_samples(&[7.0]).variance, 0.0);
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        let row = TrialRow {
            trial_id: 0,
            n: 3,
            statistic: "C".into(),
            value: 12.0,
            seed: 1,
            stream: 5,
        };
        write_trial_csv(&mut buf, &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "trial_id,n,statistic,value,seed,stream\n0,3,C,1.2000000000000000e1,1,5\n"
        );
    }
}
