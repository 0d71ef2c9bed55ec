use serde::{Deserialize, Serialize};

/// Confidence level of the Dvoretzky–Kiefer–Wolfowitz band.
pub const DKW_CONFIDENCE: f64 = 0.99;

/// Empirical survival against `exp(−t / (e m*))` at one decile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub quantile: f64,
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub points: Vec<TailPoint>,
    /// Half-width of the DKW band for the sample size.
    pub band: f64,
    /// `max (empirical − bound)` over the deciles; negative when the bound holds with room.
    pub max_excess: f64,
    /// Some decile exceeds `bound + band`.
    pub violated: bool,
}

/// Compares the empirical survival `P(T > t)` of `samples` to the meeting
/// time tail bound `exp(−t / (e m*))` at the sample deciles.
pub fn tail_profile(samples: &[u64], m_star: f64) -> TailReport {
    assert!(!samples.is_empty(), "tail profile needs samples");
    assert!(m_star > 0.0, "m* must be positive");
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let count = sorted.len() as f64;
    let band = ((2.0 / (1.0 - DKW_CONFIDENCE)).ln() / (2.0 * count)).sqrt();

    let points: Vec<TailPoint> = (1..=9)
        .map(|k| {
            let quantile = k as f64 / 10.0;
            let index = ((quantile * count).ceil() as usize).clamp(1, sorted.len()) - 1;
            let t = sorted[index];
            let above = sorted.len() - sorted.partition_point(|&x| x <= t);
            let t = t as f64;
            TailPoint {
                quantile,
                t,
                empirical: above as f64 / count,
                bound: (-t / (std::f64::consts::E * m_star)).exp(),
            }
        })
        .collect();
    let max_excess = points
        .iter()
        .map(|p| p.empirical - p.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    TailReport {
        violated: max_excess > band,
        points,
        band,
        max_excess,
    }
}
