use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::regression::fit_log_slope;
use crate::chain::MarkovChain;
use crate::error::{Error, Result};
use crate::exact::{meeting_time_table_for, DEFAULT_PRODUCT_CAP};
use crate::montecarlo::{
    run_trials, sample_meeting_times_nested, ChainSampler, CoalescenceSim, DEFAULT_WALKER_CAP,
};
use crate::nblock::log_delta_series;
use crate::spectral::{coalescence_exponent, SpectralSummary, MME_TOL};

/// Settings for [`theorem_report`]; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub seed: u64,
    /// Width of the convergence band around `L`, in nats.
    pub epsilon: f64,
    pub coalescence_ns: Vec<usize>,
    pub coalescence_trials: usize,
    /// Largest allowed fraction of coalescence trials outside the band at the last `n`.
    pub coalescence_ceiling: f64,
    pub meeting_ns: Vec<usize>,
    pub meeting_pairs: usize,
    /// Smallest fraction of trajectory pairs that must fall inside the band at the last `n`.
    pub meeting_fraction: f64,
    pub too_early_bound: f64,
    pub too_late_bound: f64,
    pub delta_window: [usize; 2],
    pub delta_tolerance: f64,
    pub meeting_window: [usize; 2],
    pub meeting_tolerance: f64,
    pub mme_tolerance: f64,
    pub product_cap: usize,
    pub walker_cap: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epsilon: 0.15,
            coalescence_ns: vec![4, 6, 8, 10],
            coalescence_trials: 2000,
            coalescence_ceiling: 0.05,
            meeting_ns: vec![8, 12, 16],
            meeting_pairs: 50,
            meeting_fraction: 0.9,
            too_early_bound: 0.1,
            too_late_bound: 0.1,
            delta_window: [8, 40],
            delta_tolerance: 0.01,
            meeting_window: [4, 8],
            meeting_tolerance: 0.05,
            mme_tolerance: MME_TOL,
            product_cap: DEFAULT_PRODUCT_CAP,
            walker_cap: DEFAULT_WALKER_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not computable within the configured caps.
    Skipped,
}

/// Outcome of one finite-n check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub status: CheckStatus,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Check {
    fn new(id: &str, description: &str) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            status: CheckStatus::Pass,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    fn require(&mut self, ok: bool, note: impl Into<String>) {
        if !ok {
            self.status = CheckStatus::Fail;
            self.notes.push(note.into());
        }
    }

    fn skip(&mut self, note: impl Into<String>) {
        if self.status == CheckStatus::Pass {
            self.status = CheckStatus::Skipped;
        }
        self.notes.push(note.into());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub states: usize,
    pub spectral: SpectralSummary,
    pub config: ReportConfig,
    pub checks: Vec<Check>,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

const COALESCENCE_STREAM_BASE: u64 = 1 << 40;
const MEETING_STREAM_BASE: u64 = 2 << 40;

/// `|slope − target| ≤ tol·|target|`, with an absolute floor for `target = 0`.
fn within_relative(slope: f64, target: f64, tol: f64) -> bool {
    (slope - target).abs() <= tol * target.abs() + 1e-12
}

/// Runs every finite-n check against one chain.
pub fn theorem_report(chain: &MarkovChain, config: &ReportConfig) -> Result<TheoremReport> {
    if config.epsilon <= 0.0 {
        return Err(Error::Usage("epsilon must be positive".into()));
    }
    let spectral = coalescence_exponent_checked(chain, config.mme_tolerance)?;
    let l = spectral.coalescence_exponent;
    let checks = vec![
        coalescence_check(chain, config, l)?,
        trichotomy_check(chain, &spectral, config),
        regression_check(chain, config, l)?,
    ]
    .into_iter()
    .chain(meeting_checks(chain, config, l)?)
    .collect();
    Ok(TheoremReport {
        states: chain.len(),
        spectral,
        config: config.clone(),
        checks,
    })
}

fn coalescence_exponent_checked(chain: &MarkovChain, tol: f64) -> Result<SpectralSummary> {
    if tol == MME_TOL {
        coalescence_exponent(chain)
    } else {
        crate::spectral::coalescence_exponent_with_tol(chain, tol)
    }
}

/// `(1/n) log C_n` concentrates around `L`.
fn coalescence_check(chain: &MarkovChain, config: &ReportConfig, l: f64) -> Result<Check> {
    let mut check = Check::new(
        "coalescence",
        "fraction of coalescence trials with |log(C_n)/n - L| > epsilon is non-increasing in n \
         and below the ceiling at the largest n",
    );
    let mut fractions = Vec::new();
    for &n in &config.coalescence_ns {
        let sim = match CoalescenceSim::new(chain, n, config.walker_cap) {
            Ok(sim) => sim,
            Err(Error::CapExceeded { found, cap, .. }) => {
                check.skip(format!("n={n}: {found} walkers exceed cap {cap}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let stream = COALESCENCE_STREAM_BASE + ((n as u64) << 24);
        let times = run_trials(config.seed, stream, config.coalescence_trials, |_, rng| {
            Ok(sim.run(rng, false)?.coalescence_time)
        })?;
        let outside = times
            .iter()
            .filter(|&&c| ((c as f64).ln() / n as f64 - l).abs() > config.epsilon)
            .count();
        let fraction = outside as f64 / times.len().max(1) as f64;
        check.metric(format!("fraction_outside_n{n}"), fraction);
        fractions.push((n, fraction));
    }
    if check.status == CheckStatus::Skipped || fractions.is_empty() {
        return Ok(check);
    }
    for pair in fractions.windows(2) {
        check.require(
            pair[1].1 <= pair[0].1,
            format!(
                "fraction rose from {} at n={} to {} at n={}",
                pair[0].1, pair[0].0, pair[1].1, pair[1].0
            ),
        );
    }
    let (n_last, last) = *fractions.last().unwrap();
    check.require(
        last <= config.coalescence_ceiling,
        format!("fraction {last} at n={n_last} exceeds ceiling {}", config.coalescence_ceiling),
    );
    Ok(check)
}

/// `0 ≤ L ≤ h`, `L = 0` only for one state, `L = h` exactly for the Parry measure.
fn trichotomy_check(chain: &MarkovChain, s: &SpectralSummary, config: &ReportConfig) -> Check {
    let mut check = Check::new(
        "trichotomy",
        "0 <= L <= h, L = 0 iff |V| = 1, L = h iff the chain is the measure of maximal entropy",
    );
    let (l, h) = (s.coalescence_exponent, s.entropy);
    check.metric("L", l);
    check.metric("h", h);
    check.metric("gap", h - l);
    check.metric("mme_distance", s.mme_distance);
    check.metric("is_mme", if s.is_mme { 1.0 } else { 0.0 });
    check.require(l >= -1e-12, format!("L = {l} is negative"));
    check.require(l <= h + 1e-9, format!("L = {l} exceeds h = {h}"));
    check.require(
        (l == 0.0) == (chain.len() == 1),
        format!("L = {l} with {} states", chain.len()),
    );
    let equal = (l - h).abs() <= config.mme_tolerance;
    check.require(
        s.is_mme == equal,
        format!("is_mme = {} but |L - h| = {}", s.is_mme, (l - h).abs()),
    );
    check
}

/// regression slopes of `log Δ_n`, `log m_n*` and `log m̄_n` against `n`.
fn regression_check(chain: &MarkovChain, config: &ReportConfig, l: f64) -> Result<Check> {
    let mut check = Check::new(
        "exponent_regression",
        "slopes of log(delta_n), log(m_star) and log(m_bar) against n match -L, L and L",
    );
    let [d_lo, d_hi] = config.delta_window;
    let logs = log_delta_series(chain, d_hi);
    let ns: Vec<usize> = (1..=d_hi).collect();
    match fit_log_slope("delta", &ns, &logs, (d_lo, d_hi)) {
        Ok(fit) => {
            check.metric("delta_slope", fit.slope);
            check.require(
                within_relative(fit.slope, -l, config.delta_tolerance),
                format!("delta slope {} vs -L = {}", fit.slope, -l),
            );
        }
        Err(Error::InsufficientPoints { .. }) => check.skip("delta window has too few points"),
        Err(e) => return Err(e),
    }

    let [m_lo, m_hi] = config.meeting_window;
    let mut ns = Vec::new();
    let (mut log_star, mut log_bar) = (Vec::new(), Vec::new());
    for n in m_lo..=m_hi {
        match meeting_time_table_for(chain, n, config.product_cap) {
            Ok(t) => {
                ns.push(n);
                log_star.push(t.m_star.ln());
                log_bar.push(t.m_bar.ln());
            }
            Err(Error::CapExceeded { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    for (name, logs) in [("m_star", &log_star), ("m_bar", &log_bar)] {
        match fit_log_slope(name, &ns, logs, (m_lo, m_hi)) {
            Ok(fit) => {
                check.metric(format!("{name}_slope"), fit.slope);
                check.require(
                    within_relative(fit.slope, l, config.meeting_tolerance),
                    format!("{name} slope {} vs L = {l}", fit.slope),
                );
            }
            Err(Error::InsufficientPoints { found, .. }) => {
                check.skip(format!("{name}: only {found} exact tables within the product cap"))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(check)
}

/// Meeting-time concentration and the too-early / too-late frequencies, all from the same stationary
/// trajectory pairs.
fn meeting_checks(chain: &MarkovChain, config: &ReportConfig, l: f64) -> Result<Vec<Check>> {
    let mut concentration = Check::new(
        "meeting_concentration",
        "log(M_n)/n lies within epsilon of L for the required fraction of stationary \
         trajectory pairs at the largest n",
    );
    let mut early = Check::new("too_early", "frequency of M_n < exp(n (L - epsilon)) at the largest n");
    let mut late = Check::new("too_late", "frequency of log(M_n)/n > L + epsilon at the largest n");
    let mut ns = config.meeting_ns.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || config.meeting_pairs == 0 {
        for c in [&mut concentration, &mut early, &mut late] {
            c.skip("no meeting-time grid configured");
        }
        return Ok(vec![concentration, early, late]);
    }

    let sampler = ChainSampler::new(chain);
    let samples = run_trials(config.seed, MEETING_STREAM_BASE, config.meeting_pairs, |_, rng| {
        sample_meeting_times_nested(&sampler, &ns, rng)
    })?;
    let pairs = samples.len() as f64;
    for (i, &n) in ns.iter().enumerate() {
        let rates: Vec<f64> = samples.iter().map(|m| (m[i] as f64).ln() / n as f64).collect();
        let inside = rates.iter().filter(|r| (*r - l).abs() <= config.epsilon).count() as f64;
        let below = rates.iter().filter(|r| **r < l - config.epsilon).count() as f64;
        let above = rates.iter().filter(|r| **r > l + config.epsilon).count() as f64;
        concentration.metric(format!("fraction_inside_n{n}"), inside / pairs);
        early.metric(format!("frequency_n{n}"), below / pairs);
        late.metric(format!("frequency_n{n}"), above / pairs);
    }
    let n_max = *ns.last().unwrap();
    let inside = concentration.metrics[&format!("fraction_inside_n{n_max}")];
    concentration.require(
        inside >= config.meeting_fraction,
        format!("only {inside} of pairs inside the band at n={n_max}"),
    );
    let e = early.metrics[&format!("frequency_n{n_max}")];
    early.require(e <= config.too_early_bound, format!("{e} above bound {}", config.too_early_bound));
    let t = late.metrics[&format!("frequency_n{n_max}")];
    late.require(t <= config.too_late_bound, format!("{t} above bound {}", config.too_late_bound));
    Ok(vec![concentration, early, late])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(rows: &[&[f64]]) -> MarkovChain {
        MarkovChain::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn quick() -> ReportConfig {
        ReportConfig {
            coalescence_ns: vec![2, 3, 4],
            coalescence_trials: 50,
            meeting_ns: vec![2, 4],
            meeting_pairs: 20,
            ..ReportConfig::default()
        }
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let c: ReportConfig = serde_json::from_str(r#"{"seed": 9, "epsilon": 0.2}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.coalescence_ns, vec![4, 6, 8, 10]);
        assert!(serde_json::from_str::<ReportConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn single_state_report_passes() {
        let report = theorem_report(&chain(&[&[1.0]]), &quick()).unwrap();
        assert!(report.passed(), "{report:#?}");
        assert_eq!(report.spectral.coalescence_exponent, 0.0);
    }

    #[test]
    fn golden_mean_trichotomy() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let c = chain(&[&[1.0 / phi, 1.0 / (phi * phi)], &[1.0, 0.0]]);
        let report = theorem_report(&c, &quick()).unwrap();
        let tri = report.check("trichotomy").unwrap();
        assert_eq!(tri.status, CheckStatus::Pass);
        assert_eq!(tri.metrics["is_mme"], 1.0);
        assert!(tri.metrics["gap"].abs() <= 1e-9);
    }

    #[test]
    fn biased_gap() {
        let c = chain(&[&[0.75, 0.25], &[0.75, 0.25]]);
        let report = theorem_report(&c, &quick()).unwrap();
        let tri = report.check("trichotomy").unwrap();
        assert_eq!(tri.status, CheckStatus::Pass);
        assert!((tri.metrics["gap"] - (0.5623351446188083 - 0.47000362924573563)).abs() <= 1e-9);
    }

    #[test]
    fn report_is_deterministic() {
        let c = chain(&[&[0.6, 0.4], &[0.3, 0.7]]);
        let a = crate::numfmt::to_json_string(&theorem_report(&c, &quick()).unwrap()).unwrap();
        let b = crate::numfmt::to_json_string(&theorem_report(&c, &quick()).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
