//! Exact expected meeting times on n-block chains.
//!
//! Two independent walkers on `(V_n, P_n)` meet when the product chain hits
//! the diagonal. Time starts at 1 with the walkers on their start words, so a
//! walker pair that starts together has meeting time 1 and for `u ≠ v`
//!
//! ```text
//! E(u, v) = 1 + Σ_{c,d} P_n(u, c) P_n(v, d) E(c, d),   E(w, w) = 1.
//! ```
//!
//! The diagonal is folded into the constant term and the symmetry
//! `E(u, v) = E(v, u)` halves the unknowns.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{Error, Result};
use crate::harness::regression::ols;
use crate::linalg::{self, Csr};
use crate::nblock::{self, NBlockChain};
use crate::numfmt::sig17;

/// Default cap on `|V_n|²`.
pub const DEFAULT_PRODUCT_CAP: usize = 1_000_000;

/// Residual target for the meeting-time system.
pub const MEETING_RESIDUAL_TOL: f64 = 1e-10;

/// Smallest `n` at which the lower bound `1/(3Δ_n) ≤ m̄_n` is asserted.
pub const SANDWICH_N_MIN: usize = 4;

/// Expected pairwise meeting times on one n-block chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingTimeTable {
    pub n: usize,
    labels: Vec<String>,
    expectations: Vec<f64>,
    /// `m_n* = max E m_n(u, v)`.
    pub m_star: f64,
    /// `m̄_n = Σ π_n(u) π_n(v) E m_n(u, v)`.
    pub m_bar: f64,
}

/// Summary line exported next to a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingSummary {
    pub n: usize,
    pub m_star: f64,
    pub m_bar: f64,
    pub delta_n: f64,
}

impl MeetingTimeTable {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// `E m_n(u, v)` in steps.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.expectations[u * self.size() + v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn summary(&self, chain: &MarkovChain) -> MeetingSummary {
        MeetingSummary {
            n: self.n,
            m_star: self.m_star,
            m_bar: self.m_bar,
            delta_n: nblock::delta_exact(chain, self.n),
        }
    }

    /// Writes `u,v,expectation` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,expectation")?;
        for u in 0..self.size() {
            for v in 0..self.size() {
                writeln!(out, "{},{},{}", self.labels[u], self.labels[v], sig17(self.get(u, v)))?;
            }
        }
        Ok(())
    }
}

#[inline]
fn pair_index(size: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v);
    u * size - u * (u + 1) / 2 + (v - u - 1)
}

/// Solves the product-chain system for every pair of words in `nb`.
pub fn meeting_time_table(nb: &NBlockChain<'_>, cap: usize) -> Result<MeetingTimeTable> {
    let size = nb.len();
    let product = size.saturating_mul(size);
    if product > cap {
        return Err(Error::CapExceeded {
            what: "product states",
            found: product,
            cap,
        });
    }

    let unknowns = size * size.saturating_sub(1) / 2;
    let mut a = Csr::with_rows(unknowns);
    let mut b = Vec::with_capacity(unknowns);
    let rows: Vec<Vec<(usize, f64)>> = (0..size).map(|i| nb.transitions(i).collect()).collect();
    for u in 0..size {
        for v in u + 1..size {
            let mut constant = 1.0;
            for &(c, pc) in &rows[u] {
                for &(d, pd) in &rows[v] {
                    let p = pc * pd;
                    match c.cmp(&d) {
                        std::cmp::Ordering::Equal => constant += p,
                        std::cmp::Ordering::Less => a.push(pair_index(size, c, d), p),
                        std::cmp::Ordering::Greater => a.push(pair_index(size, d, c), p),
                    }
                }
            }
            a.finish_row();
            b.push(constant);
        }
    }

    let x = linalg::solve_shifted(&a, &b, MEETING_RESIDUAL_TOL)?;
    if x.iter().any(|&e| !(e >= 1.0 - 1e-9) || !e.is_finite()) {
        return Err(Error::SolverFailure(
            "meeting-time solution has an entry below 1".into(),
        ));
    }

    let mut expectations = vec![1.0; size * size];
    for u in 0..size {
        for v in u + 1..size {
            let e = x[pair_index(size, u, v)].max(1.0);
            expectations[u * size + v] = e;
            expectations[v * size + u] = e;
        }
    }
    let m_star = expectations.iter().cloned().fold(1.0, f64::max);
    let pi = nb.pi();
    let m_bar = (0..size)
        .map(|u| pi[u] * (0..size).map(|v| pi[v] * expectations[u * size + v]).sum::<f64>())
        .sum();

    Ok(MeetingTimeTable {
        n: nb.n(),
        labels: (0..size).map(|i| nb.label(i)).collect(),
        expectations,
        m_star,
        m_bar,
    })
}

/// Builds the n-block chain and its meeting-time table in one call.
pub fn meeting_time_table_for(
    chain: &MarkovChain,
    n: usize,
    product_cap: usize,
) -> Result<MeetingTimeTable> {
    let word_cap = (product_cap as f64).sqrt().floor() as usize;
    let nb = NBlockChain::build(chain, n, word_cap.max(1)).map_err(|e| match e {
        Error::CapExceeded { found, .. } => Error::CapExceeded {
            what: "product states",
            found: found.saturating_mul(found),
            cap: product_cap,
        },
        other => other,
    })?;
    meeting_time_table(&nb, product_cap)
}

/// One row of the `1/(3Δ_n) ≤ m̄_n ≤ m_n* ≤ K n / Δ_n` check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub n: usize,
    pub delta_n: f64,
    /// `1 / (3 Δ_n)`.
    pub lower_bound: f64,
    pub m_bar: f64,
    pub m_star: f64,
    /// `n / Δ_n`.
    pub upper_reference: f64,
    /// `K_n = m_n* Δ_n / n`.
    pub k_n: f64,
    /// `m̄_n ≤ m_n*`.
    pub ordered: bool,
    /// `1 / (3 Δ_n) ≤ m̄_n`.
    pub lower_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// `m̄_n ≤ m_n*` on every row.
    pub all_ordered: bool,
    /// Lower bound holds on every row with `n ≥ n_min`.
    pub lower_holds_from_n_min: bool,
    pub n_min: usize,
    /// Smallest `n` from which the lower bound holds on all later rows.
    pub first_lower_n: Option<usize>,
    pub max_k: f64,
    /// Least-squares slope of `K_n` over the top half of the range.
    pub k_trend_slope: f64,
    /// `K_n` shows no growth over the top half of the range.
    pub k_bounded: bool,
}

/// Exact tables for every `n` in `ns` and the sandwich diagnostics.
pub fn check_sandwich(
    chain: &MarkovChain,
    ns: &[usize],
    product_cap: usize,
) -> Result<SandwichReport> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let table = meeting_time_table_for(chain, n, product_cap)?;
        let delta_n = nblock::delta_exact(chain, n);
        let lower_bound = 1.0 / (3.0 * delta_n);
        rows.push(SandwichRow {
            n,
            delta_n,
            lower_bound,
            m_bar: table.m_bar,
            m_star: table.m_star,
            upper_reference: n as f64 / delta_n,
            k_n: table.m_star * delta_n / n as f64,
            ordered: table.m_bar <= table.m_star,
            lower_holds: lower_bound <= table.m_bar,
        });
    }

    let first_lower_n = rows
        .iter()
        .rposition(|r| !r.lower_holds)
        .map_or(rows.first().map(|r| r.n), |i| rows.get(i + 1).map(|r| r.n));
    let top = &rows[rows.len() / 2..];
    let k_trend_slope = if top.len() >= 2 {
        let xs: Vec<f64> = top.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = top.iter().map(|r| r.k_n).collect();
        ols(&xs, &ys).0
    } else {
        0.0
    };
    let max_k = rows.iter().map(|r| r.k_n).fold(0.0, f64::max);

    Ok(SandwichReport {
        all_ordered: rows.iter().all(|r| r.ordered),
        lower_holds_from_n_min: rows
            .iter()
            .filter(|r| r.n >= SANDWICH_N_MIN)
            .all(|r| r.lower_holds),
        n_min: SANDWICH_N_MIN,
        first_lower_n,
        max_k,
        k_trend_slope,
        k_bounded: k_trend_slope <= 1e-12 * max_k,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain(rows: &[&[f64]]) -> MarkovChain {
        MarkovChain::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn pair_index_is_dense() {
        let size = 7;
        let mut seen = vec![false; size * (size - 1) / 2];
        for u in 0..size {
            for v in u + 1..size {
                let i = pair_index(size, u, v);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn single_state_meets_immediately() {
        let c = chain(&[&[1.0]]);
        for n in [1, 3, 10] {
            let t = meeting_time_table_for(&c, n, DEFAULT_PRODUCT_CAP).unwrap();
            assert_eq!((t.size(), t.get(0, 0), t.m_star, t.m_bar), (1, 1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn uniform_one_block() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let t = meeting_time_table_for(&c, 1, DEFAULT_PRODUCT_CAP).unwrap();
        assert_abs_diff_eq!(t.get(0, 1), 3.0, epsilon = 1e-12);
        assert_eq!(t.get(1, 1), 1.0);
        assert_abs_diff_eq!(t.m_star, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.m_bar, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn product_cap() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let nb = NBlockChain::build(&c, 4, 1 << 20).unwrap();
        assert!(matches!(
            meeting_time_table(&nb, 100),
            Err(Error::CapExceeded { found: 256, .. })
        ));
        assert!(matches!(
            meeting_time_table_for(&c, 10, 1000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let t = meeting_time_table_for(&c, 1, DEFAULT_PRODUCT_CAP).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "u,v,expectation");
        assert_eq!(lines[1], "0,0,1.0000000000000000e0");
        assert_eq!(lines.len(), 5);
        let s = t.summary(&c);
        assert_eq!(s.delta_n, 0.5);
    }

    #[test]
    fn sandwich_uniform_one_block() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let report = check_sandwich(&c, &[1], DEFAULT_PRODUCT_CAP).unwrap();
        let row = &report.rows[0];
        assert_abs_diff_eq!(row.lower_bound, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row.m_bar, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.m_star, 3.0, epsilon = 1e-12);
        assert!(row.ordered && row.lower_holds);
    }

    #[test]
    fn sandwich_single_state() {
        let c = chain(&[&[1.0]]);
        let report = check_sandwich(&c, &[1, 2, 3], DEFAULT_PRODUCT_CAP).unwrap();
        for row in &report.rows {
            assert_eq!((row.delta_n, row.m_bar, row.m_star), (1.0, 1.0, 1.0));
            assert!(row.lower_holds);
        }
        assert_eq!(report.first_lower_n, Some(1));
    }

    #[test]
    fn sandwich_biased_k_bounded() {
        let c = chain(&[&[0.75, 0.25], &[0.75, 0.25]]);
        let report = check_sandwich(&c, &(2..=8).collect::<Vec<_>>(), DEFAULT_PRODUCT_CAP).unwrap();
        assert!(report.all_ordered);
        assert!(report.lower_holds_from_n_min);
        assert!(report.max_k.is_finite() && report.max_k > 0.0);
        assert!(report.k_bounded, "{report:?}");
    }
}
