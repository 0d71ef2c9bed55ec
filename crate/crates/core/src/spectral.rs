//! Perron pairs, the coalescence exponent and the maximal-entropy test.

use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{Error, Result};

/// Entrywise tolerance for the Parry comparison.
pub const MME_TOL: f64 = 1e-9;

/// Default iteration budget for [`perron`].
pub const PERRON_MAX_ITER: usize = 1_000_000;

/// Dominant eigenvalue of a nonnegative irreducible matrix with its positive
/// right eigenvector, normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Per-chain spectral invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Perron eigenvalue of `Q(u, v) = P(u, v)²`.
    pub lambda: f64,
    /// `L = −log λ`, in nats.
    #[serde(rename = "L")]
    pub coalescence_exponent: f64,
    /// Entropy rate `h`, in nats.
    pub entropy: f64,
    pub is_mme: bool,
    /// `max |P − P*|` against the Parry matrix of the support graph.
    pub mme_distance: f64,
}

fn matvec(size: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * size..(i + 1) * size]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum();
    }
}

/// Power iteration from the all-ones vector on a row-major `size × size`
/// matrix, shifted by a multiple of the identity.
///
/// Stops once successive eigenvalue estimates differ by less than `1e-14`
/// (relative to `max(1, λ)`) and `‖Mr − λr‖∞ ≤ 1e-12 ‖M‖∞`.
pub fn perron(size: usize, matrix: &[f64]) -> Result<PerronPair> {
    perron_with_limit(size, matrix, PERRON_MAX_ITER)
}

pub fn perron_with_limit(size: usize, matrix: &[f64], max_iter: usize) -> Result<PerronPair> {
    if size == 0 || matrix.len() != size * size {
        return Err(Error::InvalidInput(format!(
            "expected a square {size}x{size} matrix, got {} entries",
            matrix.len()
        )));
    }
    if matrix.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput("matrix has a negative or non-finite entry".into()));
    }
    let sums: Vec<f64> = matrix.chunks_exact(size).map(|r| r.iter().sum()).collect();
    let norm = sums.iter().cloned().fold(0.0, f64::max);
    if norm == 0.0 {
        return Err(Error::InvalidInput("zero matrix has no Perron pair".into()));
    }
    // Iterating on M + sI keeps the Perron vector but damps eigenvalues near
    // −λ; s sits between the row-sum bounds on λ.
    let shift = 0.5 * (norm + sums.iter().cloned().fold(f64::INFINITY, f64::min));

    let mut x = vec![1.0 / size as f64; size];
    let mut y = vec![0.0; size];
    let mut previous = f64::NAN;
    for _ in 0..max_iter {
        matvec(size, matrix, &x, &mut y);
        let value: f64 = y.iter().sum();
        if !(value > 0.0) {
            return Err(Error::InvalidInput("matrix support is not irreducible".into()));
        }
        let residual = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - value * xi).abs())
            .fold(0.0, f64::max);
        if (value - previous).abs() < 1e-14 * value.max(1.0) && residual <= 1e-12 * norm {
            return Ok(PerronPair { value, vector: x });
        }
        previous = value;
        let scale = value + shift;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = (yi + shift * *xi) / scale;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Returns `(is_mme, max |P − P*|)` where `P*` is the Parry matrix
/// `A(u,v) r(v) / (λ_A r(u))` built from the support graph `A`.
pub fn is_measure_of_maximal_entropy(chain: &MarkovChain, tol: f64) -> Result<(bool, f64)> {
    let k = chain.len();
    let support = chain.support_matrix();
    let PerronPair { value, vector } = perron(k, &support)?;
    let parry = parry_matrix(k, &support, value, &vector);
    let distance = chain
        .transition()
        .iter()
        .zip(&parry)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    Ok((distance <= tol, distance))
}

/// The Parry (maximal-entropy) transition matrix of a 0/1 support matrix.
pub fn parry_matrix(size: usize, support: &[f64], value: f64, vector: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for u in 0..size {
        for v in 0..size {
            if support[u * size + v] > 0.0 {
                out[u * size + v] = vector[v] / (value * vector[u]);
            }
        }
    }
    out
}

/// Rows of the Parry chain on the given 0/1 support.
pub fn parry_rows(size: usize, support: &[f64]) -> Result<Vec<Vec<f64>>> {
    let PerronPair { value, vector } = perron(size, support)?;
    Ok(parry_matrix(size, support, value, &vector)
        .chunks_exact(size)
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|p| p / s).collect()
        })
        .collect())
}

/// `λ`, `L`, `h` and the maximal-entropy verdict for `chain`.
pub fn coalescence_exponent(chain: &MarkovChain) -> Result<SpectralSummary> {
    coalescence_exponent_with_tol(chain, MME_TOL)
}

pub fn coalescence_exponent_with_tol(chain: &MarkovChain, tol: f64) -> Result<SpectralSummary> {
    let k = chain.len();
    let lambda = if k == 1 {
        1.0
    } else {
        perron(k, &chain.squared())?.value
    };
    let exponent = if lambda == 1.0 { 0.0 } else { -lambda.ln() };
    let (is_mme, mme_distance) = is_measure_of_maximal_entropy(chain, tol)?;
    Ok(SpectralSummary {
        lambda,
        coalescence_exponent: exponent,
        entropy: chain.entropy(),
        is_mme,
        mme_distance,
    })
}
