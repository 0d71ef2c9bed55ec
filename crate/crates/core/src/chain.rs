//! Validated finite Markov chains.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, MixingWitness, Result};

/// Maximum allowed deviation of a row sum from 1.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Maximum allowed `‖πP − π‖∞` for a stationary distribution.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Transition probabilities below this are structural zeros.
pub const ZERO_THRESHOLD: f64 = 1e-15;

/// On-disk chain format: `{ "states": [...], "transition": [[...], ...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub states: Vec<String>,
    pub transition: Vec<Vec<f64>>,
}

/// A mixing Markov chain with its stationary distribution.
///
/// Immutable after construction. Entries below [`ZERO_THRESHOLD`] are stored
/// as exact zeros so that the support graph is discrete.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    labels: Vec<String>,
    size: usize,
    transition: Vec<f64>,
    stationary: Vec<f64>,
}

impl MarkovChain {
    /// Validates `rows` as a mixing stochastic matrix over `labels`.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidInput("empty state space".into()));
        }
        if labels.len() != size {
            return Err(Error::InvalidInput(format!(
                "{} labels for a {size}x{size} matrix",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate state label {label:?}")));
            }
        }

        let mut transition = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) = {p} is not a nonnegative number"
                    )));
                }
                transition.push(if p < ZERO_THRESHOLD { 0.0 } else { p });
            }
        }

        for (i, row) in transition.chunks_exact(size).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic {
                    row: i,
                    label: labels[i].clone(),
                    sum,
                });
            }
        }

        let support = BitMatrix::support(size, &transition);
        if let Some(witness) = mixing_witness(&support) {
            return Err(Error::NotMixing(match witness {
                Witness::Reducible(from, to) => MixingWitness::Reducible {
                    from: labels[from].clone(),
                    to: labels[to].clone(),
                },
                Witness::Periodic(period) => MixingWitness::Periodic { period },
            }));
        }

        let stationary = solve_stationary(size, &transition)?;
        Ok(Self {
            labels,
            size,
            transition,
            stationary,
        })
    }

    /// Builds a chain with labels `"0"`, `"1"`, ...
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows, labels)
    }

    pub fn from_chain_file(file: ChainFile) -> Result<Self> {
        Self::new(file.transition, file.states)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_chain_file(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_chain_file(&self) -> ChainFile {
        ChainFile {
            states: self.labels.clone(),
            transition: self.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    /// Number of states `|V|`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `P(u, v)`.
    #[inline]
    pub fn p(&self, u: usize, v: usize) -> f64 {
        self.transition[u * self.size + v]
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[f64] {
        &self.transition[u * self.size..(u + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.transition.chunks_exact(self.size)
    }

    /// States reachable from `u` in one step, in increasing order.
    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(u)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(v, _)| v)
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.successors(u).count()
    }

    /// The stationary distribution `π`.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Row-major copy of the transition matrix.
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// Row-major `Q(u, v) = P(u, v)²`.
    pub fn squared(&self) -> Vec<f64> {
        self.transition.iter().map(|p| p * p).collect()
    }

    /// Row-major 0/1 support matrix.
    pub fn support_matrix(&self) -> Vec<f64> {
        self.transition
            .iter()
            .map(|&p| if p > 0.0 { 1.0 } else { 0.0 })
            .collect()
    }

    /// `‖πP − π‖∞` for the cached `π`.
    pub fn stationarity_residual(&self) -> f64 {
        stationarity_residual(self.size, &self.transition, &self.stationary)
    }

    /// Entropy rate `h = −Σ π(u) P(u,v) log P(u,v)` in nats.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (u, row) in self.rows().enumerate() {
            let mut row_h = 0.0;
            for &p in row.iter().filter(|&&p| p > 0.0) {
                row_h -= p * p.ln();
            }
            h += self.stationary[u] * row_h;
        }
        h
    }
}

/// Stationary distribution of a validated chain.
pub fn stationary_distribution(chain: &MarkovChain) -> &[f64] {
    chain.stationary()
}

/// Entropy rate of a validated chain, in nats.
pub fn entropy(chain: &MarkovChain) -> f64 {
    chain.entropy()
}

fn stationarity_residual(size: usize, transition: &[f64], pi: &[f64]) -> f64 {
    (0..size)
        .map(|v| {
            let flow: f64 = (0..size).map(|u| pi[u] * transition[u * size + v]).sum();
            (flow - pi[v]).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves `π(P − I) = 0, Σπ = 1` with the last balance equation replaced by
/// the normalization, then applies iterative refinement.
fn solve_stationary(size: usize, transition: &[f64]) -> Result<Vec<f64>> {
    let mut a = DMatrix::<f64>::zeros(size, size);
    for v in 0..size {
        for u in 0..size {
            a[(v, u)] = transition[u * size + v] - if u == v { 1.0 } else { 0.0 };
        }
    }
    for u in 0..size {
        a[(size - 1, u)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(size);
    b[size - 1] = 1.0;

    let lu = a.clone().lu();
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::SolverFailure("singular stationary system".into()))?;
    for _ in 0..3 {
        let r = &b - &a * &x;
        if r.amax() == 0.0 {
            break;
        }
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }

    let sum: f64 = x.iter().sum();
    let pi: Vec<f64> = x.iter().map(|p| p / sum).collect();
    if pi.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::SolverFailure(
            "stationary vector has a nonpositive entry".into(),
        ));
    }
    let residual = stationarity_residual(size, transition, &pi);
    if residual > STATIONARY_TOL {
        return Err(Error::SolverFailure(format!(
            "stationary residual {residual:e} exceeds {STATIONARY_TOL:e}"
        )));
    }
    Ok(pi)
}

/// Square boolean matrix stored as bitset rows.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitMatrix {
    size: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn support(size: usize, transition: &[f64]) -> Self {
        let words = size.div_ceil(64);
        let mut bits = vec![0u64; size * words];
        for i in 0..size {
            for j in 0..size {
                if transition[i * size + j] > 0.0 {
                    bits[i * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Self { size, words, bits }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    fn multiply(&self, other: &Self) -> Self {
        let mut bits = vec![0u64; self.bits.len()];
        for i in 0..self.size {
            let out = &mut bits[i * self.words..(i + 1) * self.words];
            for k in 0..self.size {
                if self.get(i, k) {
                    for (o, w) in out.iter_mut().zip(other.row(k)) {
                        *o |= w;
                    }
                }
            }
        }
        Self {
            size: self.size,
            words: self.words,
            bits,
        }
    }

    fn is_full(&self) -> bool {
        (0..self.size).all(|i| (0..self.size).all(|j| self.get(i, j)))
    }
}

enum Witness {
    Reducible(usize, usize),
    Periodic(usize),
}

/// `None` when some power of the support matrix within Wielandt's bound
/// `(k−1)² + 1` is entrywise positive. Positivity persists for all larger
/// powers, so squaring until the exponent passes the bound is enough.
fn mixing_witness(support: &BitMatrix) -> Option<Witness> {
    let k = support.size;
    let bound = (k - 1) * (k - 1) + 1;
    let mut power = support.clone();
    let mut exponent = 1usize;
    while exponent < bound {
        power = power.multiply(&power);
        exponent *= 2;
    }
    if power.is_full() {
        return None;
    }

    for from in 0..k {
        let levels = bfs_levels(support, from);
        if let Some(to) = levels.iter().position(Option::is_none) {
            return Some(Witness::Reducible(from, to));
        }
    }

    let levels = bfs_levels(support, 0);
    let mut period = 0usize;
    for u in 0..k {
        for v in 0..k {
            if support.get(u, v) {
                let (lu, lv) = (levels[u].unwrap(), levels[v].unwrap());
                period = gcd(period, (lu + 1).abs_diff(lv));
            }
        }
    }
    Some(Witness::Periodic(period))
}

fn bfs_levels(support: &BitMatrix, start: usize) -> Vec<Option<usize>> {
    let mut levels = vec![None; support.size];
    levels[start] = Some(0);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let next = levels[u].unwrap() + 1;
        for v in 0..support.size {
            if support.get(u, v) && levels[v].is_none() {
                levels[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    levels
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
