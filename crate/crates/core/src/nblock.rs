//! Word measures, explicit n-block chains and the collision probability `Δ_n`.

use std::cmp::Ordering;

use crate::chain::{ChainFile, MarkovChain};
use crate::error::{Error, Result};

/// Default cap on the number of words materialized by [`NBlockChain::build`].
pub const DEFAULT_WORD_CAP: usize = 1 << 20;

/// A finite sequence of state indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn new(symbols: Vec<u32>) -> Self {
        Self(symbols)
    }

    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses a hyphen-joined list of state labels, e.g. `"a-b-a"`.
    pub fn parse(chain: &MarkovChain, text: &str) -> Result<Self> {
        text.split('-')
            .map(|label| {
                chain
                    .index_of(label)
                    .map(|i| i as u32)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown state label {label:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    /// True when every adjacent transition has positive probability.
    pub fn is_admissible(&self, chain: &MarkovChain) -> bool {
        !self.0.is_empty()
            && self.0.iter().all(|&s| (s as usize) < chain.len())
            && self.0.windows(2).all(|w| chain.p(w[0] as usize, w[1] as usize) > 0.0)
    }

    pub fn render(&self, chain: &MarkovChain) -> String {
        render(chain, &self.0)
    }
}

impl From<Vec<u32>> for Word {
    fn from(symbols: Vec<u32>) -> Self {
        Self(symbols)
    }
}

fn render(chain: &MarkovChain, symbols: &[u32]) -> String {
    symbols
        .iter()
        .map(|&s| chain.label(s as usize))
        .collect::<Vec<_>>()
        .join("-")
}

/// `log μ(u) = log π(u₁) + Σ log P(u_j, u_{j+1})`, or `-∞` when a factor is 0.
pub fn mu_log_prob(chain: &MarkovChain, word: &[u32]) -> f64 {
    let Some(&first) = word.first() else {
        return 0.0;
    };
    let mut log = chain.stationary()[first as usize].ln();
    for pair in word.windows(2) {
        let p = chain.p(pair[0] as usize, pair[1] as usize);
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        log += p.ln();
    }
    log
}

/// The n-block chain `(V_n, P_n)` of a base chain.
///
/// Words are the positive-probability paths of length `n`, in lexicographic
/// order of state indices. `P_n(u, v) = P(u_n, v_n)` whenever `v` extends the
/// shift of `u`; the successors of a word are stored in increasing order of
/// their last symbol, which matches the order of the positive entries in the
/// base row.
#[derive(Debug, Clone)]
pub struct NBlockChain<'a> {
    base: &'a MarkovChain,
    n: usize,
    symbols: Vec<u32>,
    succ_offsets: Vec<usize>,
    succ_ids: Vec<u32>,
    pi: Vec<f64>,
}

impl<'a> NBlockChain<'a> {
    /// Enumerates `V_n` depth-first and links each word to its successors.
    pub fn build(base: &'a MarkovChain, n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("block length must be at least 1".into()));
        }
        let mut symbols = Vec::new();
        let mut log_mu = Vec::new();
        let mut count = 0usize;
        let mut prefix = Vec::with_capacity(n);
        for start in 0..base.len() {
            prefix.push(start as u32);
            let log0 = base.stationary()[start].ln();
            enumerate(base, n, &mut prefix, log0, &mut |word, log| {
                count += 1;
                if count > cap {
                    return Err(Error::CapExceeded {
                        what: "n-block words",
                        found: count,
                        cap,
                    });
                }
                symbols.extend_from_slice(word);
                log_mu.push(log);
                Ok(())
            })?;
            prefix.pop();
        }

        let mut chain = Self {
            base,
            n,
            symbols,
            succ_offsets: Vec::with_capacity(count + 1),
            succ_ids: Vec::new(),
            pi: log_mu.iter().map(|l| l.exp()).collect(),
        };
        chain.link_successors();
        Ok(chain)
    }

    fn link_successors(&mut self) {
        let n = self.n;
        self.succ_offsets.push(0);
        for i in 0..self.len() {
            if n == 1 {
                let ids: Vec<u32> = self.base.successors(i).map(|v| v as u32).collect();
                self.succ_ids.extend(ids);
            } else {
                let shift = &self.word(i)[1..];
                let lo = self.partition(|w| w[..n - 1].cmp(shift) == Ordering::Less);
                let hi = self.partition(|w| w[..n - 1].cmp(shift) != Ordering::Greater);
                self.succ_ids.extend(lo as u32..hi as u32);
            }
            self.succ_offsets.push(self.succ_ids.len());
        }
    }

    fn partition(&self, pred: impl Fn(&[u32]) -> bool) -> usize {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if pred(self.word(mid)) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn base(&self) -> &'a MarkovChain {
        self.base
    }

    /// Block length `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of words `|V_n|`.
    pub fn len(&self) -> usize {
        self.symbols.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn word(&self, id: usize) -> &[u32] {
        &self.symbols[id * self.n..(id + 1) * self.n]
    }

    pub fn words(&self) -> impl Iterator<Item = &[u32]> {
        self.symbols.chunks_exact(self.n)
    }

    #[inline]
    pub fn last_symbol(&self, id: usize) -> usize {
        self.symbols[(id + 1) * self.n - 1] as usize
    }

    /// Successor ids of `id`, ordered by their last symbol.
    #[inline]
    pub fn successors(&self, id: usize) -> &[u32] {
        &self.succ_ids[self.succ_offsets[id]..self.succ_offsets[id + 1]]
    }

    /// `P_n(from, to)`; zero unless `to` is a successor of `from`.
    pub fn transition_prob(&self, from: usize, to: usize) -> f64 {
        if self.successors(from).contains(&(to as u32)) {
            self.base.p(self.last_symbol(from), self.last_symbol(to))
        } else {
            0.0
        }
    }

    /// Successors of `id` paired with their transition probabilities.
    pub fn transitions(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let last = self.last_symbol(id);
        self.successors(id).iter().map(move |&j| {
            let j = j as usize;
            (j, self.base.p(last, self.last_symbol(j)))
        })
    }

    /// `π_n(u) = μ(u)`.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn index_of(&self, word: &[u32]) -> Option<usize> {
        if word.len() != self.n {
            return None;
        }
        let i = self.partition(|w| w < word);
        (i < self.len() && self.word(i) == word).then_some(i)
    }

    /// Hyphen-joined labels of word `id`.
    pub fn label(&self, id: usize) -> String {
        render(self.base, self.word(id))
    }

    /// `‖π_n P_n − π_n‖∞`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut flow = vec![0.0; self.len()];
        for i in 0..self.len() {
            for (j, p) in self.transitions(i) {
                flow[j] += self.pi[i] * p;
            }
        }
        flow.iter()
            .zip(&self.pi)
            .map(|(f, p)| (f - p).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|Σ_v P_n(u, v) − 1|` over all rows.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.transitions(i).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Dense export in the base chain file format.
    pub fn to_chain_file(&self) -> ChainFile {
        let size = self.len();
        let transition = (0..size)
            .map(|i| {
                let mut row = vec![0.0; size];
                for (j, p) in self.transitions(i) {
                    row[j] = p;
                }
                row
            })
            .collect();
        ChainFile {
            states: (0..size).map(|i| self.label(i)).collect(),
            transition,
        }
    }
}

/// Depth-first extension of `prefix` along positive transitions, visiting
/// complete words in lexicographic order.
fn enumerate(
    chain: &MarkovChain,
    n: usize,
    prefix: &mut Vec<u32>,
    log: f64,
    visit: &mut dyn FnMut(&[u32], f64) -> Result<()>,
) -> Result<()> {
    if prefix.len() == n {
        return visit(prefix, log);
    }
    let last = *prefix.last().expect("prefix is never empty") as usize;
    for next in chain.successors(last) {
        prefix.push(next as u32);
        let step = enumerate(chain, n, prefix, log + chain.p(last, next).ln(), visit);
        prefix.pop();
        step?;
    }
    Ok(())
}

/// `log Δ_n` for `n = 1..=n_max` via `Δ_n = (π∘π)ᵀ Q^{n−1} 𝟙`.
///
/// The propagated vector is renormalized after every product and the log of
/// the scale is carried separately, so the result stays finite long after
/// `Δ_n` itself underflows.
pub fn log_delta_series(chain: &MarkovChain, n_max: usize) -> Vec<f64> {
    let k = chain.len();
    let q = chain.squared();
    let weights: Vec<f64> = chain.stationary().iter().map(|p| p * p).collect();
    let mut v = vec![1.0; k];
    let mut next = vec![0.0; k];
    let mut log_scale = 0.0;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            for (i, o) in next.iter_mut().enumerate() {
                *o = q[i * k..(i + 1) * k].iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            let scale = next.iter().cloned().fold(0.0, f64::max);
            for (vi, ni) in v.iter_mut().zip(&next) {
                *vi = ni / scale;
            }
            log_scale += scale.ln();
        }
        let dot: f64 = weights.iter().zip(&v).map(|(w, x)| w * x).sum();
        out.push(dot.ln() + log_scale);
    }
    out
}

/// `log Δ_n` in time linear in `n`.
pub fn log_delta_exact(chain: &MarkovChain, n: usize) -> f64 {
    assert!(n >= 1, "block length must be at least 1");
    *log_delta_series(chain, n).last().unwrap()
}

/// `Δ_n = Σ_{u ∈ V_n} μ(u)²`, computed by the matrix-power identity.
pub fn delta_exact(chain: &MarkovChain, n: usize) -> f64 {
    log_delta_exact(chain, n).exp()
}

/// `Δ_n` by enumerating `V_n` and summing `μ(u)²` directly.
pub fn delta_enumerate(chain: &MarkovChain, n: usize, cap: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("block length must be at least 1".into()));
    }
    fn walk(
        chain: &MarkovChain,
        remaining: usize,
        last: usize,
        mass: f64,
        count: &mut usize,
        cap: usize,
    ) -> Result<f64> {
        if remaining == 0 {
            *count += 1;
            if *count > cap {
                return Err(Error::CapExceeded {
                    what: "n-block words",
                    found: *count,
                    cap,
                });
            }
            return Ok(mass * mass);
        }
        let mut total = 0.0;
        for next in chain.successors(last) {
            total += walk(chain, remaining - 1, next, mass * chain.p(last, next), count, cap)?;
        }
        Ok(total)
    }
    let mut count = 0;
    let mut total = 0.0;
    for v in 0..chain.len() {
        total += walk(chain, n - 1, v, chain.stationary()[v], &mut count, cap)?;
    }
    Ok(total)
}
