use rand::Rng;

use crate::chain::MarkovChain;

/// Inverse-CDF sampling tables for one chain.
///
/// Each row keeps only its positive entries, so a sampled *rank* indexes the
/// successors of a state in increasing order.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    n_states: usize,
    offsets: Vec<usize>,
    cumulative: Vec<f64>,
    targets: Vec<u32>,
    initial: Vec<f64>,
}

fn cumulate(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

impl ChainSampler {
    pub fn new(chain: &MarkovChain) -> Self {
        let mut offsets = vec![0];
        let mut cumulative = Vec::new();
        let mut targets = Vec::new();
        for u in 0..chain.len() {
            let row = chain.row(u);
            let succ: Vec<usize> = chain.successors(u).collect();
            cumulative.extend(cumulate(succ.iter().map(|&v| row[v])));
            targets.extend(succ.iter().map(|&v| v as u32));
            offsets.push(targets.len());
        }
        Self {
            n_states: chain.len(),
            offsets,
            cumulative,
            targets,
            initial: cumulate(chain.stationary().iter().copied()),
        }
    }

    pub fn len(&self) -> usize {
        self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.n_states == 0
    }

    /// Index of the sampled successor among the positive entries of `state`'s row.
    #[inline]
    pub fn step_rank<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[self.offsets[state]..self.offsets[state + 1]];
        if row.len() == 1 {
            // still consume a draw so streams stay aligned across chains
            let _: f64 = rng.random();
            return 0;
        }
        pick(row, rng.random())
    }

    /// Next state drawn from `P(state, ·)`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let rank = self.step_rank(state, rng);
        self.targets[self.offsets[state] + rank] as usize
    }

    /// A state drawn from `π`.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.initial, rng.random())
    }
}
