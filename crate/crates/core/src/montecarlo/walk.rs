use rand::Rng;

use super::sampler::ChainSampler;
use super::SAFETY_HORIZON;
use crate::error::{Error, Result};
use crate::nblock::Word;

/// Initial blocks for a meeting-time sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeetingInit {
    /// Both initial blocks drawn independently from `μ`.
    Stationary,
    /// Fixed initial blocks.
    Pair(Word, Word),
}

fn stationary_block<R: Rng + ?Sized>(sampler: &ChainSampler, n: usize, rng: &mut R) -> Vec<u32> {
    let mut block = Vec::with_capacity(n);
    let mut s = sampler.sample_stationary(rng);
    block.push(s as u32);
    for _ in 1..n {
        s = sampler.step(s, rng);
        block.push(s as u32);
    }
    block
}

fn check_word(word: &Word, n: usize, n_states: usize) -> Result<()> {
    if word.len() != n || word.symbols().iter().any(|&s| s as usize >= n_states) {
        return Err(Error::InvalidInput(format!(
            "initial word {:?} is not a word of length {n}",
            word.symbols()
        )));
    }
    Ok(())
}

/// `M_n = inf { t ≥ 1 : x_t^{t+n−1} = y_t^{t+n−1} }`.
///
/// Two windows agree exactly when the trailing run of positions where the
/// trajectories agree has length at least `n`, so only that run is tracked.
pub fn sample_meeting_time<R: Rng + ?Sized>(
    sampler: &ChainSampler,
    n: usize,
    init: &MeetingInit,
    rng: &mut R,
) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidInput("block length must be at least 1".into()));
    }
    let (x0, y0) = match init {
        MeetingInit::Stationary => (
            stationary_block(sampler, n, rng),
            stationary_block(sampler, n, rng),
        ),
        MeetingInit::Pair(u, v) => {
            check_word(u, n, sampler.len())?;
            check_word(v, n, sampler.len())?;
            (u.symbols().to_vec(), v.symbols().to_vec())
        }
    };
    let mut run = 0usize;
    for (a, b) in x0.iter().zip(&y0) {
        run = if a == b { run + 1 } else { 0 };
    }
    if run >= n {
        return Ok(1);
    }
    let (mut x, mut y) = (x0[n - 1] as usize, y0[n - 1] as usize);
    let mut t = 1u64;
    loop {
        t += 1;
        if t > SAFETY_HORIZON {
            return Err(Error::HorizonExceeded {
                horizon: SAFETY_HORIZON,
            });
        }
        x = sampler.step(x, rng);
        y = sampler.step(y, rng);
        run = if x == y { run + 1 } else { 0 };
        if run >= n {
            return Ok(t);
        }
    }
}

/// `M_n` for several block lengths along one pair of stationary trajectories.
///
/// Returns the meeting times in the order of `ns`.
pub fn sample_meeting_times_nested<R: Rng + ?Sized>(
    sampler: &ChainSampler,
    ns: &[usize],
    rng: &mut R,
) -> Result<Vec<u64>> {
    if ns.contains(&0) {
        return Err(Error::InvalidInput("block length must be at least 1".into()));
    }
    let mut found: Vec<Option<u64>> = vec![None; ns.len()];
    let mut remaining = ns.len();
    let mut x = sampler.sample_stationary(rng);
    let mut y = sampler.sample_stationary(rng);
    let mut run = usize::from(x == y);
    let mut position = 1u64;
    loop {
        for (slot, &n) in found.iter_mut().zip(ns) {
            if slot.is_none() && run >= n {
                *slot = Some(position + 1 - n as u64);
                remaining -= 1;
            }
        }
        if remaining == 0 {
            return Ok(found.into_iter().map(Option::unwrap).collect());
        }
        position += 1;
        if position > SAFETY_HORIZON {
            return Err(Error::HorizonExceeded {
                horizon: SAFETY_HORIZON,
            });
        }
        x = sampler.step(x, rng);
        y = sampler.step(y, rng);
        run = if x == y { run + 1 } else { 0 };
    }
}

/// Streaming exact matcher for a fixed pattern (Knuth–Morris–Pratt).
struct Matcher {
    pattern: Vec<u32>,
    failure: Vec<usize>,
    matched: usize,
}

impl Matcher {
    fn new(pattern: Vec<u32>) -> Self {
        let mut failure = vec![0; pattern.len()];
        let mut k = 0;
        for i in 1..pattern.len() {
            while k > 0 && pattern[i] != pattern[k] {
                k = failure[k - 1];
            }
            if pattern[i] == pattern[k] {
                k += 1;
            }
            failure[i] = k;
        }
        Self {
            pattern,
            failure,
            matched: 0,
        }
    }

    /// Feeds one symbol; true when the pattern ends at it.
    fn feed(&mut self, symbol: u32) -> bool {
        if self.matched == self.pattern.len() {
            self.matched = self.failure[self.matched - 1];
        }
        while self.matched > 0 && self.pattern[self.matched] != symbol {
            self.matched = self.failure[self.matched - 1];
        }
        if self.pattern[self.matched] == symbol {
            self.matched += 1;
        }
        self.matched == self.pattern.len()
    }
}

/// `R_n(x) = inf { t > 1 : x_t^{t+n−1} = x_1^n }` for a stationary `x`.
pub fn sample_recurrence_time<R: Rng + ?Sized>(
    sampler: &ChainSampler,
    n: usize,
    rng: &mut R,
) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidInput("block length must be at least 1".into()));
    }
    let head = stationary_block(sampler, n, rng);
    let mut matcher = Matcher::new(head.clone());
    // positions 2..=n are shorter than the pattern and cannot complete a match
    for &s in &head[1..] {
        matcher.feed(s);
    }
    let mut state = head[n - 1] as usize;
    let mut position = n as u64;
    loop {
        position += 1;
        if position > SAFETY_HORIZON {
            return Err(Error::HorizonExceeded {
                horizon: SAFETY_HORIZON,
            });
        }
        state = sampler.step(state, rng);
        if matcher.feed(state as u32) {
            return Ok(position + 1 - n as u64);
        }
    }
}

/// `W_n(x, y) = inf { t ≥ 1 : y_t^{t+n−1} = x_1^n }` for independent
/// stationary `x` and `y`.
pub fn sample_waiting_time<R: Rng + ?Sized>(
    sampler: &ChainSampler,
    n: usize,
    rng: &mut R,
) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidInput("block length must be at least 1".into()));
    }
    let pattern = stationary_block(sampler, n, rng);
    let mut matcher = Matcher::new(pattern);
    let mut y = sampler.sample_stationary(rng);
    let mut position = 1u64;
    loop {
        if matcher.feed(y as u32) {
            return Ok(position + 1 - n as u64);
        }
        position += 1;
        if position > SAFETY_HORIZON {
            return Err(Error::HorizonExceeded {
                horizon: SAFETY_HORIZON,
            });
        }
        y = sampler.step(y, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::MarkovChain;
    use crate::montecarlo::{RngSpec, Summary};

    fn sampler(rows: &[&[f64]]) -> ChainSampler {
        ChainSampler::new(&MarkovChain::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap())
    }

    #[test]
    fn identical_pair_meets_at_one() {
        let s = sampler(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let mut rng = RngSpec::new(0, 0).rng();
        let w = Word::new(vec![0, 1, 1]);
        let init = MeetingInit::Pair(w.clone(), w);
        assert_eq!(sample_meeting_time(&s, 3, &init, &mut rng).unwrap(), 1);
    }

    #[test]
    fn single_state_processes() {
        let s = sampler(&[&[1.0]]);
        let mut rng = RngSpec::new(0, 0).rng();
        for n in [1, 4, 9] {
            assert_eq!(sample_meeting_time(&s, n, &MeetingInit::Stationary, &mut rng).unwrap(), 1);
            assert_eq!(sample_recurrence_time(&s, n, &mut rng).unwrap(), 2);
            assert_eq!(sample_waiting_time(&s, n, &mut rng).unwrap(), 1);
        }
        assert_eq!(sample_meeting_times_nested(&s, &[2, 5], &mut rng).unwrap(), vec![1, 1]);
    }

    #[test]
    fn rejects_bad_pair() {
        let s = sampler(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let mut rng = RngSpec::new(0, 0).rng();
        let init = MeetingInit::Pair(Word::new(vec![0]), Word::new(vec![0, 1]));
        assert!(sample_meeting_time(&s, 2, &init, &mut rng).is_err());
        let init = MeetingInit::Pair(Word::new(vec![0, 2]), Word::new(vec![0, 1]));
        assert!(sample_meeting_time(&s, 2, &init, &mut rng).is_err());
    }

    #[test]
    fn uniform_pair_mean_is_three() {
        let s = sampler(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let init = MeetingInit::Pair(Word::new(vec![0]), Word::new(vec![1]));
        let samples: Vec<f64> = (0..100_000u64)
            .map(|i| {
                let mut rng = RngSpec::new(11, i).rng();
                sample_meeting_time(&s, 1, &init, &mut rng).unwrap() as f64
            })
            .collect();
        let summary = Summary::from_samples(&samples);
        assert!((summary.mean - 3.0).abs() <= 3.0 * summary.std_error, "{summary:?}");
    }

    #[test]
    fn matcher_finds_overlapping_occurrences() {
        let mut m = Matcher::new(vec![1, 0, 1]);
        let hits: Vec<bool> = [1, 0, 1, 0, 1, 1, 0, 1].iter().map(|&s| m.feed(s)).collect();
        assert_eq!(hits, vec![false, false, true, false, true, false, false, true]);
    }

    /// Scan-based definitions checked against the streaming samplers on a
    /// shared trajectory.
    #[test]
    fn nested_meeting_times_match_direct_scan() {
        let s = sampler(&[&[0.6, 0.4], &[0.3, 0.7]]);
        let ns = [1, 2, 3, 5];
        for trial in 0..200 {
            let got = sample_meeting_times_nested(&s, &ns, &mut RngSpec::new(5, trial).rng()).unwrap();
            // replay the same draws: x1, y1, then alternating steps
            let mut rng = RngSpec::new(5, trial).rng();
            let mut x = vec![s.sample_stationary(&mut rng)];
            let mut y = vec![s.sample_stationary(&mut rng)];
            let horizon = *got.iter().max().unwrap() as usize + 10;
            while x.len() < horizon {
                x.push(s.step(*x.last().unwrap(), &mut rng));
                y.push(s.step(*y.last().unwrap(), &mut rng));
            }
            for (&n, &m) in ns.iter().zip(&got) {
                let direct = (0..horizon - n).find(|&t| x[t..t + n] == y[t..t + n]).unwrap() + 1;
                assert_eq!(direct as u64, m, "n={n} trial={trial}");
            }
        }
    }
}
