use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampler::ChainSampler;
use super::SAFETY_HORIZON;
use crate::chain::MarkovChain;
use crate::error::{Error, Result};
use crate::nblock::NBlockChain;
use crate::union_find::DisjointSets;

/// Default cap on the number of initial walkers `|V_n|`.
pub const DEFAULT_WALKER_CAP: usize = 1 << 16;

/// Two clusters merging: `absorbed` joins `survivor` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub time: u64,
    pub survivor: u32,
    pub absorbed: u32,
}

/// First co-occupancy time of every pair of initial walkers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTimes {
    size: usize,
    times: Vec<u64>,
}

impl PairTimes {
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.times[a * self.size + b]
    }

    pub fn max(&self) -> u64 {
        self.times.iter().copied().max().unwrap_or(1)
    }
}

/// One realization of the coalescing walk on `(V_n, P_n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalescenceRun {
    pub n: usize,
    pub num_walkers_initial: usize,
    /// `C_n`, the first time a single cluster remains.
    pub coalescence_time: u64,
    pub merge_events: Vec<MergeEvent>,
    pub pair_meeting_times: Option<PairTimes>,
}

/// Prepared coalescing walk: one walker per word of `V_n`.
///
/// A walker is a window over its own base-chain trajectory. Its window is
/// tracked by word id; stepping draws the next base symbol from the row of
/// the window's last symbol and shifts it in. Clusters are kept in increasing
/// order of their id (the smallest walker id they contain), so when several
/// clusters land on the same window in one step, the first in that order
/// survives.
#[derive(Debug, Clone)]
pub struct CoalescenceSim<'a> {
    blocks: NBlockChain<'a>,
    sampler: ChainSampler,
}

impl<'a> CoalescenceSim<'a> {
    pub fn new(chain: &'a MarkovChain, n: usize, walker_cap: usize) -> Result<Self> {
        let blocks = NBlockChain::build(chain, n, walker_cap).map_err(|e| match e {
            Error::CapExceeded { found, cap, .. } => Error::CapExceeded {
                what: "walkers",
                found,
                cap,
            },
            other => other,
        })?;
        Ok(Self {
            blocks,
            sampler: ChainSampler::new(chain),
        })
    }

    pub fn blocks(&self) -> &NBlockChain<'a> {
        &self.blocks
    }

    pub fn num_walkers(&self) -> usize {
        self.blocks.len()
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R, record_pairs: bool) -> Result<CoalescenceRun> {
        let size = self.blocks.len();
        let mut ids: Vec<u32> = (0..size as u32).collect();
        let mut windows: Vec<u32> = (0..size as u32).collect();
        let mut alive = vec![true; size];
        let mut stamp = vec![0u64; size];
        let mut owner = vec![0u32; size];
        let mut events = Vec::with_capacity(size.saturating_sub(1));
        let mut sets = record_pairs.then(|| DisjointSets::new(size));
        let mut pair_times = record_pairs.then(|| {
            let mut t = vec![0u64; size * size];
            for i in 0..size {
                t[i * size + i] = 1;
            }
            t
        });

        let mut time = 1u64;
        while ids.len() > 1 {
            time += 1;
            if time > SAFETY_HORIZON {
                return Err(Error::HorizonExceeded {
                    horizon: SAFETY_HORIZON,
                });
            }
            for w in windows.iter_mut() {
                let current = *w as usize;
                let rank = self.sampler.step_rank(self.blocks.last_symbol(current), rng);
                *w = self.blocks.successors(current)[rank];
            }
            let mut merged = false;
            for i in 0..ids.len() {
                let w = windows[i] as usize;
                if stamp[w] == time {
                    let survivor = ids[owner[w] as usize];
                    let absorbed = ids[i];
                    events.push(MergeEvent {
                        time,
                        survivor,
                        absorbed,
                    });
                    if let (Some(sets), Some(times)) = (sets.as_mut(), pair_times.as_mut()) {
                        sets.union_with(survivor as usize, absorbed as usize, |a, b| {
                            times[a as usize * size + b as usize] = time;
                            times[b as usize * size + a as usize] = time;
                        });
                    }
                    alive[i] = false;
                    merged = true;
                } else {
                    stamp[w] = time;
                    owner[w] = i as u32;
                }
            }
            if merged {
                let mut keep = alive.iter();
                ids.retain(|_| *keep.next().unwrap());
                let mut keep = alive.iter();
                windows.retain(|_| *keep.next().unwrap());
                alive.truncate(ids.len());
                alive.fill(true);
            }
        }

        let run = CoalescenceRun {
            n: self.blocks.n(),
            num_walkers_initial: size,
            coalescence_time: time,
            merge_events: events,
            pair_meeting_times: pair_times.map(|times| PairTimes { size, times }),
        };
        if let Some(pairs) = &run.pair_meeting_times {
            assert!(
                pairs.max() <= run.coalescence_time,
                "pair meeting time {} exceeds coalescence time {}",
                pairs.max(),
                run.coalescence_time
            );
        }
        Ok(run)
    }
}

/// One coalescence run on `(V_n, P_n)` with the default walker cap.
pub fn simulate_coalescence<R: Rng + ?Sized>(
    chain: &MarkovChain,
    n: usize,
    rng: &mut R,
    record_pairs: bool,
) -> Result<CoalescenceRun> {
    CoalescenceSim::new(chain, n, DEFAULT_WALKER_CAP)?.run(rng, record_pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{RngSpec, Summary};

    fn chain(rows: &[&[f64]]) -> MarkovChain {
        MarkovChain::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn uniform() -> MarkovChain {
        chain(&[&[0.5, 0.5], &[0.5, 0.5]])
    }

    #[test]
    fn one_walker_is_already_coalesced() {
        let c = chain(&[&[1.0]]);
        let run = simulate_coalescence(&c, 4, &mut RngSpec::new(0, 0).rng(), true).unwrap();
        assert_eq!(run.coalescence_time, 1);
        assert!(run.merge_events.is_empty());
        assert_eq!(run.pair_meeting_times.unwrap().get(0, 0), 1);
    }

    #[test]
    fn two_walkers_mean_three() {
        let c = uniform();
        let sim = CoalescenceSim::new(&c, 1, DEFAULT_WALKER_CAP).unwrap();
        let samples: Vec<f64> = (0..100_000u64)
            .map(|i| sim.run(&mut RngSpec::new(3, i).rng(), false).unwrap().coalescence_time as f64)
            .collect();
        let s = Summary::from_samples(&samples);
        assert!((s.mean - 3.0).abs() <= 3.0 * s.std_error, "{s:?}");
    }

    #[test]
    fn merge_bookkeeping() {
        let c = uniform();
        let sim = CoalescenceSim::new(&c, 5, DEFAULT_WALKER_CAP).unwrap();
        for i in 0..200 {
            let run = sim.run(&mut RngSpec::new(9, i).rng(), true).unwrap();
            assert_eq!(run.num_walkers_initial, 32);
            assert_eq!(run.merge_events.len(), 31);
            assert!(run.merge_events.iter().all(|e| e.survivor < e.absorbed));
            assert!(run.merge_events.windows(2).all(|w| w[0].time <= w[1].time));
            assert_eq!(run.merge_events.last().unwrap().time, run.coalescence_time);
            let pairs = run.pair_meeting_times.unwrap();
            for a in 0..32 {
                for b in 0..32 {
                    assert_eq!(pairs.get(a, b), pairs.get(b, a));
                    assert!(pairs.get(a, b) <= run.coalescence_time);
                    assert!(a == b || pairs.get(a, b) >= 2);
                }
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let c = chain(&[&[0.6, 0.4], &[0.3, 0.7]]);
        let sim = CoalescenceSim::new(&c, 4, DEFAULT_WALKER_CAP).unwrap();
        let a = sim.run(&mut RngSpec::new(42, 7).rng(), true).unwrap();
        let b = sim.run(&mut RngSpec::new(42, 7).rng(), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn walker_cap() {
        let c = uniform();
        assert!(matches!(
            CoalescenceSim::new(&c, 6, 32),
            Err(Error::CapExceeded { what: "walkers", .. })
        ));
    }
}
