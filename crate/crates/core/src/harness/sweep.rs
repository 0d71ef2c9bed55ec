use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{estimate_exponent, ExponentEstimate};
use crate::chain::MarkovChain;
use crate::error::{Error, Result};
use crate::exact::{meeting_time_table, DEFAULT_PRODUCT_CAP};
use crate::montecarlo::{run_trials, CoalescenceSim, Summary, DEFAULT_WALKER_CAP};
use crate::nblock::{log_delta_series, NBlockChain};
use crate::numfmt::{sig17, to_json_string};
use crate::spectral::{coalescence_exponent, SpectralSummary};

/// Parameters of a sweep over block lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_lo: usize,
    pub n_hi: usize,
    pub trials: usize,
    pub seed: u64,
    pub product_cap: usize,
    pub walker_cap: usize,
}

impl SweepConfig {
    pub fn new(n_lo: usize, n_hi: usize, trials: usize, seed: u64) -> Self {
        Self {
            n_lo,
            n_hi,
            trials,
            seed,
            product_cap: DEFAULT_PRODUCT_CAP,
            walker_cap: DEFAULT_WALKER_CAP,
        }
    }
}

/// Exact and simulated quantities at one block length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    /// `|V_n|`, when the walker cap allowed materializing it.
    pub num_words: Option<usize>,
    pub delta_n: f64,
    pub log_delta_n: f64,
    #[serde(rename = "L")]
    pub coalescence_exponent: f64,
    pub h: f64,
    pub m_star: Option<f64>,
    pub m_bar: Option<f64>,
    pub ec_mean: Option<f64>,
    pub ec_se: Option<f64>,
    pub trials: usize,
    /// `(1/n) log(value)` for every populated quantity.
    pub exps: BTreeMap<String, f64>,
}

/// Stream id for trial `trial` at block length `n`.
pub(crate) fn sweep_stream(n: usize, trial: usize) -> u64 {
    ((n as u64) << 32) | trial as u64
}

/// Runs every block length in `[n_lo, n_hi]`. Exact tables and simulations
/// that exceed their caps are left empty instead of aborting.
pub fn run_sweep(chain: &MarkovChain, config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if config.n_lo == 0 || config.n_lo > config.n_hi {
        return Err(Error::Usage(format!(
            "invalid block range [{}, {}]",
            config.n_lo, config.n_hi
        )));
    }
    if config.trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    let spectral = coalescence_exponent(chain)?;
    let log_deltas = log_delta_series(chain, config.n_hi);

    (config.n_lo..=config.n_hi)
        .into_par_iter()
        .map(|n| sweep_one(chain, config, &spectral, n, log_deltas[n - 1]))
        .collect()
}

fn capped<T>(result: Result<T>) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn sweep_one(
    chain: &MarkovChain,
    config: &SweepConfig,
    spectral: &SpectralSummary,
    n: usize,
    log_delta_n: f64,
) -> Result<SweepRecord> {
    let word_cap = ((config.product_cap as f64).sqrt().floor() as usize).max(1);
    let table = match capped(NBlockChain::build(chain, n, word_cap))? {
        Some(nb) => capped(meeting_time_table(&nb, config.product_cap))?,
        None => None,
    };

    let sim = capped(CoalescenceSim::new(chain, n, config.walker_cap))?;
    let coalescence = match &sim {
        Some(sim) => {
            let times = run_trials(config.seed, sweep_stream(n, 0), config.trials, |_, rng| {
                Ok(sim.run(rng, false)?.coalescence_time as f64)
            })?;
            Some(Summary::from_samples(&times))
        }
        None => None,
    };

    let scale = 1.0 / n as f64;
    let mut exps = BTreeMap::new();
    exps.insert("delta".to_string(), log_delta_n * scale);
    if let Some(t) = &table {
        exps.insert("m_star".to_string(), t.m_star.ln() * scale);
        exps.insert("m_bar".to_string(), t.m_bar.ln() * scale);
    }
    if let Some(s) = &coalescence {
        exps.insert("ec_mean".to_string(), s.mean.ln() * scale);
    }

    Ok(SweepRecord {
        n,
        num_words: sim.as_ref().map(|s| s.num_walkers()),
        delta_n: log_delta_n.exp(),
        log_delta_n,
        coalescence_exponent: spectral.coalescence_exponent,
        h: spectral.entropy,
        m_star: table.as_ref().map(|t| t.m_star),
        m_bar: table.as_ref().map(|t| t.m_bar),
        ec_mean: coalescence.map(|s| s.mean),
        ec_se: coalescence.map(|s| s.std_error),
        trials: if coalescence.is_some() { config.trials } else { 0 },
        exps,
    })
}

const CSV_HEADER: &str = "n,num_words,delta_n,log_delta_n,L,h,m_star,m_bar,ec_mean,ec_se,trials,\
exp_delta,exp_m_star,exp_m_bar,exp_ec_mean";

const EXP_KEYS: [&str; 4] = ["delta", "m_star", "m_bar", "ec_mean"];

fn opt(x: Option<f64>) -> String {
    x.map(sig17).unwrap_or_default()
}

/// Writes one CSV row per record.
pub fn write_sweep_csv<W: Write>(mut out: W, records: &[SweepRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let exps: Vec<String> = EXP_KEYS.iter().map(|k| opt(r.exps.get(*k).copied())).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.num_words.map(|w| w.to_string()).unwrap_or_default(),
            sig17(r.delta_n),
            sig17(r.log_delta_n),
            sig17(r.coalescence_exponent),
            sig17(r.h),
            opt(r.m_star),
            opt(r.m_bar),
            opt(r.ec_mean),
            opt(r.ec_se),
            r.trials,
            exps.join(",")
        )?;
    }
    Ok(())
}

/// Parses the output of [`write_sweep_csv`].
pub fn read_sweep_csv<R: BufRead>(input: R) -> Result<Vec<SweepRecord>> {
    let bad = |line: usize, what: &str| Error::InvalidInput(format!("sweep CSV line {line}: {what}"));
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(bad(lineno, "expected 15 fields"));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad(lineno, "bad number"));
        let opt_float = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                float(s).map(Some)
            }
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(lineno, "bad integer"));
        let mut exps = BTreeMap::new();
        for (key, field) in EXP_KEYS.iter().zip(&fields[11..]) {
            if let Some(v) = opt_float(field)? {
                exps.insert(key.to_string(), v);
            }
        }
        records.push(SweepRecord {
            n: int(fields[0])?,
            num_words: if fields[1].is_empty() { None } else { Some(int(fields[1])?) },
            delta_n: float(fields[2])?,
            log_delta_n: float(fields[3])?,
            coalescence_exponent: float(fields[4])?,
            h: float(fields[5])?,
            m_star: opt_float(fields[6])?,
            m_bar: opt_float(fields[7])?,
            ec_mean: opt_float(fields[8])?,
            ec_se: opt_float(fields[9])?,
            trials: int(fields[10])?,
            exps,
        });
    }
    Ok(records)
}

/// JSON companion of a sweep: spectral data and exponent fits over the top
/// half of each quantity's populated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub spectral: SpectralSummary,
    pub config: SweepConfig,
    pub estimates: Vec<ExponentEstimate>,
}

impl SweepSummary {
    pub fn new(chain: &MarkovChain, config: &SweepConfig, records: &[SweepRecord]) -> Result<Self> {
        let mut estimates = Vec::new();
        for quantity in EXP_KEYS {
            let ns: Vec<usize> = records
                .iter()
                .filter(|r| r.exps.contains_key(quantity))
                .map(|r| r.n)
                .collect();
            if let (Some(_), Some(&hi)) = (ns.first(), ns.last()) {
                let lo = ns[ns.len() / 2];
                match estimate_exponent(records, quantity, (lo, hi)) {
                    Ok(e) => estimates.push(e),
                    Err(Error::InsufficientPoints { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(Self {
            spectral: coalescence_exponent(chain)?,
            config: config.clone(),
            estimates,
        })
    }
}

/// Writes `sweep.csv` and `summary.json` into `dir`.
pub fn write_sweep_outputs(
    dir: &Path,
    chain: &MarkovChain,
    config: &SweepConfig,
    records: &[SweepRecord],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, records)?;
    std::fs::write(dir.join("sweep.csv"), csv)?;
    let summary = SweepSummary::new(chain, config, records)?;
    std::fs::write(dir.join("summary.json"), to_json_string(&summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(rows: &[&[f64]]) -> MarkovChain {
        MarkovChain::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_ranges() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(matches!(run_sweep(&c, &SweepConfig::new(0, 3, 1, 0)), Err(Error::Usage(_))));
        assert!(matches!(run_sweep(&c, &SweepConfig::new(4, 3, 1, 0)), Err(Error::Usage(_))));
        assert!(matches!(run_sweep(&c, &SweepConfig::new(1, 3, 0, 0)), Err(Error::Usage(_))));
    }

    #[test]
    fn single_state_sweep() {
        let c = chain(&[&[1.0]]);
        let records = run_sweep(&c, &SweepConfig::new(1, 5, 20, 3)).unwrap();
        for r in &records {
            assert_eq!((r.m_star, r.m_bar, r.ec_mean), (Some(1.0), Some(1.0), Some(1.0)));
            assert_eq!((r.coalescence_exponent, r.h), (0.0, 0.0));
            assert!(r.exps.values().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn caps_degrade_gracefully() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let mut config = SweepConfig::new(1, 6, 10, 1);
        config.product_cap = 256;
        config.walker_cap = 16;
        let records = run_sweep(&c, &config).unwrap();
        assert!(records[3].m_star.is_some() && records[4].m_star.is_none());
        assert!(records[3].ec_mean.is_some() && records[4].ec_mean.is_none());
        assert_eq!(records[4].trials, 0);
        let full = run_sweep(&c, &SweepConfig::new(1, 4, 10, 1)).unwrap();
        assert_eq!(&records[..4], &full[..]);
    }

    fn arb_record() -> impl Strategy<Value = SweepRecord> {
        (
            1usize..50,
            proptest::option::of(1usize..1000),
            -700.0f64..0.0,
            proptest::option::of(1.0f64..1e6),
            proptest::option::of(1.0f64..1e6),
            proptest::option::of((1.0f64..1e6, 0.0f64..10.0)),
            0.0f64..2.0,
        )
            .prop_map(|(n, words, log_delta, m_star, m_bar, ec, l)| {
                let mut exps = BTreeMap::new();
                exps.insert("delta".into(), log_delta / n as f64);
                if let Some(m) = m_star {
                    exps.insert("m_star".into(), m.ln() / n as f64);
                }
                if let Some(m) = m_bar {
                    exps.insert("m_bar".into(), m.ln() / n as f64);
                }
                if let Some((mean, _)) = ec {
                    exps.insert("ec_mean".into(), mean.ln() / n as f64);
                }
                SweepRecord {
                    n,
                    num_words: words,
                    delta_n: log_delta.exp(),
                    log_delta_n: log_delta,
                    coalescence_exponent: l,
                    h: l * 1.5,
                    m_star,
                    m_bar,
                    ec_mean: ec.map(|e| e.0),
                    ec_se: ec.map(|e| e.1),
                    trials: if ec.is_some() { 100 } else { 0 },
                    exps,
                }
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(records in proptest::collection::vec(arb_record(), 0..8)) {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &records).unwrap();
            let back = read_sweep_csv(std::io::Cursor::new(buf)).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
