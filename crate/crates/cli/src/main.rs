//! `blockwalk` command-line driver.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use blockwalk::exact::{meeting_time_table_for, DEFAULT_PRODUCT_CAP};
use blockwalk::harness::{run_sweep, theorem_report, write_sweep_outputs, ReportConfig, SweepConfig};
use blockwalk::montecarlo::{
    run_trials, sample_meeting_time, write_trial_csv, ChainSampler, CoalescenceSim, MeetingInit,
    Summary, TrialRow, DEFAULT_WALKER_CAP,
};
use blockwalk::nblock::{log_delta_series, DEFAULT_WORD_CAP};
use blockwalk::numfmt::{sig17, to_json_string};
use blockwalk::spectral::coalescence_exponent;
use blockwalk::{Error, MarkovChain, NBlockChain, Result};

#[derive(Parser)]
#[command(name = "blockwalk", version, about = "Coalescence and meeting times on n-block Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the spectral summary of a chain as JSON.
    Analyze { chain: PathBuf },
    /// Build the n-block chain and print its size and checks.
    Nblock {
        chain: PathBuf,
        #[arg(long)]
        n: usize,
        /// Write the n-block chain in the input chain format.
        #[arg(long)]
        export: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WORD_CAP)]
        word_cap: usize,
    },
    /// Print `n,delta_n,log_delta_n` for n = 1..=n-max.
    Delta {
        chain: PathBuf,
        #[arg(long)]
        n_max: usize,
    },
    /// Meeting times, exact or simulated.
    Meet(MeetArgs),
    /// Simulate coalescence of one walker per n-block.
    Coalesce(CoalesceArgs),
    /// Exact and simulated quantities over a range of n.
    Sweep {
        chain: PathBuf,
        #[arg(long)]
        n_lo: usize,
        #[arg(long)]
        n_hi: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PRODUCT_CAP)]
        product_cap: usize,
        #[arg(long, default_value_t = DEFAULT_WALKER_CAP)]
        walker_cap: usize,
    },
    /// Run every finite-n check and print a JSON report.
    Report {
        chain: PathBuf,
        /// JSON config; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MeetArgs {
    chain: PathBuf,
    #[arg(long)]
    n: usize,
    /// Solve the linear system for every pair of blocks (default).
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Sample meeting times from stationary starts.
    #[arg(long)]
    mc: bool,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed pair of initial blocks, e.g. `--pair 0-1 1-0`.
    #[arg(long, num_args = 2, value_names = ["U", "V"], requires = "mc")]
    pair: Option<Vec<String>>,
    /// CSV of the full table (exact) or of every trial (Monte Carlo).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PRODUCT_CAP)]
    product_cap: usize,
}

#[derive(Args)]
struct CoalesceArgs {
    chain: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also record pairwise meeting times and report their maximum.
    #[arg(long)]
    record_pairs: bool,
    /// CSV of every trial.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WALKER_CAP)]
    walker_cap: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_cap_or_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn print(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn write_file(path: &PathBuf, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze { chain } => {
            let chain = MarkovChain::from_path(&chain)?;
            print(&to_json_string(&coalescence_exponent(&chain)?)?)
        }
        Command::Nblock { chain, n, export, word_cap } => {
            let chain = MarkovChain::from_path(&chain)?;
            let nb = NBlockChain::build(&chain, n, word_cap)?;
            if let Some(path) = export {
                std::fs::write(path, to_json_string(&nb.to_chain_file())?)?;
            }
            print(&to_json_string(&json!({
                "n": n,
                "num_words": nb.len(),
                "stationarity_residual": nb.stationarity_residual(),
                "max_row_defect": nb.max_row_defect(),
            }))?)
        }
        Command::Delta { chain, n_max } => {
            if n_max == 0 {
                return Err(Error::Usage("--n-max must be at least 1".into()));
            }
            let chain = MarkovChain::from_path(&chain)?;
            let mut text = String::from("n,delta_n,log_delta_n\n");
            for (i, log) in log_delta_series(&chain, n_max).into_iter().enumerate() {
                text.push_str(&format!("{},{},{}\n", i + 1, sig17(log.exp()), sig17(log)));
            }
            print(&text)
        }
        Command::Meet(args) => meet(args),
        Command::Coalesce(args) => coalesce(args),
        Command::Sweep { chain, n_lo, n_hi, trials, seed, out, product_cap, walker_cap } => {
            let chain = MarkovChain::from_path(&chain)?;
            let config = SweepConfig {
                product_cap,
                walker_cap,
                ..SweepConfig::new(n_lo, n_hi, trials, seed)
            };
            let records = run_sweep(&chain, &config)?;
            write_sweep_outputs(&out, &chain, &config, &records)
        }
        Command::Report { chain, config } => {
            let chain = MarkovChain::from_path(&chain)?;
            let config: ReportConfig = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
                    .map_err(|e| Error::Usage(format!("bad report config: {e}")))?,
                None => ReportConfig::default(),
            };
            print(&to_json_string(&theorem_report(&chain, &config)?)?)
        }
    }
}

fn meet(args: MeetArgs) -> Result<()> {
    let chain = MarkovChain::from_path(&args.chain)?;
    if args.n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    if !args.mc {
        let table = meeting_time_table_for(&chain, args.n, args.product_cap)?;
        if let Some(path) = &args.out {
            write_file(path, |w| table.write_csv(w))?;
        }
        return print(&to_json_string(&table.summary(&chain))?);
    }

    if args.trials == 0 {
        return Err(Error::Usage("--trials must be at least 1".into()));
    }
    let init = match &args.pair {
        Some(p) => MeetingInit::Pair(
            blockwalk::Word::parse(&chain, &p[0])?,
            blockwalk::Word::parse(&chain, &p[1])?,
        ),
        None => MeetingInit::Stationary,
    };
    let sampler = ChainSampler::new(&chain);
    let times = run_trials(args.seed, 0, args.trials, |_, rng| {
        sample_meeting_time(&sampler, args.n, &init, rng)
    })?;
    if let Some(path) = &args.out {
        let rows = trial_rows(&times, args.n, "meeting_time", args.seed);
        write_file(path, |w| write_trial_csv(w, &rows))?;
    }
    let values: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    print(&to_json_string(&json!({
        "n": args.n,
        "seed": args.seed,
        "meeting_time": Summary::from_samples(&values),
    }))?)
}

fn coalesce(args: CoalesceArgs) -> Result<()> {
    let chain = MarkovChain::from_path(&args.chain)?;
    if args.n == 0 || args.trials == 0 {
        return Err(Error::Usage("--n and --trials must be at least 1".into()));
    }
    let sim = CoalescenceSim::new(&chain, args.n, args.walker_cap)?;
    let runs = run_trials(args.seed, 0, args.trials, |_, rng| {
        let run = sim.run(rng, args.record_pairs)?;
        let pair_max = run.pair_meeting_times.as_ref().map(|p| p.max());
        Ok((run.coalescence_time, run.merge_events.len(), pair_max))
    })?;
    let times: Vec<u64> = runs.iter().map(|r| r.0).collect();
    if let Some(path) = &args.out {
        let mut rows = trial_rows(&times, args.n, "coalescence_time", args.seed);
        if args.record_pairs {
            let pair_max: Vec<u64> = runs.iter().map(|r| r.2.unwrap_or(0)).collect();
            rows.extend(trial_rows(&pair_max, args.n, "max_pair_meeting_time", args.seed));
        }
        write_file(path, |w| write_trial_csv(w, &rows))?;
    }
    let values: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let log_rates: Vec<f64> = times.iter().map(|&t| (t as f64).ln() / args.n as f64).collect();
    let mut report = json!({
        "n": args.n,
        "seed": args.seed,
        "num_walkers": sim.num_walkers(),
        "merge_events_per_run": runs.first().map(|r| r.1),
        "coalescence_time": Summary::from_samples(&values),
        "log_rate": Summary::from_samples(&log_rates),
    });
    if args.record_pairs {
        let consistent = runs.iter().all(|r| r.2.is_some_and(|m| m <= r.0));
        report["pairs_within_coalescence_time"] = json!(consistent);
    }
    print(&to_json_string(&report)?)
}

fn trial_rows(values: &[u64], n: usize, statistic: &str, seed: u64) -> Vec<TrialRow> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| TrialRow {
            trial_id: i,
            n,
            statistic: statistic.into(),
            value: v as f64,
            seed,
            stream: i as u64,
        })
        .collect()
}
