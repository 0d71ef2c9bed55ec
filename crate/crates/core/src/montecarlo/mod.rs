//! Seeded simulation of meeting, coalescence, recurrence and waiting times.
//!
//! Every process is realized through base-chain trajectories observed through
//! sliding windows of length `n`. Time 1 is the initial configuration.

mod coalesce;
mod rng;
mod sampler;
mod stats;
mod tail;
mod walk;

pub use coalesce::{
    simulate_coalescence, CoalescenceRun, CoalescenceSim, MergeEvent, PairTimes,
    DEFAULT_WALKER_CAP,
};
pub use rng::{run_trials, RngSpec, TrialRng};
pub use sampler::ChainSampler;
pub use stats::{write_trial_csv, Summary, TrialRow};
pub use tail::{tail_profile, TailPoint, TailReport, DKW_CONFIDENCE};
pub use walk::{
    sample_meeting_time, sample_meeting_times_nested, sample_recurrence_time,
    sample_waiting_time, MeetingInit,
};

/// Steps after which a simulation is declared defective.
pub const SAFETY_HORIZON: u64 = 1_000_000_000;
