//! Coalescing random walks and meeting times on n-block Markov chains.
//!
//! A finite mixing chain `(V, P)` induces, for every block length `n`, a chain
//! on the positive-probability words of length `n` that moves by shifting one
//! symbol. The growth rate of meeting and coalescence times along that
//! sequence is governed by `L = -log λ`, where `λ` is the Perron eigenvalue of
//! the entrywise square `Q(u, v) = P(u, v)²`.
//!
//! The crate is organised as:
//!
//! * [`chain`] - validated chains, stationary distribution, entropy, JSON I/O.
//! * [`spectral`] - Perron pairs, the coalescence exponent and the
//!   maximal-entropy (Parry) test.
//! * [`nblock`] - word measures, explicit n-block chains and `Δ_n`.
//! * [`exact`] - exact expected meeting times from the product chain.
//! * [`montecarlo`] - seeded simulation of meeting, coalescence, recurrence
//!   and waiting times.
//! * [`harness`] - sweeps over `n`, exponent regression and theorem reports.
//!
//! All logarithms are natural; entropies and exponents are in nats.

pub mod chain;
pub mod error;
pub mod exact;
pub mod harness;
pub mod montecarlo;
pub mod nblock;
pub mod numfmt;
pub mod spectral;
mod linalg;
mod union_find;

pub use chain::MarkovChain;
pub use error::{Error, MixingWitness, Result};
pub use exact::{MeetingTimeTable, SandwichReport, SandwichRow};
pub use nblock::{NBlockChain, Word};
pub use spectral::SpectralSummary;
