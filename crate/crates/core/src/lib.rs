//! A supervised, accuracy-based learning classifier system (UCS) with
//! pluggable parent selection: roulette wheel, tournament, lexicase and
//! batch-lexicase.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the parallel
//! experiment runner and the command-line tool live in the `ucs` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bits;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod model;
pub mod problems;
pub mod selection;

pub use bits::BitString;
pub use config::{CoverTrigger, FinalPick, UcsConfig, ZeroMatchPolicy};
pub use engine::{MatchResult, Population, Ucs};
pub use error::{Error, Result};
pub use model::{Classifier, Dataset, Sample, TernaryCondition, TernarySymbol};
pub use problems::ProblemSpec;
pub use selection::{CandidateView, SelectionStrategy};

/// The random generator used for every trial. Seeded explicitly so runs
/// are reproducible bit for bit.
pub type TrialRng = rand_chacha::ChaCha8Rng;

/// Builds a [`TrialRng`] from a 64-bit seed.
pub fn trial_rng(seed: u64) -> TrialRng {
    use rand::SeedableRng;
    TrialRng::seed_from_u64(seed)
}
