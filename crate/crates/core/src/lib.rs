//! Deterministic, seedable simulator for an authority-certified anonymous
//! quantum key distribution (AQKD) protocol and the four-phase election
//! scheme built on top of it.
//!
//! Everything "quantum" in this crate is conjugate coding: a qubit is a
//! (basis, value) pair that can be measured exactly once. That model
//! reproduces every event the protocols need (prepare in a basis, measure
//! in a basis, intercept-resend) while keeping the simulator exact.
//!
//! The crate is organized as:
//! - [`bits`], [`otp`], [`ecc`], [`credentials`]: classical primitives
//! - [`qubit`]: conjugate-coded qubits and lossy/noisy quantum channels
//! - [`aqkd`]: the three-role AQKD state machines (user, administrator Bob,
//!   counter Charlie) with error-correction reconciliation
//! - [`election`]: the four-phase election orchestrator
//! - [`adversary`]: pluggable attacker strategies
//! - [`harness`]: scenario runner, Monte-Carlo statistics, transcript
//!   verification
//!
//! All randomness flows through explicit [`SimRng`] handles; identical seed
//! and configuration produce byte-identical transcripts.

pub mod adversary;
pub mod aqkd;
pub mod bits;
pub mod credentials;
pub mod ecc;
pub mod election;
pub mod harness;
pub mod otp;
pub mod qubit;
pub mod transcript;

use rand::SeedableRng;

pub use bits::BitString;

/// The simulator's random source. ChaCha keeps streams portable across
/// platforms, which the reproducibility contract depends on.
pub type SimRng = rand_chacha::ChaCha12Rng;

/// Root rng for a run.
pub fn seed_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent rng stream for one trial of a multi-trial run. Trials may
/// execute in any order; each owns a distinct stream derived from
/// (seed, trial index).
pub fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    // domain separation from seed_rng, which zero-pads
    key[16..24].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    SimRng::from_seed(key)
}

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
