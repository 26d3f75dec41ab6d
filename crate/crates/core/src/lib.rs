//! Streaming score-based change-point detection.
//!
//! This crate implements an online change-point detector built from two
//! forecasters run in lockstep over a stream of quadratic losses:
//!
//! * an **exponentially weighted average (EW) forecaster** that predicts the
//!   mean of a Gaussian posterior over the whole history ([`forecasters::EwState`]),
//! * a **fixed share (FS) forecaster** that hedges over an infinite pool of
//!   experts with geometric switch times, so it can track a drifting optimum
//!   ([`forecasters::FsState`]).
//!
//! The per-observation losses come from score matching: for a feature map
//! `Ψ` the loss `ℓ_t(θ) = ½ θᵀA_tθ − b_tᵀθ` with `A_t = ∇Ψ(X_t)∇Ψ(X_t)ᵀ` and
//! `b_t = −ΔΨ(X_t)` is an unbiased estimate (up to a θ-free constant) of the
//! Fisher divergence between the data density and the model with score
//! `∇Ψ(x)ᵀθ` ([`scoreloss`]). Before a change the EW forecaster tracks the FS
//! forecaster closely; after a change the FS forecaster adapts while EW is
//! anchored to stale history, so the cumulative-loss gap
//! `Ŝ_t = L̂_t^EW − L̂_t^FS` grows. The detector ([`detector`]) raises an alarm
//! when `Ŝ_t` exceeds a threshold, which can be calibrated from alarm-free
//! reference streams with a `1/(J+1)` false-alarm guarantee ([`calibrate`]).
//!
//! Supporting modules: [`quadloss`] holds the quadratic-loss algebra and the
//! closed-form Gaussian posterior quantities every forecaster consumes;
//! [`regret`] evaluates empirical regret against the known upper bounds as a
//! diagnostic; [`oracle`] contains independent verification engines
//! (1-D quadrature, brute-force enumeration of the fixed-share mixture,
//! Monte-Carlo and matrix-identity checks); [`synthetic`] generates the
//! benchmark streams used in tests and examples.
//!
//! All mixture and partition-function arithmetic is carried out in the log
//! domain; the partition values themselves are never materialized.

pub mod calibrate;
pub mod detector;
pub mod forecasters;
mod logsum;
pub mod oracle;
pub mod quadloss;
pub mod regret;
pub mod scoreloss;
pub mod synthetic;

/// Errors shared by every module in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A vector or matrix had a different dimension than the receiver expects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A segment index or round index lies outside the stored history.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    /// An argument violates a documented precondition (non-positive scale,
    /// unsorted list, malformed partition, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An operation was called on a state that cannot serve it (for example,
    /// paired forecasters that have seen different numbers of rounds).
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// Floating-point computation left the representable/finite range or an
    /// internal numerical sanity check failed.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    /// A verification routine was invoked on an instance that does not
    /// satisfy the hypothesis it is meant to check, making the check vacuous.
    #[error("precondition failure: {0}")]
    PreconditionFailure(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
