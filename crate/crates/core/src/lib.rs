//! Desk-scale simulation and rate analysis of attack detection in two-copy
//! echo-assisted communication.
//!
//! A transmitted BPSK frame arrives as two noisy copies, one of which an
//! adversary may have sign-flipped symbol-by-symbol. The crate simulates the
//! channel, computes the achievable rates of detect-then-combine receivers
//! (Genie-aided, first-order approximation, exact small-n), implements two
//! practical attack detectors (a k-nearest-neighbour mutual-information
//! detector and a small neural classifier trained from scratch), and measures
//! their operating points and performance profiles in reproducible
//! Monte-Carlo experiments.

pub mod channel;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod infotheory;
pub mod rng;

pub use channel::{ChannelParams, CombinedFrame, FlipMask, Frame, ReceivedPair};
pub use error::{Error, Result};
