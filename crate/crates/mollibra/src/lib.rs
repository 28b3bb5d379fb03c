//! Budget-aware genetic molecular optimization.
//!
//! A GA proposes candidate molecules; before any expensive oracle call the
//! candidates are ranked by an ensemble of Tanimoto-kernel Gaussian
//! processes over several fingerprint representations, gated against a
//! zero-shot critic whose trustworthiness is tracked by the Spearman
//! correlation with the oracle scores observed so far. The loop spends an
//! exact oracle budget and streams a replayable trajectory.

pub mod bench;
pub mod config;
pub mod critic;
pub mod engine;
pub mod evolve;
pub mod fingerprint;
pub mod molgraph;
pub mod seeds;
pub mod surrogate;
mod util;
