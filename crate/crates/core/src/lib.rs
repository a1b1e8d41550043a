//! Vote-based preference optimization on exact tabular policies.
//!
//! The crate turns per-pair vote counts into target preference
//! probabilities with a Beta-Binomial posterior mean, and trains tabular
//! softmax policies under a family of preference losses: DPO and its
//! label-smoothed (cDPO) and noise-debiased (rDPO) variants, IPO, and their
//! vote-aware counterparts VDPO and VIPO. Everything is small enough to be
//! exact, so losses, gradients, margins and win rates can be checked
//! against closed forms and brute-force oracles.
//!
//! ```
//! use vpo::vote_model::{mmse_estimate, EstimatorConfig, VoteCounts};
//!
//! let votes = VoteCounts::new(101.0, 9.0).unwrap();
//! let p = mmse_estimate(votes, EstimatorConfig::default());
//! assert!((p.value() - 0.9107).abs() < 1e-4);
//! ```
//!
//! Modules:
//! - [`vote_model`]: prior, posterior, estimator and its numerical oracles
//! - [`policy`]: tabular softmax policies and the implicit reward margin
//! - [`losses`]: loss values, margin derivatives and logit gradients
//! - [`data`]: synthetic generation, JSONL ingestion, checkpoints
//! - [`trainer`]: SGD / RMSprop training with margin traces
//! - [`eval`]: win rates, divergence classification, gap analysis, c ablation
//! - [`cli`]: the `vpo` command-line front end

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod numeric;
pub mod policy;
pub mod trainer;
pub mod vote_model;

pub use error::{Result, VpoError};
