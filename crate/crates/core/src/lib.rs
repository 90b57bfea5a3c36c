//! Byzantine-robust aggregation for federated learning.
//!
//! The centerpiece is an adaptive Bayesian aggregator that estimates,
//! per round, each client's probability of being benign together with
//! the contamination level, and averages updates under those posterior
//! weights. Around it sit the classical robust baselines (coordinate
//! median, trimmed mean, geometric median, Multi-Krum, federated
//! averaging), four canonical attacks (sign flip, random update, label
//! flip, backdoor), an exhaustive subset oracle with an executable
//! robustness certificate, and a deterministic federated simulation
//! loop for desk-scale experiments.
//!
//! Determinism is a contract: all randomness flows through seeded,
//! stream-keyed generators and all reductions run in a fixed order, so
//! identical configurations reproduce identical results bit for bit.

// Validation guards use `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod baselines;
pub mod bra;
pub mod error;
pub mod fedsim;
pub mod oracle;
pub mod rng;
pub mod vector;

pub use bra::{aggregate_bra, aggregate_bra_traced, AggregationResult, BraSettings, BraTrace};
pub use error::{Error, Result};
pub use rng::DetRng;
pub use vector::{ClientUpdate, ParamVector};
