//! Estimators for high-dimensional single index models trained by plain
//! gradient descent on over-parameterized factorizations.
//!
//! A single index model observes `y = f(<x, beta>) + noise` with an unknown
//! link `f` and a sparse vector or low-rank matrix signal `beta`. The crate
//! covers the full pipeline:
//!
//! * score functions and sampling for the covariate families ([`score`]),
//! * synthetic instance generation ([`simgen`]),
//! * plain and heavy-tail-robust first-moment estimators ([`robust`]),
//! * the over-parameterized gradient descent solvers whose small
//!   initialization acts as implicit regularization ([`optim`]),
//! * data-driven stopping time selection through a held-out kernel
//!   predictor ([`select`]),
//! * evaluation metrics and the soft-threshold l1 baseline ([`metrics`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, the CLI,
//! and the parallel experiment driver live in the companion `sindex-cli`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod error;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod robust;
pub mod score;
pub mod select;
pub mod simgen;

pub use error::{Error, Result};
