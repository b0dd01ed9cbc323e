//! Monte Carlo pricing of discretely monitored Asian options on geometric
//! Brownian motion using the Karhunen-Loève (Wiener series) expansion of the
//! driving Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! - [`klcore`]: the Brownian-motion KL basis, Wiener-series evaluation
//!   (direct and Chebyshev/Clenshaw) and analytic truncation tails.
//! - [`process`]: GBM parameters, coefficient sampling, sequential path
//!   generation and the time-domain rejection sampler.
//! - [`pricing`]: payoffs and the baseline, KL-nested, sub-sampling and
//!   closed-form geometric estimators.
//! - [`analysis`]: probes that measure every error bound empirically and
//!   emit CSV/JSON reports.
//! - [`qsim`]: a small statevector simulator for the amplitude encodings.
//!
//! Randomness comes from counter-based per-path streams ([`rng`]) so every
//! result is a pure function of the seed, independent of thread count.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod golden;
pub mod klcore;
pub mod pricing;
pub mod process;
pub mod qsim;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use klcore::{KlBasis, TruncationReport, WienerCoefficients};
pub use pricing::{AsianPayoffSpec, Estimate, Method};
pub use process::{GbmParams, GmaxBound, TimeGrid};
pub use rng::StreamFamily;
