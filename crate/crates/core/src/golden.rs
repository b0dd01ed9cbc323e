//! Seed-pinned reference price for the golden parameter set.
//!
//! `data/golden.json` is produced by `klmc golden` (see
//! `scripts/regen-golden.sh`) and never edited by hand.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pricing::{price_baseline, AsianPayoffSpec};
use crate::process::GbmParams;

pub const GOLDEN_S0: f64 = 100.0;
pub const GOLDEN_STRIKE: f64 = 100.0;
pub const GOLDEN_MU: f64 = 0.05;
pub const GOLDEN_SIGMA: f64 = 0.2;
pub const GOLDEN_MONITORING: usize = 64;
pub const GOLDEN_EPSILON: f64 = 0.05;
pub const GOLDEN_PATHS: u64 = 10_000_000;
pub const GOLDEN_SEED: u64 = 20_250_101;

const GOLDEN_JSON: &str = include_str!("../data/golden.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub strike: f64,
    pub monitoring: usize,
    pub n_paths: u64,
    pub seed: u64,
    pub value: f64,
    pub std_error: f64,
}

pub fn golden_params() -> GbmParams {
    GbmParams::new(GOLDEN_S0, GOLDEN_MU, GOLDEN_SIGMA).expect("valid constants")
}

pub fn golden_spec() -> AsianPayoffSpec {
    AsianPayoffSpec::uniform(GOLDEN_STRIKE, GOLDEN_MONITORING).expect("valid constants")
}

/// Runs the baseline estimator that defines the golden value.
pub fn compute_golden(n_paths: u64, seed: u64) -> Result<GoldenRecord> {
    let p = golden_params();
    let est = price_baseline(&p, &golden_spec(), n_paths, seed)?;
    Ok(GoldenRecord {
        s0: p.s0,
        mu: p.mu,
        sigma: p.sigma,
        strike: GOLDEN_STRIKE,
        monitoring: GOLDEN_MONITORING,
        n_paths,
        seed,
        value: est.value,
        std_error: est.std_error,
    })
}

/// The recorded golden value.
pub fn golden_record() -> Result<GoldenRecord> {
    Ok(serde_json::from_str(GOLDEN_JSON)?)
}
