//! Shared fixtures for the criterion benches.

use klmc_core::process::{sample_coefficients, DEFAULT_CLIP};
use klmc_core::{StreamFamily, WienerCoefficients};

/// Seeded coefficient vector of truncation `l`.
pub fn coefficients(l: usize) -> WienerCoefficients {
    let fam = StreamFamily::new(0xbe4c, "bench");
    sample_coefficients(&mut fam.stream(l as u64), l, DEFAULT_CLIP)
        .expect("valid clip")
        .0
}
