use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use super::codec::FixedPointCodec;
use super::layout::RegisterLayout;
use crate::error::{Error, Result};

/// Amplitudes over `2^layout.total_qubits()` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    layout: RegisterLayout,
    codec: FixedPointCodec,
    saturations: u64,
}

impl StateVector {
    pub(crate) fn from_parts(
        amplitudes: Vec<Complex64>,
        layout: RegisterLayout,
        codec: FixedPointCodec,
        saturations: u64,
    ) -> Self {
        debug_assert_eq!(amplitudes.len(), layout.dim());
        Self {
            amplitudes,
            layout,
            codec,
            saturations,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    /// Codec of the value register.
    pub fn codec(&self) -> &FixedPointCodec {
        &self.codec
    }

    /// Values that saturated the codec while building the state.
    pub fn saturations(&self) -> u64 {
        self.saturations
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.par_iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Errors unless `|‖ψ‖ − 1| ≤ tol`.
    pub fn check_norm(&self, tol: f64) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > tol {
            return Err(Error::BoundViolated { value: n, bound: 1.0 });
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.par_iter().map(|a| a.norm_sqr()).collect()
    }

    /// Marginal distribution of the joint coefficient code.
    pub fn coefficient_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1usize << self.layout.coeff_width()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            out[self.layout.coeff_block(i)] += a.norm_sqr();
        }
        out
    }

    /// CSV of nonzero basis states: index, register codes, decoded value and
    /// probability.
    pub fn write_probabilities_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["basis", "coeff_codes", "time", "value_code", "value", "ancillas", "probability"])?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let f = self.layout.decode(i);
            let coeffs: Vec<String> = f.coeffs.iter().map(|c| c.to_string()).collect();
            w.write_record([
                i.to_string(),
                coeffs.join(";"),
                f.time.to_string(),
                f.value.to_string(),
                self.codec.decode(f.value).to_string(),
                f.ancillas.to_string(),
                p.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ancilla outcomes `ancillas & mask == value`. An empty mask matches
/// every basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AncillaPattern {
    pub mask: usize,
    pub value: usize,
}

impl AncillaPattern {
    /// Ancilla `bit` measured as `outcome`.
    pub fn single(bit: usize, outcome: bool) -> Self {
        Self {
            mask: 1 << bit,
            value: (outcome as usize) << bit,
        }
    }
}

/// `Σ |ψ_i|²` over basis states whose ancillas match `pattern`.
pub fn exact_success_probability(state: &StateVector, pattern: AncillaPattern) -> Result<f64> {
    let n = state.layout.ancilla_count;
    let full = (1usize << n) - 1;
    if pattern.mask & !full != 0 || pattern.value & !pattern.mask != 0 {
        return Err(Error::invalid(
            "pattern",
            pattern.mask as f64,
            format!("pattern must lie within {n} ancillas"),
        ));
    }
    let off = state.layout.ancilla_offset();
    Ok(state
        .amplitudes
        .par_iter()
        .enumerate()
        .filter(|(i, _)| (i >> off) & pattern.mask == pattern.value)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}
