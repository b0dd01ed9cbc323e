use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register width accepted; `2²⁶` amplitudes take 1 GiB.
pub const MAX_QUBITS: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub coeff_qubits: usize,
    pub n_coeff_registers: usize,
    pub time_qubits: usize,
    pub value_qubits: usize,
    pub ancilla_count: usize,
}

/// Register contents of one basis state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisFields {
    pub coeffs: Vec<usize>,
    pub time: usize,
    pub value: usize,
    pub ancillas: usize,
}

impl RegisterLayout {
    pub fn new(
        coeff_qubits: usize,
        n_coeff_registers: usize,
        time_qubits: usize,
        value_qubits: usize,
        ancilla_count: usize,
    ) -> Result<Self> {
        let layout = Self {
            coeff_qubits,
            n_coeff_registers,
            time_qubits,
            value_qubits,
            ancilla_count,
        };
        if n_coeff_registers > 0 && coeff_qubits == 0 {
            return Err(Error::invalid("coeff_qubits", 0.0, "coefficient registers need width >= 1"));
        }
        if layout.total_qubits() > MAX_QUBITS {
            return Err(Error::ResourceGuard(format!(
                "layout needs {} qubits, limit is {MAX_QUBITS}",
                layout.total_qubits()
            )));
        }
        Ok(layout)
    }

    /// Time register width `⌈log₂T⌉`; zero for `T = 1`.
    pub fn time_width(monitoring: usize) -> usize {
        monitoring.next_power_of_two().trailing_zeros() as usize
    }

    pub fn total_qubits(&self) -> usize {
        self.coeff_qubits * self.n_coeff_registers + self.time_qubits + self.value_qubits + self.ancilla_count
    }

    pub fn dim(&self) -> usize {
        1usize << self.total_qubits()
    }

    pub fn coeff_width(&self) -> usize {
        self.coeff_qubits * self.n_coeff_registers
    }

    fn time_offset(&self) -> usize {
        self.coeff_width()
    }

    fn value_offset(&self) -> usize {
        self.time_offset() + self.time_qubits
    }

    pub(crate) fn ancilla_offset(&self) -> usize {
        self.value_offset() + self.value_qubits
    }

    /// Same registers with `extra` more ancillas on top.
    pub fn with_extra_ancillas(&self, extra: usize) -> Result<Self> {
        Self::new(
            self.coeff_qubits,
            self.n_coeff_registers,
            self.time_qubits,
            self.value_qubits,
            self.ancilla_count + extra,
        )
    }

    pub fn encode(&self, f: &BasisFields) -> usize {
        debug_assert_eq!(f.coeffs.len(), self.n_coeff_registers);
        let mut idx = 0usize;
        for (r, &c) in f.coeffs.iter().enumerate() {
            idx |= c << (r * self.coeff_qubits);
        }
        idx | f.time << self.time_offset() | f.value << self.value_offset() | f.ancillas << self.ancilla_offset()
    }

    pub fn decode(&self, index: usize) -> BasisFields {
        let field = |off: usize, width: usize| (index >> off) & ((1usize << width) - 1);
        BasisFields {
            coeffs: (0..self.n_coeff_registers)
                .map(|r| field(r * self.coeff_qubits, self.coeff_qubits))
                .collect(),
            time: field(self.time_offset(), self.time_qubits),
            value: field(self.value_offset(), self.value_qubits),
            ancillas: field(self.ancilla_offset(), self.ancilla_count),
        }
    }

    /// Joint coefficient code, the low `coeff_width()` bits of the index.
    pub fn coeff_block(&self, index: usize) -> usize {
        index & ((1usize << self.coeff_width()) - 1)
    }
}
