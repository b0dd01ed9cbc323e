//! Statevector emulation of the amplitude encodings.
//!
//! Registers are packed little-endian into the basis index: coefficient
//! registers first (register 0 in the lowest bits), then the time register,
//! the value register and finally the ancillas. Amplitudes are initialized
//! directly rather than through gate sequences.

mod amplitude;
mod codec;
mod encodings;
mod layout;
mod state;

pub use amplitude::{mle_amplitude_estimate, oracle_calls, proportion_estimate};
pub use codec::{Encoded, FixedPointCodec};
pub use encodings::{
    attach_value_rotation, build_quantized_subsample_state, build_semidigital_state,
    classical_semidigital_mean, classical_subsample_payoff, gaussian_grid_value,
    nested_payoff_probability, prepare_gaussian_register, subsample_gmax_bound,
};
pub use layout::{BasisFields, RegisterLayout, MAX_QUBITS};
pub use state::{exact_success_probability, AncillaPattern, StateVector};
