//! Dense pure-state simulator: states, gates, circuits and sampling.

mod circuit;
mod gate;
mod state;

pub use circuit::{apply_circuit, Circuit, MAX_DENSE_QUBITS};
pub use gate::{controlled, pauli_rotation, Angle, Gate, GateKind};
pub use state::{bitstring, multinomial, parse_bitstring, QuantumState, MAX_STATE_QUBITS};

#[cfg(test)]
mod tests;
