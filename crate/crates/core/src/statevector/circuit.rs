use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::gate::{Angle, Gate, GateKind};
use super::state::QuantumState;

pub const MAX_DENSE_QUBITS: usize = 12;

/// Ordered gate list over a shared parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit<T: Real> {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<Gate<T>>,
}

impl<T: Real> Circuit<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self::with_params(n_qubits, 0)
    }

    pub fn with_params(n_qubits: usize, n_params: usize) -> Self {
        Self {
            n_qubits,
            n_params,
            gates: Vec::new(),
        }
    }

    /// Builds from parts, validating every gate.
    pub fn from_gates(n_qubits: usize, n_params: usize, gates: Vec<Gate<T>>) -> Result<Self> {
        let mut c = Self::with_params(n_qubits, n_params);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate<T>] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Reserves a fresh parameter slot.
    pub fn add_param(&mut self) -> usize {
        self.n_params += 1;
        self.n_params - 1
    }

    pub fn push(&mut self, gate: Gate<T>) -> Result<()> {
        self.check(&gate)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn insert(&mut self, position: usize, gate: Gate<T>) -> Result<()> {
        if position > self.gates.len() {
            return Err(Error::Index(format!("insert position {position} beyond {} gates", self.gates.len())));
        }
        self.check(&gate)?;
        self.gates.insert(position, gate);
        Ok(())
    }

    /// Appends every gate of `other` (which must share this parameter space).
    pub fn extend(&mut self, other: &Circuit<T>) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Shape("appending a circuit of different width".into()));
        }
        for g in &other.gates {
            self.push(g.clone())?;
        }
        Ok(())
    }

    pub(crate) fn gates_mut(&mut self) -> &mut Vec<Gate<T>> {
        &mut self.gates
    }

    pub(crate) fn set_n_params(&mut self, n: usize) {
        self.n_params = n;
    }

    fn check(&self, gate: &Gate<T>) -> Result<()> {
        if let Some(bad) = gate.targets().iter().find(|&&t| t >= self.n_qubits) {
            return Err(Error::Shape(format!("target qubit {bad} on a {}-qubit circuit", self.n_qubits)));
        }
        if let Some(i) = gate.param_index() {
            if i >= self.n_params {
                return Err(Error::Binding(format!("parameter index {i} beyond {} parameters", self.n_params)));
            }
        }
        Ok(())
    }

    /// Applies the gates in order, or their adjoints in reverse order.
    pub fn apply(&self, state: &mut QuantumState<T>, params: &[T], adjoint: bool) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "{}-qubit circuit on a {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        if params.len() < self.n_params {
            return Err(Error::Binding(format!(
                "circuit has {} parameters, {} supplied",
                self.n_params,
                params.len()
            )));
        }
        if adjoint {
            for g in self.gates.iter().rev() {
                g.apply(state, params, true)?;
            }
        } else {
            for g in &self.gates {
                g.apply(state, params, false)?;
            }
        }
        Ok(())
    }

    /// The full `2^n x 2^n` unitary, built column by column.
    pub fn dense_unitary(&self, params: &[T]) -> Result<Matrix<T>> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::Size(format!(
                "dense unitary limited to {MAX_DENSE_QUBITS} qubits, circuit has {}",
                self.n_qubits
            )));
        }
        let dim = 1usize << self.n_qubits;
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut s = QuantumState::basis_index(self.n_qubits, j)?;
            self.apply(&mut s, params, false)?;
            cols.push(s.into_amplitudes());
        }
        Ok(Matrix::from_columns(&cols))
    }

    /// Bound, reverse-ordered adjoint as a standalone circuit.
    pub fn adjoint(&self, params: &[T]) -> Result<Circuit<T>> {
        let bound = self.bind(params)?;
        let gates = bound
            .gates
            .iter()
            .rev()
            .map(|g| match (g.kind(), g.fixed_angle()) {
                (GateKind::UNITARY, _) => Gate::unitary(g.targets().to_vec(), g.matrix_at(T::zero()).dagger()),
                (_, Some(a)) => {
                    let mut h = g.clone();
                    h.set_angle(Angle::Fixed(-a));
                    Ok(h)
                }
                _ => Ok(g.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Circuit {
            n_qubits: self.n_qubits,
            n_params: 0,
            gates,
        })
    }

    /// Circuit with every parameter replaced by its bound value.
    pub fn bind(&self, params: &[T]) -> Result<Circuit<T>> {
        let mut out = Circuit::new(self.n_qubits);
        for g in &self.gates {
            let mut h = g.clone();
            if let Some(a) = g.resolve(params)? {
                h.set_angle(Angle::Fixed(a));
            }
            out.gates.push(h);
        }
        Ok(out)
    }

    /// Same gates on a wider register, qubit `q` moved to `map(q)`.
    pub fn embed(&self, n_qubits: usize, map: impl Fn(usize) -> usize) -> Result<Circuit<T>> {
        let mut out = Circuit::with_params(n_qubits, self.n_params);
        for g in &self.gates {
            let mut h = g.clone();
            h.remap_targets(&map);
            out.push(h)?;
        }
        Ok(out)
    }

    /// Indices of gates driven by parameter `l`.
    pub fn param_occurrences(&self, l: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.param_index() == Some(l))
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy where gate `index` is replaced by its shifted realization.
    pub fn with_shifted_gate(&self, index: usize, params: &[T], factor: usize, delta: T) -> Result<Circuit<T>> {
        let gate = self
            .gates
            .get(index)
            .ok_or_else(|| Error::Index(format!("gate {index} of {}", self.gates.len())))?;
        let angle = gate
            .resolve(params)?
            .ok_or_else(|| Error::Unsupported(format!("{} carries no angle", gate.kind())))?;
        let replacement = gate.shifted(angle, factor, delta)?;
        let mut gates = Vec::with_capacity(self.gates.len() + 1);
        gates.extend_from_slice(&self.gates[..index]);
        gates.extend(replacement);
        gates.extend_from_slice(&self.gates[index + 1..]);
        Ok(Circuit {
            n_qubits: self.n_qubits,
            n_params: self.n_params,
            gates,
        })
    }

    /// CNOT-equivalent count under standard decompositions.
    pub fn cnot_count(&self) -> usize {
        self.gates.iter().map(|g| g.kind().cnot_cost()).sum()
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }
}

/// Convenience wrapper returning a new state.
pub fn apply_circuit<T: Real>(
    state: &QuantumState<T>,
    circuit: &Circuit<T>,
    params: &[T],
    adjoint: bool,
) -> Result<QuantumState<T>> {
    let mut s = state.clone();
    circuit.apply(&mut s, params, adjoint)?;
    Ok(s)
}
