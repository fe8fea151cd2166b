//! Target evolutions: a fixed single step `U` (circuit or dense matrix) and
//! continuous-time propagators `U(t)`.

use crate::error::{Error, Result};
use crate::hamiltonian::{trotter_circuit, PauliSum, TrotterOrder, TrotterSpec};
use crate::linalg::{self, Matrix};
use crate::scalar::{cis, Real};
use crate::statevector::{controlled, Circuit, Gate, QuantumState};

/// The single-step unitary being fast-forwarded.
#[derive(Clone, Debug)]
pub enum StepOperator<T: Real> {
    Circuit(Circuit<T>),
    Dense(Matrix<T>),
}

impl<T: Real> StepOperator<T> {
    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Circuit(c) => c.n_qubits(),
            Self::Dense(m) => m.rows().trailing_zeros() as usize,
        }
    }

    pub fn apply(&self, state: &mut QuantumState<T>, adjoint: bool) -> Result<()> {
        match self {
            Self::Circuit(c) => c.apply(state, &[], adjoint),
            Self::Dense(m) => {
                if adjoint {
                    state.apply_dense(&m.dagger())
                } else {
                    state.apply_dense(m)
                }
            }
        }
    }

    /// Applies `U^power`.
    pub fn apply_power(&self, state: &mut QuantumState<T>, power: usize) -> Result<()> {
        for _ in 0..power {
            self.apply(state, false)?;
        }
        Ok(())
    }

    pub fn dense(&self) -> Result<Matrix<T>> {
        match self {
            Self::Circuit(c) => c.dense_unitary(&[]),
            Self::Dense(m) => Ok(m.clone()),
        }
    }

    /// Gates of the controlled step on an `(n + 1)`-qubit register with the
    /// control on qubit 0 and system qubit `q` moved to `q + 1`.
    pub fn controlled_gates(&self) -> Result<Vec<Gate<T>>> {
        match self {
            Self::Circuit(c) => c
                .gates()
                .iter()
                .map(|g| {
                    let mut targets = vec![0];
                    targets.extend(g.targets().iter().map(|t| t + 1));
                    Gate::unitary(targets, controlled(&g.matrix(&[])?))
                })
                .collect(),
            Self::Dense(m) => {
                let n = self.n_qubits();
                Ok(vec![Gate::unitary((0..=n).collect(), controlled(m))?])
            }
        }
    }

    /// The step as a circuit; a dense step becomes one UNITARY gate.
    pub fn circuit(&self) -> Result<Circuit<T>> {
        match self {
            Self::Circuit(c) => Ok(c.clone()),
            Self::Dense(m) => {
                let n = self.n_qubits();
                Circuit::from_gates(n, 0, vec![Gate::unitary((0..n).collect(), m.clone())?])
            }
        }
    }

    pub fn gate_count(&self) -> usize {
        match self {
            Self::Circuit(c) => c.len(),
            Self::Dense(_) => 1,
        }
    }
}

/// `U(t)` for arbitrary real `t`.
#[derive(Clone, Debug)]
pub enum TimeEvolution<T: Real> {
    /// Exact `exp(-iHt)` from a cached eigendecomposition.
    Exact { energies: Vec<T>, vectors: Matrix<T> },
    /// Trotter circuit with `n_substeps` slices of `t / n_substeps`.
    Trotter {
        hamiltonian: PauliSum<T>,
        order: TrotterOrder,
        n_substeps: usize,
    },
}

impl<T: Real> TimeEvolution<T> {
    pub fn exact(h: &PauliSum<T>) -> Result<Self> {
        let (energies, vectors) = linalg::eigh(&h.dense_matrix()?);
        Ok(Self::Exact { energies, vectors })
    }

    pub fn trotter(h: &PauliSum<T>, order: TrotterOrder, n_substeps: usize) -> Result<Self> {
        if n_substeps == 0 {
            return Err(Error::Config("n_substeps must be at least 1".into()));
        }
        Ok(Self::Trotter {
            hamiltonian: h.clone(),
            order,
            n_substeps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Exact { vectors, .. } => vectors.rows().trailing_zeros() as usize,
            Self::Trotter { hamiltonian, .. } => hamiltonian.n_qubits(),
        }
    }

    pub fn apply(&self, state: &mut QuantumState<T>, t: T) -> Result<()> {
        if t == T::zero() {
            return Ok(());
        }
        match self {
            Self::Exact { energies, vectors } => {
                let mut coeffs = vectors.dagger().mul_vec(state.amplitudes());
                for (c, e) in coeffs.iter_mut().zip(energies) {
                    *c *= cis(-*e * t);
                }
                let out = vectors.mul_vec(&coeffs);
                state.amplitudes_mut().copy_from_slice(&out);
                Ok(())
            }
            Self::Trotter {
                hamiltonian,
                order,
                n_substeps,
            } => {
                let spec = TrotterSpec {
                    order: *order,
                    delta_t: t.as_f64(),
                    n_substeps: *n_substeps,
                };
                trotter_circuit(hamiltonian, &spec)?.apply(state, &[], false)
            }
        }
    }

    pub fn dense(&self, t: T) -> Result<Matrix<T>> {
        match self {
            Self::Exact { energies, vectors } => Ok(linalg::propagator_from_eigh(energies, vectors, t)),
            Self::Trotter { .. } => {
                let dim = 1usize << self.n_qubits();
                let mut cols = Vec::with_capacity(dim);
                for j in 0..dim {
                    let mut s = QuantumState::basis_index(self.n_qubits(), j)?;
                    self.apply(&mut s, t)?;
                    cols.push(s.into_amplitudes());
                }
                Ok(Matrix::from_columns(&cols))
            }
        }
    }
}
