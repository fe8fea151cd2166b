use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::Pauli;
use crate::linalg::Matrix;
use crate::scalar::{cis, cone, cplx, czero, Real};

use super::state::QuantumState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    RX,
    RY,
    RZ,
    RZZ,
    CNOT,
    H,
    X,
    GIVENS,
    PHASE,
    UNITARY,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, Self::RX | Self::RY | Self::RZ | Self::RZZ | Self::GIVENS | Self::PHASE)
    }

    /// Number of target qubits, `None` for arbitrary unitaries.
    pub fn arity(self) -> Option<usize> {
        match self {
            Self::RX | Self::RY | Self::RZ | Self::H | Self::X | Self::PHASE => Some(1),
            Self::RZZ | Self::CNOT | Self::GIVENS => Some(2),
            Self::UNITARY => None,
        }
    }

    /// CNOTs needed by a standard decomposition.
    pub fn cnot_cost(self) -> usize {
        match self {
            Self::CNOT => 1,
            Self::RZZ | Self::GIVENS => 2,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RX => "RX",
            Self::RY => "RY",
            Self::RZ => "RZ",
            Self::RZZ => "RZZ",
            Self::CNOT => "CNOT",
            Self::H => "H",
            Self::X => "X",
            Self::GIVENS => "GIVENS",
            Self::PHASE => "PHASE",
            Self::UNITARY => "UNITARY",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "RX" => Self::RX,
            "RY" => Self::RY,
            "RZ" => Self::RZ,
            "RZZ" => Self::RZZ,
            "CNOT" | "CX" => Self::CNOT,
            "H" => Self::H,
            "X" => Self::X,
            "GIVENS" | "G" => Self::GIVENS,
            "PHASE" | "P" => Self::PHASE,
            "UNITARY" => Self::UNITARY,
            other => return Err(Error::Parse(format!("unknown gate kind {other:?}"))),
        })
    }
}

/// Where a rotation gets its angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angle<T> {
    Param(usize),
    Fixed(T),
}

#[derive(Clone, Debug)]
pub struct Gate<T: Real> {
    kind: GateKind,
    targets: Vec<usize>,
    angle: Option<Angle<T>>,
    // matrix and its adjoint, for UNITARY gates only
    unitary: Option<Arc<(Matrix<T>, Matrix<T>)>>,
}

impl<T: Real> PartialEq for Gate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.targets == other.targets
            && self.angle == other.angle
            && match (&self.unitary, &other.unitary) {
                (Some(a), Some(b)) => a.0 == b.0,
                (None, None) => true,
                _ => false,
            }
    }
}

impl<T: Real> Gate<T> {
    /// Builds a gate, checking that targets and angle fit the kind.
    pub fn new(kind: GateKind, targets: Vec<usize>, angle: Option<Angle<T>>) -> Result<Self> {
        if kind == GateKind::UNITARY {
            return Err(Error::Shape("use Gate::unitary for matrix gates".into()));
        }
        let arity = kind.arity().unwrap_or(0);
        if targets.len() != arity {
            return Err(Error::Shape(format!("{kind} takes {arity} target(s), got {}", targets.len())));
        }
        check_distinct(&targets)?;
        match (kind.is_rotation(), angle.is_some()) {
            (true, false) => return Err(Error::Binding(format!("{kind} needs an angle or parameter"))),
            (false, true) => return Err(Error::Binding(format!("{kind} takes no angle"))),
            _ => {}
        }
        Ok(Self {
            kind,
            targets,
            angle,
            unitary: None,
        })
    }

    /// Arbitrary unitary on `targets`; the first target is the most
    /// significant bit of the matrix index.
    pub fn unitary(targets: Vec<usize>, m: Matrix<T>) -> Result<Self> {
        if targets.is_empty() || m.rows() != 1 << targets.len() || !m.is_square() {
            return Err(Error::Shape(format!(
                "{}x{} matrix on {} target(s)",
                m.rows(),
                m.cols(),
                targets.len()
            )));
        }
        check_distinct(&targets)?;
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        if !m.is_unitary(tol) {
            return Err(Error::Shape("matrix is not unitary".into()));
        }
        let dag = m.dagger();
        Ok(Self {
            kind: GateKind::UNITARY,
            targets,
            angle: None,
            unitary: Some(Arc::new((m, dag))),
        })
    }

    pub fn rx(q: usize, a: Angle<T>) -> Self {
        Self::new(GateKind::RX, vec![q], Some(a)).expect("valid RX")
    }

    pub fn ry(q: usize, a: Angle<T>) -> Self {
        Self::new(GateKind::RY, vec![q], Some(a)).expect("valid RY")
    }

    pub fn rz(q: usize, a: Angle<T>) -> Self {
        Self::new(GateKind::RZ, vec![q], Some(a)).expect("valid RZ")
    }

    pub fn phase(q: usize, a: Angle<T>) -> Self {
        Self::new(GateKind::PHASE, vec![q], Some(a)).expect("valid PHASE")
    }

    pub fn rzz(q0: usize, q1: usize, a: Angle<T>) -> Self {
        Self::new(GateKind::RZZ, vec![q0, q1], Some(a)).expect("valid RZZ")
    }

    pub fn givens(q0: usize, q1: usize, a: Angle<T>) -> Self {
        Self::new(GateKind::GIVENS, vec![q0, q1], Some(a)).expect("valid GIVENS")
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(GateKind::CNOT, vec![control, target], None).expect("valid CNOT")
    }

    pub fn h(q: usize) -> Self {
        Self::new(GateKind::H, vec![q], None).expect("valid H")
    }

    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, vec![q], None).expect("valid X")
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn angle(&self) -> Option<Angle<T>> {
        self.angle
    }

    pub fn param_index(&self) -> Option<usize> {
        match self.angle {
            Some(Angle::Param(i)) => Some(i),
            _ => None,
        }
    }

    pub fn fixed_angle(&self) -> Option<T> {
        match self.angle {
            Some(Angle::Fixed(a)) => Some(a),
            _ => None,
        }
    }

    pub(crate) fn set_angle(&mut self, angle: Angle<T>) {
        debug_assert!(self.kind.is_rotation());
        self.angle = Some(angle);
    }

    pub(crate) fn remap_targets(&mut self, f: impl Fn(usize) -> usize) {
        for t in &mut self.targets {
            *t = f(*t);
        }
    }

    /// The bound angle, if any.
    pub fn resolve(&self, params: &[T]) -> Result<Option<T>> {
        match self.angle {
            None => Ok(None),
            Some(Angle::Fixed(a)) => Ok(Some(a)),
            Some(Angle::Param(i)) => params
                .get(i)
                .copied()
                .map(Some)
                .ok_or_else(|| Error::Binding(format!("parameter {i} unbound ({} supplied)", params.len()))),
        }
    }

    /// Matrix realized at `angle` (ignored for fixed gates).
    pub fn matrix_at(&self, angle: T) -> Matrix<T> {
        let half = angle / T::lit(2.0);
        let (c, s) = (half.cos(), half.sin());
        let z = czero::<T>();
        let one = cone::<T>();
        let re = |x: T| cplx(x, T::zero());
        match self.kind {
            GateKind::RX => Matrix::from_row_major(2, 2, vec![re(c), cplx(T::zero(), -s), cplx(T::zero(), -s), re(c)]),
            GateKind::RY => Matrix::from_row_major(2, 2, vec![re(c), re(-s), re(s), re(c)]),
            GateKind::RZ => Matrix::from_diagonal(&[cis(-half), cis(half)]),
            GateKind::PHASE => Matrix::from_diagonal(&[one, cis(angle)]),
            GateKind::H => {
                let h = re(T::FRAC_1_SQRT_2());
                Matrix::from_row_major(2, 2, vec![h, h, h, -h])
            }
            GateKind::X => Matrix::from_row_major(2, 2, vec![z, one, one, z]),
            GateKind::RZZ => Matrix::from_diagonal(&[cis(-half), cis(half), cis(half), cis(-half)]),
            GateKind::CNOT => {
                let mut m = Matrix::identity(4);
                m[(2, 2)] = z;
                m[(3, 3)] = z;
                m[(2, 3)] = one;
                m[(3, 2)] = one;
                m
            }
            GateKind::GIVENS => {
                let (c, s) = (angle.cos(), angle.sin());
                let mut m = Matrix::identity(4);
                m[(1, 1)] = re(c);
                m[(1, 2)] = re(-s);
                m[(2, 1)] = re(s);
                m[(2, 2)] = re(c);
                m
            }
            GateKind::UNITARY => self.unitary.as_ref().expect("unitary payload").0.clone(),
        }
    }

    /// Matrix realized under `params`.
    pub fn matrix(&self, params: &[T]) -> Result<Matrix<T>> {
        Ok(self.matrix_at(self.resolve(params)?.unwrap_or(T::zero())))
    }

    pub fn apply(&self, state: &mut QuantumState<T>, params: &[T], adjoint: bool) -> Result<()> {
        let n = state.n_qubits();
        if let Some(bad) = self.targets.iter().find(|&&t| t >= n) {
            return Err(Error::Shape(format!("target qubit {bad} on a {n}-qubit state")));
        }
        let angle = self.resolve(params)?.unwrap_or(T::zero());
        let angle = if adjoint { -angle } else { angle };
        match self.kind {
            GateKind::UNITARY => {
                let pair = self.unitary.as_ref().expect("unitary payload");
                state.apply_matrix(&self.targets, if adjoint { &pair.1 } else { &pair.0 });
            }
            GateKind::RZ | GateKind::PHASE | GateKind::RX | GateKind::RY | GateKind::H | GateKind::X => {
                let m = self.matrix_at(angle);
                state.apply_1q(self.targets[0], [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
            }
            GateKind::RZZ => apply_rzz(state, self.targets[0], self.targets[1], angle),
            GateKind::CNOT => apply_cnot(state, self.targets[0], self.targets[1]),
            GateKind::GIVENS => state.apply_matrix(&self.targets, &self.matrix_at(angle)),
        }
        Ok(())
    }

    /// Splits a rotation into commuting Pauli-rotation factors
    /// `exp(-i c_j a P_j / 2)`; returns `(P_j, c_j)`. PHASE agrees with RZ up
    /// to a global phase.
    pub fn rotation_factors(&self) -> Option<Vec<(Vec<Pauli>, T)>> {
        use Pauli::*;
        let one = T::one();
        Some(match self.kind {
            GateKind::RX => vec![(vec![X], one)],
            GateKind::RY => vec![(vec![Y], one)],
            GateKind::RZ | GateKind::PHASE => vec![(vec![Z], one)],
            GateKind::RZZ => vec![(vec![Z, Z], one)],
            GateKind::GIVENS => vec![(vec![Y, X], one), (vec![X, Y], -one)],
            _ => return None,
        })
    }

    /// Fixed-angle gates realizing this rotation at `angle` with factor
    /// `factor`'s rotation angle offset by `delta`.
    pub fn shifted(&self, angle: T, factor: usize, delta: T) -> Result<Vec<Gate<T>>> {
        let factors = self
            .rotation_factors()
            .ok_or_else(|| Error::Unsupported(format!("{} has no shift rule", self.kind)))?;
        if factor >= factors.len() {
            return Err(Error::Index(format!("factor {factor} of {}", self.kind)));
        }
        if factors.len() == 1 {
            let mut g = self.clone();
            g.angle = Some(Angle::Fixed(angle + delta));
            return Ok(vec![g]);
        }
        factors
            .iter()
            .enumerate()
            .map(|(j, (paulis, coeff))| {
                let a = *coeff * angle + if j == factor { delta } else { T::zero() };
                Gate::unitary(self.targets.clone(), pauli_rotation(paulis, a))
            })
            .collect()
    }
}

fn check_distinct(targets: &[usize]) -> Result<()> {
    for (i, a) in targets.iter().enumerate() {
        if targets[i + 1..].contains(a) {
            return Err(Error::Shape(format!("repeated target qubit {a}")));
        }
    }
    Ok(())
}

/// `exp(-i a P / 2)` for a Pauli string `P` (first letter most significant).
pub fn pauli_rotation<T: Real>(paulis: &[Pauli], a: T) -> Matrix<T> {
    let p = paulis
        .iter()
        .fold(Matrix::identity(1), |acc: Matrix<T>, l| acc.kron(&l.matrix()));
    let half = a / T::lit(2.0);
    let dim = p.rows();
    Matrix::identity(dim)
        .scale(cplx(half.cos(), T::zero()))
        .add(&p.scale(cplx(T::zero(), -half.sin())))
}

/// Controlled version of `m`: the control is the most significant bit.
pub fn controlled<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let d = m.rows();
    let mut out = Matrix::identity(2 * d);
    for i in 0..d {
        for j in 0..d {
            out[(d + i, d + j)] = m[(i, j)];
        }
    }
    out
}

fn apply_rzz<T: Real>(state: &mut QuantumState<T>, q0: usize, q1: usize, angle: T) {
    let n = state.n_qubits();
    let (b0, b1) = (n - 1 - q0, n - 1 - q1);
    let half = angle / T::lit(2.0);
    let even = cis(-half);
    let odd = cis(half);
    for (i, a) in state.amplitudes_mut().iter_mut().enumerate() {
        *a *= if ((i >> b0) ^ (i >> b1)) & 1 == 0 { even } else { odd };
    }
}

fn apply_cnot<T: Real>(state: &mut QuantumState<T>, control: usize, target: usize) {
    let n = state.n_qubits();
    let cb = 1usize << (n - 1 - control);
    let tb = 1usize << (n - 1 - target);
    let amps = state.amplitudes_mut();
    for i in 0..amps.len() {
        if i & cb != 0 && i & tb == 0 {
            amps.swap(i, i | tb);
        }
    }
}
