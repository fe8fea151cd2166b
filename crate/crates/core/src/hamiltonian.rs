//! Pauli-sum Hamiltonians, their dense matrices and exact propagators, and
//! Trotter-Suzuki circuit synthesis.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{cone, cplx, czero, Real, C};
use crate::statevector::{Angle, Circuit, Gate, QuantumState, MAX_DENSE_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix<T: Real>(self) -> Matrix<T> {
        let (o, z) = (cone::<T>(), czero::<T>());
        let i = cplx(T::zero(), T::one());
        let data = match self {
            Pauli::I => vec![o, z, z, o],
            Pauli::X => vec![z, o, o, z],
            Pauli::Y => vec![z, -i, i, z],
            Pauli::Z => vec![o, z, z, -o],
        };
        Matrix::from_row_major(2, 2, data)
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;
    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::Parse(format!("invalid Pauli letter {other:?}"))),
        }
    }
}

/// Tensor product of single-qubit Paulis; letter 0 acts on qubit 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n])
    }

    /// `n`-qubit string with the given letters placed on the given qubits.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &(q, p) in ops {
            if q >= n {
                return Err(Error::Index(format!("qubit {q} in a {n}-qubit string")));
            }
            letters[q] = p;
        }
        Ok(Self { letters })
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|p| *p == Pauli::I)
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.letters.len()).filter(|&q| self.letters[q] != Pauli::I).collect()
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.letters.len() - 1 - q)
    }

    /// `(flip mask, phase mask, number of Y letters)` in amplitude-index bits.
    fn masks(&self) -> (usize, usize, usize) {
        let (mut flip, mut zmask, mut ny) = (0, 0, 0);
        for (q, p) in self.letters.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => flip |= self.bit(q),
                Pauli::Y => {
                    flip |= self.bit(q);
                    zmask |= self.bit(q);
                    ny += 1;
                }
                Pauli::Z => zmask |= self.bit(q),
            }
        }
        (flip, zmask, ny)
    }

    /// `P|i> = phase(i) |i ^ flip>`.
    fn column<T: Real>(&self) -> impl Fn(usize) -> (usize, C<T>) {
        let (flip, zmask, ny) = self.masks();
        // Y = i X Z, so each Y contributes a factor i on top of the Z sign
        let base = match ny % 4 {
            0 => cplx(T::one(), T::zero()),
            1 => cplx(T::zero(), T::one()),
            2 => cplx(-T::one(), T::zero()),
            _ => cplx(T::zero(), -T::one()),
        };
        move |i| {
            let sign = if (i & zmask).count_ones() % 2 == 1 { -base } else { base };
            (i ^ flip, sign)
        }
    }

    pub fn dense_matrix<T: Real>(&self) -> Matrix<T> {
        let dim = 1 << self.letters.len();
        let col = self.column::<T>();
        let mut m = Matrix::zeros(dim, dim);
        for j in 0..dim {
            let (i, v) = col(j);
            m[(i, j)] = v;
        }
        m
    }

    /// `P|psi>` on raw amplitudes.
    pub fn apply<T: Real>(&self, amps: &[C<T>]) -> Vec<C<T>> {
        let col = self.column::<T>();
        let mut out = vec![czero(); amps.len()];
        for (j, a) in amps.iter().enumerate() {
            let (i, v) = col(j);
            out[i] = v * *a;
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        Ok(Self::new(s.chars().map(Pauli::try_from).collect::<Result<_>>()?))
    }
}

/// Real-weighted sum of Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum<T: Real> {
    n_qubits: usize,
    terms: Vec<(T, PauliString)>,
}

impl<T: Real> PauliSum<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn add_term(&mut self, coeff: T, string: PauliString) -> Result<()> {
        if string.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "{}-qubit term in a {}-qubit sum",
                string.n_qubits(),
                self.n_qubits
            )));
        }
        if !coeff.is_finite() {
            return Err(Error::Parse("non-finite coefficient".into()));
        }
        self.terms.push((coeff, string));
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(T, PauliString)] {
        &self.terms
    }

    /// Sum of |c| over non-identity terms; bounds the spectral width by twice this.
    pub fn one_norm(&self) -> T {
        self.terms.iter().filter(|(_, p)| !p.is_identity()).map(|(c, _)| c.abs()).sum()
    }

    pub fn dense_matrix(&self) -> Result<Matrix<T>> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::Size(format!(
                "dense matrix limited to {MAX_DENSE_QUBITS} qubits, sum has {}",
                self.n_qubits
            )));
        }
        let dim = 1 << self.n_qubits;
        let mut m = Matrix::zeros(dim, dim);
        for (c, p) in &self.terms {
            let col = p.column::<T>();
            let cc = cplx(*c, T::zero());
            for j in 0..dim {
                let (i, v) = col(j);
                m[(i, j)] += cc * v;
            }
        }
        Ok(m)
    }

    /// `H|psi>` on raw amplitudes.
    pub fn apply(&self, amps: &[C<T>]) -> Vec<C<T>> {
        let mut out = vec![czero(); amps.len()];
        for (c, p) in &self.terms {
            let cc = cplx(*c, T::zero());
            for (o, v) in out.iter_mut().zip(p.apply(amps)) {
                *o += cc * v;
            }
        }
        out
    }

    /// `<psi|H|psi>`.
    pub fn expectation(&self, state: &QuantumState<T>) -> Result<T> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "{}-qubit operator on a {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        Ok(linalg::inner(state.amplitudes(), &self.apply(state.amplitudes())).re)
    }

    /// Parses `coeff letters` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sum: Option<Self> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(c), Some(s), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {}: expected `coeff letters`", lineno + 1)));
            };
            let coeff: f64 = c
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad coefficient {c:?}", lineno + 1)))?;
            let string: PauliString = s.parse().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let sum = sum.get_or_insert_with(|| Self::new(string.n_qubits()));
            sum.add_term(T::lit(coeff), string)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        sum.ok_or_else(|| Error::Parse("no terms".into()))
    }
}

impl<T: Real> fmt::Display for PauliSum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, p) in &self.terms {
            writeln!(f, "{c} {p}")?;
        }
        Ok(())
    }
}

/// Open-boundary XY chain `(1/2) sum_j X_j X_{j+1} + Y_j Y_{j+1}`, XX sweep
/// first. The 2-qubit spectrum is `{-1, 0, 0, 1}`.
pub fn build_xy<T: Real>(n: usize) -> Result<PauliSum<T>> {
    if n < 2 {
        return Err(Error::Size(format!("XY chain needs at least 2 qubits, got {n}")));
    }
    let mut h = PauliSum::new(n);
    for p in [Pauli::X, Pauli::Y] {
        for j in 0..n - 1 {
            h.add_term(T::lit(0.5), PauliString::from_sparse(n, &[(j, p), (j + 1, p)])?)?;
        }
    }
    Ok(h)
}

/// Jordan-Wigner string for hopping between sites `a < b` of one block.
fn hopping_string(n: usize, a: usize, b: usize, p: Pauli) -> Result<PauliString> {
    let mut ops = vec![(a, p), (b, p)];
    ops.extend((a + 1..b).map(|q| (q, Pauli::Z)));
    PauliString::from_sparse(n, &ops)
}

/// One-dimensional Fermi-Hubbard chain of `l` sites under Jordan-Wigner.
/// Qubits `0..l` hold spin up, `l..2l` spin down.
pub fn build_fermi_hubbard<T: Real>(l: usize, j: T, u: T) -> Result<PauliSum<T>> {
    if l < 2 {
        return Err(Error::Size(format!("Fermi-Hubbard chain needs at least 2 sites, got {l}")));
    }
    let n = 2 * l;
    let mut h = PauliSum::new(n);
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    for block in [0, l] {
        for site in 0..l - 1 {
            let (a, b) = (block + site, block + site + 1);
            h.add_term(-j * half, hopping_string(n, a, b, Pauli::X)?)?;
            h.add_term(-j * half, hopping_string(n, a, b, Pauli::Y)?)?;
        }
    }
    for site in 0..l {
        let (up, down) = (site, site + l);
        h.add_term(u * quarter, PauliString::identity(n))?;
        h.add_term(-u * quarter, PauliString::from_sparse(n, &[(up, Pauli::Z)])?)?;
        h.add_term(-u * quarter, PauliString::from_sparse(n, &[(down, Pauli::Z)])?)?;
        h.add_term(u * quarter, PauliString::from_sparse(n, &[(up, Pauli::Z), (down, Pauli::Z)])?)?;
    }
    Ok(h)
}

/// `sum_q (I - Z_q)/2` over the listed qubits.
pub fn number_operator<T: Real>(n: usize, qubits: &[usize]) -> Result<PauliSum<T>> {
    let mut h = PauliSum::new(n);
    let half = T::lit(0.5);
    for &q in qubits {
        h.add_term(half, PauliString::identity(n))?;
        h.add_term(-half, PauliString::from_sparse(n, &[(q, Pauli::Z)])?)?;
    }
    Ok(h)
}

/// `exp(-iHt)` via dense diagonalization.
pub fn exact_evolution<T: Real>(h: &PauliSum<T>, t: T) -> Result<Matrix<T>> {
    Ok(linalg::hermitian_propagator(&h.dense_matrix()?, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrotterOrder {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrotterSpec {
    pub order: TrotterOrder,
    pub delta_t: f64,
    pub n_substeps: usize,
}

impl TrotterSpec {
    pub fn new(order: TrotterOrder, delta_t: f64, n_substeps: usize) -> Result<Self> {
        let spec = Self {
            order,
            delta_t,
            n_substeps,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn first(delta_t: f64) -> Self {
        Self {
            order: TrotterOrder::First,
            delta_t,
            n_substeps: 1,
        }
    }

    pub fn second(delta_t: f64) -> Self {
        Self {
            order: TrotterOrder::Second,
            delta_t,
            n_substeps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_t.is_finite() || self.delta_t == 0.0 {
            return Err(Error::Config(format!("delta_t must be finite and nonzero, got {}", self.delta_t)));
        }
        if self.n_substeps == 0 {
            return Err(Error::Config("n_substeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Appends `exp(-i c tau P)` as basis change, CNOT ladder, RZ(2 c tau), undo.
fn push_pauli_exponential<T: Real>(circ: &mut Circuit<T>, c: T, tau: T, p: &PauliString) -> Result<()> {
    let support = p.support();
    let Some(&last) = support.last() else {
        return Ok(());
    };
    let quarter_turn = T::FRAC_PI_2();
    for &q in &support {
        match p.letters()[q] {
            Pauli::X => circ.push(Gate::h(q))?,
            Pauli::Y => circ.push(Gate::rx(q, Angle::Fixed(quarter_turn)))?,
            _ => {}
        }
    }
    for w in support.windows(2) {
        circ.push(Gate::cnot(w[0], w[1]))?;
    }
    circ.push(Gate::rz(last, Angle::Fixed(T::lit(2.0) * c * tau)))?;
    for w in support.windows(2).rev() {
        circ.push(Gate::cnot(w[0], w[1]))?;
    }
    for &q in &support {
        match p.letters()[q] {
            Pauli::X => circ.push(Gate::h(q))?,
            Pauli::Y => circ.push(Gate::rx(q, Angle::Fixed(-quarter_turn)))?,
            _ => {}
        }
    }
    Ok(())
}

/// Trotter-Suzuki circuit for one step `delta_t`. Terms are exponentiated in
/// listed order; second order sweeps forward then backward with half steps.
pub fn trotter_circuit<T: Real>(h: &PauliSum<T>, spec: &TrotterSpec) -> Result<Circuit<T>> {
    spec.validate()?;
    let mut circ = Circuit::new(h.n_qubits());
    let tau = T::lit(spec.delta_t / spec.n_substeps as f64);
    for _ in 0..spec.n_substeps {
        match spec.order {
            TrotterOrder::First => {
                for (c, p) in h.terms() {
                    push_pauli_exponential(&mut circ, *c, tau, p)?;
                }
            }
            TrotterOrder::Second => {
                let half = tau / T::lit(2.0);
                for (c, p) in h.terms() {
                    push_pauli_exponential(&mut circ, *c, half, p)?;
                }
                for (c, p) in h.terms().iter().rev() {
                    push_pauli_exponential(&mut circ, *c, half, p)?;
                }
            }
        }
    }
    Ok(circ)
}
