//! The diagonal-form ansatz `V = W(theta) D(gamma, dt) W(theta)^dagger` and
//! the structure edits used by the adaptive search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::{cis, wrap_angle, Real, C};
use crate::statevector::{bitstring, parse_bitstring, Angle, Circuit, Gate, GateKind, QuantumState};

/// `D = exp(i tau sum_q gamma_q Z^q)` with `tau = steps * delta_t`. Each Z-string
/// is a bitmask in amplitude-index layout (qubit 0 is the top bit).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalAnsatz<T: Real> {
    n_qubits: usize,
    z_strings: Vec<usize>,
    gammas: Vec<T>,
    delta_t: T,
}

impl<T: Real> DiagonalAnsatz<T> {
    pub fn new(n_qubits: usize, z_strings: Vec<usize>, gammas: Vec<T>, delta_t: T) -> Result<Self> {
        if z_strings.len() != gammas.len() {
            return Err(Error::Shape(format!(
                "{} Z-strings but {} gammas",
                z_strings.len(),
                gammas.len()
            )));
        }
        if let Some(m) = z_strings.iter().find(|&&m| m == 0 || m >= 1 << n_qubits) {
            return Err(Error::Shape(format!("Z-string mask {m:#b} invalid for {n_qubits} qubits")));
        }
        Ok(Self {
            n_qubits,
            z_strings,
            gammas,
            delta_t,
        })
    }

    /// One `Z_q` term per qubit, all gammas zero.
    pub fn single_z(n_qubits: usize, delta_t: T) -> Self {
        let masks = (0..n_qubits).map(|q| 1 << (n_qubits - 1 - q)).collect();
        Self::new(n_qubits, masks, vec![T::zero(); n_qubits], delta_t).expect("single-Z masks are valid")
    }

    /// Mask of a Z-string given as a bitstring (`"10"` = `Z` on qubit 0).
    pub fn mask_from_bits(bits: &str) -> Result<usize> {
        parse_bitstring(bits)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn z_strings(&self) -> &[usize] {
        &self.z_strings
    }

    pub fn gammas(&self) -> &[T] {
        &self.gammas
    }

    pub fn gammas_mut(&mut self) -> &mut Vec<T> {
        &mut self.gammas
    }

    pub fn set_gammas(&mut self, gammas: &[T]) -> Result<()> {
        if gammas.len() != self.gammas.len() {
            return Err(Error::Shape("gamma vector length".into()));
        }
        self.gammas.copy_from_slice(gammas);
        Ok(())
    }

    pub fn delta_t(&self) -> T {
        self.delta_t
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Phase of basis index `b` at evolution time `tau`, before exponentiation.
    pub fn phase(&self, b: usize, tau: T) -> T {
        self.z_strings
            .iter()
            .zip(&self.gammas)
            .map(|(m, g)| if (b & m).count_ones() % 2 == 1 { -*g } else { *g })
            .sum::<T>()
            * tau
    }

    /// Diagonal of `D^steps`.
    pub fn diagonal(&self, steps: u64) -> Vec<C<T>> {
        self.diagonal_at(T::lit(steps as f64) * self.delta_t)
    }

    /// Diagonal at arbitrary evolution time `tau` (may be negative).
    pub fn diagonal_at(&self, tau: T) -> Vec<C<T>> {
        (0..1usize << self.n_qubits).map(|b| cis(self.phase(b, tau))).collect()
    }

    /// Diagonal at time `tau` with term `l`, written as the rotation
    /// `exp(-i phi Z^l / 2)`, offset in `phi` by `delta_phi`.
    pub fn diagonal_shifted(&self, tau: T, l: usize, delta_phi: T) -> Vec<C<T>> {
        let m = self.z_strings[l];
        let half = delta_phi / T::lit(2.0);
        (0..1usize << self.n_qubits)
            .map(|b| {
                let s = if (b & m).count_ones() % 2 == 1 { -T::one() } else { T::one() };
                cis(self.phase(b, tau) - half * s)
            })
            .collect()
    }

    /// Gate form of `D` at time `tau`: each Z-string becomes a CNOT ladder
    /// around `RZ(-2 tau gamma)`. Gate count does not depend on `tau`.
    pub fn circuit_at(&self, tau: T) -> Circuit<T> {
        let n = self.n_qubits;
        let mut c = Circuit::new(n);
        for (&m, &g) in self.z_strings.iter().zip(&self.gammas) {
            let support: Vec<usize> = (0..n).filter(|q| m >> (n - 1 - q) & 1 == 1).collect();
            let last = *support.last().expect("masks are nonzero");
            for w in support.windows(2) {
                c.push(Gate::cnot(w[0], w[1])).expect("valid gate");
            }
            c.push(Gate::rz(last, Angle::Fixed(T::lit(-2.0) * tau * g))).expect("valid gate");
            for w in support.windows(2).rev() {
                c.push(Gate::cnot(w[0], w[1])).expect("valid gate");
            }
        }
        c
    }

    /// Appends a term with zero gamma.
    pub fn push_term(&mut self, mask: usize) -> Result<()> {
        if mask == 0 || mask >= 1 << self.n_qubits {
            return Err(Error::Shape(format!("Z-string mask {mask:#b} invalid")));
        }
        self.z_strings.push(mask);
        self.gammas.push(T::zero());
        Ok(())
    }
}

/// `V(alpha, dt) = W(theta) D(gamma, dt) W(theta)^dagger`.
#[derive(Clone, Debug, PartialEq)]
pub struct FsvffAnsatz<T: Real> {
    pub w: Circuit<T>,
    pub d: DiagonalAnsatz<T>,
    pub theta: Vec<T>,
}

impl<T: Real> FsvffAnsatz<T> {
    pub fn new(w: Circuit<T>, d: DiagonalAnsatz<T>, theta: Vec<T>) -> Result<Self> {
        if w.n_params() != theta.len() {
            return Err(Error::Shape(format!(
                "W has {} parameters but theta has {}",
                w.n_params(),
                theta.len()
            )));
        }
        if w.n_qubits() != d.n_qubits() {
            return Err(Error::Shape("W and D act on different registers".into()));
        }
        Ok(Self { w, d, theta })
    }

    pub fn n_qubits(&self) -> usize {
        self.w.n_qubits()
    }

    pub fn delta_t(&self) -> T {
        self.d.delta_t()
    }

    /// `(theta count, gamma count)`.
    pub fn param_counts(&self) -> (usize, usize) {
        (self.theta.len(), self.d.len())
    }

    /// `W D^steps W^dagger |state>`, or its adjoint.
    pub fn apply_v(&self, state: &mut QuantumState<T>, steps: u64, adjoint: bool) -> Result<()> {
        let tau = T::lit(steps as f64) * self.d.delta_t();
        self.apply_v_at(state, if adjoint { -tau } else { tau })
    }

    /// `W D(tau) W^dagger |state>` for evolution time `tau`.
    pub fn apply_v_at(&self, state: &mut QuantumState<T>, tau: T) -> Result<()> {
        self.apply_v_with(state, &self.theta, &self.d.diagonal_at(tau))
    }

    /// `W(theta) diag W(theta)^dagger |state>` with explicit parameters.
    pub fn apply_v_with(&self, state: &mut QuantumState<T>, theta: &[T], diag: &[C<T>]) -> Result<()> {
        self.w.apply(state, theta, true)?;
        state.apply_diagonal(diag)?;
        self.w.apply(state, theta, false)
    }

    /// Dense `W D^steps W^dagger`.
    pub fn dense_v(&self, steps: u64) -> Result<Matrix<T>> {
        let wm = self.w.dense_unitary(&self.theta)?;
        let dm = Matrix::from_diagonal(&self.d.diagonal(steps));
        Ok(wm.matmul(&dm).matmul(&wm.dagger()))
    }

    /// Gate-level `W D^steps W^dagger`, parameters bound.
    pub fn fast_forward_circuit(&self, steps: u64) -> Result<Circuit<T>> {
        let tau = T::lit(steps as f64) * self.d.delta_t();
        let mut c = self.w.adjoint(&self.theta)?;
        c.extend(&self.d.circuit_at(tau))?;
        c.extend(&self.w.bind(&self.theta)?)?;
        Ok(c)
    }

    /// Inserts zero-angle gates and extends theta with zeros.
    pub fn insert_identity_gates(&self, positions: &[usize], kinds: &[GateKind], nearest_neighbor: bool, seed: u64) -> Result<Self> {
        let w = insert_identity_gates(&self.w, positions, kinds, nearest_neighbor, seed)?;
        let mut theta = self.theta.clone();
        theta.resize(w.n_params(), T::zero());
        Self::new(w, self.d.clone(), theta)
    }

    pub fn remove_gate(&self, index: usize) -> Result<Self> {
        let (w, theta) = remove_gate(&self.w, &self.theta, index)?;
        Self::new(w, self.d.clone(), theta)
    }

    pub fn compress(&self) -> Result<Self> {
        let (w, theta) = compress_adjacent(&self.w, &self.theta)?;
        Self::new(w, self.d.clone(), theta)
    }

    /// Line-oriented text form: header, one gate per line, theta values and a
    /// GAMMA block of `mask value` pairs.
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        let n = self.n_qubits();
        writeln!(out, "QUBITS {n}").unwrap();
        writeln!(out, "DELTA_T {}", self.d.delta_t()).unwrap();
        writeln!(out, "PARAMS {}", self.w.n_params()).unwrap();
        for g in self.w.gates() {
            if g.kind() == GateKind::UNITARY {
                return Err(Error::Unsupported("matrix gates have no text form".into()));
            }
            let targets: Vec<String> = g.targets().iter().map(|t| t.to_string()).collect();
            write!(out, "{} {}", g.kind(), targets.join(",")).unwrap();
            match g.angle() {
                Some(Angle::Param(i)) => write!(out, " p{i}").unwrap(),
                Some(Angle::Fixed(a)) => write!(out, " @{a}").unwrap(),
                None => {}
            }
            out.push('\n');
        }
        let theta: Vec<String> = self.theta.iter().map(|t| t.to_string()).collect();
        writeln!(out, "THETA {}", theta.join(" ")).unwrap();
        writeln!(out, "GAMMA").unwrap();
        for (m, g) in self.d.z_strings().iter().zip(self.d.gammas()) {
            writeln!(out, "{} {g}", bitstring(*m, n)).unwrap();
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n_qubits = None;
        let mut delta_t = None;
        let mut n_params = None;
        let mut gates = Vec::new();
        let mut theta: Option<Vec<T>> = None;
        let mut masks = Vec::new();
        let mut gammas = Vec::new();
        let mut in_gamma = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if in_gamma {
                let [mask, value] = fields[..] else {
                    return Err(err("expected `mask value` in GAMMA block"));
                };
                masks.push(parse_bitstring(mask).map_err(|e| err(&e.to_string()))?);
                gammas.push(parse_real::<T>(value).ok_or_else(|| err("bad gamma value"))?);
                continue;
            }
            match fields[0] {
                "QUBITS" => n_qubits = Some(fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err("bad QUBITS"))?),
                "DELTA_T" => delta_t = Some(fields.get(1).and_then(|s| parse_real::<T>(s)).ok_or_else(|| err("bad DELTA_T"))?),
                "PARAMS" => n_params = Some(fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err("bad PARAMS"))?),
                "THETA" => {
                    theta = Some(
                        fields[1..]
                            .iter()
                            .map(|s| parse_real::<T>(s))
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| err("bad THETA value"))?,
                    )
                }
                "GAMMA" => in_gamma = true,
                kind => {
                    let kind: GateKind = kind.parse().map_err(|e: Error| err(&e.to_string()))?;
                    let targets = fields
                        .get(1)
                        .ok_or_else(|| err("missing targets"))?
                        .split(',')
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| err("bad target list"))?;
                    let angle = match fields.get(2) {
                        None => None,
                        Some(s) if s.starts_with('p') => {
                            Some(Angle::Param(s[1..].parse().map_err(|_| err("bad parameter index"))?))
                        }
                        Some(s) if s.starts_with('@') => {
                            Some(Angle::Fixed(parse_real::<T>(&s[1..]).ok_or_else(|| err("bad angle"))?))
                        }
                        Some(_) => return Err(err("angle must be `pN` or `@value`")),
                    };
                    gates.push(Gate::new(kind, targets, angle).map_err(|e| err(&e.to_string()))?);
                }
            }
        }
        let n = n_qubits.ok_or_else(|| Error::Parse("missing QUBITS".into()))?;
        let dt = delta_t.ok_or_else(|| Error::Parse("missing DELTA_T".into()))?;
        let n_params = n_params.unwrap_or_else(|| gates.iter().filter_map(|g| g.param_index()).map(|i| i + 1).max().unwrap_or(0));
        let w = Circuit::from_gates(n, n_params, gates)?;
        let d = DiagonalAnsatz::new(n, masks, gammas, dt)?;
        let theta = theta.unwrap_or_else(|| vec![T::zero(); n_params]);
        Self::new(w, d, theta)
    }
}

fn parse_real<T: Real>(s: &str) -> Option<T> {
    s.parse::<f64>().ok().filter(|x| x.is_finite()).map(T::lit)
}

/// Two-qubit ansatz: `W = [RZ(theta_0) q0, RY(theta_1) q0, CNOT q0->q1]`,
/// `D = exp(i tau gamma Z_0)`.
pub fn hardware_xy_ansatz<T: Real>(delta_t: T) -> FsvffAnsatz<T> {
    let mut w = Circuit::with_params(2, 2);
    w.push(Gate::rz(0, Angle::Param(0))).expect("valid gate");
    w.push(Gate::ry(0, Angle::Param(1))).expect("valid gate");
    w.push(Gate::cnot(0, 1)).expect("valid gate");
    let d = DiagonalAnsatz::new(2, vec![0b10], vec![T::zero()], delta_t).expect("valid mask");
    FsvffAnsatz::new(w, d, vec![T::zero(); 2]).expect("consistent ansatz")
}

/// Brick-wall of nearest-neighbour GIVENS rotations, `layers` deep, one
/// parameter each. Commutes with total particle number.
pub fn givens_brickwall<T: Real>(n: usize, layers: usize) -> Circuit<T> {
    let mut w = Circuit::new(n);
    for layer in 0..layers {
        let mut q = layer % 2;
        while q + 1 < n {
            let p = w.add_param();
            w.push(Gate::givens(q, q + 1, Angle::Param(p))).expect("valid gate");
            q += 2;
        }
    }
    w
}

fn random_targets(kind: GateKind, n: usize, nearest_neighbor: bool, rng: &mut rng::Rng) -> Result<Vec<usize>> {
    match kind.arity() {
        Some(1) => Ok(vec![rng.random_range(0..n)]),
        Some(2) => {
            if n < 2 {
                return Err(Error::Shape(format!("{kind} needs two qubits")));
            }
            if nearest_neighbor {
                let q = rng.random_range(0..n - 1);
                Ok(if rng.random::<bool>() { vec![q, q + 1] } else { vec![q + 1, q] })
            } else {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                Ok(vec![a, b])
            }
        }
        _ => Err(Error::Unsupported(format!("cannot insert {kind}"))),
    }
}

/// Inserts one zero-angle gate per `(position, kind)`; targets are drawn from
/// the seeded stream. Positions refer to the original gate list. Each
/// rotation gets a fresh parameter index appended after the existing ones.
pub fn insert_identity_gates<T: Real>(
    w: &Circuit<T>,
    positions: &[usize],
    kinds: &[GateKind],
    nearest_neighbor: bool,
    seed: u64,
) -> Result<Circuit<T>> {
    if positions.len() != kinds.len() {
        return Err(Error::Shape("positions and kinds differ in length".into()));
    }
    if let Some(p) = positions.iter().find(|&&p| p > w.len()) {
        return Err(Error::Index(format!("insert position {p} beyond {} gates", w.len())));
    }
    let mut rng = rng::stream(seed, "insert");
    let mut planned = Vec::with_capacity(kinds.len());
    let mut next_param = w.n_params();
    for (&pos, &kind) in positions.iter().zip(kinds) {
        let targets = random_targets(kind, w.n_qubits(), nearest_neighbor, &mut rng)?;
        let angle = if kind.is_rotation() {
            next_param += 1;
            Some(Angle::Param(next_param - 1))
        } else if kind == GateKind::CNOT {
            return Err(Error::Unsupported("CNOT is not an identity insertion".into()));
        } else {
            None
        };
        planned.push((pos, Gate::new(kind, targets, angle)?));
    }
    let mut out = w.clone();
    out.set_n_params(next_param);
    let mut by_pos: BTreeMap<usize, Vec<Gate<T>>> = BTreeMap::new();
    for (pos, g) in planned {
        by_pos.entry(pos).or_default().push(g);
    }
    for (pos, gs) in by_pos.into_iter().rev() {
        for (k, g) in gs.into_iter().enumerate() {
            out.insert(pos + k, g)?;
        }
    }
    Ok(out)
}

/// Removes gate `index` and compacts the parameter vector if its parameter
/// is no longer referenced.
pub fn remove_gate<T: Real>(w: &Circuit<T>, params: &[T], index: usize) -> Result<(Circuit<T>, Vec<T>)> {
    if index >= w.len() {
        return Err(Error::Index(format!("gate {index} of {}", w.len())));
    }
    let mut out = w.clone();
    let removed = out.gates_mut().remove(index);
    let mut params = params.to_vec();
    if let Some(p) = removed.param_index() {
        if out.param_occurrences(p).is_empty() {
            drop_param(&mut out, &mut params, p);
        }
    }
    Ok((out, params))
}

fn drop_param<T: Real>(w: &mut Circuit<T>, params: &mut Vec<T>, p: usize) {
    for g in w.gates_mut() {
        if let Some(i) = g.param_index() {
            if i > p {
                g.set_angle(Angle::Param(i - 1));
            }
        }
    }
    if p < params.len() {
        params.remove(p);
    }
    let n = w.n_params();
    w.set_n_params(n - 1);
}

fn same_site<T: Real>(a: &Gate<T>, b: &Gate<T>) -> bool {
    if a.kind() != b.kind() {
        return false;
    }
    if a.kind() == GateKind::RZZ {
        let mut x = a.targets().to_vec();
        let mut y = b.targets().to_vec();
        x.sort_unstable();
        y.sort_unstable();
        x == y
    } else {
        a.targets() == b.targets()
    }
}

fn is_identity_angle<T: Real>(a: T) -> bool {
    let four_pi = T::lit(4.0) * T::PI();
    let x = a % four_pi;
    let x = if x < T::zero() { x + four_pi } else { x };
    x.min(four_pi - x) < T::lit(1e-12)
}

/// Merges adjacent same-kind, same-target rotations by adding angles, cancels
/// adjacent self-inverse pairs and drops identity-angle rotations. Repeats
/// until nothing changes.
pub fn compress_adjacent<T: Real>(w: &Circuit<T>, params: &[T]) -> Result<(Circuit<T>, Vec<T>)> {
    let mut w = w.clone();
    let mut params = params.to_vec();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < w.len() {
            let g = w.gates()[i].clone();
            if g.kind().is_rotation() {
                let a = g.resolve(&params)?.unwrap_or(T::zero());
                if is_identity_angle(a) {
                    let (nw, np) = remove_gate(&w, &params, i)?;
                    w = nw;
                    params = np;
                    changed = true;
                    continue;
                }
            }
            if i + 1 < w.len() && same_site(&g, &w.gates()[i + 1]) {
                let h = w.gates()[i + 1].clone();
                if g.kind().is_rotation() {
                    let sum = g.resolve(&params)?.unwrap_or(T::zero()) + h.resolve(&params)?.unwrap_or(T::zero());
                    match g.param_index() {
                        Some(p) if w.param_occurrences(p).len() == 1 => params[p] = sum,
                        _ => w.gates_mut()[i].set_angle(Angle::Fixed(sum)),
                    }
                    let (nw, np) = remove_gate(&w, &params, i + 1)?;
                    w = nw;
                    params = np;
                    changed = true;
                    continue;
                }
                if matches!(g.kind(), GateKind::CNOT | GateKind::H | GateKind::X) {
                    w.gates_mut().drain(i..i + 2);
                    changed = true;
                    continue;
                }
            }
            i += 1;
        }
        if !changed {
            return Ok((w, params));
        }
    }
}

/// Wrapped angle of every parameter, used to compare trained structures.
pub fn wrapped<T: Real>(params: &[T]) -> Vec<T> {
    params.iter().map(|p| wrap_angle(*p)).collect()
}
