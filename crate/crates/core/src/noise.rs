//! Density-matrix simulation with Kraus channels.
//!
//! `rho` is stored as a `2n`-qubit vector with entry `(i, j)` at index
//! `i * 2^n + j`, so row qubit `q` is register qubit `q` and column qubit `q`
//! is register qubit `q + n`. Conjugation `U rho U^dagger` is `U` on the row
//! qubits and `conj(U)` on the column qubits, reusing the state-vector kernels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ansatz::FsvffAnsatz;
use crate::cost::{self, CostValue, CostVariant, TrainingSet};
use crate::error::{Error, Result};
use crate::evolution::TimeEvolution;
use crate::hamiltonian::{trotter_circuit, Pauli, TrotterSpec};
use crate::linalg::{self, Matrix};
use crate::scalar::{cplx, czero, Real, C};
use crate::statevector::{Circuit, Gate, QuantumState};

pub const MAX_DENSITY_QUBITS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    n_qubits: usize,
    reg: QuantumState<T>,
}

pub(crate) fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSITY_QUBITS {
        return Err(Error::Size(format!("density matrices support 1..={MAX_DENSITY_QUBITS} qubits, got {n}")));
    }
    Ok(())
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::Index(format!("qubit {t} out of range for {n} qubits")));
        }
        if targets[..i].contains(&t) {
            return Err(Error::Index(format!("repeated target {t}")));
        }
    }
    Ok(())
}

impl<T: Real> DensityMatrix<T> {
    pub fn from_pure(state: &QuantumState<T>) -> Result<Self> {
        let n = state.n_qubits();
        check_size(n)?;
        let a = state.amplitudes();
        let data = a.iter().flat_map(|x| a.iter().map(move |y| *x * y.conj())).collect();
        Ok(Self {
            n_qubits: n,
            reg: QuantumState::from_raw(2 * n, data),
        })
    }

    pub fn zero_state(n: usize) -> Result<Self> {
        Self::from_pure(&QuantumState::zero_state(n)?)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_size(n)?;
        let dim = 1usize << n;
        let mut data = vec![czero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = cplx(T::one() / T::lit(dim as f64), T::zero());
        }
        Ok(Self {
            n_qubits: n,
            reg: QuantumState::from_raw(2 * n, data),
        })
    }

    /// Wraps a matrix after checking shape, Hermiticity and unit trace.
    pub fn from_matrix(m: &Matrix<T>) -> Result<Self> {
        if !m.is_square() || !m.rows().is_power_of_two() || m.rows() < 2 {
            return Err(Error::Shape("density matrix must be 2^n x 2^n".into()));
        }
        let n = m.rows().trailing_zeros() as usize;
        check_size(n)?;
        if !m.is_hermitian(T::lit(1e-12)) {
            return Err(Error::Shape("density matrix is not Hermitian".into()));
        }
        if (m.trace().re - T::one()).abs() > T::lit(1e-10) {
            return Err(Error::Shape("density matrix trace differs from 1".into()));
        }
        Ok(Self {
            n_qubits: n,
            reg: QuantumState::from_raw(2 * n, m.as_slice().to_vec()),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entry(&self, i: usize, j: usize) -> C<T> {
        self.reg.amplitudes()[i * self.dim() + j]
    }

    pub fn matrix(&self) -> Matrix<T> {
        Matrix::from_row_major(self.dim(), self.dim(), self.reg.amplitudes().to_vec())
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.entry(i, i).re).sum()
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> T {
        self.reg.amplitudes().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Diagonal populations.
    pub fn probabilities(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.entry(i, i).re).collect()
    }

    pub fn min_eigenvalue(&self) -> T {
        linalg::eigh(&self.matrix()).0[0]
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.matrix().is_hermitian(tol)
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with(&self, state: &QuantumState<T>) -> Result<T> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Shape("state and density matrix differ in width".into()));
        }
        let a = state.amplitudes();
        let rho_psi = self.matrix().mul_vec(a);
        Ok(linalg::inner(a, &rho_psi).re)
    }

    /// `rho <- U rho U^dagger` with `U` acting on `targets`.
    pub fn apply_unitary(&mut self, targets: &[usize], u: &Matrix<T>) -> Result<()> {
        check_targets(targets, self.n_qubits)?;
        if u.rows() != 1 << targets.len() || !u.is_square() {
            return Err(Error::Shape("operator size does not match targets".into()));
        }
        self.conjugate_by(targets, u);
        Ok(())
    }

    fn conjugate_by(&mut self, targets: &[usize], k: &Matrix<T>) {
        let cols: Vec<usize> = targets.iter().map(|t| t + self.n_qubits).collect();
        self.reg.apply_matrix(targets, k);
        self.reg.apply_matrix(&cols, &k.conj());
    }

    pub fn apply_gate(&mut self, gate: &Gate<T>, params: &[T]) -> Result<()> {
        self.apply_unitary(gate.targets(), &gate.matrix(params)?)
    }

    /// `rho <- D rho D^dagger` for a diagonal `D`.
    pub fn apply_diagonal(&mut self, diag: &[C<T>]) -> Result<()> {
        let dim = self.dim();
        if diag.len() != dim {
            return Err(Error::Shape("diagonal length does not match density matrix".into()));
        }
        let amps = self.reg.amplitudes_mut();
        for i in 0..dim {
            for j in 0..dim {
                amps[i * dim + j] *= diag[i] * diag[j].conj();
            }
        }
        Ok(())
    }

    pub fn apply_channel(&mut self, channel: &Channel<T>, targets: &[usize]) -> Result<()> {
        check_targets(targets, self.n_qubits)?;
        if targets.len() != channel.arity {
            return Err(Error::Channel(format!(
                "{}-qubit channel applied to {} targets",
                channel.arity,
                targets.len()
            )));
        }
        let mut acc = vec![czero(); self.reg.dim()];
        for k in &channel.kraus {
            let mut term = self.clone();
            term.conjugate_by(targets, k);
            for (a, t) in acc.iter_mut().zip(term.reg.amplitudes()) {
                *a += *t;
            }
        }
        self.reg.amplitudes_mut().copy_from_slice(&acc);
        Ok(())
    }

    /// `rho <- (1 - p) rho + p I / 2^n`.
    pub fn depolarize_global(&mut self, p: T) {
        let dim = self.dim();
        let mix = p / T::lit(dim as f64);
        let amps = self.reg.amplitudes_mut();
        for (idx, a) in amps.iter_mut().enumerate() {
            *a = *a * cplx(T::one() - p, T::zero());
            if idx / dim == idx % dim {
                *a += cplx(mix, T::zero());
            }
        }
    }

    /// Populations after independent readout flips with probability `flip`
    /// on every qubit.
    pub fn readout_probabilities(&self, flip: T) -> Vec<T> {
        let mut p = self.probabilities();
        if flip == T::zero() {
            return p;
        }
        let n = self.n_qubits;
        for q in 0..n {
            let bit = 1usize << (n - 1 - q);
            for i in 0..p.len() {
                if i & bit == 0 {
                    let (a, b) = (p[i], p[i | bit]);
                    p[i] = (T::one() - flip) * a + flip * b;
                    p[i | bit] = flip * a + (T::one() - flip) * b;
                }
            }
        }
        p
    }
}

/// `sum_k K rho K^dagger` on `targets`, from an explicit Kraus list.
pub fn apply_channel<T: Real>(rho: &DensityMatrix<T>, kraus: &[Matrix<T>], targets: &[usize]) -> Result<DensityMatrix<T>> {
    let channel = Channel::new(kraus.to_vec())?;
    let mut out = rho.clone();
    out.apply_channel(&channel, targets)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel<T: Real> {
    arity: usize,
    kraus: Vec<Matrix<T>>,
}

impl<T: Real> Channel<T> {
    /// Validates `sum K^dagger K = I` within 1e-10.
    pub fn new(kraus: Vec<Matrix<T>>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Channel("empty Kraus list".into()))?;
        let dim = first.rows();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Channel("Kraus operators must be 2^k x 2^k".into()));
        }
        let mut sum = Matrix::zeros(dim, dim);
        for k in &kraus {
            if k.rows() != dim || k.cols() != dim {
                return Err(Error::Channel("Kraus operators differ in size".into()));
            }
            sum = sum.add(&k.dagger().matmul(k));
        }
        let err = sum.max_abs_diff(&Matrix::identity(dim));
        if err > T::lit(1e-10) {
            return Err(Error::Channel(format!("Kraus completeness violated by {}", err.as_f64())));
        }
        Ok(Self {
            arity: dim.trailing_zeros() as usize,
            kraus,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kraus(&self) -> &[Matrix<T>] {
        &self.kraus
    }

    pub fn identity(arity: usize) -> Self {
        Self {
            arity,
            kraus: vec![Matrix::identity(1 << arity)],
        }
    }

    /// `rho -> (1 - p) rho + p I / 2^k` on `k` qubits, as a Pauli Kraus set.
    pub fn depolarizing(arity: usize, p: T) -> Result<Self> {
        check_probability(p)?;
        let d2 = T::lit((1u64 << (2 * arity)) as f64);
        let paulis = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        let mut kraus = Vec::with_capacity(1 << (2 * arity));
        for idx in 0..1usize << (2 * arity) {
            let m = (0..arity).fold(Matrix::identity(1), |acc, q| {
                acc.kron(&paulis[(idx >> (2 * (arity - 1 - q))) & 3].matrix())
            });
            let w = if idx == 0 { T::one() - p + p / d2 } else { p / d2 };
            if w > T::zero() {
                kraus.push(m.scale(cplx(w.sqrt(), T::zero())));
            }
        }
        Self::new(kraus)
    }

    pub fn bit_flip(p: T) -> Result<Self> {
        Self::single_pauli(p, Pauli::X)
    }

    pub fn phase_flip(p: T) -> Result<Self> {
        Self::single_pauli(p, Pauli::Z)
    }

    fn single_pauli(p: T, pauli: Pauli) -> Result<Self> {
        check_probability(p)?;
        Self::new(vec![
            Matrix::identity(2).scale(cplx((T::one() - p).sqrt(), T::zero())),
            pauli.matrix().scale(cplx(p.sqrt(), T::zero())),
        ])
    }

    pub fn amplitude_damping(g: T) -> Result<Self> {
        check_probability(g)?;
        let (z, o) = (czero(), cplx(T::one(), T::zero()));
        Self::new(vec![
            Matrix::from_row_major(2, 2, vec![o, z, z, cplx((T::one() - g).sqrt(), T::zero())]),
            Matrix::from_row_major(2, 2, vec![z, cplx(g.sqrt(), T::zero()), z, z]),
        ])
    }

    /// The same channel applied independently to `k` qubits.
    pub fn tensor_power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Channel("tensor power must be at least 1".into()));
        }
        let mut kraus = self.kraus.clone();
        for _ in 1..k {
            kraus = kraus.iter().flat_map(|a| self.kraus.iter().map(move |b| a.kron(b))).collect();
        }
        Self::new(kraus)
    }
}

fn check_probability<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Channel(format!("probability {} outside [0, 1]", p.as_f64())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Depolarizing,
    Bitflip,
    Phaseflip,
    AmplitudeDamping,
}

/// A channel in a noise-model file: a named preset or explicit Kraus
/// matrices given as rows of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Preset { preset: Preset, p: f64 },
    Kraus { kraus: Vec<Vec<Vec<[f64; 2]>>> },
}

impl ChannelSpec {
    pub fn build<T: Real>(&self, arity: usize) -> Result<Channel<T>> {
        let channel = match self {
            Self::Preset { preset, p } => {
                let p = T::lit(*p);
                match preset {
                    Preset::Depolarizing => return Channel::depolarizing(arity, p),
                    Preset::Bitflip => Channel::bit_flip(p)?,
                    Preset::Phaseflip => Channel::phase_flip(p)?,
                    Preset::AmplitudeDamping => Channel::amplitude_damping(p)?,
                }
                .tensor_power(arity)?
            }
            Self::Kraus { kraus } => Channel::new(
                kraus
                    .iter()
                    .map(|rows| {
                        let dim = rows.len();
                        if rows.iter().any(|r| r.len() != dim) {
                            return Err(Error::Channel("Kraus matrix is not square".into()));
                        }
                        Ok(Matrix::from_row_major(
                            dim,
                            dim,
                            rows.iter().flatten().map(|[re, im]| cplx(T::lit(*re), T::lit(*im))).collect(),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?,
        };
        if channel.arity != arity {
            return Err(Error::Channel(format!("{}-qubit Kraus set listed for arity {arity}", channel.arity)));
        }
        Ok(channel)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateNoiseSpec {
    pub arity: usize,
    pub channel: ChannelSpec,
}

/// File form of a [`NoiseModel`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModelSpec {
    pub gates: Vec<GateNoiseSpec>,
    pub measurement_flip: f64,
    pub idle: Option<ChannelSpec>,
    pub global_depolarizing: f64,
}

impl NoiseModelSpec {
    /// Depolarizing `p1` after 1-qubit gates, `p2` after 2-qubit gates and
    /// readout flips with probability `flip`.
    pub fn depolarizing(p1: f64, p2: f64, flip: f64) -> Self {
        let dep = |arity, p| GateNoiseSpec {
            arity,
            channel: ChannelSpec::Preset {
                preset: Preset::Depolarizing,
                p,
            },
        };
        Self {
            gates: vec![dep(1, p1), dep(2, p2)],
            measurement_flip: flip,
            ..Default::default()
        }
    }

    /// The demo model: p1 = 0.001, p2 = 0.01, readout flip 0.01.
    pub fn default_demo() -> Self {
        Self::depolarizing(0.001, 0.01, 0.01)
    }

    pub fn global(p: f64) -> Self {
        Self {
            global_depolarizing: p,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Channels attached to gates by arity, readout flips, optional idle noise on
/// untouched qubits and optional global depolarizing after every gate.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel<T: Real> {
    per_gate: BTreeMap<usize, Channel<T>>,
    measurement_flip: T,
    idle: Option<Channel<T>>,
    global_depolarizing: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn noiseless() -> Self {
        Self {
            per_gate: BTreeMap::new(),
            measurement_flip: T::zero(),
            idle: None,
            global_depolarizing: T::zero(),
        }
    }

    pub fn from_spec(spec: &NoiseModelSpec) -> Result<Self> {
        let mut per_gate = BTreeMap::new();
        for g in &spec.gates {
            if g.arity == 0 || g.arity > MAX_DENSITY_QUBITS {
                return Err(Error::Channel(format!("unsupported gate arity {}", g.arity)));
            }
            if per_gate.insert(g.arity, g.channel.build(g.arity)?).is_some() {
                return Err(Error::Channel(format!("arity {} listed twice", g.arity)));
            }
        }
        check_probability(T::lit(spec.measurement_flip))?;
        check_probability(T::lit(spec.global_depolarizing))?;
        Ok(Self {
            per_gate,
            measurement_flip: T::lit(spec.measurement_flip),
            idle: spec.idle.as_ref().map(|c| c.build(1)).transpose()?,
            global_depolarizing: T::lit(spec.global_depolarizing),
        })
    }

    pub fn with_gate_channel(mut self, channel: Channel<T>) -> Self {
        self.per_gate.insert(channel.arity, channel);
        self
    }

    pub fn with_measurement_flip(mut self, p: T) -> Result<Self> {
        check_probability(p)?;
        self.measurement_flip = p;
        Ok(self)
    }

    pub fn with_idle(mut self, channel: Channel<T>) -> Result<Self> {
        if channel.arity != 1 {
            return Err(Error::Channel("idle noise must be a 1-qubit channel".into()));
        }
        self.idle = Some(channel);
        Ok(self)
    }

    pub fn with_global_depolarizing(mut self, p: T) -> Result<Self> {
        check_probability(p)?;
        self.global_depolarizing = p;
        Ok(self)
    }

    pub fn measurement_flip(&self) -> T {
        self.measurement_flip
    }

    pub fn channel_for(&self, arity: usize) -> Option<&Channel<T>> {
        self.per_gate.get(&arity)
    }

    pub fn is_noiseless(&self) -> bool {
        self.per_gate.is_empty() && self.idle.is_none() && self.global_depolarizing == T::zero() && self.measurement_flip == T::zero()
    }

    /// Noise following an operation on `targets`.
    pub fn after_operation(&self, rho: &mut DensityMatrix<T>, targets: &[usize]) -> Result<()> {
        if let Some(ch) = self.per_gate.get(&targets.len()) {
            rho.apply_channel(ch, targets)?;
        }
        if let Some(idle) = &self.idle {
            for q in (0..rho.n_qubits()).filter(|q| !targets.contains(q)) {
                rho.apply_channel(idle, &[q])?;
            }
        }
        if self.global_depolarizing > T::zero() {
            rho.depolarize_global(self.global_depolarizing);
        }
        Ok(())
    }
}

/// Applies each gate of `circuit` followed by the model's noise.
pub fn noisy_circuit<T: Real>(rho: &DensityMatrix<T>, circuit: &Circuit<T>, params: &[T], model: &NoiseModel<T>) -> Result<DensityMatrix<T>> {
    if circuit.n_qubits() != rho.n_qubits() {
        return Err(Error::Shape("circuit and density matrix differ in width".into()));
    }
    let mut out = rho.clone();
    for g in circuit.gates() {
        out.apply_gate(g, params)?;
        model.after_operation(&mut out, g.targets())?;
    }
    Ok(out)
}

/// Gates realizing the evolution that produces plan term `index` at time `tau`.
fn evolution_circuit<T: Real>(ts: &TrainingSet<T>, variant: &CostVariant, index: usize, tau: T) -> Result<Circuit<T>> {
    let n = ts.n_qubits();
    let all: Vec<usize> = (0..n).collect();
    match variant {
        CostVariant::Global | CostVariant::Local => {
            let one = ts.step().circuit()?;
            let mut c = Circuit::new(n);
            for _ in 0..=index {
                c.extend(&one)?;
            }
            Ok(c)
        }
        CostVariant::Randomized { .. } => match ts.continuous() {
            Some(TimeEvolution::Trotter {
                hamiltonian,
                order,
                n_substeps,
            }) => trotter_circuit(
                hamiltonian,
                &TrotterSpec {
                    order: *order,
                    delta_t: tau.as_f64(),
                    n_substeps: *n_substeps,
                },
            ),
            Some(ev @ TimeEvolution::Exact { .. }) => Circuit::from_gates(n, 0, vec![Gate::unitary(all, ev.dense(tau)?)?]),
            None => Err(Error::Config("randomized cost needs a continuous-time evolution".into())),
        },
    }
}

/// Cost with every circuit of the Loschmidt echo run through `model`.
/// The diagonal `D` is applied exactly, followed by the model's channel on
/// the support of each Z-string term.
pub fn noisy_cost<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    model: &NoiseModel<T>,
    variant: &CostVariant,
    seed: u64,
) -> Result<CostValue<T>> {
    let n = ts.n_qubits();
    check_size(n)?;
    if ansatz.n_qubits() != n {
        return Err(Error::Shape("ansatz and training set differ in width".into()));
    }
    let taus: Vec<T> = match *variant {
        CostVariant::Global | CostVariant::Local => (1..=ts.n_eig()).map(|k| T::lit(k as f64) * ansatz.delta_t()).collect(),
        CostVariant::Randomized { batch, t_max, bias } => cost::randomized_times(batch, t_max, bias, seed)?.into_iter().map(T::lit).collect(),
    };
    let w_dag = ansatz.w.adjoint(&ansatz.theta)?;
    let prep_dag = ts.preparation().adjoint(&[])?;
    let supports: Vec<Vec<usize>> = ansatz
        .d
        .z_strings()
        .iter()
        .map(|m| (0..n).filter(|q| m >> (n - 1 - q) & 1 == 1).collect())
        .collect();
    let rho0 = noisy_circuit(&DensityMatrix::zero_state(n)?, ts.preparation(), &[], model)?;
    let mut per_term = Vec::with_capacity(taus.len());
    for (i, tau) in taus.iter().enumerate() {
        let mut rho = noisy_circuit(&rho0, &evolution_circuit(ts, variant, i, *tau)?, &[], model)?;
        rho = noisy_circuit(&rho, &w_dag, &[], model)?;
        let diag: Vec<C<T>> = ansatz.d.diagonal_at(*tau).iter().map(|d| d.conj()).collect();
        rho.apply_diagonal(&diag)?;
        for s in &supports {
            model.after_operation(&mut rho, s)?;
        }
        rho = noisy_circuit(&rho, &ansatz.w, &ansatz.theta, model)?;
        rho = noisy_circuit(&rho, &prep_dag, &[], model)?;
        let probs = rho.readout_probabilities(model.measurement_flip);
        let score = match variant {
            CostVariant::Local => {
                let mut total = T::zero();
                for q in 0..n {
                    let bit = 1usize << (n - 1 - q);
                    total += probs.iter().enumerate().filter(|(b, _)| b & bit == 0).map(|(_, p)| *p).sum::<T>();
                }
                total / T::lit(n as f64)
            }
            _ => probs[0],
        };
        per_term.push(score);
    }
    let mean = per_term.iter().copied().sum::<T>() / T::lit(per_term.len() as f64);
    Ok(CostValue {
        value: T::one() - mean,
        per_term,
        variant: *variant,
        shots: None,
    })
}

/// Which single parameter a resilience sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceParam {
    Theta(usize),
    Gamma(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResilienceSweep {
    pub grid: Vec<f64>,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub argmin_clean: usize,
    pub argmin_noisy: usize,
}

impl ResilienceSweep {
    /// Distance between the two argmins in grid cells.
    pub fn displacement(&self) -> usize {
        self.argmin_clean.abs_diff(self.argmin_noisy)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,cost_clean,cost_noisy\n");
        for ((g, c), n) in self.grid.iter().zip(&self.clean).zip(&self.noisy) {
            out.push_str(&format!("{g},{c},{n}\n"));
        }
        out
    }
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Clean and noisy cost along a one-parameter slice through `ansatz`.
pub fn resilience_sweep<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    param: SliceParam,
    grid: &[T],
    model: &NoiseModel<T>,
    variant: &CostVariant,
    seed: u64,
) -> Result<ResilienceSweep> {
    if grid.len() < 100 {
        return Err(Error::Config(format!("resilience grid needs at least 100 points, got {}", grid.len())));
    }
    let mut clean = Vec::with_capacity(grid.len());
    let mut noisy = Vec::with_capacity(grid.len());
    for &x in grid {
        let mut a = ansatz.clone();
        match param {
            SliceParam::Theta(l) => *a.theta.get_mut(l).ok_or_else(|| Error::Index(format!("theta {l}")))? = x,
            SliceParam::Gamma(l) => *a.d.gammas_mut().get_mut(l).ok_or_else(|| Error::Index(format!("gamma {l}")))? = x,
        }
        clean.push(cost::evaluate(ts, &a, variant, None, seed)?.value.as_f64());
        noisy.push(noisy_cost(ts, &a, model, variant, seed)?.value.as_f64());
    }
    Ok(ResilienceSweep {
        grid: grid.iter().map(|g| g.as_f64()).collect(),
        argmin_clean: argmin(&clean),
        argmin_noisy: argmin(&noisy),
        clean,
        noisy,
    })
}
