//! Energy analysis after diagonalization: eigenvectors by sampling
//! `W^dagger |psi_0>`, energy gaps from the learned phases, phase estimation
//! with controlled powers replaced by rescaled diagonals, and single-ancilla
//! eigenvalue estimation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ansatz::{DiagonalAnsatz, FsvffAnsatz};
use crate::error::{Error, Result};
use crate::evolution::StepOperator;
use crate::linalg::Matrix;
use crate::noise::{check_size, noisy_circuit, DensityMatrix, NoiseModel};
use crate::rng;
use crate::scalar::{cis, cplx, wrap_angle, Real};
use crate::statevector::{bitstring, controlled, multinomial, Angle, Circuit, Gate, GateKind, QuantumState};

/// Peak threshold as a fraction of shots.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.02;

/// Phases closer than this are reported as one degenerate group.
const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SpectrumEstimate<T: Real> {
    pub eigen_basis_states: Vec<String>,
    /// `W |v_k>` for each kept basis state.
    pub eigen_vectors: Vec<QuantumState<T>>,
    /// Weight of each basis state in `W^dagger |psi_0>` (frequency under shots).
    pub weights: Vec<f64>,
    /// Eigenphases of `D` over one step, relative to the first kept state.
    pub phases: Vec<f64>,
    /// `-phases / delta_t`.
    pub energies_relative: Vec<f64>,
    /// Indices of kept states sharing a phase, for every group of two or more.
    pub degenerate_groups: Vec<Vec<usize>>,
    pub delta_t: f64,
}

impl<T: Real> SpectrumEstimate<T> {
    /// Replaces the phases (e.g. with estimated ones), re-anchoring them on
    /// the first entry.
    pub fn set_phases(&mut self, raw: &[f64]) -> Result<()> {
        if raw.len() != self.eigen_basis_states.len() {
            return Err(Error::Shape(format!("{} phases for {} eigenvectors", raw.len(), self.eigen_basis_states.len())));
        }
        let anchor = raw.first().copied().unwrap_or(0.0);
        self.phases = raw.iter().map(|p| wrap_angle(p - anchor)).collect();
        self.energies_relative = self.phases.iter().map(|p| 0.0 - p / self.delta_t).collect();
        self.degenerate_groups = degenerate_groups(&self.phases);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("basis_state,probability,phase,energy_relative\n");
        for i in 0..self.eigen_basis_states.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.eigen_basis_states[i], self.weights[i], self.phases[i], self.energies_relative[i]
            ));
        }
        out
    }
}

fn degenerate_groups(phases: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in phases.iter().enumerate() {
        match groups.iter_mut().find(|g| wrap_angle(phases[g[0]] - p).abs() < DEGENERACY_TOL) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups.retain(|g| g.len() > 1);
    groups
}

/// Samples `W^dagger |psi_0>` and keeps basis states with frequency at least
/// `threshold`. Exact probabilities are used when `shots` is `None`. Phases
/// are read off `D` analytically; [`qee_spectrum`] measures them instead.
pub fn extract_eigvectors<T: Real>(
    ansatz: &FsvffAnsatz<T>,
    psi0: &QuantumState<T>,
    shots: Option<u64>,
    seed: u64,
    threshold: f64,
) -> Result<SpectrumEstimate<T>> {
    let n = ansatz.n_qubits();
    if psi0.n_qubits() != n {
        return Err(Error::Shape("state and ansatz differ in width".into()));
    }
    let mut v = psi0.clone();
    ansatz.w.apply(&mut v, &ansatz.theta, true)?;
    let weights: Vec<f64> = match shots {
        None => v.probabilities().iter().map(|p| p.as_f64()).collect(),
        Some(s) => {
            let counts = v.sample_counts(s, seed)?;
            (0..v.dim()).map(|b| counts.get(&bitstring(b, n)).map_or(0.0, |&c| c as f64 / s as f64)).collect()
        }
    };
    let kept: Vec<usize> = (0..weights.len()).filter(|&b| weights[b] >= threshold).collect();
    if kept.is_empty() {
        return Err(Error::Extraction(format!("no basis state reaches frequency {threshold}")));
    }
    let mut eigen_vectors = Vec::with_capacity(kept.len());
    for &b in &kept {
        let mut e = QuantumState::basis_index(n, b)?;
        ansatz.w.apply(&mut e, &ansatz.theta, false)?;
        eigen_vectors.push(e);
    }
    let dt = ansatz.delta_t();
    let raw: Vec<f64> = kept.iter().map(|&b| ansatz.d.phase(b, dt).as_f64()).collect();
    let mut est = SpectrumEstimate {
        eigen_basis_states: kept.iter().map(|&b| bitstring(b, n)).collect(),
        eigen_vectors,
        weights: kept.iter().map(|&b| weights[b]).collect(),
        phases: Vec::new(),
        energies_relative: Vec::new(),
        degenerate_groups: Vec::new(),
        delta_t: dt.as_f64(),
    };
    est.set_phases(&raw)?;
    Ok(est)
}

/// One trained diagonal and the basis-state pairs `(a, b)` whose gaps it
/// should reveal.
#[derive(Clone, Debug)]
pub struct GapRun<'a, T: Real> {
    pub d: &'a DiagonalAnsatz<T>,
    pub pairs: Vec<(usize, usize)>,
}

/// Energy gaps `E_a - E_b` from the learned phases.
///
/// A single run fixes each gap only modulo `2 pi / dt`. Candidates within
/// `|gap| <= max_gap` are collected per run and intersected across runs
/// (agreement within `tol`); a gap is returned only when exactly one
/// candidate survives.
pub fn gaps_from_gamma<T: Real>(runs: &[GapRun<'_, T>], max_gap: f64, tol: f64) -> Result<Vec<f64>> {
    let Some(first) = runs.first() else {
        return Err(Error::Config("at least one run is required".into()));
    };
    if runs.iter().any(|r| r.pairs.len() != first.pairs.len()) {
        return Err(Error::Shape("runs list different numbers of pairs".into()));
    }
    let candidates = |r: &GapRun<'_, T>, i: usize| -> Vec<f64> {
        let (a, b) = r.pairs[i];
        let dt = r.d.delta_t().as_f64();
        let phi = wrap_angle(r.d.phase(a, r.d.delta_t()).as_f64() - r.d.phase(b, r.d.delta_t()).as_f64());
        let period = std::f64::consts::TAU / dt;
        let m_max = (max_gap / period).ceil() as i64 + 1;
        (-m_max..=m_max).map(|m| -(phi + std::f64::consts::TAU * m as f64) / dt).filter(|g| g.abs() <= max_gap + tol).collect()
    };
    let mut gaps = Vec::with_capacity(first.pairs.len());
    for i in 0..first.pairs.len() {
        let mut common = candidates(first, i);
        for r in &runs[1..] {
            let other = candidates(r, i);
            common.retain(|g| other.iter().any(|h| (g - h).abs() <= tol));
        }
        match common.as_slice() {
            [g] => gaps.push(*g),
            _ => return Err(Error::Ambiguity { pair: i, candidates: common }),
        }
    }
    Ok(gaps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpeMode {
    /// Controlled step repeated `2^j` times.
    Standard,
    /// Controlled `D(2^j dt)`, constant depth in the exponent.
    Enhanced,
}

/// What a phase-estimation run acts on.
#[derive(Clone, Copy, Debug)]
pub enum QpeTarget<'a, T: Real> {
    /// Raw step `U` with a circuit preparing its eigenstate.
    Step { step: &'a StepOperator<T>, prep: &'a Circuit<T> },
    /// Trained diagonal on basis state `basis_state`; `W` only maps it to
    /// the eigenvector and commutes past the readout, so it is left out.
    Diagonal { d: &'a DiagonalAnsatz<T>, basis_state: usize },
}

impl<T: Real> QpeTarget<'_, T> {
    fn n_qubits(&self) -> usize {
        match self {
            Self::Step { step, .. } => step.n_qubits(),
            Self::Diagonal { d, .. } => d.n_qubits(),
        }
    }

    fn mode(&self) -> QpeMode {
        match self {
            Self::Step { .. } => QpeMode::Standard,
            Self::Diagonal { .. } => QpeMode::Enhanced,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpeResult {
    pub mode: QpeMode,
    pub precision_bits: usize,
    /// Over every readout string, ancilla 0 as the leftmost bit.
    pub distribution: BTreeMap<String, f64>,
    /// Against the noiseless exact distribution of the same circuit.
    pub variation_distance_to_ideal: f64,
    pub gate_count: usize,
    pub controlled_gate_count: usize,
}

impl QpeResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,probability\n");
        for (k, p) in &self.distribution {
            out.push_str(&format!("{k},{p}\n"));
        }
        out
    }

    pub fn most_likely(&self) -> (&str, f64) {
        self.distribution
            .iter()
            .fold(("", -1.0), |best, (k, &p)| if p > best.1 { (k.as_str(), p) } else { best })
    }
}

/// Gates of `D(tau)` controlled by `control`, with system qubit `q` placed
/// at `offset + q`. Only the `RZ` of each Z-string gadget needs the control.
fn controlled_diagonal<T: Real>(d: &DiagonalAnsatz<T>, tau: T, control: usize, offset: usize) -> Result<Vec<Gate<T>>> {
    d.circuit_at(tau)
        .gates()
        .iter()
        .map(|g| {
            let targets: Vec<usize> = g.targets().iter().map(|t| t + offset).collect();
            match g.kind() {
                GateKind::RZ => Gate::unitary(vec![control, targets[0]], controlled(&g.matrix(&[])?)),
                GateKind::CNOT => Ok(Gate::cnot(targets[0], targets[1])),
                other => Err(Error::Unsupported(format!("{} in a diagonal circuit", other.name()))),
            }
        })
        .collect()
}

/// Controlled step on `control`, system qubit `q` at `offset + q`.
fn controlled_step<T: Real>(step: &StepOperator<T>, control: usize, offset: usize, total: usize) -> Result<Circuit<T>> {
    let n = step.n_qubits();
    let c = Circuit::from_gates(n + 1, 0, step.controlled_gates()?)?;
    c.embed(total, |q| if q == 0 { control } else { offset + q - 1 })
}

/// Inverse quantum Fourier transform on qubits `0..m`, leftmost qubit most
/// significant on both sides.
pub fn inverse_qft<T: Real>(m: usize, total: usize) -> Result<Circuit<T>> {
    let mut c = Circuit::new(total);
    for j in 0..m / 2 {
        let (a, b) = (j, m - 1 - j);
        c.push(Gate::cnot(a, b))?;
        c.push(Gate::cnot(b, a))?;
        c.push(Gate::cnot(a, b))?;
    }
    for j in (0..m).rev() {
        for k in (j + 1..m).rev() {
            let angle = -T::TAU() / T::lit((1u64 << (k - j + 1)) as f64);
            let phase = Matrix::from_diagonal(&[cplx(T::one(), T::zero()), cis(angle)]);
            c.push(Gate::unitary(vec![k, j], controlled(&phase))?)?;
        }
        c.push(Gate::h(j))?;
    }
    Ok(c)
}

/// Full phase-estimation circuit: ancillas `0..m`, system `m..m+n`.
/// Returns the circuit and the number of gates inside controlled blocks.
pub fn qpe_circuit<T: Real>(target: &QpeTarget<'_, T>, precision_bits: usize, delta_t: T) -> Result<(Circuit<T>, usize)> {
    if !(1..=8).contains(&precision_bits) {
        return Err(Error::Config(format!("precision_bits must be in 1..=8, got {precision_bits}")));
    }
    let m = precision_bits;
    let n = target.n_qubits();
    let total = m + n;
    let mut c = Circuit::new(total);
    match target {
        QpeTarget::Step { prep, .. } => c.extend(&prep.embed(total, |q| m + q)?)?,
        QpeTarget::Diagonal { basis_state, .. } => {
            for q in 0..n {
                if basis_state >> (n - 1 - q) & 1 == 1 {
                    c.push(Gate::x(m + q))?;
                }
            }
        }
    }
    for j in 0..m {
        c.push(Gate::h(j))?;
    }
    let mut controlled_count = 0;
    for j in 0..m {
        let power = 1u64 << (m - 1 - j);
        match target {
            QpeTarget::Step { step, .. } => {
                let one = controlled_step(step, j, m, total)?;
                for _ in 0..power {
                    c.extend(&one)?;
                    controlled_count += one.len();
                }
            }
            QpeTarget::Diagonal { d, .. } => {
                let gates = controlled_diagonal(d, T::lit(power as f64) * delta_t, j, m)?;
                controlled_count += gates.len();
                for g in gates {
                    c.push(g)?;
                }
            }
        }
    }
    c.extend(&inverse_qft(m, total)?)?;
    Ok((c, controlled_count))
}

fn ancilla_marginal(probs: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; 1 << m];
    for (i, p) in probs.iter().enumerate() {
        out[i >> n] += p;
    }
    out
}

/// Phase estimation of the eigenphase `e^{2 pi i phi}` on `precision_bits`
/// ancillas. With `model` the circuit runs on density matrices (readout
/// flips included); with `shots` the distribution is a sampled frequency.
pub fn qpe<T: Real>(
    target: &QpeTarget<'_, T>,
    precision_bits: usize,
    delta_t: T,
    shots: Option<u64>,
    seed: u64,
    model: Option<&NoiseModel<T>>,
) -> Result<QpeResult> {
    let (circuit, controlled_gate_count) = qpe_circuit(target, precision_bits, delta_t)?;
    let m = precision_bits;
    let n = target.n_qubits();
    let mut state = QuantumState::zero_state(m + n)?;
    circuit.apply(&mut state, &[], false)?;
    let ideal = ancilla_marginal(&state.probabilities().iter().map(|p| p.as_f64()).collect::<Vec<_>>(), m, n);
    let mut probs = match model {
        None => ideal.clone(),
        Some(model) => {
            check_size(m + n)?;
            let rho = noisy_circuit(&DensityMatrix::zero_state(m + n)?, &circuit, &[], model)?;
            let readout: Vec<f64> = rho.readout_probabilities(model.measurement_flip()).iter().map(|p| p.as_f64()).collect();
            ancilla_marginal(&readout, m, n)
        }
    };
    if let Some(s) = shots {
        if s == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        let mut rng = rng::stream(seed, "qpe");
        probs = multinomial(&probs, s, &mut rng)?.into_iter().map(|c| c as f64 / s as f64).collect();
    }
    let distribution: BTreeMap<String, f64> = probs.iter().enumerate().map(|(y, &p)| (bitstring(y, m), p)).collect();
    let ideal_map: BTreeMap<String, f64> = ideal.iter().enumerate().map(|(y, &p)| (bitstring(y, m), p)).collect();
    Ok(QpeResult {
        mode: target.mode(),
        precision_bits,
        variation_distance_to_ideal: variation_distance(&distribution, &ideal_map),
        distribution,
        gate_count: circuit.len(),
        controlled_gate_count,
    })
}

/// Probability of a phase-estimation readout `y` for eigenphase `phi`
/// (fraction of a turn) on `m` ancillas.
pub fn qpe_probability(phi: f64, m: usize, y: usize) -> f64 {
    let big_m = (1u64 << m) as f64;
    let delta = phi - y as f64 / big_m;
    let (re, im) = (0..1u64 << m).fold((0.0, 0.0), |(re, im), x| {
        let a = std::f64::consts::TAU * x as f64 * delta;
        (re + a.cos(), im + a.sin())
    });
    (re * re + im * im) / (big_m * big_m)
}

/// `(1/2) sum |p - q|` over the union of both supports.
pub fn variation_distance(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Hadamard-test circuit on ancilla 0 for `<v|D(dt)|v>`; `imaginary` adds
/// `S^dagger` before the closing Hadamard.
pub fn hadamard_test_circuit<T: Real>(d: &DiagonalAnsatz<T>, basis_state: usize, imaginary: bool) -> Result<Circuit<T>> {
    let n = d.n_qubits();
    if basis_state >= 1 << n {
        return Err(Error::Index(format!("basis state {basis_state} out of range for {n} qubits")));
    }
    let mut c = Circuit::new(n + 1);
    for q in 0..n {
        if basis_state >> (n - 1 - q) & 1 == 1 {
            c.push(Gate::x(q + 1))?;
        }
    }
    c.push(Gate::h(0))?;
    for g in controlled_diagonal(d, d.delta_t(), 0, 1)? {
        c.push(g)?;
    }
    if imaginary {
        c.push(Gate::phase(0, Angle::Fixed(-T::FRAC_PI_2())))?;
    }
    c.push(Gate::h(0))?;
    Ok(c)
}

/// Eigenphase of `D` on `basis_state` from two Hadamard tests, in
/// `(-pi, pi]`. Exact ancilla probabilities when `shots` is `None`.
pub fn qee<T: Real>(ansatz: &FsvffAnsatz<T>, basis_state: usize, shots: Option<u64>, seed: u64) -> Result<f64> {
    let mut parts = [0.0; 2];
    for (i, imaginary) in [false, true].into_iter().enumerate() {
        let c = hadamard_test_circuit(&ansatz.d, basis_state, imaginary)?;
        let mut s = QuantumState::zero_state(ansatz.n_qubits() + 1)?;
        c.apply(&mut s, &[], false)?;
        let half = 1usize << ansatz.n_qubits();
        let p0: f64 = s.probabilities()[..half].iter().map(|p| p.as_f64()).sum();
        let p0 = match shots {
            None => p0,
            Some(0) => return Err(Error::Config("shots must be at least 1".into())),
            Some(n) => {
                let mut rng = rng::substream(seed, "qee", i as u64);
                multinomial(&[p0, 1.0 - p0], n, &mut rng)?[0] as f64 / n as f64
            }
        };
        parts[i] = 2.0 * p0 - 1.0;
    }
    let amplitude = parts[0].hypot(parts[1]);
    if amplitude < 0.1 {
        return Err(Error::UnreliablePhase(amplitude));
    }
    Ok(wrap_angle(parts[1].atan2(parts[0])))
}

/// Runs [`qee`] on every extracted eigenvector and stores the phases
/// relative to the first one.
pub fn qee_spectrum<T: Real>(ansatz: &FsvffAnsatz<T>, estimate: &mut SpectrumEstimate<T>, shots: Option<u64>, seed: u64) -> Result<()> {
    let raw = estimate
        .eigen_basis_states
        .iter()
        .enumerate()
        .map(|(i, b)| qee(ansatz, crate::statevector::parse_bitstring(b)?, shots, rng::derive_seed(seed, "qee-spectrum", i as u64)))
        .collect::<Result<Vec<f64>>>()?;
    estimate.set_phases(&raw)
}
