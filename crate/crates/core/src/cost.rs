//! Training objectives and their parameter-shift gradients.
//!
//! Every cost is `1 - mean_j s_j` over a plan of terms `(tau_j, target_j)`,
//! where `target_j = U(tau_j)|psi_0>` and the score `s_j` compares it with
//! `V(tau_j)|psi_0>`. The global score is the Loschmidt return probability
//! `|<psi_0|V(tau)^dagger U(tau)|psi_0>|^2`; the local score averages the
//! single-qubit all-zero marginals of `V_psi0^dagger V(tau)^dagger U(tau) V_psi0 |0>`.

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::FsvffAnsatz;
use crate::error::{Error, Result};
use crate::evolution::{StepOperator, TimeEvolution};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::{cplx, Real, C};
use crate::statevector::{Circuit, Gate, QuantumState};

pub const DEFAULT_BIAS: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CostVariant {
    Global,
    Local,
    Randomized { batch: usize, t_max: f64, bias: f64 },
}

impl CostVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::Local => "local",
            Self::Randomized { .. } => "randomized",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostValue<T> {
    pub value: T,
    /// Score of each plan term (overlap for global/randomized, mean
    /// marginal for local).
    pub per_term: Vec<T>,
    pub variant: CostVariant,
    pub shots: Option<u64>,
}

/// Training data: the fixed state, the step being learned, and the Krylov
/// dimension that sets how many powers `U^k` enter the cost.
#[derive(Clone, Debug)]
pub struct TrainingSet<T: Real> {
    psi0: QuantumState<T>,
    step: StepOperator<T>,
    n_eig: usize,
    preparation: Circuit<T>,
    targets: Vec<QuantumState<T>>,
    continuous: Option<TimeEvolution<T>>,
}

impl<T: Real> TrainingSet<T> {
    pub fn new(psi0: QuantumState<T>, step: StepOperator<T>, n_eig: usize) -> Result<Self> {
        if n_eig < 1 {
            return Err(Error::Config("n_eig must be at least 1".into()));
        }
        if step.n_qubits() != psi0.n_qubits() {
            return Err(Error::Shape("step operator and initial state differ in width".into()));
        }
        let preparation = preparation_circuit(&psi0)?;
        let mut targets = Vec::with_capacity(n_eig);
        let mut s = psi0.clone();
        for _ in 0..n_eig {
            step.apply(&mut s, false)?;
            targets.push(s.clone());
        }
        Ok(Self {
            psi0,
            step,
            n_eig,
            preparation,
            targets,
            continuous: None,
        })
    }

    /// Attaches the continuous-time propagator used by the randomized cost.
    pub fn with_continuous(mut self, evolution: TimeEvolution<T>) -> Result<Self> {
        if evolution.n_qubits() != self.psi0.n_qubits() {
            return Err(Error::Shape("continuous evolution differs in width".into()));
        }
        self.continuous = Some(evolution);
        Ok(self)
    }

    pub fn psi0(&self) -> &QuantumState<T> {
        &self.psi0
    }

    pub fn step(&self) -> &StepOperator<T> {
        &self.step
    }

    pub fn n_eig(&self) -> usize {
        self.n_eig
    }

    pub fn n_qubits(&self) -> usize {
        self.psi0.n_qubits()
    }

    pub fn preparation(&self) -> &Circuit<T> {
        &self.preparation
    }

    pub fn continuous(&self) -> Option<&TimeEvolution<T>> {
        self.continuous.as_ref()
    }

    /// `U^k |psi_0>` for `k = 1..=n_eig`.
    pub fn targets(&self) -> &[QuantumState<T>] {
        &self.targets
    }

    /// Plan terms for `variant`; the randomized plan draws its times from `seed`.
    pub fn plan(&self, variant: &CostVariant, delta_t: T, seed: u64) -> Result<Vec<(T, QuantumState<T>)>> {
        match *variant {
            CostVariant::Global | CostVariant::Local => Ok(self
                .targets
                .iter()
                .enumerate()
                .map(|(i, t)| (T::lit((i + 1) as f64) * delta_t, t.clone()))
                .collect()),
            CostVariant::Randomized { batch, t_max, bias } => {
                let evolution = self
                    .continuous
                    .as_ref()
                    .ok_or_else(|| Error::Config("randomized cost needs a continuous-time evolution".into()))?;
                randomized_times(batch, t_max, bias, seed)?
                    .into_iter()
                    .map(|t| {
                        let tau = T::lit(t);
                        let mut s = self.psi0.clone();
                        evolution.apply(&mut s, tau)?;
                        Ok((tau, s))
                    })
                    .collect()
            }
        }
    }
}

/// Times `r * t_max` with `r = sign(u)|u|^bias`, `u` uniform on `[-1, 1]`.
pub fn randomized_times(batch: usize, t_max: f64, bias: f64, seed: u64) -> Result<Vec<f64>> {
    if batch < 1 {
        return Err(Error::Config("batch must be at least 1".into()));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::Config("t_max must be positive".into()));
    }
    if !(bias > 0.0) || !bias.is_finite() {
        return Err(Error::Config("bias must be positive".into()));
    }
    let mut rng = rng::stream(seed, "randomized-times");
    Ok((0..batch)
        .map(|_| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            u.signum() * u.abs().powf(bias) * t_max
        })
        .collect())
}

/// Circuit `V_psi0` with `V_psi0|0...0> = |psi_0>`: X gates for basis states,
/// otherwise a phased Householder reflection.
pub fn preparation_circuit<T: Real>(psi0: &QuantumState<T>) -> Result<Circuit<T>> {
    let n = psi0.n_qubits();
    let amps = psi0.amplitudes();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let mut circ = Circuit::new(n);
    if let Some(idx) = amps.iter().position(|a| (a.norm() - T::one()).abs() < tol) {
        if amps[idx].re > T::zero() && amps[idx].im.abs() < tol {
            for q in 0..n {
                if idx >> (n - 1 - q) & 1 == 1 {
                    circ.push(Gate::x(q))?;
                }
            }
            return Ok(circ);
        }
    }
    let phase = if amps[0].norm() > tol { amps[0] / cplx(amps[0].norm(), T::zero()) } else { cplx(T::one(), T::zero()) };
    let rotated: Vec<C<T>> = amps.iter().map(|a| *a / phase).collect();
    let dim = amps.len();
    let mut w: Vec<C<T>> = rotated.iter().map(|a| -*a).collect();
    w[0] += cplx(T::one(), T::zero());
    let wn: T = w.iter().map(|z| z.norm_sqr()).sum();
    let reflection = if wn < tol * tol {
        Matrix::identity(dim)
    } else {
        let two = cplx(T::lit(2.0) / wn, T::zero());
        Matrix::from_fn(dim, dim, |i, j| {
            let delta = if i == j { cplx(T::one(), T::zero()) } else { cplx(T::zero(), T::zero()) };
            delta - two * w[i] * w[j].conj()
        })
    };
    circ.push(Gate::unitary((0..n).collect(), reflection.scale(phase))?)?;
    Ok(circ)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Score {
    Global,
    Local,
}

fn score_kind(variant: &CostVariant) -> Score {
    match variant {
        CostVariant::Local => Score::Local,
        _ => Score::Global,
    }
}

/// Score of one plan term for explicit (possibly shifted) outer and inner
/// copies of W and an explicit diagonal for `D(tau)`.
#[allow(clippy::too_many_arguments)]
fn score_term<T: Real>(
    ts: &TrainingSet<T>,
    kind: Score,
    w_outer: &Circuit<T>,
    w_inner: &Circuit<T>,
    theta: &[T],
    diag: &[C<T>],
    target: &QuantumState<T>,
    shots: Option<u64>,
    rng: &mut rng::Rng,
) -> Result<T> {
    // z = V(tau)^dagger target = W D(tau)^dagger W^dagger target
    let mut z = target.clone();
    w_inner.apply(&mut z, theta, true)?;
    let conj: Vec<C<T>> = diag.iter().map(|d| d.conj()).collect();
    z.apply_diagonal(&conj)?;
    w_outer.apply(&mut z, theta, false)?;
    match kind {
        Score::Global => {
            let p = ts.psi0.inner_product(&z)?.norm_sqr();
            sample(p, shots, rng)
        }
        Score::Local => {
            ts.preparation.apply(&mut z, &[], true)?;
            let n = z.n_qubits();
            let probs = z.probabilities();
            let mut total = T::zero();
            for q in 0..n {
                let bit = 1usize << (n - 1 - q);
                let p0: T = probs.iter().enumerate().filter(|(i, _)| i & bit == 0).map(|(_, p)| *p).sum();
                total += sample(p0, shots, rng)?;
            }
            Ok(total / T::lit(n as f64))
        }
    }
}

fn sample<T: Real>(p: T, shots: Option<u64>, rng: &mut rng::Rng) -> Result<T> {
    match shots {
        None => Ok(p),
        Some(0) => Err(Error::Config("shots must be at least 1".into())),
        Some(s) => {
            let hits = Binomial::new(s, p.as_f64().clamp(0.0, 1.0))
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(rng);
            Ok(T::lit(hits as f64 / s as f64))
        }
    }
}

/// `|<psi_0|(V^dagger)^k U^k|psi_0>|^2`, exact or as an all-zeros frequency.
pub fn loschmidt_overlap<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, k: usize, shots: Option<u64>, seed: u64) -> Result<T> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut s = ts.psi0.clone();
    ts.step.apply_power(&mut s, k)?;
    let tau = T::lit(k as f64) * ansatz.delta_t();
    let mut rng = rng::substream(seed, "loschmidt", k as u64);
    score_term(ts, Score::Global, &ansatz.w, &ansatz.w, &ansatz.theta, &ansatz.d.diagonal_at(tau), &s, shots, &mut rng)
}

/// Cost of `ansatz` under `variant`.
pub fn evaluate<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, variant: &CostVariant, shots: Option<u64>, seed: u64) -> Result<CostValue<T>> {
    evaluate_terms(ts, ansatz, variant, None, shots, seed)
}

fn selected_plan<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    variant: &CostVariant,
    terms: Option<&[usize]>,
    seed: u64,
) -> Result<Vec<(T, QuantumState<T>)>> {
    check_widths(ts, ansatz)?;
    let plan = ts.plan(variant, ansatz.delta_t(), seed)?;
    match terms {
        None => Ok(plan),
        Some([]) => Err(Error::Config("empty term selection".into())),
        Some(idx) => idx
            .iter()
            .map(|&i| {
                plan.get(i)
                    .cloned()
                    .ok_or_else(|| Error::Index(format!("term {i} of {}", plan.len())))
            })
            .collect(),
    }
}

/// Cost restricted to the plan terms in `terms` (all terms when `None`).
pub fn evaluate_terms<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    variant: &CostVariant,
    terms: Option<&[usize]>,
    shots: Option<u64>,
    seed: u64,
) -> Result<CostValue<T>> {
    let plan = selected_plan(ts, ansatz, variant, terms, seed)?;
    let kind = score_kind(variant);
    let mut rng = rng::stream(seed, "cost-shots");
    let per_term = plan
        .iter()
        .map(|(tau, target)| {
            score_term(ts, kind, &ansatz.w, &ansatz.w, &ansatz.theta, &ansatz.d.diagonal_at(*tau), target, shots, &mut rng)
        })
        .collect::<Result<Vec<T>>>()?;
    let mean = per_term.iter().copied().sum::<T>() / T::lit(per_term.len() as f64);
    Ok(CostValue {
        value: T::one() - mean,
        per_term,
        variant: *variant,
        shots,
    })
}

pub fn cost_global<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, shots: Option<u64>, seed: u64) -> Result<CostValue<T>> {
    evaluate(ts, ansatz, &CostVariant::Global, shots, seed)
}

pub fn cost_local<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, shots: Option<u64>, seed: u64) -> Result<CostValue<T>> {
    evaluate(ts, ansatz, &CostVariant::Local, shots, seed)
}

pub fn cost_randomized<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    batch: usize,
    t_max: f64,
    bias: f64,
    seed: u64,
    shots: Option<u64>,
) -> Result<CostValue<T>> {
    evaluate(ts, ansatz, &CostVariant::Randomized { batch, t_max, bias }, shots, seed)
}

fn check_widths<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>) -> Result<()> {
    if ts.n_qubits() != ansatz.n_qubits() {
        return Err(Error::Shape(format!(
            "{}-qubit ansatz against {}-qubit training set",
            ansatz.n_qubits(),
            ts.n_qubits()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub theta: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Real> Gradient<T> {
    pub fn norm(&self) -> T {
        self.theta.iter().chain(&self.gamma).map(|g| *g * *g).sum::<T>().sqrt()
    }
}

/// Four-term shift rule for `theta_l`: shift the outer W, then the inner W,
/// by `+-pi/2` on every rotation factor driven by `l`.
fn theta_derivative<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    plan: &[(T, QuantumState<T>)],
    kind: Score,
    l: usize,
    shots: Option<u64>,
    rng: &mut rng::Rng,
) -> Result<T> {
    if l >= ansatz.theta.len() {
        return Err(Error::Index(format!("theta index {l} of {}", ansatz.theta.len())));
    }
    let shift = T::FRAC_PI_2();
    let half = T::lit(0.5);
    let diags: Vec<Vec<C<T>>> = plan.iter().map(|(tau, _)| ansatz.d.diagonal_at(*tau)).collect();
    let mean = |outer: &Circuit<T>, inner: &Circuit<T>, rng: &mut rng::Rng| -> Result<T> {
        let mut acc = T::zero();
        for ((_, target), diag) in plan.iter().zip(&diags) {
            acc += score_term(ts, kind, outer, inner, &ansatz.theta, diag, target, shots, rng)?;
        }
        Ok(acc / T::lit(plan.len() as f64))
    };
    let mut total = T::zero();
    for gi in ansatz.w.param_occurrences(l) {
        let factors = ansatz.w.gates()[gi]
            .rotation_factors()
            .ok_or_else(|| Error::Unsupported(format!("parameter {l} drives a {} gate", ansatz.w.gates()[gi].kind())))?;
        for (f, (_, coeff)) in factors.iter().enumerate() {
            let plus = ansatz.w.with_shifted_gate(gi, &ansatz.theta, f, shift)?;
            let minus = ansatz.w.with_shifted_gate(gi, &ansatz.theta, f, -shift)?;
            let d = half
                * (mean(&plus, &ansatz.w, rng)? - mean(&minus, &ansatz.w, rng)? + mean(&ansatz.w, &plus, rng)?
                    - mean(&ansatz.w, &minus, rng)?);
            total += *coeff * d;
        }
    }
    // cost = 1 - mean score
    Ok(-total)
}

/// Shift rule for `gamma_l`. Term `l` of `D(tau)` is the rotation
/// `exp(-i phi Z^l / 2)` with `phi = -2 tau gamma_l`; the `+-pi/2` shift acts
/// on the accumulated `phi` once, and the chain factor is `-2 tau`.
fn gamma_derivative<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    plan: &[(T, QuantumState<T>)],
    kind: Score,
    l: usize,
    shots: Option<u64>,
    rng: &mut rng::Rng,
) -> Result<T> {
    if l >= ansatz.d.len() {
        return Err(Error::Index(format!("gamma index {l} of {}", ansatz.d.len())));
    }
    let shift = T::FRAC_PI_2();
    let mut total = T::zero();
    for (tau, target) in plan {
        let plus = ansatz.d.diagonal_shifted(*tau, l, shift);
        let minus = ansatz.d.diagonal_shifted(*tau, l, -shift);
        let sp = score_term(ts, kind, &ansatz.w, &ansatz.w, &ansatz.theta, &plus, target, shots, rng)?;
        let sm = score_term(ts, kind, &ansatz.w, &ansatz.w, &ansatz.theta, &minus, target, shots, rng)?;
        // d score / d gamma = (-2 tau) * (sp - sm) / 2
        total += -*tau * (sp - sm);
    }
    Ok(-total / T::lit(plan.len() as f64))
}

/// `dC_global / d theta_l`.
pub fn grad_theta<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, l: usize, shots: Option<u64>, seed: u64) -> Result<T> {
    check_widths(ts, ansatz)?;
    let plan = ts.plan(&CostVariant::Global, ansatz.delta_t(), seed)?;
    theta_derivative(ts, ansatz, &plan, Score::Global, l, shots, &mut rng::stream(seed, "grad-theta"))
}

/// `dC_global / d gamma_l`.
pub fn grad_gamma<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, l: usize, shots: Option<u64>, seed: u64) -> Result<T> {
    check_widths(ts, ansatz)?;
    let plan = ts.plan(&CostVariant::Global, ansatz.delta_t(), seed)?;
    gamma_derivative(ts, ansatz, &plan, Score::Global, l, shots, &mut rng::stream(seed, "grad-gamma"))
}

/// Full gradient under `variant`. The randomized plan is drawn from `seed`,
/// matching `evaluate` with the same seed.
pub fn gradient<T: Real>(ts: &TrainingSet<T>, ansatz: &FsvffAnsatz<T>, variant: &CostVariant, shots: Option<u64>, seed: u64) -> Result<Gradient<T>> {
    gradient_terms(ts, ansatz, variant, None, shots, seed)
}

/// Gradient of [`evaluate_terms`].
pub fn gradient_terms<T: Real>(
    ts: &TrainingSet<T>,
    ansatz: &FsvffAnsatz<T>,
    variant: &CostVariant,
    terms: Option<&[usize]>,
    shots: Option<u64>,
    seed: u64,
) -> Result<Gradient<T>> {
    let plan = selected_plan(ts, ansatz, variant, terms, seed)?;
    let kind = score_kind(variant);
    let mut rng = rng::stream(seed, "gradient");
    let theta = (0..ansatz.theta.len())
        .map(|l| theta_derivative(ts, ansatz, &plan, kind, l, shots, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let gamma = (0..ansatz.d.len())
        .map(|l| gamma_derivative(ts, ansatz, &plan, kind, l, shots, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Gradient { theta, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{hardware_xy_ansatz, DiagonalAnsatz};
    use crate::hamiltonian::{build_xy, trotter_circuit, TrotterSpec};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn xy_set(n: usize, bits: &str, n_eig: usize) -> TrainingSet<f64> {
        let u = trotter_circuit(&build_xy(n).unwrap(), &TrotterSpec::first(0.5)).unwrap();
        TrainingSet::new(QuantumState::basis_state(bits).unwrap(), StepOperator::Circuit(u), n_eig).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> QuantumState<f64> {
        let mut rng = rng::stream(seed, "cost-test");
        QuantumState::from_amplitudes(
            (0..1 << n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn preparation_reproduces_state() {
        for psi in [
            QuantumState::basis_state("0110").unwrap(),
            QuantumState::superposition(&["00", "10"]).unwrap(),
            random_state(3, 1),
            QuantumState::zero_state(2).unwrap(),
        ] {
            let prep = preparation_circuit(&psi).unwrap();
            let mut s = QuantumState::zero_state(psi.n_qubits()).unwrap();
            prep.apply(&mut s, &[], false).unwrap();
            for (a, b) in s.amplitudes().iter().zip(psi.amplitudes()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
        // a basis state with a phase still needs the reflection
        let phased = QuantumState::from_amplitudes(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let prep = preparation_circuit(&phased).unwrap();
        let mut s = QuantumState::zero_state(1).unwrap();
        prep.apply(&mut s, &[], false).unwrap();
        assert!((s.amplitudes()[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_ansatz_overlap_is_return_probability() {
        let ts = xy_set(2, "10", 2);
        let a = hardware_xy_ansatz::<f64>(0.5);
        let a = FsvffAnsatz::new(Circuit::with_params(2, 2), a.d, a.theta).unwrap();
        let u = ts.step().dense().unwrap();
        for k in 1..4 {
            let mut v = ts.psi0().amplitudes().to_vec();
            for _ in 0..k {
                v = u.mul_vec(&v);
            }
            let expected = crate::linalg::inner(ts.psi0().amplitudes(), &v).norm_sqr();
            assert!((loschmidt_overlap(&ts, &a, k, None, 0).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn global_phase_in_d_is_invisible() {
        let ts = xy_set(2, "10", 2);
        let mut a = hardware_xy_ansatz::<f64>(0.5);
        a.theta = vec![0.3, 1.1];
        a.d.set_gammas(&[0.8]).unwrap();
        let base = cost_global(&ts, &a, None, 0).unwrap().value;
        let diag: Vec<Complex64> = a.d.diagonal(1).iter().map(|d| d * Complex64::from_polar(1.0, 0.7)).collect();
        let mut s = ts.targets()[0].clone();
        a.w.apply(&mut s, &a.theta, true).unwrap();
        let conj: Vec<Complex64> = diag.iter().map(|d| d.conj()).collect();
        s.apply_diagonal(&conj).unwrap();
        a.w.apply(&mut s, &a.theta, false).unwrap();
        let with_phase = ts.psi0().inner_product(&s).unwrap().norm_sqr();
        assert!((with_phase - loschmidt_overlap(&ts, &a, 1, None, 0).unwrap()).abs() < 1e-14);
        assert!(base >= 0.0 && base <= 1.0);
    }

    #[test]
    fn exact_ansatz_has_zero_cost() {
        // U diagonal in a rotated basis: U = W0 D0 W0^dagger with known parameters
        let mut a = hardware_xy_ansatz::<f64>(0.5);
        a.theta = vec![0.4, -0.9];
        a.d.set_gammas(&[1.3]).unwrap();
        let u = a.dense_v(1).unwrap();
        let ts = TrainingSet::new(random_state(2, 3), StepOperator::Dense(u), 3).unwrap();
        for variant in [CostVariant::Global, CostVariant::Local] {
            assert!(evaluate(&ts, &a, &variant, None, 0).unwrap().value.abs() < 1e-12);
        }
        let g = gradient(&ts, &a, &CostVariant::Global, None, 0).unwrap();
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn local_equals_global_on_one_qubit() {
        let d = DiagonalAnsatz::new(1, vec![1], vec![0.6], 0.5).unwrap();
        let mut w = Circuit::with_params(1, 2);
        w.push(Gate::ry(0, crate::statevector::Angle::Param(0))).unwrap();
        w.push(Gate::rz(0, crate::statevector::Angle::Param(1))).unwrap();
        let a = FsvffAnsatz::new(w, d, vec![0.3, -0.2]).unwrap();
        let u = crate::linalg::hermitian_propagator(&crate::hamiltonian::Pauli::X.matrix(), 0.5);
        let ts = TrainingSet::new(random_state(1, 9), StepOperator::Dense(u), 2).unwrap();
        let g = cost_global(&ts, &a, None, 0).unwrap().value;
        let l = cost_local(&ts, &a, None, 0).unwrap().value;
        assert!((g - l).abs() < 1e-12);
    }

    #[test]
    fn randomized_times_are_biased_monotonically() {
        let a = randomized_times(16, 1.0, 1.0, 5).unwrap();
        let b = randomized_times(16, 1.0, DEFAULT_BIAS, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.signum(), y.signum());
            assert!(y.abs() >= x.abs() - 1e-15);
        }
        let mut order_a: Vec<usize> = (0..16).collect();
        order_a.sort_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()));
        let mut order_b: Vec<usize> = (0..16).collect();
        order_b.sort_by(|&i, &j| b[i].abs().total_cmp(&b[j].abs()));
        assert_eq!(order_a, order_b);
        assert!(randomized_times(0, 1.0, 1.0, 0).is_err());
        assert!(randomized_times(1, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn randomized_cost_vanishes_for_exact_evolution() {
        // a diagonal Hamiltonian is represented exactly by W = identity and
        // gamma = -(Z coefficients)
        let mut h = crate::hamiltonian::PauliSum::<f64>::new(2);
        h.add_term(0.7, "ZI".parse().unwrap()).unwrap();
        h.add_term(-0.4, "IZ".parse().unwrap()).unwrap();
        let ev = TimeEvolution::exact(&h).unwrap();
        let ts = TrainingSet::new(random_state(2, 4), StepOperator::Dense(ev.dense(0.5).unwrap()), 2)
            .unwrap()
            .with_continuous(ev)
            .unwrap();
        let d = DiagonalAnsatz::new(2, vec![0b10, 0b01], vec![-0.7, 0.4], 0.5).unwrap();
        let a = FsvffAnsatz::new(Circuit::new(2), d, vec![]).unwrap();
        for batch in [1, 2, 7] {
            let c = cost_randomized(&ts, &a, batch, 1.0, DEFAULT_BIAS, 3, None).unwrap();
            assert!(c.value.abs() < 1e-12);
            assert_eq!(c.per_term.len(), batch);
        }
        let no_continuous = TrainingSet::new(random_state(2, 4), StepOperator::Dense(Matrix::identity(4)), 1).unwrap();
        assert!(cost_randomized(&no_continuous, &a, 2, 1.0, 0.75, 0, None).is_err());
    }

    #[test]
    fn gradient_index_errors() {
        let ts = xy_set(2, "10", 2);
        let a = hardware_xy_ansatz::<f64>(0.5);
        assert!(matches!(grad_theta(&ts, &a, 2, None, 0), Err(Error::Index(_))));
        assert!(matches!(grad_gamma(&ts, &a, 1, None, 0), Err(Error::Index(_))));
    }

    #[test]
    fn decoupled_gamma_has_zero_gradient() {
        // |00> is invariant under the XY step and under W = CNOT-based ansatz
        // at theta = 0; a Z-string on qubit 1 only sees |0> there
        let ts = xy_set(2, "00", 1);
        let mut a = hardware_xy_ansatz::<f64>(0.5);
        a.d.push_term(0b01).unwrap();
        a.d.set_gammas(&[0.3, 0.9]).unwrap();
        let c0 = cost_global(&ts, &a, None, 0).unwrap().value;
        assert!(c0.abs() < 1e-12);
        assert!(grad_gamma(&ts, &a, 1, None, 0).unwrap().abs() < 1e-12);
        assert!(grad_theta(&ts, &a, 0, None, 0).unwrap().abs() < 1e-12);
    }

    fn central_difference(ts: &TrainingSet<f64>, a: &FsvffAnsatz<f64>, variant: &CostVariant, which: (bool, usize), h: f64) -> f64 {
        let eval = |delta: f64| {
            let mut b = a.clone();
            if which.0 {
                b.theta[which.1] += delta;
            } else {
                b.d.gammas_mut()[which.1] += delta;
            }
            evaluate(ts, &b, variant, None, 11).unwrap().value
        };
        (eval(h) - eval(-h)) / (2.0 * h)
    }

    #[test]
    fn shift_rule_matches_finite_differences_on_mixed_circuit() {
        let ts = xy_set(3, "110", 3);
        let mut w = crate::ansatz::givens_brickwall::<f64>(3, 2);
        for q in 0..3 {
            let p = w.add_param();
            w.push(Gate::rx(q, crate::statevector::Angle::Param(p))).unwrap();
        }
        let p = w.add_param();
        w.push(Gate::rzz(0, 2, crate::statevector::Angle::Param(p))).unwrap();
        w.push(Gate::phase(1, crate::statevector::Angle::Param(0))).unwrap();
        let mut rng = rng::stream(1, "grad-test");
        let theta = (0..w.n_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut d = DiagonalAnsatz::single_z(3, 0.5);
        d.push_term(0b101).unwrap();
        let g: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        d.set_gammas(&g).unwrap();
        let a = FsvffAnsatz::new(w, d, theta).unwrap();
        for variant in [CostVariant::Global, CostVariant::Local] {
            let grad = gradient(&ts, &a, &variant, None, 11).unwrap();
            for (l, g) in grad.theta.iter().enumerate() {
                let fd = central_difference(&ts, &a, &variant, (true, l), 1e-5);
                assert!((g - fd).abs() < 1e-7, "{variant:?} theta {l}: {g} vs {fd}");
            }
            for (l, g) in grad.gamma.iter().enumerate() {
                let fd = central_difference(&ts, &a, &variant, (false, l), 1e-5);
                assert!((g - fd).abs() < 1e-7, "{variant:?} gamma {l}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn randomized_gradient_matches_finite_differences() {
        let h = build_xy::<f64>(3).unwrap();
        let ev = TimeEvolution::exact(&h).unwrap();
        let ts = TrainingSet::new(QuantumState::basis_state("110").unwrap(), StepOperator::Dense(ev.dense(1.0).unwrap()), 3)
            .unwrap()
            .with_continuous(ev)
            .unwrap();
        let w = crate::ansatz::givens_brickwall::<f64>(3, 3);
        let mut rng = rng::stream(2, "grad-test");
        let theta = (0..w.n_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut d = DiagonalAnsatz::single_z(3, 1.0);
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        d.set_gammas(&g).unwrap();
        let a = FsvffAnsatz::new(w, d, theta).unwrap();
        let variant = CostVariant::Randomized { batch: 3, t_max: 1.0, bias: DEFAULT_BIAS };
        let grad = gradient(&ts, &a, &variant, None, 11).unwrap();
        for (l, g) in grad.theta.iter().enumerate() {
            assert!((g - central_difference(&ts, &a, &variant, (true, l), 1e-5)).abs() < 1e-7);
        }
        for (l, g) in grad.gamma.iter().enumerate() {
            assert!((g - central_difference(&ts, &a, &variant, (false, l), 1e-5)).abs() < 1e-7);
        }
    }

    #[test]
    fn shot_mode_is_unbiased() {
        let ts = xy_set(2, "10", 2);
        let mut a = hardware_xy_ansatz::<f64>(0.5);
        a.theta = vec![0.2, 0.7];
        a.d.set_gammas(&[0.5]).unwrap();
        let exact = cost_global(&ts, &a, None, 0).unwrap();
        let shots = 1000;
        let mean = (0..100).map(|s| cost_global(&ts, &a, Some(shots), s).unwrap().value).sum::<f64>() / 100.0;
        // each of the n_eig terms is a binomial frequency
        let var: f64 = exact.per_term.iter().map(|p| p * (1.0 - p) / shots as f64).sum::<f64>() / (exact.per_term.len() as f64).powi(2);
        let sigma = (var / 100.0).sqrt();
        assert!((mean - exact.value).abs() <= 3.0 * sigma.max(1e-12), "{mean} vs {}", exact.value);
    }

    fn random_instance(n: usize, seed: u64) -> (TrainingSet<f64>, FsvffAnsatz<f64>) {
        let mut rng = rng::stream(seed, "instance");
        let m = Matrix::<f64>::from_fn(1 << n, 1 << n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let u = crate::linalg::hermitian_propagator(&m.add(&m.dagger()), rng.random_range(0.1..1.5));
        let ts = TrainingSet::new(random_state(n, seed), StepOperator::Dense(u), rng.random_range(1..4)).unwrap();
        let mut w = crate::ansatz::givens_brickwall::<f64>(n, 2);
        for q in 0..n {
            let p = w.add_param();
            w.push(Gate::ry(q, crate::statevector::Angle::Param(p))).unwrap();
        }
        let p = w.add_param();
        w.push(Gate::rzz(0, n - 1, crate::statevector::Angle::Param(p))).unwrap();
        let theta = (0..w.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut d = DiagonalAnsatz::single_z(n, rng.random_range(0.2..1.0));
        if n > 1 {
            d.push_term(0b11).unwrap();
        }
        let g: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        d.set_gammas(&g).unwrap();
        (ts, FsvffAnsatz::new(w, d, theta).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn shift_rule_matches_finite_differences(seed in 0u64..1_000_000, n in 2usize..=4, pick in 0usize..1000, local in any::<bool>()) {
            let (ts, a) = random_instance(n, seed);
            let variant = if local { CostVariant::Local } else { CostVariant::Global };
            let grad = gradient(&ts, &a, &variant, None, 0).unwrap();
            let total = grad.theta.len() + grad.gamma.len();
            let idx = pick % total;
            let (which, g) = if idx < grad.theta.len() { ((true, idx), grad.theta[idx]) } else { ((false, idx - grad.theta.len()), grad.gamma[idx - grad.theta.len()]) };
            let fd = central_difference(&ts, &a, &variant, which, 1e-5);
            // relative error, floored where the derivative itself vanishes
            prop_assert!((g - fd).abs() / fd.abs().max(1e-4) < 1e-5, "{g} vs {fd}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn sandwich_bound_and_range(seed in 0u64..1_000_000, n in 1usize..=5) {
            let mut rng = rng::stream(seed, "sandwich");
            let m = Matrix::<f64>::from_fn(1 << n, 1 << n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let u = crate::linalg::hermitian_propagator(&m.add(&m.dagger()), rng.random_range(0.1..1.5));
            let ts = TrainingSet::new(random_state(n, seed), StepOperator::Dense(u), rng.random_range(1..4)).unwrap();
            let w = crate::ansatz::givens_brickwall::<f64>(n, 2);
            let theta = (0..w.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut d = DiagonalAnsatz::single_z(n, 0.5);
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            d.set_gammas(&g).unwrap();
            let a = FsvffAnsatz::new(w, d, theta).unwrap();
            let cg = cost_global(&ts, &a, None, 0).unwrap().value;
            let cl = cost_local(&ts, &a, None, 0).unwrap().value;
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&cg));
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&cl));
            prop_assert!(cl <= cg + 1e-10);
            prop_assert!(cg <= n as f64 * cl + 1e-10);
        }
    }
}
