//! Long-time evolution with a trained ansatz, compared against iterated
//! Trotter steps and exact propagation.
//!
//! On the pure path `V^N |psi_0>` only rescales the phases of `D`, so every
//! point of a curve costs one pass through `W`. The noisy path runs the
//! gate-level circuit through a [`NoiseModel`]; its depth is the same for
//! every `N`, whereas the iterated-Trotter circuit grows linearly.

use serde::{Deserialize, Serialize};

use crate::ansatz::FsvffAnsatz;
use crate::cost::TrainingSet;
use crate::error::{Error, Result};
use crate::evolution::TimeEvolution;
use crate::linalg::{self, Matrix};
use crate::noise::{check_size, noisy_circuit, DensityMatrix, NoiseModel};
use crate::scalar::{cis, Real};
use crate::statevector::{Circuit, QuantumState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `exp(-i H N dt) |psi_0>` from the training set's exact evolution.
    ExactH,
    /// `U^N |psi_0>` with `U` the training step.
    IteratedTrotter,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExactH => "exact_h",
            Self::IteratedTrotter => "iterated_trotter",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimPath {
    Pure,
    Noisy,
}

impl SimPath {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pure => "pure",
            Self::Noisy => "noisy",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub delta_t: f64,
    pub steps: Vec<u64>,
    pub fidelity: Vec<f64>,
    pub reference: Reference,
    pub path: SimPath,
}

impl FidelityCurve {
    pub fn infidelity(&self) -> Vec<f64> {
        self.fidelity.iter().map(|f| 1.0 - f).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,fidelity,reference,path\n");
        for (n, f) in self.steps.iter().zip(&self.fidelity) {
            out.push_str(&format!("{n},{f},{},{}\n", self.reference.name(), self.path.name()));
        }
        out
    }
}

/// Produces reference states for increasing step counts.
struct ReferenceStream<'a, T: Real> {
    ts: &'a TrainingSet<T>,
    reference: Reference,
    delta_t: T,
    exact: Option<&'a TimeEvolution<T>>,
    state: QuantumState<T>,
    at: u64,
}

impl<'a, T: Real> ReferenceStream<'a, T> {
    fn new(ts: &'a TrainingSet<T>, reference: Reference, delta_t: T) -> Result<Self> {
        let exact = match reference {
            Reference::IteratedTrotter => None,
            Reference::ExactH => match ts.continuous() {
                Some(ev @ TimeEvolution::Exact { .. }) => Some(ev),
                _ => return Err(Error::Config("exact reference needs an exact continuous-time evolution".into())),
            },
        };
        Ok(Self {
            ts,
            reference,
            delta_t,
            exact,
            state: ts.psi0().clone(),
            at: 0,
        })
    }

    /// State after `n` steps; `n` must not decrease between calls.
    fn state_at(&mut self, n: u64) -> Result<QuantumState<T>> {
        if n < self.at {
            return Err(Error::Config("step counts must be increasing".into()));
        }
        match self.reference {
            Reference::IteratedTrotter => {
                while self.at < n {
                    self.ts.step().apply(&mut self.state, false)?;
                    self.at += 1;
                }
                Ok(self.state.clone())
            }
            Reference::ExactH => {
                self.at = n;
                let mut s = self.ts.psi0().clone();
                self.exact
                    .expect("exact evolution checked on construction")
                    .apply(&mut s, T::lit(n as f64) * self.delta_t)?;
                Ok(s)
            }
        }
    }
}

fn check_steps(steps: &[u64]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::Config("at least one step count is required".into()));
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("step counts must be strictly increasing".into()));
    }
    Ok(())
}

fn require_model<'m, T: Real>(path: SimPath, model: Option<&'m NoiseModel<T>>) -> Result<Option<&'m NoiseModel<T>>> {
    match (path, model) {
        (SimPath::Noisy, None) => Err(Error::Config("noisy path requires a noise model".into())),
        (SimPath::Noisy, Some(m)) => Ok(Some(m)),
        (SimPath::Pure, _) => Ok(None),
    }
}

fn check_width<T: Real>(ansatz: &FsvffAnsatz<T>, ts: &TrainingSet<T>) -> Result<()> {
    if ansatz.n_qubits() != ts.n_qubits() {
        return Err(Error::Shape("ansatz and training set differ in width".into()));
    }
    Ok(())
}

/// Noisy preparation of `psi_0` from `|0...0>`.
fn noisy_initial<T: Real>(ts: &TrainingSet<T>, model: &NoiseModel<T>) -> Result<DensityMatrix<T>> {
    let rho = DensityMatrix::zero_state(ts.n_qubits())?;
    noisy_circuit(&rho, ts.preparation(), &[], model)
}

/// Fidelity of `W D^N W^dagger |psi_0>` against the reference for
/// `N = 0..=n_max`.
pub fn fidelity_curve<T: Real>(
    ansatz: &FsvffAnsatz<T>,
    ts: &TrainingSet<T>,
    n_max: u64,
    reference: Reference,
    path: SimPath,
    model: Option<&NoiseModel<T>>,
) -> Result<FidelityCurve> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let steps: Vec<u64> = (0..=n_max).collect();
    fidelity_curve_at(ansatz, ts, &steps, reference, path, model)
}

/// [`fidelity_curve`] on an explicit, strictly increasing set of step counts.
pub fn fidelity_curve_at<T: Real>(
    ansatz: &FsvffAnsatz<T>,
    ts: &TrainingSet<T>,
    steps: &[u64],
    reference: Reference,
    path: SimPath,
    model: Option<&NoiseModel<T>>,
) -> Result<FidelityCurve> {
    check_steps(steps)?;
    check_width(ansatz, ts)?;
    let model = require_model(path, model)?;
    let mut refs = ReferenceStream::new(ts, reference, ansatz.delta_t())?;
    let mut fidelity = Vec::with_capacity(steps.len());
    match model {
        None => {
            let mut base = ts.psi0().clone();
            ansatz.w.apply(&mut base, &ansatz.theta, true)?;
            for &n in steps {
                let mut s = base.clone();
                s.apply_diagonal(&ansatz.d.diagonal(n))?;
                ansatz.w.apply(&mut s, &ansatz.theta, false)?;
                fidelity.push(refs.state_at(n)?.fidelity(&s)?.as_f64());
            }
        }
        Some(model) => {
            check_size(ts.n_qubits())?;
            let rho0 = noisy_initial(ts, model)?;
            for &n in steps {
                let rho = noisy_circuit(&rho0, &ansatz.fast_forward_circuit(n)?, &[], model)?;
                fidelity.push(rho.fidelity_with(&refs.state_at(n)?)?.as_f64());
            }
        }
    }
    Ok(FidelityCurve {
        delta_t: ansatz.delta_t().as_f64(),
        steps: steps.to_vec(),
        fidelity,
        reference,
        path,
    })
}

/// Baseline: the training step applied `N` times for `N = 0..=n_max`.
pub fn iterated_trotter_curve<T: Real>(
    ts: &TrainingSet<T>,
    delta_t: T,
    n_max: u64,
    reference: Reference,
    path: SimPath,
    model: Option<&NoiseModel<T>>,
) -> Result<FidelityCurve> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let model = require_model(path, model)?;
    let mut refs = ReferenceStream::new(ts, reference, delta_t)?;
    let mut fidelity = Vec::with_capacity(n_max as usize + 1);
    match model {
        None => {
            let mut s = ts.psi0().clone();
            for n in 0..=n_max {
                if n > 0 {
                    ts.step().apply(&mut s, false)?;
                }
                fidelity.push(refs.state_at(n)?.fidelity(&s)?.as_f64());
            }
        }
        Some(model) => {
            check_size(ts.n_qubits())?;
            let step = ts.step().circuit()?;
            let mut rho = noisy_initial(ts, model)?;
            for n in 0..=n_max {
                if n > 0 {
                    rho = noisy_circuit(&rho, &step, &[], model)?;
                }
                fidelity.push(rho.fidelity_with(&refs.state_at(n)?)?.as_f64());
            }
        }
    }
    Ok(FidelityCurve {
        delta_t: delta_t.as_f64(),
        steps: (0..=n_max).collect(),
        fidelity,
        reference,
        path,
    })
}

/// Preparation followed by `N` copies of the step.
pub fn iterated_trotter_circuit<T: Real>(ts: &TrainingSet<T>, steps: u64) -> Result<Circuit<T>> {
    let step = ts.step().circuit()?;
    let mut c = ts.preparation().clone();
    for _ in 0..steps {
        c.extend(&step)?;
    }
    Ok(c)
}

/// Preparation followed by the gate-level `W D^N W^dagger`.
pub fn fast_forward_full_circuit<T: Real>(ansatz: &FsvffAnsatz<T>, ts: &TrainingSet<T>, steps: u64) -> Result<Circuit<T>> {
    check_width(ansatz, ts)?;
    let mut c = ts.preparation().clone();
    c.extend(&ansatz.fast_forward_circuit(steps)?)?;
    Ok(c)
}

/// Largest `N` such that every point with `1 <= N' <= N` has fidelity at
/// least `1 - delta`; 0 when the first step already falls below.
pub fn high_fidelity_time(curve: &FidelityCurve, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut last = 0;
    for (&n, &f) in curve.steps.iter().zip(&curve.fidelity) {
        if n == 0 {
            continue;
        }
        if f < 1.0 - delta {
            return Ok(last);
        }
        last = n;
    }
    Ok(last)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `min_phi ||(U - e^{i phi} V) P||` with `P` the projector onto the
    /// orbit of `psi_0` under the step.
    pub bound_constant: f64,
    /// Largest `(1 - F_N - N^2 c^2)` over the bound, after a `1e-10`
    /// numerical floor; zero means no violation.
    pub max_violation: f64,
    pub violations: usize,
    /// `1 - F_N` for `N = 0..=n_max`, reference `U^N |psi_0>`.
    pub infidelity: Vec<f64>,
}

const BOUND_FLOOR: f64 = 1e-10;

/// Checks `1 - F_N <= N^2 ||(U - V) P||^2` for every `N <= n_max`.
///
/// `P` projects onto the span of `U^k |psi_0>`, `k < n_eig`, which is
/// invariant under `U`. The global phase of `V` is optimized out since the
/// fidelity cannot see it.
pub fn error_bound_check<T: Real>(ansatz: &FsvffAnsatz<T>, ts: &TrainingSet<T>, n_max: u64) -> Result<BoundCheck> {
    check_width(ansatz, ts)?;
    check_size(ts.n_qubits())?;
    let u = ts.step().dense()?;
    let v = ansatz.dense_v(1)?;

    let mut orbit = Vec::with_capacity(ts.n_eig());
    let mut s = ts.psi0().clone();
    for k in 0..ts.n_eig() {
        if k > 0 {
            ts.step().apply(&mut s, false)?;
        }
        orbit.push(s.amplitudes().to_vec());
    }
    let q = Matrix::from_columns(&linalg::orthonormal_basis(&orbit, T::lit(1e-10)));
    let c = min_phase_norm(&u.matmul(&q), &v.matmul(&q));

    let mut infidelity = Vec::with_capacity(n_max as usize + 1);
    let mut max_violation: f64 = 0.0;
    let mut violations = 0;
    let mut reference = ts.psi0().clone();
    let mut base = ts.psi0().clone();
    ansatz.w.apply(&mut base, &ansatz.theta, true)?;
    for n in 0..=n_max {
        if n > 0 {
            ts.step().apply(&mut reference, false)?;
        }
        let mut sim = base.clone();
        sim.apply_diagonal(&ansatz.d.diagonal(n))?;
        ansatz.w.apply(&mut sim, &ansatz.theta, false)?;
        let inf = 1.0 - reference.fidelity(&sim)?.as_f64();
        let bound = (n as f64 * c).powi(2);
        let excess = inf - bound - BOUND_FLOOR;
        if excess > 0.0 {
            violations += 1;
            max_violation = max_violation.max(excess / bound.max(BOUND_FLOOR));
        }
        infidelity.push(inf);
    }
    Ok(BoundCheck {
        bound_constant: c,
        max_violation,
        violations,
        infidelity,
    })
}

/// `min_phi ||a - e^{i phi} b||_op` by a coarse scan and golden-section
/// refinement.
fn min_phase_norm<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let f = |phi: f64| a.sub(&b.scale(cis(T::lit(phi)))).op_norm().as_f64();
    let grid = 96;
    let h = std::f64::consts::TAU / grid as f64;
    let (mut best_phi, mut best) = (0.0, f(0.0));
    for i in 1..grid {
        let phi = i as f64 * h;
        let val = f(phi);
        if val < best {
            (best_phi, best) = (phi, val);
        }
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best_phi - h, best_phi + h);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    best.min(f1).min(f2)
}

/// Least-squares fit of `y = a N^2`; returns `(a, R^2)`.
pub fn fit_quadratic(steps: &[u64], y: &[f64]) -> (f64, f64) {
    let x2: Vec<f64> = steps.iter().map(|&n| (n as f64).powi(2)).collect();
    let a = x2.iter().zip(y).map(|(x, y)| x * y).sum::<f64>() / x2.iter().map(|x| x * x).sum::<f64>();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x2.iter().zip(y).map(|(x, v)| (v - a * x).powi(2)).sum();
    (a, 1.0 - ss_res / ss_tot)
}

/// Slope of `ln y` against `ln N` by ordinary least squares.
pub fn loglog_slope(steps: &[u64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(y)
        .filter(|(&n, &v)| n > 0 && v > 0.0)
        .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastForwardReport {
    pub delta: f64,
    pub curve: FidelityCurve,
    pub trotter_curve: FidelityCurve,
    pub t_delta_ff: u64,
    pub t_delta_trot: u64,
    /// `t_delta_ff / t_delta_trot`; absent when the Trotter time is 0.
    pub ratio: Option<f64>,
    /// Present when the register is small enough for dense operators.
    pub bound_constant: Option<f64>,
}

/// Fast-forward and iterated-Trotter curves against the same reference, with
/// their high-fidelity times at `delta`.
pub fn fast_forward_report<T: Real>(
    ansatz: &FsvffAnsatz<T>,
    ts: &TrainingSet<T>,
    n_max: u64,
    delta: f64,
    reference: Reference,
    path: SimPath,
    model: Option<&NoiseModel<T>>,
) -> Result<FastForwardReport> {
    let curve = fidelity_curve(ansatz, ts, n_max, reference, path, model)?;
    let trotter_curve = iterated_trotter_curve(ts, ansatz.delta_t(), n_max, reference, path, model)?;
    let t_delta_ff = high_fidelity_time(&curve, delta)?;
    let t_delta_trot = high_fidelity_time(&trotter_curve, delta)?;
    let bound_constant = if check_size(ts.n_qubits()).is_ok() {
        Some(error_bound_check(ansatz, ts, 0)?.bound_constant)
    } else {
        None
    };
    Ok(FastForwardReport {
        delta,
        curve,
        trotter_curve,
        t_delta_ff,
        t_delta_trot,
        ratio: (t_delta_trot > 0).then(|| t_delta_ff as f64 / t_delta_trot as f64),
        bound_constant,
    })
}
