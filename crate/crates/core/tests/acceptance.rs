//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.
//!
//! Run with `cargo test -p fsvff-core --test acceptance -- --nocapture` to
//! see the table on success.

use std::error::Error as StdError;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;

use fsvff::ansatz::{givens_brickwall, hardware_xy_ansatz, insert_identity_gates, DiagonalAnsatz, FsvffAnsatz};
use fsvff::cost::{self, CostVariant, TrainingSet};
use fsvff::evolution::{StepOperator, TimeEvolution};
use fsvff::fastforward::{error_bound_check, fast_forward_report, fidelity_curve, fit_quadratic, loglog_slope, Reference, SimPath};
use fsvff::gramian::{find_neig, OverlapMethod};
use fsvff::hamiltonian::{build_fermi_hubbard, build_xy, exact_evolution, number_operator, trotter_circuit, TrotterSpec};
use fsvff::linalg::{self, Matrix};
use fsvff::noise::{resilience_sweep, NoiseModel, NoiseModelSpec, SliceParam};
use fsvff::optimizer::{adaptive_structure_search, gradient_descent, multi_start_descent, OptimizerConfig, StructureSearchConfig};
use fsvff::rng;
use fsvff::spectroscopy::{extract_eigvectors, inverse_qft, qee_spectrum, qpe, qpe_circuit, QpeTarget, DEFAULT_PEAK_THRESHOLD};
use fsvff::statevector::{parse_bitstring, Angle, Circuit, Gate, GateKind, QuantumState};

type Res<T> = Result<T, Box<dyn StdError + Send + Sync>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Res<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn fail(msg: impl Into<String>) -> Box<dyn StdError + Send + Sync> {
    msg.into().into()
}

// ---------------------------------------------------------------- helpers

fn random_state(n: usize, g: &mut rng::Rng) -> Res<QuantumState<f64>> {
    let amps = (0..1 << n).map(|_| Complex64::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0))).collect();
    Ok(QuantumState::from_amplitudes(amps)?)
}

/// Mixed rotation/CNOT circuit; about one rotation in five reuses an earlier
/// parameter so shared parameters are exercised too.
fn random_circuit(n: usize, gates: usize, g: &mut rng::Rng) -> Res<Circuit<f64>> {
    const KINDS: [GateKind; 6] = [GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::RZZ, GateKind::GIVENS, GateKind::CNOT];
    let mut w = Circuit::new(n);
    for i in 0..gates {
        let kind = if i == 0 { GateKind::RY } else { KINDS[g.random_range(0..KINDS.len())] };
        let a = g.random_range(0..n);
        let mut b = g.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let targets = if kind.arity() == Some(1) { vec![a] } else { vec![a, b] };
        let angle = match kind {
            GateKind::CNOT => None,
            _ if w.n_params() > 0 && g.random_bool(0.2) => Some(Angle::Param(g.random_range(0..w.n_params()))),
            _ => Some(Angle::Param(w.add_param())),
        };
        w.push(Gate::new(kind, targets, angle)?)?;
    }
    Ok(w)
}

fn random_diagonal(n: usize, dt: f64, g: &mut rng::Rng) -> Res<DiagonalAnsatz<f64>> {
    let count = g.random_range(1..=3.min((1 << n) - 1));
    let mut masks: Vec<usize> = Vec::new();
    while masks.len() < count {
        let m = g.random_range(1..1usize << n);
        if !masks.contains(&m) {
            masks.push(m);
        }
    }
    let gammas = (0..count).map(|_| g.random_range(-3.0..3.0)).collect();
    Ok(DiagonalAnsatz::new(n, masks, gammas, dt)?)
}

fn random_ansatz(n: usize, dt: f64, g: &mut rng::Rng) -> Res<FsvffAnsatz<f64>> {
    let w = random_circuit(n, 3 * n, g)?;
    let theta = (0..w.n_params()).map(|_| g.random_range(-PI..PI)).collect();
    Ok(FsvffAnsatz::new(w, random_diagonal(n, dt, g)?, theta)?)
}

fn random_unitary(n: usize, g: &mut rng::Rng) -> Matrix<f64> {
    let m = Matrix::from_fn(1 << n, 1 << n, |_, _| Complex64::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)));
    linalg::hermitian_propagator(&m.add(&m.dagger()), g.random_range(0.1..1.5))
}

fn xy_trotter_set(n: usize, bits: &str, n_eig: usize, dt: f64) -> Res<TrainingSet<f64>> {
    let u = trotter_circuit(&build_xy(n)?, &TrotterSpec::first(dt))?;
    Ok(TrainingSet::new(QuantumState::basis_state(bits)?, StepOperator::Circuit(u), n_eig)?)
}

fn xy_exact_set(n: usize, bits: &str, n_eig: usize, dt: f64) -> Res<TrainingSet<f64>> {
    let h = build_xy(n)?;
    let ts = TrainingSet::new(QuantumState::basis_state(bits)?, StepOperator::Dense(exact_evolution(&h, dt)?), n_eig)?;
    Ok(ts.with_continuous(TimeEvolution::exact(&h)?)?)
}

fn small_init(a: &mut FsvffAnsatz<f64>, seed: u64, scale: f64) {
    let mut g = rng::stream(seed, "init");
    for t in a.theta.iter_mut() {
        *t = g.random_range(-scale..scale);
    }
}

/// Hardware ansatz on the 2-qubit XY chain from |10>, first-order Trotter
/// step at dt = 0.5, exact-mode training.
fn trained_two_qubit() -> Res<(TrainingSet<f64>, FsvffAnsatz<f64>, usize, f64)> {
    let ts = xy_trotter_set(2, "10", 2, 0.5)?;
    let mut a = hardware_xy_ansatz(0.5);
    small_init(&mut a, 1, 0.1);
    let r = gradient_descent(&ts, &a, &OptimizerConfig::default(), &CostVariant::Global)?;
    Ok((ts, r.ansatz, r.iterations, r.final_cost))
}

fn rayleigh(h: &Matrix<f64>, v: &QuantumState<f64>) -> (f64, f64) {
    let hv = h.mul_vec(v.amplitudes());
    let e = linalg::inner(v.amplitudes(), &hv).re;
    let res = hv.iter().zip(v.amplitudes()).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
    (e, res)
}

fn commutator_norm(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.matmul(b).max_abs_diff(&b.matmul(a))
}

/// Independent eigendecomposition: distinct eigenvalues with the projector
/// weight of `v` on each eigenspace.
fn oracle_levels(h: &Matrix<f64>, v: &[Complex64]) -> Vec<(f64, f64)> {
    let d = h.rows();
    let m = DMatrix::from_fn(d, d, |i, j| h.as_slice()[i * d + j]);
    let eig = m.symmetric_eigen();
    let mut levels: Vec<(f64, f64)> = Vec::new();
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let w = col.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr();
        match levels.iter_mut().find(|(x, _)| (x - e).abs() < 1e-8) {
            Some(level) => level.1 += w,
            None => levels.push((e, w)),
        }
    }
    levels
}

// -------------------------------------------------------------- criteria

fn neig_reproduction() -> Res<Verdict> {
    let start = Instant::now();
    let cases: [(&[&str], f64, usize); 6] = [
        (&["00"], 0.5, 1),
        (&["10"], 0.5, 2),
        (&["00", "10"], 0.5, 3),
        (&["1100"], 1.0, 5),
        (&["11100"], 2.0, 9),
        (&["111000"], 2.0, 12),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (states, dt, want) in cases {
        let n = states[0].len();
        let psi = QuantumState::superposition(states)?;
        let u = StepOperator::Dense(exact_evolution(&build_xy(n)?, dt)?);
        let r = find_neig(&u, &psi, 16, 1e-8, OverlapMethod::Exact, None, 0)?;
        let k = r.n_eig;
        let at = r.determinants[k - 1].abs();
        let prev = if k > 1 { r.determinants[k - 2].abs() } else { 1.0 };
        let ok = k == want && at < 1e-8 && prev > 1e-3;
        pass &= ok;
        let label = states.join("+");
        if ok {
            parts.push(format!("{label}={k}"));
        } else {
            parts.push(format!("{label}={k} (want {want}, det {at:.1e}, prev {prev:.1e})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    verdict(pass, format!("{} in {secs:.2}s", parts.join(", ")))
}

fn gradient_oracle() -> Res<Verdict> {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let mut g = rng::substream(11, "acceptance-gradient", i);
        let n = g.random_range(2..=4);
        let dt = g.random_range(0.2..1.0);
        let a = random_ansatz(n, dt, &mut g)?;
        let u = trotter_circuit(&build_xy(n)?, &TrotterSpec::first(dt))?;
        let ts = TrainingSet::new(random_state(n, &mut g)?, StepOperator::Circuit(u), g.random_range(1..=3))?;
        let variant = if i % 2 == 0 { CostVariant::Global } else { CostVariant::Local };
        let grad = cost::gradient(&ts, &a, &variant, None, 0)?;
        let on_theta = i % 4 < 2;
        let (analytic, shifted): (f64, Box<dyn Fn(f64) -> Res<f64>>) = if on_theta {
            let l = g.random_range(0..a.theta.len());
            let a = a.clone();
            let (ts, variant) = (ts.clone(), variant);
            (
                grad.theta[l],
                Box::new(move |delta| {
                    let mut b = a.clone();
                    b.theta[l] += delta;
                    Ok(cost::evaluate(&ts, &b, &variant, None, 0)?.value)
                }),
            )
        } else {
            let l = g.random_range(0..a.d.len());
            let a = a.clone();
            let (ts, variant) = (ts.clone(), variant);
            (
                grad.gamma[l],
                Box::new(move |delta| {
                    let mut b = a.clone();
                    b.d.gammas_mut()[l] += delta;
                    Ok(cost::evaluate(&ts, &b, &variant, None, 0)?.value)
                }),
            )
        };
        let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        // relative error, floored where the derivative itself vanishes
        worst = worst.max((analytic - fd).abs() / fd.abs().max(1e-4));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst < 1e-5 && secs < 60.0, format!("max relative error {worst:.2e} over 200 gradients in {secs:.1}s"))
}

fn cost_sandwich() -> Res<Verdict> {
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for i in 0..500u64 {
        let mut g = rng::substream(12, "acceptance-sandwich", i);
        let n = 2 + (i % 4) as usize;
        let a = random_ansatz(n, g.random_range(0.2..1.0), &mut g)?;
        let ts = TrainingSet::new(random_state(n, &mut g)?, StepOperator::Dense(random_unitary(n, &mut g)), g.random_range(1..=3))?;
        let cg = cost::cost_global(&ts, &a, None, 0)?.value;
        let cl = cost::cost_local(&ts, &a, None, 0)?.value;
        if cl > cg + 1e-10 || cg > n as f64 * cl + 1e-10 {
            violations += 1;
        }
        tightest = tightest.min((cg - cl).min(n as f64 * cl - cg));
    }
    verdict(violations == 0, format!("{violations} violations in 500 instances, smallest margin {tightest:.2e}"))
}

fn faithfulness() -> Res<Verdict> {
    let mut worst_cost: f64 = 0.0;
    let mut worst_inf: f64 = 0.0;
    let mut bad_neig = 0;
    for i in 0..20u64 {
        let mut g = rng::substream(13, "acceptance-faithful", i);
        let n = g.random_range(2..=4);
        let dt = g.random_range(0.3..1.0);
        let a = random_ansatz(n, dt, &mut g)?;
        // D phases on the support set; U keeps them there and is arbitrary
        // on the orthogonal complement
        let mut support: Vec<usize> = Vec::new();
        let size = g.random_range(1..=4.min(1 << n));
        while support.len() < size {
            let b = g.random_range(0..1usize << n);
            if !support.contains(&b) {
                support.push(b);
            }
        }
        let mut diag = a.d.diagonal(1);
        for (b, z) in diag.iter_mut().enumerate() {
            if !support.contains(&b) {
                *z *= Complex64::from_polar(1.0, g.random_range(-PI..PI));
            }
        }
        let wm = a.w.dense_unitary(&a.theta)?;
        let u = wm.matmul(&Matrix::from_diagonal(&diag)).matmul(&wm.dagger());
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for &b in &support {
            amps[b] = Complex64::from_polar(g.random_range(0.3..1.0), g.random_range(-PI..PI));
        }
        let mut psi = QuantumState::from_amplitudes(amps)?;
        a.w.apply(&mut psi, &a.theta, false)?;
        let step = StepOperator::Dense(u);
        let k = find_neig(&step, &psi, 2 * size + 2, 1e-8, OverlapMethod::Exact, None, 0)?.n_eig;
        if k > size {
            bad_neig += 1;
        }
        let ts = TrainingSet::new(psi, step, k)?;
        let c = cost::cost_global(&ts, &a, None, 0)?.value;
        worst_cost = worst_cost.max(c);
        let curve = fidelity_curve(&a, &ts, 10 * k as u64, Reference::IteratedTrotter, SimPath::Pure, None)?;
        worst_inf = worst_inf.max(curve.infidelity().iter().copied().fold(0.0, f64::max));
    }
    verdict(
        worst_cost <= 1e-8 && worst_inf <= 1e-6 && bad_neig == 0,
        format!("20 instances: max cost {worst_cost:.1e}, max 1-F over tau <= 10 n_eig {worst_inf:.1e}, n_eig above support: {bad_neig}"),
    )
}

fn two_qubit_end_to_end() -> Res<Verdict> {
    let (ts, a, iters, c) = trained_two_qubit()?;
    let pure = fidelity_curve(&a, &ts, 10_000, Reference::IteratedTrotter, SimPath::Pure, None)?;
    let min_f = pure.fidelity.iter().copied().fold(1.0, f64::min);
    let model = NoiseModel::from_spec(&NoiseModelSpec::default_demo())?;
    let n_max = 200;
    let report = fast_forward_report(&a, &ts, n_max, 0.1, Reference::IteratedTrotter, SimPath::Noisy, Some(&model))?;
    let ratio = report.ratio.unwrap_or(f64::INFINITY);
    let capped = if report.t_delta_ff == n_max { " (FF time capped at horizon)" } else { "" };
    verdict(
        c <= 1e-6 && iters <= 500 && min_f >= 0.999 && ratio >= 10.0,
        format!(
            "cost {c:.1e} after {iters} iterations, min pure F to 1e4 = {min_f:.6}, noisy T_ff={} T_trot={} R={ratio:.0}{capped}",
            report.t_delta_ff, report.t_delta_trot
        ),
    )
}

fn quadratic_scaling() -> Res<Verdict> {
    let ts = xy_exact_set(3, "110", 3, 0.5)?;
    let w = givens_brickwall(3, 3);
    let mut a = FsvffAnsatz::new(w.clone(), DiagonalAnsatz::single_z(3, 0.5), vec![0.0; w.n_params()])?;
    small_init(&mut a, 0, 0.5);
    let cfg = OptimizerConfig {
        learning_rate: 0.05,
        momentum: 0.9,
        max_iters: 3000,
        cost_tol: 1e-8,
        halve_on_plateau: true,
        ..Default::default()
    };
    let r = gradient_descent(&ts, &a, &cfg, &CostVariant::Global)?;
    let b = error_bound_check(&r.ansatz, &ts, 10_000)?;
    let pre: Vec<u64> = (1..=10_000u64).take_while(|&n| b.infidelity[n as usize] < 0.1).collect();
    if pre.len() < 10 {
        return verdict(false, format!("saturates after {} steps", pre.len()));
    }
    let y: Vec<f64> = pre.iter().map(|&n| b.infidelity[n as usize]).collect();
    let (coef, r2) = fit_quadratic(&pre, &y);
    let slope = loglog_slope(&pre, &y);
    verdict(
        r2 > 0.99 && b.violations == 0,
        format!(
            "cost {:.1e}, fit c={coef:.2e} R^2={r2:.5} slope {slope:.2} over N<={}, bound constant {:.2e}, {} violations to 1e4",
            r.final_cost,
            pre.len(),
            b.bound_constant,
            b.violations
        ),
    )
}

fn noise_resilience() -> Res<Verdict> {
    let (ts, a, _, _) = trained_two_qubit()?;
    // one full period of gamma (D -> -D after 2 pi), optimum at index 50
    let g0 = a.d.gammas()[0];
    let step = 2.0 * PI / 100.0;
    let grid: Vec<f64> = (0..100).map(|i| g0 + (i as f64 - 50.0) * step).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut per_gate = Vec::new();
    for p in [0.01, 0.05, 0.1] {
        let model = NoiseModel::from_spec(&NoiseModelSpec::global(p))?;
        let s = resilience_sweep(&ts, &a, SliceParam::Gamma(0), &grid, &model, &CostVariant::Global, 0)?;
        let clean = s.clean[50];
        let noisy = s.noisy[50];
        pass &= s.displacement() <= 1 && s.argmin_clean.abs_diff(50) <= 1 && noisy >= 10.0 * clean && noisy > 0.0;
        parts.push(format!("p={p}: shift {} cells, noisy {noisy:.2e} vs clean {clean:.1e}", s.displacement()));
        let local = NoiseModel::from_spec(&NoiseModelSpec::depolarizing(p, p, 0.0))?;
        let s = resilience_sweep(&ts, &a, SliceParam::Gamma(0), &grid, &local, &CostVariant::Global, 0)?;
        per_gate.push(s.displacement().to_string());
    }
    verdict(
        pass,
        format!("global depolarizing {}; per-gate depolarizing shifts (informational) {} cells", parts.join("; "), per_gate.join("/")),
    )
}

fn randomized_training() -> Res<Verdict> {
    let start = Instant::now();
    let ts = xy_exact_set(5, "11100", 9, 0.5)?;
    let w = givens_brickwall(5, 5);
    let a = FsvffAnsatz::new(w.clone(), DiagonalAnsatz::single_z(5, 0.5), vec![0.0; w.n_params()])?;
    let variant = CostVariant::Randomized { batch: 2, t_max: 4.0, bias: 1.0 };
    let cfg = OptimizerConfig {
        learning_rate: 0.05,
        momentum: 0.9,
        max_iters: 3000,
        plateau_window: 100,
        halve_on_plateau: true,
        ..Default::default()
    };
    let r = multi_start_descent(&ts, &a, &cfg, &variant, 10, 0.5, 1e-5)?;
    // fresh batches, so the reported cost is not the one the optimizer saw last
    let held_out = (0..20)
        .map(|s| cost::evaluate(&ts, &r.ansatz, &variant, None, 1000 + s).map(|c| c.value))
        .collect::<Result<Vec<f64>, _>>()?;
    let mean = held_out.iter().sum::<f64>() / held_out.len() as f64;
    let curve = fidelity_curve(&r.ansatz, &ts, 100, Reference::ExactH, SimPath::Pure, None)?;
    let worst = curve.infidelity().iter().copied().fold(0.0, f64::max);
    verdict(
        mean <= 1e-4 && worst < 1e-2,
        format!("held-out randomized cost {mean:.1e}, max 1-F over 100 steps {worst:.1e}, {:.0}s", start.elapsed().as_secs_f64()),
    )
}

fn spectroscopy() -> Res<Verdict> {
    let ts = xy_exact_set(3, "110", 3, 0.5)?;
    let w = givens_brickwall(3, 3);
    let mut a = FsvffAnsatz::new(w.clone(), DiagonalAnsatz::single_z(3, 0.5), vec![0.0; w.n_params()])?;
    small_init(&mut a, 0, 0.5);
    let cfg = OptimizerConfig {
        learning_rate: 0.05,
        momentum: 0.9,
        max_iters: 3000,
        cost_tol: 1e-12,
        halve_on_plateau: true,
        ..Default::default()
    };
    let r = gradient_descent(&ts, &a, &cfg, &CostVariant::Global)?;
    let h = build_xy::<f64>(3)?.dense_matrix()?;
    let mut est = extract_eigvectors(&r.ansatz, ts.psi0(), None, 0, DEFAULT_PEAK_THRESHOLD)?;
    let peaks = est.eigen_basis_states.len();
    let mut max_res: f64 = 0.0;
    let mut oracle = Vec::new();
    for v in &est.eigen_vectors {
        max_res = max_res.max(rayleigh(&h, v).1);
        let levels = oracle_levels(&h, v.amplitudes());
        let best = levels.iter().max_by(|x, y| x.1.total_cmp(&y.1)).ok_or_else(|| fail("empty spectrum"))?;
        oracle.push(best.0);
    }
    qee_spectrum(&r.ansatz, &mut est, None, 0)?;
    let mse = est
        .energies_relative
        .iter()
        .zip(&oracle)
        .map(|(e, o)| (e - (o - oracle[0])).powi(2))
        .sum::<f64>()
        / peaks as f64;
    verdict(
        peaks == 4 && mse <= 1e-4 && max_res <= 1e-3,
        format!(
            "cost {:.1e}, {peaks} peaks {:?} (want 4), QEE MSE {mse:.1e}, max Rayleigh residual {max_res:.1e}",
            r.final_cost, est.eigen_basis_states
        ),
    )
}

fn enhanced_qpe() -> Res<Verdict> {
    // E = -1 at dt = pi/4 gives the phase exp(2 pi i / 8)
    let dt = PI / 4.0;
    let ts = xy_exact_set(2, "10", 2, dt)?;
    let mut a = hardware_xy_ansatz(dt);
    small_init(&mut a, 1, 0.1);
    let r = gradient_descent(&ts, &a, &OptimizerConfig { max_iters: 1000, ..Default::default() }, &CostVariant::Global)?;
    let h = build_xy::<f64>(2)?.dense_matrix()?;
    let est = extract_eigvectors(&r.ansatz, ts.psi0(), None, 0, DEFAULT_PEAK_THRESHOLD)?;
    let k = (0..est.eigen_vectors.len())
        .min_by(|&x, &y| {
            let e = |i: usize| (rayleigh(&h, &est.eigen_vectors[i]).0 + 1.0).abs();
            e(x).total_cmp(&e(y))
        })
        .ok_or_else(|| fail("no eigenvectors extracted"))?;
    let b = parse_bitstring(&est.eigen_basis_states[k])?;
    let d = &r.ansatz.d;
    let enhanced = QpeTarget::Diagonal { d, basis_state: b };
    let res = qpe(&enhanced, 3, dt, None, 0, None)?;
    let p = res.distribution.get("001").copied().unwrap_or(0.0);

    let step = StepOperator::Circuit(trotter_circuit(&build_xy(2)?, &TrotterSpec::first(dt))?);
    let prep = ts.preparation().clone();
    let standard = QpeTarget::Step { step: &step, prep: &prep };
    let per_step = step.controlled_gates()?.len();
    let mut counts_ok = true;
    let mut enhanced_counts = Vec::new();
    let mut standard_counts = Vec::new();
    let mut enhanced_extra = Vec::new();
    for m in 1..=6 {
        let (ce, ne) = qpe_circuit(&enhanced, m, dt)?;
        let (cs, ns) = qpe_circuit(&standard, m, dt)?;
        let qft = inverse_qft::<f64>(m, m + 2)?.len();
        enhanced_extra.push(ce.len() - qft);
        counts_ok &= ns == ((1 << m) - 1) * per_step && cs.len() >= ns + qft;
        enhanced_counts.push(ne);
        standard_counts.push(ns);
    }
    // per-ancilla cost of the enhanced circuit is the same for every exponent
    let per_ancilla = enhanced_counts[0];
    counts_ok &= enhanced_counts.iter().enumerate().all(|(i, &c)| c == (i + 1) * per_ancilla);
    counts_ok &= enhanced_extra.windows(2).map(|w| w[1] - w[0]).all(|d| d == enhanced_extra[1] - enhanced_extra[0]);
    verdict(
        p >= 0.999 && counts_ok,
        format!(
            "P(001) = {p:.6} on basis state {}, controlled gates enhanced {enhanced_counts:?} vs standard {standard_counts:?}",
            est.eigen_basis_states[k]
        ),
    )
}

fn fermi_hubbard() -> Res<Verdict> {
    let l = 4;
    let h = build_fermi_hubbard(l, 1.0, 2.0)?.dense_matrix()?;
    let up = number_operator::<f64>(2 * l, &(0..l).collect::<Vec<_>>())?.dense_matrix()?;
    let down = number_operator::<f64>(2 * l, &(l..2 * l).collect::<Vec<_>>())?.dense_matrix()?;
    let total8 = up.add(&down);
    let c_up = commutator_norm(&h, &up);
    let c_down = commutator_norm(&h, &down);

    // structure search on the two-site chain
    let dt = 0.5;
    let h2 = build_fermi_hubbard(2, 1.0, 2.0)?;
    let step = StepOperator::Circuit(trotter_circuit(&h2, &TrotterSpec::first(dt))?);
    let psi = QuantumState::basis_state("1001")?;
    let k = find_neig(&step, &psi, 16, 1e-8, OverlapMethod::Exact, None, 0)?.n_eig;
    let ts = TrainingSet::new(psi, step, k)?;
    let w = givens_brickwall(4, 1);
    let mut seed = FsvffAnsatz::new(w.clone(), DiagonalAnsatz::single_z(4, dt), vec![0.0; w.n_params()])?;
    small_init(&mut seed, 3, 0.1);
    let opt = OptimizerConfig { learning_rate: 0.2, max_iters: 60, ..Default::default() };
    let ss = StructureSearchConfig { max_rounds: 3, target_cost: 0.0, seed: 7, ..Default::default() };
    let found = adaptive_structure_search(&ts, &seed, &opt, &ss, &CostVariant::Global)?;
    let total4 = number_operator::<f64>(4, &[0, 1, 2, 3])?.dense_matrix()?;
    let mut c_search = commutator_norm(&found.ansatz.w.dense_unitary(&found.ansatz.theta)?, &total4);

    // random dictionary circuits on the full chain
    for s in 0..4u64 {
        let mut g = rng::substream(14, "acceptance-dictionary", s);
        let kinds: Vec<GateKind> = (0..12).map(|_| [GateKind::RZ, GateKind::RZZ, GateKind::GIVENS][g.random_range(0..3)]).collect();
        let w = insert_identity_gates(&Circuit::<f64>::new(2 * l), &vec![0; kinds.len()], &kinds, s % 2 == 0, s)?;
        let theta: Vec<f64> = (0..w.n_params()).map(|_| g.random_range(-PI..PI)).collect();
        c_search = c_search.max(commutator_norm(&w.dense_unitary(&theta)?, &total8));
    }
    verdict(
        c_up <= 1e-10 && c_down <= 1e-10 && c_search <= 1e-10,
        format!(
            "|[H,N_up]| {c_up:.1e}, |[H,N_down]| {c_down:.1e}, searched/dictionary circuits |[W,N]| {c_search:.1e} ({} gates after search)",
            found.ansatz.w.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Res<Verdict>); 11] = [
        ("n_eig reproduction", neig_reproduction),
        ("gradient oracle", gradient_oracle),
        ("cost sandwich", cost_sandwich),
        ("faithfulness", faithfulness),
        ("2-qubit end-to-end", two_qubit_end_to_end),
        ("quadratic infidelity scaling", quadratic_scaling),
        ("noise resilience", noise_resilience),
        ("randomized training", randomized_training),
        ("spectroscopy", spectroscopy),
        ("enhanced QPE", enhanced_qpe),
        ("Fermi-Hubbard construction", fermi_hubbard),
    ];
    let mut failed = Vec::new();
    println!();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run().unwrap_or_else(|e| Verdict {
            pass: false,
            detail: format!("error: {e}"),
        });
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
