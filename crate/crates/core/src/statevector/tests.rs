use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::hamiltonian::Pauli;
use crate::linalg::Matrix;

type S = QuantumState<f64>;

/// Full-register matrix of a gate, built entry by entry from its local matrix.
fn embed(n: usize, targets: &[usize], local: &Matrix<f64>) -> Matrix<f64> {
    let local_index = |i: usize| -> usize {
        targets
            .iter()
            .fold(0, |acc, &q| acc << 1 | (i >> (n - 1 - q) & 1))
    };
    let tmask: usize = targets.iter().map(|&q| 1 << (n - 1 - q)).sum();
    Matrix::from_fn(1 << n, 1 << n, |i, j| {
        if i & !tmask == j & !tmask {
            local[(local_index(i), local_index(j))]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn oracle_unitary(c: &Circuit<f64>, params: &[f64]) -> Matrix<f64> {
    c.gates().iter().fold(Matrix::identity(1 << c.n_qubits()), |acc, g| {
        embed(c.n_qubits(), g.targets(), &g.matrix(params).unwrap()).matmul(&acc)
    })
}

fn random_state(n: usize, seed: u64) -> S {
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, "test-state");
    S::from_amplitudes(
        (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap()
}

fn arb_gate(n: usize, n_params: usize) -> impl Strategy<Value = Gate<f64>> {
    let kinds = prop::sample::select(vec![
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::RZZ,
        GateKind::CNOT,
        GateKind::H,
        GateKind::X,
        GateKind::GIVENS,
        GateKind::PHASE,
    ]);
    (kinds, prop::sample::subsequence((0..n).collect::<Vec<_>>(), n.min(2)).prop_shuffle(), any::<bool>(), 0..n_params.max(1), -7.0..7.0f64)
        .prop_filter_map("arity", move |(kind, qs, use_param, pi, angle)| {
            let arity = kind.arity().unwrap();
            if qs.len() < arity {
                return None;
            }
            let angle = kind.is_rotation().then(|| if use_param && n_params > 0 { Angle::Param(pi) } else { Angle::Fixed(angle) });
            Gate::new(kind, qs[..arity].to_vec(), angle).ok()
        })
}

fn arb_circuit(max_n: usize, max_depth: usize) -> impl Strategy<Value = (Circuit<f64>, Vec<f64>)> {
    (1..=max_n, 0..4usize).prop_flat_map(move |(n, n_params)| {
        (
            prop::collection::vec(arb_gate(n, n_params), 0..=max_depth),
            prop::collection::vec(-7.0..7.0f64, n_params),
        )
            .prop_map(move |(gates, params)| (Circuit::from_gates(n, n_params, gates).unwrap(), params))
    })
}

#[test]
fn gate_actions() {
    let mut s = S::zero_state(1).unwrap();
    Gate::x(0).apply(&mut s, &[], false).unwrap();
    assert_eq!(s, S::basis_state("1").unwrap());

    let psi = random_state(3, 1);
    let mut t = psi.clone();
    Gate::rz(1, Angle::Fixed(0.0)).apply(&mut t, &[], false).unwrap();
    assert!(t.inner_product(&psi).unwrap().norm() > 1.0 - 1e-14);

    let mut bell = S::superposition(&["00", "10"]).unwrap();
    Gate::cnot(0, 1).apply(&mut bell, &[], false).unwrap();
    let expected = S::superposition(&["00", "11"]).unwrap();
    assert!(bell.inner_product(&expected).unwrap().norm() > 1.0 - 1e-14);
}

#[test]
fn gate_matrices_are_unitary() {
    for kind in [GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::RZZ, GateKind::GIVENS, GateKind::PHASE] {
        let targets = (0..kind.arity().unwrap()).collect();
        let g = Gate::<f64>::new(kind, targets, Some(Angle::Fixed(1.234))).unwrap();
        assert!(g.matrix(&[]).unwrap().is_unitary(1e-12), "{kind}");
    }
    for g in [Gate::<f64>::cnot(0, 1), Gate::h(0), Gate::x(0)] {
        assert!(g.matrix(&[]).unwrap().is_unitary(1e-12));
    }
}

#[test]
fn gate_validation() {
    assert!(matches!(Gate::<f64>::new(GateKind::RX, vec![0], None), Err(crate::Error::Binding(_))));
    assert!(matches!(Gate::<f64>::new(GateKind::H, vec![0], Some(Angle::Fixed(1.0))), Err(crate::Error::Binding(_))));
    assert!(Gate::<f64>::new(GateKind::CNOT, vec![0], None).is_err());
    assert!(Gate::<f64>::new(GateKind::CNOT, vec![1, 1], None).is_err());
    let mut c = Circuit::<f64>::new(2);
    assert!(c.push(Gate::h(2)).is_err());
    assert!(c.push(Gate::rz(0, Angle::Param(0))).is_err());
    let mut c = Circuit::<f64>::with_params(2, 1);
    c.push(Gate::rz(0, Angle::Param(0))).unwrap();
    let mut s = S::zero_state(2).unwrap();
    assert!(matches!(c.apply(&mut s, &[], false), Err(crate::Error::Binding(_))));
    let mut s3 = S::zero_state(3).unwrap();
    assert!(matches!(c.apply(&mut s3, &[0.1], false), Err(crate::Error::Shape(_))));
}

#[test]
fn givens_splits_into_commuting_pauli_rotations() {
    use Pauli::*;
    for theta in [0.0, 0.3, -1.7, 2.9] {
        let g = Gate::<f64>::givens(0, 1, Angle::Fixed(theta)).matrix(&[]).unwrap();
        let yx = pauli_rotation::<f64>(&[Y, X], theta);
        let xy = pauli_rotation::<f64>(&[X, Y], -theta);
        assert!(g.max_abs_diff(&yx.matmul(&xy)) < 1e-14);
        assert!(g.max_abs_diff(&xy.matmul(&yx)) < 1e-14);
    }
}

#[test]
fn shifted_realizations_at_zero_offset_are_exact() {
    let gates = [
        Gate::<f64>::rx(0, Angle::Param(0)),
        Gate::ry(1, Angle::Param(0)),
        Gate::rzz(0, 1, Angle::Param(0)),
        Gate::givens(1, 0, Angle::Param(0)),
    ];
    for g in gates {
        let c = Circuit::from_gates(2, 1, vec![g.clone()]).unwrap();
        let u = c.dense_unitary(&[0.77]).unwrap();
        for f in 0..g.rotation_factors().unwrap().len() {
            let shifted = c.with_shifted_gate(0, &[0.77], f, 0.0).unwrap();
            assert!(shifted.dense_unitary(&[0.77]).unwrap().max_abs_diff(&u) < 1e-14);
        }
    }
    let c = Circuit::from_gates(1, 0, vec![Gate::<f64>::h(0)]).unwrap();
    assert!(matches!(c.with_shifted_gate(0, &[], 0, 0.1), Err(crate::Error::Unsupported(_))));
}

#[test]
fn dense_unitary_examples() {
    let h = Circuit::from_gates(1, 0, vec![Gate::<f64>::h(0)]).unwrap().dense_unitary(&[]).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let expected = Matrix::from_row_major(
        2,
        2,
        vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0), Complex64::new(r, 0.0), Complex64::new(-r, 0.0)],
    );
    assert!(h.max_abs_diff(&expected) < 1e-15);
    assert_eq!(Circuit::<f64>::new(3).dense_unitary(&[]).unwrap(), Matrix::identity(8));
    let cc = Circuit::from_gates(2, 0, vec![Gate::<f64>::cnot(0, 1), Gate::cnot(0, 1)]).unwrap();
    assert_eq!(cc.dense_unitary(&[]).unwrap(), Matrix::identity(4));
    assert!(matches!(Circuit::<f64>::new(13).dense_unitary(&[]), Err(crate::Error::Size(_))));
}

#[test]
fn empty_circuit_and_round_trip() {
    let psi = random_state(4, 3);
    assert_eq!(apply_circuit(&psi, &Circuit::new(4), &[], false).unwrap(), psi);
    let mut c = Circuit::<f64>::with_params(4, 2);
    c.push(Gate::givens(0, 3, Angle::Param(1))).unwrap();
    c.push(Gate::ry(2, Angle::Param(0))).unwrap();
    c.push(Gate::cnot(2, 1)).unwrap();
    let fwd = apply_circuit(&psi, &c, &[0.4, -1.1], false).unwrap();
    let back = apply_circuit(&fwd, &c, &[0.4, -1.1], true).unwrap();
    assert!(back.inner_product(&psi).unwrap().norm() > 1.0 - 1e-12);
    let adj = c.adjoint(&[0.4, -1.1]).unwrap();
    let back2 = apply_circuit(&fwd, &adj, &[], false).unwrap();
    assert!(back2.inner_product(&psi).unwrap().norm() > 1.0 - 1e-12);
}

#[test]
fn unitary_gates_apply_like_their_matrix() {
    let m = Gate::<f64>::givens(0, 1, Angle::Fixed(0.6)).matrix(&[]).unwrap();
    let controlled_m = controlled(&m);
    let g = Gate::unitary(vec![2, 0, 1], controlled_m.clone()).unwrap();
    let c = Circuit::from_gates(3, 0, vec![g]).unwrap();
    let oracle = embed(3, &[2, 0, 1], &controlled_m);
    assert!(c.dense_unitary(&[]).unwrap().max_abs_diff(&oracle) < 1e-14);
    let not_unitary = Matrix::<f64>::from_diagonal(&[Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)]);
    assert!(Gate::unitary(vec![0], not_unitary).is_err());
}

#[test]
fn sampling_chi_square() {
    // 7 degrees of freedom, p = 0.001 critical value
    let critical = 24.322;
    for seed in 0..5 {
        let psi = random_state(3, 100 + seed);
        let shots = 100_000u64;
        let counts = psi.sample_counts(shots, seed).unwrap();
        let chi2: f64 = psi
            .probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let expected = p * shots as f64;
                let observed = *counts.get(&bitstring(i, 3)).unwrap_or(&0) as f64;
                (observed - expected).powi(2) / expected
            })
            .sum();
        assert!(chi2 < critical, "seed {seed}: chi2 {chi2}");
    }
}

#[test]
fn single_precision_path_runs() {
    let mut c = Circuit::<f32>::with_params(2, 1);
    c.push(Gate::ry(0, Angle::Param(0))).unwrap();
    c.push(Gate::cnot(0, 1)).unwrap();
    let s = apply_circuit(&QuantumState::<f32>::zero_state(2).unwrap(), &c, &[std::f32::consts::FRAC_PI_2], false).unwrap();
    assert!((s.norm() - 1.0).abs() < 1e-6);
    assert!((s.probabilities()[3] - 0.5).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn norm_is_preserved((c, params) in arb_circuit(6, 50), seed in 0u64..1000) {
        let psi = random_state(c.n_qubits(), seed);
        let out = apply_circuit(&psi, &c, &params, false).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn kernels_match_dense_oracle((c, params) in arb_circuit(6, 30), seed in 0u64..1000) {
        let psi = random_state(c.n_qubits(), seed);
        let oracle = oracle_unitary(&c, &params);
        let u = c.dense_unitary(&params).unwrap();
        prop_assert!(u.max_abs_diff(&oracle) < 1e-10);
        prop_assert!(u.is_unitary(1e-10));
        let out = apply_circuit(&psi, &c, &params, false).unwrap();
        let expected = oracle.mul_vec(psi.amplitudes());
        for (a, b) in out.amplitudes().iter().zip(&expected) {
            prop_assert!((a - b).norm() < 1e-10);
        }
        let adj = apply_circuit(&psi, &c, &params, true).unwrap();
        let expected_adj = oracle.dagger().mul_vec(psi.amplitudes());
        for (a, b) in adj.amplitudes().iter().zip(&expected_adj) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(n in 1usize..6, s1 in 0u64..1000, s2 in 0u64..1000) {
        let a = random_state(n, s1);
        let b = random_state(n, s2);
        prop_assert!((a.inner_product(&b).unwrap() - b.inner_product(&a).unwrap().conj()).norm() < 1e-14);
        prop_assert!((a.inner_product(&a).unwrap().re - 1.0).abs() < 1e-12);
    }
}
