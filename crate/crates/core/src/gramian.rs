//! Krylov dimension `n_eig` from the determinants of the overlap Gramian
//! `G(k)_{l l'} = <psi_l|psi_l'>`, `psi_l = U^l psi_0`.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::StepOperator;
use crate::linalg::{self, Matrix};
use crate::rng;
use crate::scalar::{cone, cplx, Real, C};
use crate::statevector::{Gate, QuantumState};

pub const DEFAULT_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMethod {
    Exact,
    Hadamard,
}

/// Hermitian Toeplitz Gramian held as its first row.
#[derive(Clone, Debug, PartialEq)]
pub struct GramianMatrix<T: Real> {
    row: Vec<C<T>>,
}

impl<T: Real> GramianMatrix<T> {
    /// Dimension index `k` (the matrix is `(k + 1) x (k + 1)`).
    pub fn k(&self) -> usize {
        self.row.len() - 1
    }

    pub fn row(&self) -> &[C<T>] {
        &self.row
    }

    pub fn matrix(&self) -> Matrix<T> {
        let n = self.row.len();
        Matrix::from_fn(n, n, |l, lp| if lp >= l { self.row[lp - l] } else { self.row[l - lp].conj() })
    }

    /// Real part of the determinant; the imaginary residue of a Hermitian
    /// matrix is rounding noise.
    pub fn determinant(&self) -> T {
        linalg::determinant(&self.matrix()).re
    }
}

/// Assembles the Gramian from `<psi_0|psi_l>`, `l = 0..=k`.
pub fn build_gramian<T: Real>(row: &[C<T>]) -> Result<GramianMatrix<T>> {
    if row.is_empty() {
        return Err(Error::Shape("empty overlap row".into()));
    }
    Ok(GramianMatrix { row: row.to_vec() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeigResult {
    pub n_eig: usize,
    /// `det G(k)` for `k = 1..=n_eig`.
    pub determinants: Vec<f64>,
    pub method: OverlapMethod,
    pub shots: Option<u64>,
    /// Threshold applied at each `k`.
    pub thresholds: Vec<f64>,
    pub row: Vec<(f64, f64)>,
}

impl NeigResult {
    pub fn threshold(&self) -> f64 {
        self.thresholds.last().copied().unwrap_or(DEFAULT_THRESHOLD)
    }
}

/// Incremental overlap estimator: keeps `U^l psi_0` (exact) or the
/// Hadamard-test register before the final H (sampled) so each new entry
/// costs one more application of the step.
struct OverlapStream<'a, T: Real> {
    u: &'a StepOperator<T>,
    psi0: QuantumState<T>,
    method: OverlapMethod,
    shots: u64,
    rng: rng::Rng,
    current: QuantumState<T>,
    re_reg: Option<QuantumState<T>>,
    im_reg: Option<QuantumState<T>>,
    controlled: Vec<Gate<T>>,
    row: Vec<C<T>>,
}

impl<'a, T: Real> OverlapStream<'a, T> {
    fn new(u: &'a StepOperator<T>, psi0: &QuantumState<T>, method: OverlapMethod, shots: Option<u64>, seed: u64) -> Result<Self> {
        if u.n_qubits() != psi0.n_qubits() {
            return Err(Error::Shape("step operator and state differ in width".into()));
        }
        let (shots, controlled, re_reg, im_reg) = match method {
            OverlapMethod::Exact => (0, Vec::new(), None, None),
            OverlapMethod::Hadamard => {
                let shots = shots.ok_or_else(|| Error::Config("Hadamard-test overlaps need a shot count".into()))?;
                if shots == 0 {
                    return Err(Error::Config("shots must be at least 1".into()));
                }
                let (re, im) = hadamard_registers(psi0)?;
                (shots, u.controlled_gates()?, Some(re), Some(im))
            }
        };
        Ok(Self {
            u,
            psi0: psi0.clone(),
            method,
            shots,
            rng: rng::stream(seed, "hadamard-test"),
            current: psi0.clone(),
            re_reg,
            im_reg,
            controlled,
            row: vec![cone()],
        })
    }

    fn next(&mut self) -> Result<C<T>> {
        let value = match self.method {
            OverlapMethod::Exact => {
                self.u.apply(&mut self.current, false)?;
                self.psi0.inner_product(&self.current)?
            }
            OverlapMethod::Hadamard => {
                let mut quad = [T::zero(); 2];
                for (slot, reg) in [self.re_reg.as_mut(), self.im_reg.as_mut()].into_iter().enumerate() {
                    let reg = reg.expect("hadamard registers");
                    for g in &self.controlled {
                        g.apply(reg, &[], false)?;
                    }
                    let mut out = reg.clone();
                    Gate::h(0).apply(&mut out, &[], false)?;
                    let p0: f64 = out.probabilities()[..out.dim() / 2].iter().map(|p| p.as_f64()).sum();
                    let hits = Binomial::new(self.shots, p0.clamp(0.0, 1.0))
                        .map_err(|e| Error::Config(e.to_string()))?
                        .sample(&mut self.rng);
                    let z = 2.0 * hits as f64 / self.shots as f64 - 1.0;
                    // with S^dagger after the first H, <Z> = -Im
                    quad[slot] = T::lit(if slot == 0 { z } else { -z });
                }
                cplx(quad[0], quad[1])
            }
        };
        self.row.push(value);
        Ok(value)
    }
}

/// Ancilla-plus-system registers after the opening H (and S^dagger for the
/// imaginary quadrature), ancilla on qubit 0.
fn hadamard_registers<T: Real>(psi0: &QuantumState<T>) -> Result<(QuantumState<T>, QuantumState<T>)> {
    let dim = psi0.dim();
    let mut amps = vec![C::new(T::zero(), T::zero()); 2 * dim];
    amps[..dim].copy_from_slice(psi0.amplitudes());
    let mut re = QuantumState::from_amplitudes(amps)?;
    Gate::h(0).apply(&mut re, &[], false)?;
    let mut im = re.clone();
    Gate::phase(0, crate::statevector::Angle::Fixed(-T::FRAC_PI_2())).apply(&mut im, &[], false)?;
    Ok((re, im))
}

/// `<psi_0|U^l|psi_0>` for `l = 0..=k`.
pub fn overlap_row<T: Real>(
    u: &StepOperator<T>,
    psi0: &QuantumState<T>,
    k: usize,
    method: OverlapMethod,
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<C<T>>> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut stream = OverlapStream::new(u, psi0, method, shots, seed)?;
    for _ in 0..k {
        stream.next()?;
    }
    Ok(stream.row)
}

/// First-order propagation of per-quadrature shot variance `(1 - x^2)/shots`
/// through the determinant, by central differences.
pub fn determinant_sigma<T: Real>(row: &[C<T>], shots: u64) -> f64 {
    let base: Vec<(f64, f64)> = row.iter().map(|z| (z.re.as_f64(), z.im.as_f64())).collect();
    let det_of = |r: &[(f64, f64)]| -> f64 {
        let g = GramianMatrix {
            row: r.iter().map(|(a, b)| C::new(*a, *b)).collect(),
        };
        g.determinant()
    };
    let h = 1e-6;
    let mut var = 0.0;
    for l in 1..base.len() {
        for quad in 0..2 {
            let mut plus = base.clone();
            let mut minus = base.clone();
            if quad == 0 {
                plus[l].0 += h;
                minus[l].0 -= h;
            } else {
                plus[l].1 += h;
                minus[l].1 -= h;
            }
            let d = (det_of(&plus) - det_of(&minus)) / (2.0 * h);
            let x = if quad == 0 { base[l].0 } else { base[l].1 };
            var += d * d * (1.0 - x * x).max(0.0) / shots as f64;
        }
    }
    var.sqrt()
}

/// Smallest `k <= k_max` with `|det G(k)| <= threshold`, which is `n_eig`.
/// In shot mode the threshold is `max(threshold, 5 k sigma_det)`.
pub fn find_neig<T: Real>(
    u: &StepOperator<T>,
    psi0: &QuantumState<T>,
    k_max: usize,
    threshold: f64,
    method: OverlapMethod,
    shots: Option<u64>,
    seed: u64,
) -> Result<NeigResult> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::Config("threshold must be positive".into()));
    }
    let mut stream = OverlapStream::new(u, psi0, method, shots, seed)?;
    let mut determinants = Vec::new();
    let mut thresholds = Vec::new();
    for k in 1..=k_max {
        stream.next()?;
        let det = build_gramian(&stream.row)?.determinant().as_f64();
        let thr = match method {
            OverlapMethod::Exact => threshold,
            OverlapMethod::Hadamard => threshold.max(5.0 * k as f64 * determinant_sigma(&stream.row, stream.shots)),
        };
        determinants.push(det);
        thresholds.push(thr);
        if det.abs() <= thr {
            return Ok(NeigResult {
                n_eig: k,
                determinants,
                method,
                shots: (method == OverlapMethod::Hadamard).then_some(stream.shots),
                thresholds,
                row: stream.row.iter().map(|z| (z.re.as_f64(), z.im.as_f64())).collect(),
            });
        }
    }
    Err(Error::Inconclusive { k_max, determinants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_xy, exact_evolution, trotter_circuit, TrotterSpec};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn xy_step(n: usize, dt: f64) -> StepOperator<f64> {
        StepOperator::Circuit(trotter_circuit(&build_xy(n).unwrap(), &TrotterSpec::first(dt)).unwrap())
    }

    fn cofactor_det(m: &Matrix<f64>) -> Complex64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = Matrix::from_fn(n - 1, n - 1, |r, c| m[(r + 1, if c < j { c } else { c + 1 })]);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                m[(0, j)] * cofactor_det(&minor) * sign
            })
            .sum()
    }

    #[test]
    fn gramian_small_cases() {
        let g = build_gramian(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(g.matrix(), Matrix::identity(1));
        let c = Complex64::new(0.3, -0.4);
        let g = build_gramian(&[Complex64::new(1.0, 0.0), c]).unwrap();
        assert_eq!(g.matrix()[(0, 1)], c);
        assert_eq!(g.matrix()[(1, 0)], c.conj());
        assert!((g.determinant() - (1.0 - c.norm_sqr())).abs() < 1e-15);
        let ones = build_gramian(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        assert!(ones.determinant().abs() < 1e-15);
        assert!(build_gramian::<f64>(&[]).is_err());
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let u = StepOperator::Dense(exact_evolution(&build_xy::<f64>(2).unwrap(), 0.5).unwrap());
        let psi = QuantumState::basis_state("10").unwrap();
        let row = overlap_row(&u, &psi, 2, OverlapMethod::Exact, None, 0).unwrap();
        let g = build_gramian(&row).unwrap();
        let cof = cofactor_det(&g.matrix());
        assert!((g.determinant() - cof.re).abs() < 1e-12);
        assert!(cof.im.abs() < 1e-12);
    }

    #[test]
    fn eigenstate_has_unit_modulus_row() {
        let row = overlap_row(&xy_step(2, 0.5), &QuantumState::basis_state("00").unwrap(), 4, OverlapMethod::Exact, None, 0).unwrap();
        assert_eq!(row[0], Complex64::new(1.0, 0.0));
        assert!(row.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_qubit_neig() {
        let u = xy_step(2, 0.5);
        for (psi, expected) in [
            (QuantumState::basis_state("00").unwrap(), 1),
            (QuantumState::basis_state("10").unwrap(), 2),
            (QuantumState::superposition(&["00", "10"]).unwrap(), 3),
        ] {
            let r = find_neig(&u, &psi, 8, DEFAULT_THRESHOLD, OverlapMethod::Exact, None, 0).unwrap();
            assert_eq!(r.n_eig, expected);
            assert_eq!(r.determinants.len(), expected);
        }
    }

    #[test]
    fn inconclusive_carries_trace() {
        let u = xy_step(4, 0.5);
        let err = find_neig(&u, &QuantumState::basis_state("1100").unwrap(), 2, DEFAULT_THRESHOLD, OverlapMethod::Exact, None, 0).unwrap_err();
        match err {
            Error::Inconclusive { k_max, determinants } => {
                assert_eq!(k_max, 2);
                assert_eq!(determinants.len(), 2);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(find_neig(&u, &QuantumState::basis_state("1100").unwrap(), 2, DEFAULT_THRESHOLD, OverlapMethod::Hadamard, None, 0).is_err());
    }

    #[test]
    fn hadamard_estimates_agree_with_exact() {
        let u = xy_step(2, 0.5);
        let psi = QuantumState::basis_state("10").unwrap();
        let shots = 100_000;
        let exact = overlap_row(&u, &psi, 3, OverlapMethod::Exact, None, 0).unwrap();
        let sampled = overlap_row(&u, &psi, 3, OverlapMethod::Hadamard, Some(shots), 42).unwrap();
        let tol = 3.0 / (shots as f64).sqrt();
        for (e, s) in exact.iter().zip(&sampled).skip(1) {
            assert!((e.re - s.re).abs() <= tol, "{e} vs {s}");
            assert!((e.im - s.im).abs() <= tol, "{e} vs {s}");
        }
        let r = find_neig(&u, &psi, 6, DEFAULT_THRESHOLD, OverlapMethod::Hadamard, Some(shots), 1).unwrap();
        assert_eq!(r.n_eig, 2);
        assert!(r.threshold() > DEFAULT_THRESHOLD);
    }

    #[test]
    fn degenerate_pair_counts_once() {
        // diagonal H on 3 qubits with energies {0, 1, 1, 2, ...}: the equal pair
        // collapses to one Krylov direction
        let energies = [0.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 5.0];
        let diag: Vec<Complex64> = energies.iter().map(|e: &f64| Complex64::from_polar(1.0, -e * 0.7)).collect();
        let u = StepOperator::Dense(Matrix::from_diagonal(&diag));
        let amps = vec![Complex64::new(1.0, 0.0); 4].into_iter().chain(vec![Complex64::new(0.0, 0.0); 4]).collect();
        let psi = QuantumState::from_amplitudes(amps).unwrap();
        let r = find_neig(&u, &psi, 8, DEFAULT_THRESHOLD, OverlapMethod::Exact, None, 0).unwrap();
        assert_eq!(r.n_eig, 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn toeplitz_row_matches_pairwise_overlaps(seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = rng::stream(seed, "gram-test");
            let a = Matrix::<f64>::from_fn(8, 8, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let u = StepOperator::Dense(linalg::hermitian_propagator(&a.add(&a.dagger()), 0.9));
            let psi = QuantumState::from_amplitudes((0..8).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap();
            let row = overlap_row(&u, &psi, 4, OverlapMethod::Exact, None, 0).unwrap();
            let g = build_gramian(&row).unwrap().matrix();
            let mut states = vec![psi.clone()];
            for _ in 0..4 {
                let mut s = states.last().unwrap().clone();
                u.apply(&mut s, false).unwrap();
                states.push(s);
            }
            for l in 0..5 {
                for lp in 0..5 {
                    prop_assert!((g[(l, lp)] - states[l].inner_product(&states[lp]).unwrap()).norm() < 1e-10);
                }
            }
        }

        #[test]
        fn determinants_are_psd_and_stay_small(seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = rng::stream(seed, "gram-psd");
            let energies: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
            let diag: Vec<Complex64> = energies.iter().map(|e| Complex64::from_polar(1.0, -e)).collect();
            let u = StepOperator::Dense(Matrix::from_diagonal(&diag));
            let support = rng.random_range(1..=4);
            let amps = (0..8).map(|i| if i < support { Complex64::new(rng.random_range(0.3..1.0), 0.0) } else { Complex64::new(0.0, 0.0) }).collect();
            let psi = QuantumState::from_amplitudes(amps).unwrap();
            let row = overlap_row(&u, &psi, support + 3, OverlapMethod::Exact, None, 0).unwrap();
            let mut dropped = false;
            for k in 1..row.len() {
                let det = build_gramian(&row[..=k]).unwrap().determinant();
                prop_assert!(det >= -1e-10);
                if dropped {
                    prop_assert!(det.abs() <= DEFAULT_THRESHOLD);
                }
                if det.abs() <= DEFAULT_THRESHOLD {
                    dropped = true;
                }
            }
        }
    }
}
