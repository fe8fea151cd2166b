use std::collections::BTreeMap;

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::{cone, czero, Real, C};

pub const MAX_STATE_QUBITS: usize = 24;

/// Dense pure state. Qubit 0 is the leftmost character of a bitstring and the
/// most significant bit of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T: Real> {
    n_qubits: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> QuantumState<T> {
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_index(n, 0)
    }

    pub fn basis_index(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        if index >= 1 << n {
            return Err(Error::Index(format!("basis index {index} out of range for {n} qubits")));
        }
        let mut amps = vec![czero(); 1 << n];
        amps[index] = cone();
        Ok(Self { n_qubits: n, amps })
    }

    /// `|b_0 b_1 ... b_{n-1}>` from a string of '0'/'1'.
    pub fn basis_state(bits: &str) -> Result<Self> {
        let index = parse_bitstring(bits)?;
        Self::basis_index(bits.len(), index)
    }

    /// Wraps amplitudes after normalizing them.
    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!("amplitude vector length {len} is not a power of two >= 2")));
        }
        let n = len.trailing_zeros() as usize;
        check_qubits(n)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::Shape("amplitude vector has zero or non-finite norm".into()));
        }
        let inv = C::new(T::one() / norm, T::zero());
        Ok(Self {
            n_qubits: n,
            amps: amps.into_iter().map(|a| a * inv).collect(),
        })
    }

    /// Wraps a vector as-is; used for unnormalized registers such as a
    /// vectorized density matrix.
    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<C<T>>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        Self { n_qubits, amps }
    }

    /// Equal superposition of the listed basis states.
    pub fn superposition(bitstrings: &[&str]) -> Result<Self> {
        let first = bitstrings.first().ok_or_else(|| Error::Parse("empty superposition".into()))?;
        let n = first.len();
        check_qubits(n)?;
        let mut amps = vec![czero(); 1 << n];
        for b in bitstrings {
            if b.len() != n {
                return Err(Error::Shape("bitstrings of unequal length".into()));
            }
            amps[parse_bitstring(b)?] += cone();
        }
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C<T>] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C<T>> {
        self.amps
    }

    pub fn norm(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner_product(&self, other: &Self) -> Result<C<T>> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Shape(format!(
                "inner product of {}- and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(crate::linalg::inner(&self.amps, &other.amps))
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    /// Multiplies every amplitude by the matching diagonal entry.
    pub fn apply_diagonal(&mut self, diag: &[C<T>]) -> Result<()> {
        if diag.len() != self.amps.len() {
            return Err(Error::Shape("diagonal length does not match state".into()));
        }
        for (a, d) in self.amps.iter_mut().zip(diag) {
            *a *= *d;
        }
        Ok(())
    }

    /// Left-multiplies by a full `2^n x 2^n` matrix.
    pub fn apply_dense(&mut self, m: &Matrix<T>) -> Result<()> {
        if m.rows() != self.amps.len() || m.cols() != self.amps.len() {
            return Err(Error::Shape("dense operator does not match state".into()));
        }
        self.amps = m.mul_vec(&self.amps);
        Ok(())
    }

    /// Applies a `2^k x 2^k` matrix to the listed qubits; the first target is
    /// the most significant bit of the local index.
    pub(crate) fn apply_matrix(&mut self, targets: &[usize], m: &Matrix<T>) {
        match targets.len() {
            1 => self.apply_1q(targets[0], [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]),
            _ => self.apply_kq(targets, m),
        }
    }

    pub(crate) fn apply_1q(&mut self, q: usize, m: [C<T>; 4]) {
        let stride = 1usize << (self.n_qubits - 1 - q);
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0] * a0 + m[1] * a1;
                self.amps[i + stride] = m[2] * a0 + m[3] * a1;
            }
            base += 2 * stride;
        }
    }

    fn apply_kq(&mut self, targets: &[usize], m: &Matrix<T>) {
        let k = targets.len();
        let local = 1usize << k;
        let offsets: Vec<usize> = (0..local)
            .map(|j| {
                (0..k)
                    .filter(|i| j >> (k - 1 - i) & 1 == 1)
                    .map(|i| 1usize << (self.n_qubits - 1 - targets[i]))
                    .sum()
            })
            .collect();
        let mask = offsets[local - 1];
        let mut buf = vec![czero::<T>(); local];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (b, off) in buf.iter_mut().zip(&offsets) {
                *b = self.amps[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = czero();
                for (c, b) in buf.iter().enumerate() {
                    acc += m[(r, c)] * *b;
                }
                self.amps[base | off] = acc;
            }
        }
    }

    /// Multinomial shot counts keyed by bitstring, deterministic per seed.
    pub fn sample_counts(&self, shots: u64, seed: u64) -> Result<BTreeMap<String, u64>> {
        if shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        let mut rng = rng::stream(seed, "sampling");
        let probs: Vec<f64> = self.probabilities().iter().map(|p| p.as_f64()).collect();
        let counts = multinomial(&probs, shots, &mut rng)?;
        Ok(counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(i, c)| (bitstring(i, self.n_qubits), c))
            .collect())
    }
}

/// Multinomial draw of `shots` over `probs` by sequential binomials.
pub fn multinomial(probs: &[f64], shots: u64, rng: &mut rng::Rng) -> Result<Vec<u64>> {
    let mut remaining_shots = shots;
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut counts = vec![0; probs.len()];
    for (i, p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let c = if remaining_mass <= *p || i + 1 == probs.len() {
            remaining_shots
        } else {
            let q = (*p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, q)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(rng)
        };
        remaining_mass -= p;
        remaining_shots -= c;
        counts[i] = c;
    }
    Ok(counts)
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_STATE_QUBITS {
        return Err(Error::Size(format!("qubit count {n} outside 1..={MAX_STATE_QUBITS}")));
    }
    Ok(())
}

/// Index of a bitstring with the leftmost character as most significant bit.
pub fn parse_bitstring(bits: &str) -> Result<usize> {
    if bits.is_empty() {
        return Err(Error::Parse("empty bitstring".into()));
    }
    if bits.len() > MAX_STATE_QUBITS {
        return Err(Error::Size(format!("bitstring longer than {MAX_STATE_QUBITS}")));
    }
    bits.chars().try_fold(0usize, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        other => Err(Error::Parse(format!("invalid character {other:?} in bitstring {bits:?}"))),
    })
}

/// Bitstring of `index` over `n` qubits.
pub fn bitstring(index: usize, n: usize) -> String {
    (0..n).map(|q| if index >> (n - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}
