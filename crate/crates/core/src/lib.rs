//! Fixed-state variational fast-forwarding on a dense quantum-circuit
//! simulator.
//!
//! A short-time evolution `U` is learned on the subspace spanned by a fixed
//! initial state as `W(theta) D(gamma, dt) W(theta)^dagger`. Long-time
//! evolution then costs nothing extra: `D` is diagonal, so `N` steps only
//! rescale its phases.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

pub mod ansatz;
pub mod cost;
pub mod error;
pub mod evolution;
pub mod fastforward;
pub mod gramian;
pub mod hamiltonian;
pub mod linalg;
pub mod noise;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod spectroscopy;
pub mod statevector;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::{wrap_angle, Real, C};

pub type Complex = num_complex::Complex<f64>;
pub type State = statevector::QuantumState<f64>;
pub type Circuit = statevector::Circuit<f64>;
pub type Gate = statevector::Gate<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type PauliSum = hamiltonian::PauliSum<f64>;
pub type DiagonalAnsatz = ansatz::DiagonalAnsatz<f64>;
pub type FsvffAnsatz = ansatz::FsvffAnsatz<f64>;
pub type TrainingSet = cost::TrainingSet<f64>;
pub type DensityMatrix = noise::DensityMatrix<f64>;
pub type NoiseModel = noise::NoiseModel<f64>;
