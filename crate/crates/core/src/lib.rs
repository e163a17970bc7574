//! Pseudo-spectral simulation of the Pauli–Darwin and Pauli–Poisswell
//! equations on a periodic box.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases at
//! the crate root fix it to `f64`, which is what the diagnostics are
//! calibrated for.

pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod field;
pub mod field_solver;
pub mod grid;
pub mod initial;
pub mod magnetic;
pub mod random;
pub mod real;
pub mod snapshot;
pub mod spectral;
pub mod spinor;

pub use diagnostics::{DiagnosticsRecord, IdentityReport, Mutation};
pub use error::{Error, Result};
pub use evolution::{Coupling, EvolveConfig, StepOptions, StepScheme};
pub use field_solver::{ASolveOptions, GaugeKind, InitialGuess};
pub use initial::{make_band_limited_initial_data, make_initial_data, InitialDataSpec};
pub use real::{Cplx, Real};
pub use spectral::Axis;
pub use spinor::PauliMatrix;

pub type Grid = grid::Grid<f64>;
pub type ScalarField = field::ScalarField<f64>;
pub type VectorField = field::VectorField<f64>;
pub type SpinorField = spinor::SpinorField<f64>;
pub type SimState = evolution::SimState<f64>;
pub type Trajectory = evolution::Trajectory<f64>;
pub type ASolution = field_solver::ASolution<f64>;
pub type FieldSampler = random::FieldSampler<f64>;
pub type Complex = Cplx<f64>;
