//! Pseudospectral laboratory for the Dirac equation with a Choquard-type
//! convolution nonlinearity `Dψ = λψ + (G * |ψ|²)ψ` on periodic boxes.

pub mod clifford;
pub mod closed_form;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod io;
pub mod solver;
pub mod spectral;

pub use clifford::{build_clifford, CliffordAlgebra};
pub use closed_form::{calibrate_constants, standard_bubble, BubbleParams, Constants};
pub use energy::{dual_norm, energy, energy_and_gradient, gradient, EnergyBreakdown};
pub use error::{LabError, Result};
pub use grid::{BoxGrid, ScalarDensity, SpinorField};
pub use io::RunConfig;
pub use solver::{ground_state, tau_solve, GroundStateReport, SolverConfig};
pub use spectral::{Branch, GreenMode, KernelQuadrature, Model};
