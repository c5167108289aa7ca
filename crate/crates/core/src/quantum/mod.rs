//! Finite-dimensional quantum mechanics: density matrices, Hamiltonian
//! spectra with cached eigenprojectors, driving unitaries and Gibbs weights.

mod hamiltonian;
mod state;
mod unitary;

pub use hamiltonian::{gibbs_populations, GibbsWeights, HamiltonianPair, Spectrum};
pub use state::{pseudo_thermal_state, QuantumState};
pub use unitary::{random_unitary, rf_unitary, DrivingUnitary};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Tolerance used for Hermiticity, trace and unitarity checks.
pub const EXACT_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of a positive semi-definite operator.
pub const PSD_TOL: f64 = 1e-10;

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

pub fn trace_real(m: &CMatrix) -> f64 {
    m.trace().re
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
