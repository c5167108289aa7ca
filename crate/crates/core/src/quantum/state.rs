use nalgebra::DVector;

use super::{
    gibbs_populations, hermiticity_defect, min_eigenvalue, trace_of_product, trace_real, CMatrix,
    Spectrum, C64, EXACT_TOL, PSD_TOL,
};
use crate::error::{QwmError, Result};

/// Density matrix `ρ_S` of the driven system.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    matrix: CMatrix,
}

impl QuantumState {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(QwmError::invalid(
                "state",
                "density matrix must be square and non-empty",
            ));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > EXACT_TOL {
            return Err(QwmError::invalid(
                "state",
                format!("not Hermitian (defect {herm:e})"),
            ));
        }
        let tr = trace_real(&matrix);
        if (tr - 1.0).abs() > EXACT_TOL {
            return Err(QwmError::invalid(
                "state",
                format!("trace is {tr}, expected 1"),
            ));
        }
        let lo = min_eigenvalue(&matrix);
        if lo < -PSD_TOL {
            return Err(QwmError::invalid(
                "state",
                format!("negative eigenvalue {lo:e}"),
            ));
        }
        Ok(QuantumState { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalised `ψ`.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(QwmError::invalid("state", format!("vector norm is {norm}")));
        }
        Self::new(psi * psi.adjoint())
    }

    /// Diagonal state in the computational basis.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = populations.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, p) in populations.iter().enumerate() {
            m[(i, i)] = C64::new(*p, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `p_n = Tr(ρ Π_n)` for each level of `spectrum`.
    pub fn populations(&self, spectrum: &Spectrum) -> Vec<f64> {
        spectrum
            .projectors()
            .iter()
            .map(|p| trace_of_product(&self.matrix, p).re)
            .collect()
    }

    /// Largest modulus of `Π_n ρ Π_{n'}` over `n ≠ n'`.
    pub fn max_coherence(&self, spectrum: &Spectrum) -> f64 {
        let ps = spectrum.projectors();
        let mut worst = 0.0f64;
        for (i, a) in ps.iter().enumerate() {
            for (j, b) in ps.iter().enumerate() {
                if i != j {
                    let block = a * &self.matrix * b;
                    worst = worst.max(block.iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
        }
        worst
    }
}

/// State whose populations in the eigenbasis of `side` are Gibbs weights.
///
/// With `coherence_phase = None` the state is the mixed Gibbs state. With a
/// phase `φ` it is the pure state `√p₁|1⟩ + e^{iφ}√p₂|2⟩`, available for two
/// non-degenerate levels only.
pub fn pseudo_thermal_state(
    beta: f64,
    side: &Spectrum,
    coherence_phase: Option<f64>,
) -> Result<QuantumState> {
    let gibbs = gibbs_populations(side, beta)?;
    match coherence_phase {
        None => {
            let dim = side.dim();
            let rho = side
                .projectors()
                .iter()
                .zip(gibbs.populations.iter().zip(side.degeneracies()))
                .fold(CMatrix::zeros(dim, dim), |acc, (proj, (p, g))| {
                    acc + proj.scale(p / g as f64)
                });
            QuantumState::new(rho)
        }
        Some(phase) => {
            if side.dim() != 2 || side.levels() != 2 {
                return Err(QwmError::Unsupported(format!(
                    "coherent pseudo-thermal state needs two non-degenerate levels (dimension {}, {} levels)",
                    side.dim(),
                    side.levels()
                )));
            }
            let v1 = eigenvector(side.projector(0));
            let v2 = eigenvector(side.projector(1));
            let psi = v1.scale(gibbs.populations[0].sqrt())
                + v2 * (C64::from_polar(1.0, phase) * gibbs.populations[1].sqrt());
            let psi = psi.unscale(psi.norm());
            QuantumState::new(&psi * psi.adjoint())
        }
    }
}

/// Unit vector spanning a rank-one projector.
fn eigenvector(projector: &CMatrix) -> DVector<C64> {
    let best = (0..projector.ncols())
        .max_by(|&a, &b| {
            projector
                .column(a)
                .norm()
                .total_cmp(&projector.column(b).norm())
        })
        .unwrap_or(0);
    let col = projector.column(best).into_owned();
    let n = col.norm();
    col.unscale(n)
}
