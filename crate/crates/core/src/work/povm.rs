use crate::error::{QwmError, Result};
use crate::quantum::{
    max_abs_diff, min_eigenvalue, trace_of_product, CMatrix, DrivingUnitary, HamiltonianPair,
    QuantumState,
};

/// Work POVM `A_nm = Π_n U† Π̃_m U Π_n`, stored in `(n, m)` order.
#[derive(Debug, Clone)]
pub struct PovmElementSet {
    elements: Vec<((usize, usize), CMatrix)>,
    dim: usize,
}

pub fn povm_elements(pair: &HamiltonianPair, driving: &DrivingUnitary) -> Result<PovmElementSet> {
    let d = pair.dim();
    if driving.dim() != d {
        return Err(QwmError::Dimension {
            expected: d,
            found: driving.dim(),
        });
    }
    let u = driving.matrix();
    let u_dag = u.adjoint();
    let mut elements = Vec::new();
    for (n, pn) in pair.initial.projectors().iter().enumerate() {
        for (m, pm) in pair.fin.projectors().iter().enumerate() {
            elements.push(((n, m), pn * &u_dag * pm * u * pn));
        }
    }
    Ok(PovmElementSet { elements, dim: d })
}

impl PovmElementSet {
    pub fn elements(&self) -> &[((usize, usize), CMatrix)] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `‖Σ A_nm − 𝕀‖_max`
    pub fn completeness_residual(&self) -> f64 {
        let sum = self
            .elements
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, (_, a)| acc + a);
        max_abs_diff(&sum, &CMatrix::identity(self.dim, self.dim))
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .map(|(_, a)| min_eigenvalue(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// `Tr(ρ A_nm)` in `(n, m)` order.
    pub fn probabilities(&self, state: &QuantumState) -> Vec<f64> {
        self.elements
            .iter()
            .map(|(_, a)| trace_of_product(state.matrix(), a).re)
            .collect()
    }
}
