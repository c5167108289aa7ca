use nalgebra::{DMatrix, SymmetricEigen};

use super::{hermiticity_defect, max_abs_diff, trace_real, CMatrix, C64, EXACT_TOL};
use crate::error::{QwmError, Result};

/// Relative tolerance under which eigenvalues are merged into one level.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Distinct eigenvalues (ascending) of one Hamiltonian with their eigenprojectors.
///
/// Energies are dimensionless multiples of the reference scale `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    projectors: Vec<CMatrix>,
}

impl Spectrum {
    /// Diagonal Hamiltonian in the computational basis.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(QwmError::invalid("spectrum", "no eigenvalues"));
        }
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(QwmError::Domain("non-finite eigenvalue".into()));
        }
        let dim = eigenvalues.len();
        let pairs = eigenvalues.iter().enumerate().map(|(i, &e)| {
            let mut v = nalgebra::DVector::zeros(dim);
            v[i] = C64::new(1.0, 0.0);
            (e, v)
        });
        Ok(Self::group(dim, pairs.collect()))
    }

    /// Eigendecomposition of a Hermitian matrix, performed once.
    pub fn from_hermitian(h: &CMatrix) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(QwmError::invalid(
                "hamiltonian",
                "matrix must be square and non-empty",
            ));
        }
        let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if hermiticity_defect(h) > EXACT_TOL * scale {
            return Err(QwmError::invalid("hamiltonian", "matrix is not Hermitian"));
        }
        let sym = (h + h.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(sym);
        let dim = h.nrows();
        let pairs = (0..dim)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
            .collect();
        Ok(Self::group(dim, pairs))
    }

    /// Same eigenvalues, eigenbasis rotated by `u` (projectors `u Π u†`).
    pub fn rotated(&self, u: &CMatrix) -> Self {
        let projectors = self
            .projectors
            .iter()
            .map(|p| u * p * u.adjoint())
            .collect();
        Spectrum {
            energies: self.energies.clone(),
            projectors,
        }
    }

    /// Adds `c` to every eigenvalue.
    pub fn shifted(&self, c: f64) -> Self {
        Spectrum {
            energies: self.energies.iter().map(|e| e + c).collect(),
            projectors: self.projectors.clone(),
        }
    }

    fn group(dim: usize, mut pairs: Vec<(f64, nalgebra::DVector<C64>)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lo = pairs.first().map(|p| p.0).unwrap_or(0.0);
        let hi = pairs.last().map(|p| p.0).unwrap_or(0.0);
        // A purely relative-to-range threshold collapses for nearly-constant
        // spectra, so the magnitude of the eigenvalues is included.
        let tol = DEGENERACY_TOL * (hi - lo).max(lo.abs()).max(hi.abs());

        let mut energies: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<f64>> = Vec::new();
        let mut projectors: Vec<CMatrix> = Vec::new();
        let mut anchor = f64::NEG_INFINITY;
        for (e, v) in pairs {
            let outer = &v * v.adjoint();
            if !energies.is_empty() && e - anchor <= tol {
                let last = projectors.len() - 1;
                projectors[last] += outer;
                members[last].push(e);
            } else {
                anchor = e;
                energies.push(e);
                members.push(vec![e]);
                projectors.push(outer);
            }
        }
        for (energy, group) in energies.iter_mut().zip(&members) {
            *energy = group.iter().sum::<f64>() / group.len() as f64;
        }
        debug_assert!(projectors.iter().all(|p| p.nrows() == dim));
        Spectrum {
            energies,
            projectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    /// Number of distinct levels.
    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn projector(&self, level: usize) -> &CMatrix {
        &self.projectors[level]
    }

    /// `g_n = Tr(Π_n)`.
    pub fn degeneracies(&self) -> Vec<usize> {
        self.projectors
            .iter()
            .map(|p| trace_real(p).round() as usize)
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels() < self.dim()
    }

    /// Hamiltonian matrix `Σ E_n Π_n`.
    pub fn matrix(&self) -> CMatrix {
        let dim = self.dim();
        self.energies
            .iter()
            .zip(&self.projectors)
            .fold(DMatrix::zeros(dim, dim), |acc, (e, p)| acc + p.scale(*e))
    }

    /// Largest `|E|`, floored at 1; the scale for work-value comparisons.
    pub fn energy_scale(&self) -> f64 {
        self.energies.iter().map(|e| e.abs()).fold(1.0, f64::max)
    }

    /// Worst violation of idempotence, orthogonality and completeness.
    pub fn projector_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        let mut sum = CMatrix::zeros(dim, dim);
        for (i, p) in self.projectors.iter().enumerate() {
            worst = worst.max(max_abs_diff(&(p * p), p));
            for q in &self.projectors[i + 1..] {
                worst = worst.max((p * q).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            sum += p;
        }
        worst.max(max_abs_diff(&sum, &CMatrix::identity(dim, dim)))
    }
}

/// Initial (`H`) and final (`H̃`) Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPair {
    pub initial: Spectrum,
    pub fin: Spectrum,
}

impl HamiltonianPair {
    pub fn new(initial: Spectrum, fin: Spectrum) -> Result<Self> {
        if initial.dim() != fin.dim() {
            return Err(QwmError::Dimension {
                expected: initial.dim(),
                found: fin.dim(),
            });
        }
        Ok(HamiltonianPair { initial, fin })
    }

    /// The atom-chip pair: `H = E σ̂`, `H̃ = r E σ̂` with `σ̂ = |1⟩⟨1| + 2|2⟩⟨2|`.
    pub fn two_level(energy_ratio: f64) -> Result<Self> {
        if !energy_ratio.is_finite() {
            return Err(QwmError::Domain("non-finite energy ratio".into()));
        }
        Self::new(
            Spectrum::diagonal(&[1.0, 2.0])?,
            Spectrum::diagonal(&[energy_ratio, 2.0 * energy_ratio])?,
        )
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Scale used for the work-value merge tolerance.
    pub fn energy_scale(&self) -> f64 {
        self.initial.energy_scale().max(self.fin.energy_scale())
    }
}

/// Gibbs weights `p_n = g_n e^{-β E_n} / Z` with the partition function.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsWeights {
    pub populations: Vec<f64>,
    /// `Z`; may under/overflow for extreme `β`, use `ln_z` there.
    pub z: f64,
    pub ln_z: f64,
}

/// Gibbs populations of one side of a [`HamiltonianPair`] at inverse
/// temperature `beta` (dimensionless `βE`).
pub fn gibbs_populations(side: &Spectrum, beta: f64) -> Result<GibbsWeights> {
    if !beta.is_finite() {
        return Err(QwmError::Domain(format!("beta must be finite, got {beta}")));
    }
    if beta < 0.0 {
        return Err(QwmError::Domain(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    let e_min = side.energies()[0];
    let boltzmann: Vec<f64> = side
        .energies()
        .iter()
        .zip(side.degeneracies())
        .map(|(e, g)| g as f64 * (-beta * (e - e_min)).exp())
        .collect();
    let shifted_z: f64 = boltzmann.iter().sum();
    let ln_z = shifted_z.ln() - beta * e_min;
    Ok(GibbsWeights {
        populations: boltzmann.iter().map(|b| b / shifted_z).collect(),
        z: ln_z.exp(),
        ln_z,
    })
}
