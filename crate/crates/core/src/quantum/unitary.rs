use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{max_abs_diff, CMatrix, C64, EXACT_TOL};
use crate::error::{QwmError, Result};

/// The intermediate driving `𝒰_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingUnitary {
    matrix: CMatrix,
    label: String,
}

impl DrivingUnitary {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QwmError::invalid("unitary", "matrix must be square"));
        }
        let d = matrix.nrows();
        let defect = max_abs_diff(&(matrix.adjoint() * &matrix), &CMatrix::identity(d, d));
        if defect > EXACT_TOL {
            return Err(QwmError::invalid(
                "unitary",
                format!("U†U deviates from 1 by {defect:e}"),
            ));
        }
        Ok(DrivingUnitary {
            matrix,
            label: label.into(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        DrivingUnitary {
            matrix: CMatrix::identity(dim, dim),
            label: "identity".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        max_abs_diff(
            &(self.matrix.adjoint() * &self.matrix),
            &CMatrix::identity(d, d),
        )
    }
}

/// Resonant Rabi rotation `exp(-i (θ/2)(cos φ σ_x + sin φ σ_y))` on the
/// pseudo-spin `{|1⟩, |2⟩}`, `θ` being the pulse area.
pub fn rf_unitary(pulse_area: f64, axis_phase: f64) -> Result<DrivingUnitary> {
    if !pulse_area.is_finite() || !axis_phase.is_finite() {
        return Err(QwmError::Domain(
            "pulse area and phase must be finite".into(),
        ));
    }
    let (s, c) = (0.5 * pulse_area).sin_cos();
    let off = C64::new(0.0, -s);
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0),
            off * C64::from_polar(1.0, -axis_phase),
            off * C64::from_polar(1.0, axis_phase),
            C64::new(c, 0.0),
        ],
    );
    DrivingUnitary::new(m, format!("rf area={pulse_area}"))
}

/// Haar-distributed `dim × dim` unitary, deterministic in `seed`.
///
/// QR of a complex Ginibre matrix with the phases of `R`'s diagonal folded
/// back into `Q`.
pub fn random_unitary(dim: usize, seed: u64) -> Result<DrivingUnitary> {
    if dim == 0 {
        return Err(QwmError::invalid("unitary", "dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    DrivingUnitary::new(q, format!("haar seed={seed}"))
}
