use nalgebra::DMatrix;

use super::{jarzynski_average, WorkDistribution};
use crate::error::{QwmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldOptions {
    /// Singular values below `relative_threshold · σ_max` count as zero.
    pub relative_threshold: f64,
    /// Singular values below this (times `√k`) count as zero regardless.
    pub absolute_floor: f64,
    /// Largest admissible distance from a data point to the fitted subspace.
    pub residual_tolerance: f64,
    /// Force the fitted dimension instead of detecting it (noisy inputs).
    pub dimension: Option<usize>,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        ManifoldOptions {
            relative_threshold: 1e-8,
            absolute_floor: 1e-12,
            residual_tolerance: 1e-10,
            dimension: None,
        }
    }
}

impl ManifoldOptions {
    /// Settings for sampled probability vectors: the dimension is fixed to
    /// `(D−1)²` and the residual tolerance is `residual_tolerance`.
    pub fn empirical(dimension: usize, residual_tolerance: f64) -> Self {
        ManifoldOptions {
            dimension: Some(dimension),
            residual_tolerance,
            ..Self::default()
        }
    }
}

/// Affine subspace fitted to reduced probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldFit {
    pub dimension: usize,
    /// `(D−1)²`, the dimension expected for non-degenerate spectra.
    pub expected_dimension: usize,
    /// Centroid of the data.
    pub offset: Vec<f64>,
    /// Orthonormal directions spanning the subspace.
    pub basis: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Largest distance from a data point to the subspace.
    pub max_residual: f64,
    /// `⟨e^{−βw}⟩` at each data point.
    pub jarzynski_values: Vec<f64>,
    /// Largest `|⟨e^{−βw}⟩_i − ⟨e^{−βw}⟩_offset|`.
    pub constraint_violation: f64,
    /// Largest `|c · b|` between the constraint normal `c` and a basis vector `b`.
    pub normal_overlap: f64,
    /// `βΔF` read off the fitted hyperplane at the offset.
    pub delta_f_estimate: f64,
}

/// Principal-component fit of the Jarzynski manifold traced by `dists`
/// (fixed `β` and Hamiltonian pair, varying driving).
pub fn manifold_fit(
    dists: &[WorkDistribution],
    beta: f64,
    options: &ManifoldOptions,
) -> Result<ManifoldFit> {
    let first = dists
        .first()
        .ok_or(QwmError::InsufficientData { needed: 3, got: 0 })?;
    let d = first.dim();
    let expected_dimension = (d - 1) * (d - 1);
    let needed = expected_dimension + 2;
    if dists.len() < needed {
        return Err(QwmError::InsufficientData {
            needed,
            got: dists.len(),
        });
    }
    let keys: Vec<(usize, usize)> = first.entries().iter().map(|e| (e.n, e.m)).collect();
    for other in &dists[1..] {
        let ok = other.entries().len() == keys.len()
            && other
                .entries()
                .iter()
                .zip(&keys)
                .all(|(e, k)| (e.n, e.m) == *k);
        if !ok {
            return Err(QwmError::invalid(
                "manifold input",
                "distributions have different supports",
            ));
        }
    }

    let k = dists.len();
    let cols = keys.len() - 1;
    let points: Vec<Vec<f64>> = dists.iter().map(|d| d.probability_vector()).collect();
    let offset: Vec<f64> = (0..cols)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / k as f64)
        .collect();
    let centered = DMatrix::from_fn(k, cols, |i, j| points[i][j] - offset[j]);

    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let s_max = singular_values.first().copied().unwrap_or(0.0);
    let floor = options.absolute_floor * (k as f64).sqrt();
    let dimension = options.dimension.unwrap_or_else(|| {
        singular_values
            .iter()
            .filter(|&&s| s > floor && s > options.relative_threshold * s_max)
            .count()
    });
    let dimension = dimension.min(singular_values.len());
    let basis: Vec<Vec<f64>> = order[..dimension]
        .iter()
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();

    let mut max_residual = 0.0f64;
    for i in 0..k {
        let row: Vec<f64> = centered.row(i).iter().copied().collect();
        let mut resid = row.clone();
        for b in &basis {
            let c: f64 = row.iter().zip(b).map(|(x, y)| x * y).sum();
            for (r, bj) in resid.iter_mut().zip(b) {
                *r -= c * bj;
            }
        }
        max_residual = max_residual.max(resid.iter().map(|x| x * x).sum::<f64>().sqrt());
    }

    // ⟨e^{−βw}⟩ = Σ_{j<K} (e^{−βw_j} − e^{−βw_K}) P_j + e^{−βw_K} in reduced coordinates.
    let boltz: Vec<f64> = first.works().iter().map(|w| (-beta * w).exp()).collect();
    let last = boltz[cols];
    let normal: Vec<f64> = boltz[..cols].iter().map(|b| b - last).collect();
    let at_offset = normal.iter().zip(&offset).map(|(c, x)| c * x).sum::<f64>() + last;
    let jarzynski_values = dists
        .iter()
        .map(|d| jarzynski_average(d, beta).map(|j| j.average))
        .collect::<Result<Vec<f64>>>()?;
    let constraint_violation = jarzynski_values
        .iter()
        .map(|v| (v - at_offset).abs())
        .fold(0.0, f64::max);
    let normal_overlap = basis
        .iter()
        .map(|b| b.iter().zip(&normal).map(|(x, c)| x * c).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if at_offset <= 0.0 {
        return Err(QwmError::Domain(
            "Jarzynski average at the manifold offset is not positive".into(),
        ));
    }

    if max_residual > options.residual_tolerance {
        return Err(QwmError::FitFailure {
            dimension,
            residual: max_residual,
            tolerance: options.residual_tolerance,
        });
    }

    Ok(ManifoldFit {
        dimension,
        expected_dimension,
        offset,
        basis,
        singular_values,
        max_residual,
        jarzynski_values,
        constraint_violation,
        normal_overlap,
        delta_f_estimate: -at_offset.ln(),
    })
}
