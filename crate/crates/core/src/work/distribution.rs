use nalgebra::DMatrix;

use crate::error::{QwmError, Result};
use crate::quantum::{trace_of_product, CMatrix, DrivingUnitary, HamiltonianPair, QuantumState};

/// Relative tolerance (in units of the largest `|E|`) for merging work values.
pub const WORK_MERGE_TOL: f64 = 1e-9;

/// Populations below this are treated as zero: the conditional `p_{m|n}`
/// is then reported as 0 and flagged.
pub const UNDEFINED_POPULATION: f64 = 1e-14;

const NORMALIZATION_TOL: f64 = 1e-12;

/// One outcome `(n, m)` of the two-point measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkEntry {
    pub n: usize,
    pub m: usize,
    /// `w_nm = Ẽ_m − E_n`
    pub work: f64,
    pub probability: f64,
    /// Set when `p_n = 0` so that `p_{m|n}` is undefined.
    pub undefined_conditional: bool,
}

/// Discrete work distribution, one entry per `(n, m)` in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    entries: Vec<WorkEntry>,
    levels: (usize, usize),
    dim: usize,
    energy_scale: f64,
    beta_context: Option<f64>,
}

impl WorkDistribution {
    /// Builds a distribution from entries for every `(n, m)` of a
    /// `levels.0 × levels.1` grid of a `dim`-dimensional system.
    pub fn new(
        mut entries: Vec<WorkEntry>,
        levels: (usize, usize),
        dim: usize,
        energy_scale: f64,
    ) -> Result<Self> {
        entries.sort_by_key(|e| (e.n, e.m));
        if entries.len() != levels.0 * levels.1 {
            return Err(QwmError::invalid(
                "work distribution",
                format!(
                    "expected {} entries, got {}",
                    levels.0 * levels.1,
                    entries.len()
                ),
            ));
        }
        if entries.len() > dim * dim {
            return Err(QwmError::invalid(
                "work distribution",
                "more than D² outcomes",
            ));
        }
        for (k, e) in entries.iter().enumerate() {
            if (e.n, e.m) != (k / levels.1, k % levels.1) {
                return Err(QwmError::invalid(
                    "work distribution",
                    "entries do not cover the (n, m) grid",
                ));
            }
            if !(0.0..=1.0).contains(&e.probability) || !e.work.is_finite() {
                return Err(QwmError::invalid(
                    "work distribution",
                    format!(
                        "entry ({}, {}) has probability {} and work {}",
                        e.n, e.m, e.probability, e.work
                    ),
                ));
            }
        }
        let total: f64 = entries.iter().map(|e| e.probability).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QwmError::invalid(
                "work distribution",
                format!("probabilities sum to {total}"),
            ));
        }
        Ok(WorkDistribution {
            entries,
            levels,
            dim,
            energy_scale,
            beta_context: None,
        })
    }

    /// Empirical distribution on the support of `pair`: `weights[k]` is the
    /// (unnormalised) weight of the k-th `(n, m)` and `works[k]` its measured
    /// work value. Weights are normalised here.
    pub fn empirical(pair: &HamiltonianPair, weights: &[f64], works: &[f64]) -> Result<Self> {
        let levels = (pair.initial.levels(), pair.fin.levels());
        let count = levels.0 * levels.1;
        if weights.len() != count || works.len() != count {
            return Err(QwmError::Dimension {
                expected: count,
                found: weights.len().min(works.len()),
            });
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(QwmError::invalid(
                "work distribution",
                "negative or non-finite weight",
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(QwmError::invalid(
                "work distribution",
                "all weights are zero",
            ));
        }
        let entries = (0..count)
            .map(|k| WorkEntry {
                n: k / levels.1,
                m: k % levels.1,
                work: works[k],
                probability: weights[k] / total,
                undefined_conditional: false,
            })
            .collect();
        Self::new(entries, levels, pair.dim(), pair.energy_scale())
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta_context = Some(beta);
        self
    }

    pub fn beta_context(&self) -> Option<f64> {
        self.beta_context
    }

    pub fn entries(&self) -> &[WorkEntry] {
        &self.entries
    }

    pub fn get(&self, n: usize, m: usize) -> Option<&WorkEntry> {
        self.entries
            .get(n * self.levels.1 + m)
            .filter(|e| e.n == n && e.m == m)
    }

    /// Number of distinct initial and final levels.
    pub fn levels(&self) -> (usize, usize) {
        self.levels
    }

    /// Hilbert-space dimension `D` of the measured system.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    pub fn works(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.work).collect()
    }

    /// Probabilities in `(n, m)` order with the last one dropped.
    pub fn probability_vector(&self) -> Vec<f64> {
        let mut p = self.probabilities();
        p.pop();
        p
    }

    pub fn has_undefined_conditionals(&self) -> bool {
        self.entries.iter().any(|e| e.undefined_conditional)
    }

    /// Distinct work values (ascending) with summed probabilities; values
    /// closer than `WORK_MERGE_TOL · scale` are merged.
    pub fn support(&self) -> Vec<(f64, f64)> {
        let tol = WORK_MERGE_TOL * self.energy_scale;
        let mut sorted: Vec<(f64, f64)> = self
            .entries
            .iter()
            .map(|e| (e.work, e.probability))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, usize)> = Vec::new();
        let mut anchor = f64::NEG_INFINITY;
        for (w, p) in sorted {
            match merged.last_mut() {
                Some(last) if w - anchor < tol => {
                    last.0 += w;
                    last.1 += p;
                    last.2 += 1;
                }
                _ => {
                    anchor = w;
                    merged.push((w, p, 1));
                }
            }
        }
        merged
            .into_iter()
            .map(|(w, p, k)| (w / k as f64, p))
            .collect()
    }
}

/// Conditional probabilities `q[(m, n)] = p_{m|n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    q: DMatrix<f64>,
    undefined: Vec<usize>,
}

impl TransitionMatrix {
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.q[(m, n)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Initial levels with `p_n = 0`.
    pub fn undefined_columns(&self) -> &[usize] {
        &self.undefined
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.q.column_iter().map(|c| c.sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.q.row_iter().map(|r| r.sum()).collect()
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.column_sums()
            .iter()
            .chain(self.row_sums().iter())
            .all(|s| (s - 1.0).abs() < tol)
    }
}

struct Joint {
    /// `joint[n][m] = Tr(Π̃_m U Π_n ρ Π_n U†)`
    joint: Vec<Vec<f64>>,
    populations: Vec<f64>,
}

fn joint_probabilities(
    state: &QuantumState,
    pair: &HamiltonianPair,
    driving: &DrivingUnitary,
) -> Result<Joint> {
    let d = pair.dim();
    for found in [state.dim(), driving.dim()] {
        if found != d {
            return Err(QwmError::Dimension { expected: d, found });
        }
    }
    let u = driving.matrix();
    let u_dag = u.adjoint();
    let rho = state.matrix();
    let mut joint = Vec::with_capacity(pair.initial.levels());
    let mut populations = Vec::with_capacity(pair.initial.levels());
    for proj in pair.initial.projectors() {
        let evolved: CMatrix = u * (proj * rho * proj) * &u_dag;
        let row: Vec<f64> = pair
            .fin
            .projectors()
            .iter()
            .map(|fp| trace_of_product(fp, &evolved).re.max(0.0))
            .collect();
        populations.push(trace_of_product(rho, proj).re.max(0.0));
        joint.push(row);
    }
    Ok(Joint { joint, populations })
}

/// `p_{m|n} = Tr(Π̃_m U Π_n ρ Π_n U†) / p_n`, set to 0 (and flagged) where `p_n = 0`.
pub fn transition_matrix(
    state: &QuantumState,
    pair: &HamiltonianPair,
    driving: &DrivingUnitary,
) -> Result<TransitionMatrix> {
    let Joint { joint, populations } = joint_probabilities(state, pair, driving)?;
    let (ni, nf) = (pair.initial.levels(), pair.fin.levels());
    let mut undefined = Vec::new();
    let q = DMatrix::from_fn(nf, ni, |m, n| {
        if populations[n] < UNDEFINED_POPULATION {
            0.0
        } else {
            joint[n][m] / populations[n]
        }
    });
    for (n, p) in populations.iter().enumerate() {
        if *p < UNDEFINED_POPULATION {
            undefined.push(n);
        }
    }
    Ok(TransitionMatrix { q, undefined })
}

/// Exact two-point-measurement work distribution `P(w_nm) = p_n p_{m|n}`.
pub fn tpm_distribution(
    state: &QuantumState,
    pair: &HamiltonianPair,
    driving: &DrivingUnitary,
) -> Result<WorkDistribution> {
    let Joint { joint, populations } = joint_probabilities(state, pair, driving)?;
    let e = pair.initial.energies();
    let et = pair.fin.energies();
    let mut entries = Vec::with_capacity(e.len() * et.len());
    for (n, row) in joint.iter().enumerate() {
        let undefined = populations[n] < UNDEFINED_POPULATION;
        for (m, p) in row.iter().enumerate() {
            entries.push(WorkEntry {
                n,
                m,
                work: et[m] - e[n],
                probability: if undefined { 0.0 } else { p.min(1.0) },
                undefined_conditional: undefined,
            });
        }
    }
    WorkDistribution::new(
        entries,
        (e.len(), et.len()),
        pair.dim(),
        pair.energy_scale(),
    )
}
