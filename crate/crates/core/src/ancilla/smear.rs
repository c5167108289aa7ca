use num_complex::Complex64;

use super::{FlagStateSet, HBAR};
use crate::error::{QwmError, Result};
use crate::quantum::{trace_of_product, DrivingUnitary, HamiltonianPair, QuantumState};

/// Allowed deviation of the density's integral from 1.
const RESOLUTION_TOL: f64 = 1e-3;

/// `Tr(Π̃_m U Π_n ρ Π_{n'} U†)` for one `(n, n', m)` with `n ≠ n'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceTrace {
    pub n: usize,
    pub n_prime: usize,
    pub m: usize,
    pub value: Complex64,
}

/// All off-diagonal (`n ≠ n'`) traces entering the outcome density.
pub fn coherence_traces(
    state: &QuantumState,
    pair: &HamiltonianPair,
    driving: &DrivingUnitary,
) -> Result<Vec<CoherenceTrace>> {
    let d = pair.dim();
    for found in [state.dim(), driving.dim()] {
        if found != d {
            return Err(QwmError::Dimension { expected: d, found });
        }
    }
    let u = driving.matrix();
    let u_dag = u.adjoint();
    let rho = state.matrix();
    let proj = pair.initial.projectors();
    let mut out = Vec::new();
    for (n, pn) in proj.iter().enumerate() {
        for (n_prime, pn2) in proj.iter().enumerate() {
            if n == n_prime {
                continue;
            }
            let evolved = u * (pn * rho * pn2) * &u_dag;
            for (m, pm) in pair.fin.projectors().iter().enumerate() {
                out.push(CoherenceTrace {
                    n,
                    n_prime,
                    m,
                    value: trace_of_product(pm, &evolved),
                });
            }
        }
    }
    Ok(out)
}

/// Upper bound on the sup-norm of the coherence contribution to the
/// outcome density, for a Gaussian window of position width `sigma`.
pub fn coherence_error_bound(
    state: &QuantumState,
    pair: &HamiltonianPair,
    driving: &DrivingUnitary,
    lambda: f64,
    sigma: f64,
) -> Result<f64> {
    let e = pair.initial.energies();
    let peak = sigma / (HBAR * std::f64::consts::PI.sqrt());
    let k = sigma * lambda / (2.0 * HBAR);
    Ok(coherence_traces(state, pair, driving)?
        .iter()
        .map(|t| {
            let gap = e[t.n] - e[t.n_prime];
            t.value.norm() * peak * (-(k * gap).powi(2)).exp()
        })
        .sum())
}

/// Uniform momentum grid spanning every flag centre by `span` widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmearGrid {
    pub points: usize,
    /// Margin beyond the outermost centres, in momentum standard deviations.
    pub span: f64,
}

impl Default for SmearGrid {
    fn default() -> Self {
        SmearGrid {
            points: 4097,
            span: 8.0,
        }
    }
}

/// Outcome density `P_𝒜(p)` of the ancilla momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct SmearedOutcome {
    pub grid: Vec<f64>,
    /// The requested density (with or without coherence terms).
    pub density: Vec<f64>,
    /// `Σ P(w_nm) f(p − λ w_nm)`
    pub diagonal: Vec<f64>,
    /// Coherence (`n ≠ n'`) contribution; zero when not requested.
    pub off_diagonal: Vec<f64>,
    /// Analytic bound on `sup |off_diagonal|`.
    pub bound: f64,
    pub integral: f64,
}

impl SmearedOutcome {
    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// `sup_p |full − diagonal|` on the grid.
    pub fn coherence_gap(&self) -> f64 {
        self.off_diagonal
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Integral of the density over `[center − half_width, center + half_width]`.
    pub fn window_mass(&self, center: f64, half_width: f64) -> f64 {
        window_integral(
            &self.grid,
            &self.density,
            center - half_width,
            center + half_width,
        )
    }

    /// Same as [`Self::window_mass`] but over the diagonal part only.
    pub fn diagonal_window_mass(&self, center: f64, half_width: f64) -> f64 {
        window_integral(
            &self.grid,
            &self.diagonal,
            center - half_width,
            center + half_width,
        )
    }
}

fn window_integral(grid: &[f64], ys: &[f64], lo: f64, hi: f64) -> f64 {
    let h = grid[1] - grid[0];
    let first = grid.partition_point(|&x| x < lo);
    let last = grid.partition_point(|&x| x <= hi);
    if last <= first {
        return 0.0;
    }
    simpson(&ys[first..last], h)
}

/// Composite Simpson rule on uniformly spaced samples; an even sample count
/// closes with a 3/8 panel.
pub fn simpson(ys: &[f64], h: f64) -> f64 {
    let n = ys.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (ys[0] + ys[1]),
        3 => h / 3.0 * (ys[0] + 4.0 * ys[1] + ys[2]),
        _ if n.is_multiple_of(2) => {
            let k = n - 4;
            let tail = 3.0 * h / 8.0 * (ys[k] + 3.0 * ys[k + 1] + 3.0 * ys[k + 2] + ys[k + 3]);
            simpson(&ys[..=k], h) + tail
        }
        _ => {
            let mut s = ys[0] + ys[n - 1];
            for (i, y) in ys[1..n - 1].iter().enumerate() {
                s += if i % 2 == 0 { 4.0 * y } else { 2.0 * y };
            }
            s * h / 3.0
        }
    }
}

/// Samples the outcome density of the ancilla momentum after the two
/// entangling gates. `flags` must have been built from the distribution of
/// `(state, pair, driving)`.
pub fn smeared_density(
    flags: &FlagStateSet,
    include_coherences: bool,
    state: &QuantumState,
    pair: &HamiltonianPair,
    driving: &DrivingUnitary,
    grid: SmearGrid,
) -> Result<SmearedOutcome> {
    let first = flags
        .flags
        .first()
        .ok_or_else(|| QwmError::invalid("flag states", "empty set"))?;
    if grid.span < 6.0 {
        return Err(QwmError::invalid(
            "smearing grid",
            format!(
                "span of {} widths does not cover the centres by ±6 widths",
                grid.span
            ),
        ));
    }
    if grid.points < 3 {
        return Err(QwmError::invalid("smearing grid", "need at least 3 points"));
    }
    let width = first.packet.momentum_spread();
    let (lo, hi) = flags
        .flags
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), f| {
            (a.min(f.packet.momentum), b.max(f.packet.momentum))
        });
    let (lo, hi) = (lo - grid.span * width, hi + grid.span * width);
    let h = (hi - lo) / (grid.points - 1) as f64;
    let coords: Vec<f64> = (0..grid.points).map(|i| lo + h * i as f64).collect();

    let diagonal: Vec<f64> = coords
        .iter()
        .map(|&p| {
            flags
                .flags
                .iter()
                .map(|f| f.weight * f.packet.momentum_density(p))
                .sum()
        })
        .collect();

    let lambda = flags.coupling.lambda;
    let bound = coherence_error_bound(state, pair, driving, lambda, first.packet.sigma)?;
    let off_diagonal: Vec<f64> = if include_coherences {
        let traces = coherence_traces(state, pair, driving)?;
        let terms: Vec<_> = traces
            .iter()
            .filter(|t| t.value.norm() > 0.0)
            .map(|t| {
                let a = flags.get(t.n, t.m).map(|f| f.packet);
                let b = flags.get(t.n_prime, t.m).map(|f| f.packet);
                match (a, b) {
                    (Some(a), Some(b)) => Ok((t.value, a, b)),
                    _ => Err(QwmError::invalid("flag states", "missing (n, m) outcome")),
                }
            })
            .collect::<Result<_>>()?;
        coords
            .iter()
            .map(|&p| {
                terms
                    .iter()
                    .map(|(v, a, b)| {
                        (v * a.momentum_amplitude(p) * b.momentum_amplitude(p).conj()).re
                    })
                    .sum()
            })
            .collect()
    } else {
        vec![0.0; coords.len()]
    };

    let density: Vec<f64> = diagonal
        .iter()
        .zip(&off_diagonal)
        .map(|(d, o)| d + o)
        .collect();
    let integral = simpson(&density, h);
    if (integral - 1.0).abs() > RESOLUTION_TOL {
        return Err(QwmError::Resolution {
            integral,
            tolerance: RESOLUTION_TOL,
        });
    }
    Ok(SmearedOutcome {
        grid: coords,
        density,
        diagonal,
        off_diagonal,
        bound,
        integral,
    })
}
