use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{analyze_image, exact_distribution, simulate_run, ExperimentConfig};
use crate::error::{QwmError, Result};
use crate::quantum::HamiltonianPair;
use crate::work::{delta_f_from_partition, jarzynski_average, mean_and_sem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Exact `P(w)`, no imaging.
    Exact,
    /// Full simulate + analyze pipeline.
    Simulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta_e: f64,
    pub rf_area: f64,
    pub rep: usize,
    pub seed: u64,
    pub g: Option<f64>,
    /// First `D² − 1` probabilities in `(n, m)` order.
    pub probability_vector: Vec<f64>,
    pub error: Option<String>,
}

/// Mean `G` over the repetitions at one `(β, area)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub beta_e: f64,
    pub rf_area: f64,
    pub mean: f64,
    pub sem: f64,
    pub used: usize,
}

/// Jarzynski estimate over all areas and repetitions at one `β`, next to
/// the partition-function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSummary {
    pub beta_e: f64,
    pub ji_mean: f64,
    pub ji_sem: f64,
    pub pf: f64,
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
    pub betas: Vec<BetaSummary>,
}

impl SweepTable {
    pub fn summary(&self, beta_e: f64, rf_area: f64) -> Option<&SweepSummary> {
        self.summaries
            .iter()
            .find(|s| s.beta_e == beta_e && s.rf_area == rf_area)
    }

    /// Probability vectors of the usable runs at `beta_e`.
    pub fn probability_vectors(&self, beta_e: f64) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter(|r| r.beta_e == beta_e && r.g.is_some())
            .map(|r| r.probability_vector.clone())
            .collect()
    }
}

fn run_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Runs every `(β, area, repetition)` and aggregates `G = −ln⟨e^{−βw}⟩`.
///
/// Per-run seeds are derived from `config.seed`. Failed runs are kept as
/// rows with an error message and left out of the averages.
pub fn jarzynski_sweep(
    config: &ExperimentConfig,
    rf_areas: &[f64],
    betas: &[f64],
    repetitions: usize,
    mode: SweepMode,
) -> Result<SweepTable> {
    if repetitions == 0 {
        return Err(QwmError::invalid("sweep", "repetitions must be at least 1"));
    }
    if rf_areas.is_empty() || betas.is_empty() {
        return Err(QwmError::invalid(
            "sweep",
            "needs at least one area and one beta",
        ));
    }
    config.validate()?;

    let jobs: Vec<(usize, usize, usize)> = (0..betas.len())
        .flat_map(|b| {
            (0..rf_areas.len()).flat_map(move |a| (0..repetitions).map(move |r| (b, a, r)))
        })
        .collect();

    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(b, a, rep))| {
            let seed = run_seed(config.seed, index as u64);
            let run = ExperimentConfig {
                beta_e: betas[b],
                rf_area: rf_areas[a],
                seed,
                ..config.clone()
            };
            let outcome = match mode {
                SweepMode::Exact => exact_distribution(&run),
                SweepMode::Simulated => simulate_run(&run)
                    .and_then(|img| analyze_image(&img, &run))
                    .map(|r| r.distribution),
            }
            .and_then(|d| Ok((jarzynski_average(&d, run.beta_e)?.g, d.probability_vector())));
            let (g, probability_vector, error) = match outcome {
                Ok((g, p)) => (Some(g), p, None),
                Err(e) => (None, Vec::new(), Some(e.to_string())),
            };
            SweepRow {
                beta_e: betas[b],
                rf_area: rf_areas[a],
                rep,
                seed,
                g,
                probability_vector,
                error,
            }
        })
        .collect();

    let pair = HamiltonianPair::two_level(config.energy_ratio)?;
    let mut summaries = Vec::new();
    let mut beta_rows = Vec::new();
    for &beta in betas {
        let all: Vec<f64> = rows
            .iter()
            .filter(|r| r.beta_e == beta)
            .filter_map(|r| r.g)
            .collect();
        for &area in rf_areas {
            let gs: Vec<f64> = rows
                .iter()
                .filter(|r| r.beta_e == beta && r.rf_area == area)
                .filter_map(|r| r.g)
                .collect();
            let (mean, sem) = if gs.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_and_sem(&gs)
            };
            summaries.push(SweepSummary {
                beta_e: beta,
                rf_area: area,
                mean,
                sem,
                used: gs.len(),
            });
        }
        let (ji_mean, ji_sem) = if all.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_and_sem(&all)
        };
        beta_rows.push(BetaSummary {
            beta_e: beta,
            ji_mean,
            ji_sem,
            pf: delta_f_from_partition(&pair, beta)?,
            used: all.len(),
        });
    }

    Ok(SweepTable {
        rows,
        summaries,
        betas: beta_rows,
    })
}
