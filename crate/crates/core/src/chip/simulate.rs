use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::ExperimentConfig;
use crate::ancilla::{
    flag_states, free_fall, inter_pulse_fall_correction, Coupling, GaussianWavepacket, Sign,
};
use crate::error::{QwmError, Result};
use crate::quantum::{pseudo_thermal_state, rf_unitary, HamiltonianPair};
use crate::work::{tpm_distribution, WorkDistribution};

/// Populated clouds closer than this many widths trigger the overlap warning.
pub const SEPARABILITY_WIDTHS: f64 = 8.0;

const SHOT_STREAM: u64 = u64::MAX;
const DETECTION_STREAM: u64 = u64::MAX - 1;
const ATOMS_PER_TASK: u64 = 4096;

/// Realised per-shot parameters after shot-to-shot scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotParameters {
    pub z0: f64,
    pub delta_p: f64,
    pub delta_p_tilde: f64,
}

impl ShotParameters {
    pub fn nominal(config: &ExperimentConfig) -> Self {
        ShotParameters {
            z0: config.z0,
            delta_p: config.delta_p(),
            delta_p_tilde: config.delta_p_tilde(),
        }
    }

    fn draw(config: &ExperimentConfig, key: [u8; 32]) -> Self {
        let nominal = Self::nominal(config);
        if config.noiseless {
            return nominal;
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(SHOT_STREAM);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let common = 1.0 + config.kick_common_jitter * normal();
        let first = 1.0 + config.kick_jitter * normal();
        let second = 1.0 + config.kick_jitter * normal();
        let z0 = config.z0 + config.z0_jitter * normal();
        ShotParameters {
            z0,
            delta_p: nominal.delta_p * common * first,
            delta_p_tilde: nominal.delta_p_tilde * common * second,
        }
    }
}

/// Ground truth for one `(n, m)` branch at imaging time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudTruth {
    pub n: usize,
    pub m: usize,
    pub probability: f64,
    /// Mean position at imaging, m (+z along gravity).
    pub center: f64,
    /// Packet spread including optical blur, m.
    pub width: f64,
}

/// 1-D optical-density profile along `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudImage {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<f64>,
    pub total: f64,
    pub overlap_warning: bool,
    /// Branch trajectories used to generate the image; empty for loaded images.
    pub truth: Vec<CloudTruth>,
}

impl CloudImage {
    /// Image from bin centres on a uniform grid.
    pub fn from_profile(centers: &[f64], counts: Vec<f64>) -> Result<Self> {
        if centers.len() < 3 || centers.len() != counts.len() {
            return Err(QwmError::Parse(
                "image needs at least 3 bins with one value each".into(),
            ));
        }
        let h = (centers[centers.len() - 1] - centers[0]) / (centers.len() - 1) as f64;
        if !(h > 0.0) {
            return Err(QwmError::Parse("bin centres must increase".into()));
        }
        for (i, c) in centers.iter().enumerate() {
            if (c - (centers[0] + h * i as f64)).abs() > 1e-6 * h {
                return Err(QwmError::Parse(format!("bin {i} is off the uniform grid")));
            }
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(QwmError::Parse(
                "optical density must be finite and non-negative".into(),
            ));
        }
        let lo = centers[0] - 0.5 * h;
        let bin_edges = (0..=centers.len()).map(|i| lo + h * i as f64).collect();
        let total = counts.iter().sum();
        Ok(CloudImage {
            bin_edges,
            counts,
            total,
            overlap_warning: false,
            truth: Vec::new(),
        })
    }

    pub fn pixel(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }
}

/// Exact work distribution for the configured preparation and RF driving.
pub fn exact_distribution(config: &ExperimentConfig) -> Result<WorkDistribution> {
    let pair = HamiltonianPair::two_level(config.energy_ratio)?;
    let phase = config.coherent_preparation.then_some(0.0);
    let state = pseudo_thermal_state(config.beta_e, &pair.initial, phase)?;
    let driving = rf_unitary(config.rf_area, config.rf_phase)?;
    Ok(tpm_distribution(&state, &pair, &driving)?.with_beta(config.beta_e))
}

/// Imaging-time centre and width of every branch, propagated as flag
/// states: both kicks applied at the first pulse, a fall to the imaging
/// time, plus the shift from falling between the pulses.
pub fn cloud_trajectories(
    config: &ExperimentConfig,
    shot: &ShotParameters,
    dist: &WorkDistribution,
) -> Result<Vec<CloudTruth>> {
    let schedule = config.schedule();
    // Energy unit E ↔ momentum δp; the kicks realise Ẽ/E = −δp̃/δp.
    let ratio = -shot.delta_p_tilde / shot.delta_p;
    let kinematic = HamiltonianPair::two_level(ratio)?;
    let works: Vec<f64> = dist
        .entries()
        .iter()
        .map(|e| kinematic.fin.energies()[e.m] - kinematic.initial.energies()[e.n])
        .collect();
    let recorded = WorkDistribution::empirical(&kinematic, &dist.probabilities(), &works)?;

    let released = GaussianWavepacket::new(shot.z0, 0.0, config.sigma, config.mass)?;
    let at_first_pulse = free_fall(&released, schedule.kick1, config.gravity)?;
    // Larger m_F is kicked further along +z, i.e. towards negative work.
    let coupling = Coupling::new(shot.delta_p, Sign::Negative)?;
    let flags = flag_states(&recorded, &at_first_pulse, coupling);
    let fallen = flags
        .map_packets(|f| free_fall(&f.packet, schedule.image - schedule.kick1, config.gravity))?;
    let correction = inter_pulse_fall_correction(
        &kinematic.fin,
        shot.delta_p,
        schedule.between_kicks(),
        config.mass,
    )?;

    Ok(fallen
        .flags
        .iter()
        .map(|f| CloudTruth {
            n: f.n,
            m: f.m,
            probability: f.weight,
            center: f.packet.position + correction.displacements[f.m],
            width: f.packet.position_spread().hypot(config.blur),
        })
        .collect())
}

fn master_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn std_normal_cdf_diff(a: f64, b: f64) -> f64 {
    // Φ(b) − Φ(a) without cancellation in either tail
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        1.0 - 0.5 * (erfc(-a * s) + erfc(b * s))
    }
}

/// Simulates one shot of the experiment and returns the final image.
///
/// Every atom draws its branch from the exact `P(w_nm)` and its position
/// from the Gaussian of that branch using its own random stream, so the
/// image depends on the seed only, not on the thread count.
pub fn simulate_run(config: &ExperimentConfig) -> Result<CloudImage> {
    config.validate()?;
    let dist = exact_distribution(config)?;
    let key = master_key(config.seed);
    let shot = ShotParameters::draw(config, key);
    let truth = cloud_trajectories(config, &shot, &dist)?;

    let pixel = config.pixel_size;
    let margin = 10.0 * truth.iter().map(|c| c.width).fold(0.0, f64::max);
    let lo_c = truth.iter().map(|c| c.center).fold(f64::INFINITY, f64::min);
    let hi_c = truth
        .iter()
        .map(|c| c.center)
        .fold(f64::NEG_INFINITY, f64::max);
    let first = ((lo_c - margin) / pixel).floor();
    let bins = (((hi_c + margin) / pixel).ceil() - first).max(1.0) as usize;
    let lo = first * pixel;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| (first + i as f64) * pixel).collect();
    let n_atoms = config.atom_count;

    let mut counts: Vec<f64> = if config.expected_counts {
        bin_edges
            .windows(2)
            .map(|e| {
                truth
                    .iter()
                    .map(|c| {
                        c.probability
                            * std_normal_cdf_diff(
                                (e[0] - c.center) / c.width,
                                (e[1] - c.center) / c.width,
                            )
                    })
                    .sum::<f64>()
                    * n_atoms as f64
            })
            .collect()
    } else {
        let cumulative: Vec<f64> = truth
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.probability;
                Some(*acc)
            })
            .collect();
        let tasks = n_atoms.div_ceil(ATOMS_PER_TASK);
        let hist = (0..tasks)
            .into_par_iter()
            .map(|task| {
                let mut local = vec![0u64; bins];
                let start = task * ATOMS_PER_TASK;
                let end = (start + ATOMS_PER_TASK).min(n_atoms);
                for atom in start..end {
                    let mut rng = ChaCha8Rng::from_seed(key);
                    rng.set_stream(atom);
                    let u: f64 = rng.random();
                    let branch = cumulative
                        .iter()
                        .position(|&c| u < c)
                        .unwrap_or(truth.len() - 1);
                    let cloud = &truth[branch];
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    // packet spread and optical blur combined in one draw
                    let z = cloud.center + cloud.width * xi;
                    let idx = ((z - lo) / pixel).floor();
                    if idx >= 0.0 && (idx as usize) < bins {
                        local[idx as usize] += 1;
                    }
                }
                local
            })
            .reduce(
                || vec![0u64; bins],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        hist.into_iter().map(|c| c as f64).collect()
    };

    if config.poisson_noise && !config.noiseless {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(DETECTION_STREAM);
        for c in counts.iter_mut().filter(|c| **c > 0.0) {
            *c = Poisson::new(*c)
                .map_err(|e| QwmError::Domain(e.to_string()))?
                .sample(&mut rng);
        }
    }

    let mut populated: Vec<&CloudTruth> = truth.iter().filter(|c| c.probability > 0.0).collect();
    populated.sort_by(|a, b| a.center.total_cmp(&b.center));
    let overlap_warning = populated
        .windows(2)
        .any(|w| w[1].center - w[0].center < SEPARABILITY_WIDTHS * w[0].width.max(w[1].width));

    let total = counts.iter().sum();
    Ok(CloudImage {
        bin_edges,
        counts,
        total,
        overlap_warning,
        truth,
    })
}
