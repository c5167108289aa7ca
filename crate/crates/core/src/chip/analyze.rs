use nalgebra::{DMatrix, DVector};

use super::simulate::{
    cloud_trajectories, exact_distribution, CloudImage, CloudTruth, ShotParameters,
};
use super::{fit_gaussian, ExperimentConfig};
use crate::ancilla::inter_pulse_fall_correction;
use crate::error::{QwmError, Result};
use crate::quantum::HamiltonianPair;
use crate::work::WorkDistribution;

/// Window half-width for atom counting, in fitted widths.
const WINDOW_WIDTHS: f64 = 4.0;
/// Half-width of the region used for the Gaussian fit, in expected widths.
const FIT_WIDTHS: f64 = 3.0;
/// Peaks below this fraction of the tallest smoothed peak are ignored.
const PEAK_FLOOR: f64 = 1e-3;
/// Minimum smoothed height of a peak, in counts per bin.
const PEAK_MIN_COUNTS: f64 = 2.0;

/// One detected and labelled cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudFit {
    pub n: usize,
    pub m: usize,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub fraction: f64,
    /// Mean physical momentum transferred by both kicks, kg·m/s.
    pub momentum_shift: f64,
    /// Inferred work in units of `E`.
    pub work: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub clouds: Vec<CloudFit>,
    pub distribution: WorkDistribution,
    /// `−δp̃/δp` from the fitted cloud positions, i.e. `Ẽ/E`.
    pub calibrated_ratio: f64,
    pub delta_p: f64,
    pub delta_p_tilde: f64,
    /// Fitted common offset `z₀ + gT²/2`.
    pub base: f64,
    /// Whether the kicks were calibrated from the image itself.
    pub self_calibrated: bool,
    pub missing: Vec<(usize, usize)>,
    pub diagnostics: Vec<String>,
}

impl RunResult {
    pub fn fractions_sum(&self) -> f64 {
        self.clouds.iter().map(|c| c.fraction).sum()
    }
}

/// Predicted clouds for the nominal (noise-free) schedule.
pub fn nominal_clouds(config: &ExperimentConfig) -> Result<Vec<CloudTruth>> {
    let dist = exact_distribution(config)?;
    cloud_trajectories(config, &ShotParameters::nominal(config), &dist)
}

fn smooth(ys: &[f64], sigma_bins: f64) -> Vec<f64> {
    let half = (4.0 * sigma_bins).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma_bins * sigma_bins)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = ys.len() as isize;
    (0..n)
        .map(|i| {
            (-half..=half)
                .filter(|k| (0..n).contains(&(i + k)))
                .map(|k| ys[(i + k) as usize] * kernel[(k + half) as usize])
                .sum::<f64>()
                / norm
        })
        .collect()
}

fn find_peaks(
    smoothed: &[f64],
    centers: &[f64],
    min_separation: f64,
    max_peaks: usize,
) -> Vec<usize> {
    let top = smoothed.iter().copied().fold(0.0, f64::max);
    let floor = (PEAK_FLOOR * top).max(PEAK_MIN_COUNTS.min(0.5 * top));
    let mut candidates: Vec<usize> = (1..smoothed.len().saturating_sub(1))
        .filter(|&i| {
            smoothed[i] > smoothed[i - 1] && smoothed[i] >= smoothed[i + 1] && smoothed[i] >= floor
        })
        .collect();
    candidates.sort_by(|&a, &b| smoothed[b].total_cmp(&smoothed[a]));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.len() == max_peaks {
            break;
        }
        if kept
            .iter()
            .all(|&k| (centers[k] - centers[c]).abs() >= min_separation)
        {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Sum of `counts` over `[lo, hi]`, weighting partially covered bins by overlap.
fn window_sum(image: &CloudImage, lo: f64, hi: f64) -> f64 {
    let h = image.pixel();
    image
        .bin_edges
        .windows(2)
        .zip(&image.counts)
        .map(|(e, c)| {
            let overlap = (e[1].min(hi) - e[0].max(lo)).max(0.0);
            c * overlap / h
        })
        .sum()
}

/// Assigns each peak the nearest free predicted cloud.
fn label_peaks(peaks: &[f64], predicted: &[CloudTruth]) -> Vec<Option<usize>> {
    let mut spacing = f64::INFINITY;
    for (i, a) in predicted.iter().enumerate() {
        for b in &predicted[i + 1..] {
            spacing = spacing.min((a.center - b.center).abs());
        }
    }
    let reach = if spacing.is_finite() {
        0.5 * spacing
    } else {
        f64::INFINITY
    };
    let mut pairs: Vec<(f64, usize, usize)> = peaks
        .iter()
        .enumerate()
        .flat_map(|(i, z)| {
            predicted
                .iter()
                .enumerate()
                .map(move |(k, c)| ((z - c.center).abs(), i, k))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut labels = vec![None; peaks.len()];
    let mut taken = vec![false; predicted.len()];
    for (d, i, k) in pairs {
        if d < reach && labels[i].is_none() && !taken[k] {
            labels[i] = Some(k);
            taken[k] = true;
        }
    }
    labels
}

/// Detects, fits and labels the clouds of `image`, then inverts the
/// ballistic trajectories to momentum shifts and work values.
///
/// With three or more clouds the base offset and both kick strengths are
/// fitted from the cloud positions; otherwise the nominal base and kick
/// ratio are assumed and only a common kick scale is fitted.
pub fn analyze_image(image: &CloudImage, config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    if image.counts.len() < 3 || image.bin_edges.len() != image.counts.len() + 1 {
        return Err(QwmError::invalid(
            "image",
            "needs at least 3 bins and matching edges",
        ));
    }
    if !(image.counts.iter().sum::<f64>() > 0.0) {
        return Err(QwmError::invalid("image", "no signal"));
    }
    let mut diagnostics = Vec::new();
    if image.overlap_warning {
        diagnostics.push("clouds overlap beyond the separability threshold".to_string());
    }
    let predicted = nominal_clouds(config)?;
    let expected_width = predicted.iter().map(|c| c.width).fold(0.0, f64::max);
    let pixel = image.pixel();
    let centers = image.bin_centers();

    let smoothed = smooth(&image.counts, (0.5 * expected_width / pixel).max(1.0));
    let peaks = find_peaks(
        &smoothed,
        &centers,
        WINDOW_WIDTHS * expected_width,
        predicted.len(),
    );
    if peaks.is_empty() {
        return Err(QwmError::invalid("image", "no peaks found"));
    }

    // Fit region per peak, clipped at midpoints between neighbouring peaks.
    let peak_z: Vec<f64> = peaks.iter().map(|&i| centers[i]).collect();
    let mut fits = Vec::with_capacity(peaks.len());
    for (k, &z) in peak_z.iter().enumerate() {
        let left = if k > 0 {
            0.5 * (peak_z[k - 1] + z)
        } else {
            f64::NEG_INFINITY
        };
        let right = if k + 1 < peak_z.len() {
            0.5 * (peak_z[k + 1] + z)
        } else {
            f64::INFINITY
        };
        let lo = left.max(z - FIT_WIDTHS * expected_width);
        let hi = right.min(z + FIT_WIDTHS * expected_width);
        let (xs, ys): (Vec<f64>, Vec<f64>) = centers
            .iter()
            .zip(&image.counts)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, y)| (*x, *y))
            .unzip();
        let f = fit_gaussian(
            &xs,
            &ys,
            (
                image.counts[peaks[k]].max(smoothed[peaks[k]]),
                z,
                expected_width,
            ),
        );
        if !f.converged {
            diagnostics.push(format!(
                "fit did not converge for the peak at z = {z:.6e} m"
            ));
        }
        fits.push(f);
    }

    // Counting windows: ±4 fitted widths, split at midpoints between fitted centres.
    let fitted_z: Vec<f64> = fits
        .iter()
        .zip(&peak_z)
        .map(|(f, z)| if f.converged { f.center } else { *z })
        .collect();
    let widths: Vec<f64> = fits
        .iter()
        .map(|f| if f.converged { f.width } else { expected_width })
        .collect();
    let sums: Vec<f64> = (0..fits.len())
        .map(|k| {
            let mut lo = fitted_z[k] - WINDOW_WIDTHS * widths[k];
            let mut hi = fitted_z[k] + WINDOW_WIDTHS * widths[k];
            if k > 0 {
                lo = lo.max(0.5 * (fitted_z[k - 1] + fitted_z[k]));
            }
            if k + 1 < fits.len() {
                hi = hi.min(0.5 * (fitted_z[k] + fitted_z[k + 1]));
            }
            window_sum(image, lo, hi)
        })
        .collect();
    let counted: f64 = sums.iter().sum();
    if !(counted > 0.0) {
        return Err(QwmError::invalid(
            "image",
            "no signal inside the cloud windows",
        ));
    }

    let labels = label_peaks(&fitted_z, &predicted);
    let mut labelled: Vec<(usize, usize)> = Vec::new(); // (peak, predicted)
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(k) => labelled.push((i, *k)),
            None => diagnostics.push(format!(
                "peak at z = {:.6e} m matches no predicted cloud",
                fitted_z[i]
            )),
        }
    }
    if labelled.is_empty() {
        return Err(QwmError::invalid(
            "image",
            "no peak matches a predicted cloud",
        ));
    }

    let schedule = config.schedule();
    let mass = config.mass;
    let lever1 = schedule.image - schedule.kick1;
    let lever2 = schedule.image - schedule.kick2;
    let nominal = ShotParameters::nominal(config);
    let nominal_base = config.z0 + 0.5 * config.gravity * schedule.image.powi(2);

    let design = |k: usize| ((predicted[k].n + 1) as f64, (predicted[k].m + 1) as f64);
    let rows = labelled.len();
    let mut a_mat = DMatrix::zeros(rows, 3);
    let mut z_vec = DVector::zeros(rows);
    for (r, &(i, k)) in labelled.iter().enumerate() {
        let (dn, dm) = design(k);
        a_mat[(r, 0)] = 1.0;
        a_mat[(r, 1)] = dn;
        a_mat[(r, 2)] = dm;
        z_vec[r] = fitted_z[i];
    }
    let full_rank = rows >= 3 && a_mat.clone().svd(false, false).rank(1e-9) == 3;

    let (base, delta_p, delta_p_tilde, self_calibrated) = if full_rank {
        let svd = a_mat.svd(true, true);
        let x = svd
            .solve(&z_vec, 1e-12)
            .map_err(|e| QwmError::Domain(e.to_string()))?;
        (x[0], x[1] * mass / lever1, x[2] * mass / lever2, true)
    } else {
        let shape: Vec<f64> = labelled
            .iter()
            .map(|&(_, k)| {
                let (dn, dm) = design(k);
                (dn * nominal.delta_p * lever1 + dm * nominal.delta_p_tilde * lever2) / mass
            })
            .collect();
        let num: f64 = labelled
            .iter()
            .zip(&shape)
            .map(|(&(i, _), s)| (fitted_z[i] - nominal_base) * s)
            .sum();
        let den: f64 = shape.iter().map(|s| s * s).sum();
        let scale = num / den;
        diagnostics.push(format!(
            "only {rows} labelled clouds; kick ratio fixed at nominal, common scale {scale:.6}"
        ));
        (
            nominal_base,
            scale * nominal.delta_p,
            scale * nominal.delta_p_tilde,
            false,
        )
    };
    if !(delta_p > 0.0) || !(delta_p_tilde < 0.0) {
        return Err(QwmError::Domain(format!(
            "calibrated kicks have wrong signs: δp = {delta_p:e}, δp̃ = {delta_p_tilde:e}"
        )));
    }
    let calibrated_ratio = -delta_p_tilde / delta_p;
    if ((calibrated_ratio - config.energy_ratio) / config.energy_ratio).abs()
        > config.ratio_tolerance
    {
        diagnostics.push(format!(
            "calibrated Ẽ/E = {calibrated_ratio:.5} differs from the configured {}",
            config.energy_ratio
        ));
    }

    let pair = HamiltonianPair::two_level(calibrated_ratio)?;
    let correction =
        inter_pulse_fall_correction(&pair.fin, delta_p, schedule.between_kicks(), mass)?;

    let mut clouds: Vec<CloudFit> = labelled
        .iter()
        .map(|&(i, k)| {
            let CloudTruth { n, m, .. } = predicted[k];
            let momentum_shift = mass * (fitted_z[i] - base - correction.displacements[m]) / lever1;
            CloudFit {
                n,
                m,
                center: fitted_z[i],
                width: widths[i],
                amplitude: fits[i].amplitude,
                fraction: sums[i] / counted,
                momentum_shift,
                work: -momentum_shift / delta_p,
                converged: fits[i].converged,
            }
        })
        .collect();
    clouds.sort_by_key(|c| (c.n, c.m));

    let levels = pair.fin.levels();
    let mut weights = vec![0.0; predicted.len()];
    let mut works: Vec<f64> = (0..predicted.len())
        .map(|k| pair.fin.energies()[k % levels] - pair.initial.energies()[k / levels])
        .collect();
    for c in &clouds {
        weights[c.n * levels + c.m] = c.fraction;
        works[c.n * levels + c.m] = c.work;
    }
    let missing: Vec<(usize, usize)> = predicted
        .iter()
        .filter(|p| !clouds.iter().any(|c| c.n == p.n && c.m == p.m))
        .map(|p| (p.n, p.m))
        .collect();
    let distribution =
        WorkDistribution::empirical(&pair, &weights, &works)?.with_beta(config.beta_e);

    Ok(RunResult {
        clouds,
        distribution,
        calibrated_ratio,
        delta_p,
        delta_p_tilde,
        base,
        self_calibrated,
        missing,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::simulate_run;

    fn expected_config() -> ExperimentConfig {
        ExperimentConfig {
            noiseless: true,
            expected_counts: true,
            ..Default::default()
        }
    }

    #[test]
    fn limit_mode_recovers_exact_distribution() {
        let cfg = expected_config();
        let image = simulate_run(&cfg).unwrap();
        let result = analyze_image(&image, &cfg).unwrap();
        let exact = exact_distribution(&cfg).unwrap();
        assert!(result.missing.is_empty());
        assert!(result.self_calibrated);
        for e in exact.entries() {
            let got = result.distribution.get(e.n, e.m).unwrap();
            assert!(
                (got.probability - e.probability).abs() < 1e-6,
                "{e:?} {got:?}"
            );
            assert!((got.work - e.work).abs() < 1e-6, "{e:?} {got:?}");
        }
        assert!((result.calibrated_ratio - 0.56).abs() < 1e-6);
    }

    #[test]
    fn single_cloud_gives_unit_probability() {
        let cfg = ExperimentConfig {
            rf_area: 0.0,
            beta_e: 60.0,
            ..expected_config()
        };
        let result = analyze_image(&simulate_run(&cfg).unwrap(), &cfg).unwrap();
        assert_eq!(result.clouds.len(), 1);
        assert_eq!((result.clouds[0].n, result.clouds[0].m), (0, 0));
        assert!((result.clouds[0].fraction - 1.0).abs() < 1e-12);
        assert_eq!(result.missing.len(), 3);
        assert!(!result.self_calibrated);
    }

    #[test]
    fn smoothing_preserves_mass() {
        let ys: Vec<f64> = (0..100).map(|i| if i == 50 { 1.0 } else { 0.0 }).collect();
        let s = smooth(&ys, 3.0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
