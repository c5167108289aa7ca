use super::WorkDistribution;
use crate::error::{QwmError, Result};
use crate::quantum::{gibbs_populations, HamiltonianPair};

/// `⟨e^{−βw}⟩` and `G = −ln⟨e^{−βw}⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JarzynskiAverage {
    pub average: f64,
    pub g: f64,
}

pub fn jarzynski_average(dist: &WorkDistribution, beta: f64) -> Result<JarzynskiAverage> {
    if !beta.is_finite() {
        return Err(QwmError::Domain(format!("beta must be finite, got {beta}")));
    }
    let average: f64 = dist
        .entries()
        .iter()
        .map(|e| e.probability * (-beta * e.work).exp())
        .sum();
    if average <= 0.0 || !average.is_finite() {
        return Err(QwmError::Domain(format!(
            "exponential work average is {average}"
        )));
    }
    Ok(JarzynskiAverage {
        average,
        g: -average.ln(),
    })
}

/// `βΔF = ln(Z / Z̃)`.
pub fn delta_f_from_partition(pair: &HamiltonianPair, beta: f64) -> Result<f64> {
    let z = gibbs_populations(&pair.initial, beta)?;
    let zt = gibbs_populations(&pair.fin, beta)?;
    Ok(z.ln_z - zt.ln_z)
}

/// `βΔF` estimated from a set of measured work distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaFEstimate {
    /// `G` per input, `None` where the empirical average was not positive.
    pub per_point: Vec<Option<f64>>,
    pub mean: f64,
    /// Standard error of the mean across the usable points (0 for a single point).
    pub sem: f64,
    pub excluded: Vec<usize>,
}

impl DeltaFEstimate {
    pub fn used(&self) -> usize {
        self.per_point.len() - self.excluded.len()
    }
}

pub fn delta_f_from_samples(dists: &[WorkDistribution], beta: f64) -> Result<DeltaFEstimate> {
    if !beta.is_finite() {
        return Err(QwmError::Domain(format!("beta must be finite, got {beta}")));
    }
    let mut per_point = Vec::with_capacity(dists.len());
    let mut excluded = Vec::new();
    for (i, d) in dists.iter().enumerate() {
        match jarzynski_average(d, beta) {
            Ok(j) => per_point.push(Some(j.g)),
            Err(QwmError::Domain(_)) => {
                per_point.push(None);
                excluded.push(i);
            }
            Err(e) => return Err(e),
        }
    }
    let values: Vec<f64> = per_point.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(QwmError::InsufficientData { needed: 1, got: 0 });
    }
    let (mean, sem) = mean_and_sem(&values);
    Ok(DeltaFEstimate {
        per_point,
        mean,
        sem,
        excluded,
    })
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pseudo_thermal_state, rf_unitary, Spectrum};
    use crate::work::tpm_distribution;
    use approx::assert_abs_diff_eq;

    // Independent two-term partition sums for H = Eσ̂, H̃ = rEσ̂.
    fn oracle_beta_delta_f(beta: f64, ratio: f64) -> f64 {
        let z = (-beta).exp() + (-2.0 * beta).exp();
        let zt = (-beta * ratio).exp() + (-2.0 * beta * ratio).exp();
        (z / zt).ln()
    }

    #[test]
    fn point_mass_at_zero() {
        let pair = HamiltonianPair::new(
            Spectrum::diagonal(&[1.0]).unwrap(),
            Spectrum::diagonal(&[1.0]).unwrap(),
        )
        .unwrap();
        let d = WorkDistribution::empirical(&pair, &[1.0], &[0.0]).unwrap();
        let j = jarzynski_average(&d, 2.3).unwrap();
        assert_eq!(j.average, 1.0);
        assert_eq!(j.g, 0.0);
        assert!(jarzynski_average(&d, f64::NAN).is_err());
    }

    #[test]
    fn table_values_from_partition_functions() {
        let pair = HamiltonianPair::two_level(0.56).unwrap();
        for (beta, rounded) in [(0.58, -0.354), (1.11, -0.633), (1.75, -0.928)] {
            let v = delta_f_from_partition(&pair, beta).unwrap();
            assert_abs_diff_eq!(v, oracle_beta_delta_f(beta, 0.56), epsilon = 1e-13);
            assert_abs_diff_eq!(v, rounded, epsilon = 5e-4);
        }
    }

    #[test]
    fn jarzynski_holds_for_rf_drivings() {
        let pair = HamiltonianPair::two_level(0.56).unwrap();
        let rho = pseudo_thermal_state(0.58, &pair.initial, None).unwrap();
        for k in 0..10 {
            let u = rf_unitary(0.37 * k as f64, 0.2 * k as f64).unwrap();
            let d = tpm_distribution(&rho, &pair, &u).unwrap();
            let g = jarzynski_average(&d, 0.58).unwrap().g;
            assert_abs_diff_eq!(g, oracle_beta_delta_f(0.58, 0.56), epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_spectra_give_zero() {
        let s = Spectrum::diagonal(&[0.2, 1.7, 3.0]).unwrap();
        let pair = HamiltonianPair::new(s.clone(), s).unwrap();
        assert_abs_diff_eq!(
            delta_f_from_partition(&pair, 0.9).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn final_shift_lowers_delta_f() {
        let pair = HamiltonianPair::two_level(0.56).unwrap();
        let shifted = HamiltonianPair::new(pair.initial.clone(), pair.fin.shifted(0.8)).unwrap();
        let a = delta_f_from_partition(&pair, 1.11).unwrap();
        let b = delta_f_from_partition(&shifted, 1.11).unwrap();
        // ΔF grows by c, so ln(Z/Z̃) grows by βc.
        assert_abs_diff_eq!(b - a, 1.11 * 0.8, epsilon = 1e-12);
    }

    #[test]
    fn sem_of_constant_is_zero() {
        assert_eq!(mean_and_sem(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_and_sem(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_abs_diff_eq!(s, (1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }
}
