use serde::{Deserialize, Serialize};

use crate::error::{QwmError, Result};

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Mass of ⁸⁷Rb, kg.
pub const RB87_MASS: f64 = 1.443_160_648e-25;

/// Parameters of one atom-chip run. SI units throughout; `beta_e` (βE) and
/// `energy_ratio` (Ẽ/E) are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub beta_e: f64,
    pub energy_ratio: f64,
    pub atom_count: u64,
    /// RF pulse area of the intermediate driving, rad.
    pub rf_area: f64,
    pub rf_phase: f64,
    /// Prepare the pure pseudo-thermal state instead of the Gibbs mixture.
    pub coherent_preparation: bool,

    /// Initial distance below the chip, m.
    pub z0: f64,
    /// Release to first gradient pulse, s.
    pub t1: f64,
    pub tau: f64,
    /// Start of first pulse to start of second pulse, s.
    pub t2: f64,
    pub tau_tilde: f64,
    /// Start of second pulse to imaging, s.
    pub tof: f64,

    /// First-pulse gradient B′, T/m.
    pub gradient: f64,
    pub g_f: f64,
    /// Momentum kick per unit m_F of the first pulse; derived from the
    /// gradient when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_p: Option<f64>,
    /// Second-pulse kick per unit m_F; `−energy_ratio · delta_p` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_p_tilde: Option<f64>,
    /// Allowed mismatch between `−δp̃/δp` and `energy_ratio`.
    pub ratio_tolerance: f64,

    /// Initial packet width σ (position spread σ/√2), m.
    pub sigma: f64,
    pub mass: f64,
    pub gravity: f64,

    pub pixel_size: f64,
    /// Gaussian optical blur (standard deviation), m.
    pub blur: f64,
    pub poisson_noise: bool,
    /// Shot-to-shot scatter of z0, m.
    pub z0_jitter: f64,
    /// Relative shot-to-shot scatter common to both kicks.
    pub kick_common_jitter: f64,
    /// Relative shot-to-shot scatter of each kick separately.
    pub kick_jitter: f64,
    /// Disables every shot-to-shot and detection noise source.
    pub noiseless: bool,
    /// Image built from expected counts (the N → ∞ limit) instead of sampled atoms.
    pub expected_counts: bool,

    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            beta_e: 0.58,
            energy_ratio: 0.56,
            atom_count: 100_000,
            rf_area: std::f64::consts::FRAC_PI_2,
            rf_phase: 0.0,
            coherent_preparation: true,
            z0: 91e-6,
            t1: 2.4e-3,
            tau: 40e-6,
            t2: 3.1e-3,
            tau_tilde: 300e-6,
            tof: 18.2e-3,
            gradient: 9.5,
            g_f: 0.5,
            delta_p: None,
            delta_p_tilde: None,
            ratio_tolerance: 0.02,
            sigma: 1.5e-6,
            mass: RB87_MASS,
            gravity: 9.81,
            pixel_size: 1e-6,
            blur: 5e-6,
            poisson_noise: false,
            z0_jitter: 1.2e-6,
            kick_common_jitter: 0.01,
            kick_jitter: 1e-3,
            noiseless: false,
            expected_counts: false,
            seed: 0,
        }
    }
}

/// Effective (instantaneous) kick and imaging times, measured from release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kick1: f64,
    pub kick2: f64,
    pub image: f64,
}

impl Schedule {
    pub fn between_kicks(&self) -> f64 {
        self.kick2 - self.kick1
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| QwmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QwmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            QwmError::Config(msg) => QwmError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical serialisation.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain scalars")
    }

    /// `δp = μ_B g_F B′ τ` unless overridden.
    pub fn delta_p(&self) -> f64 {
        self.delta_p
            .unwrap_or(BOHR_MAGNETON * self.g_f * self.gradient * self.tau)
    }

    pub fn delta_p_tilde(&self) -> f64 {
        self.delta_p_tilde
            .unwrap_or(-self.energy_ratio * self.delta_p())
    }

    /// `−δp̃/δp`, the Ẽ/E realised by the kicks.
    pub fn kick_ratio(&self) -> f64 {
        -self.delta_p_tilde() / self.delta_p()
    }

    /// Kicks happen at pulse midpoints.
    pub fn schedule(&self) -> Schedule {
        Schedule {
            kick1: self.t1 + 0.5 * self.tau,
            kick2: self.t1 + self.t2 + 0.5 * self.tau_tilde,
            image: self.t1 + self.t2 + self.tof,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(QwmError::Config(msg));
        if !(self.beta_e.is_finite() && self.beta_e >= 0.0) {
            return err(format!(
                "beta_e must be finite and non-negative, got {}",
                self.beta_e
            ));
        }
        if !(self.energy_ratio.is_finite() && self.energy_ratio > 0.0) {
            return err(format!(
                "energy_ratio must be positive, got {}",
                self.energy_ratio
            ));
        }
        if self.atom_count == 0 {
            return err("atom_count must be positive".into());
        }
        for (name, v) in [
            ("z0", self.z0),
            ("t1", self.t1),
            ("tau", self.tau),
            ("t2", self.t2),
            ("tau_tilde", self.tau_tilde),
            ("tof", self.tof),
            ("blur", self.blur),
            ("z0_jitter", self.z0_jitter),
            ("kick_common_jitter", self.kick_common_jitter),
            ("kick_jitter", self.kick_jitter),
            ("ratio_tolerance", self.ratio_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("mass", self.mass),
            ("pixel_size", self.pixel_size),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.rf_area.is_finite() || !self.rf_phase.is_finite() || !self.gravity.is_finite() {
            return err("rf_area, rf_phase and gravity must be finite".into());
        }
        let (dp, dpt) = (self.delta_p(), self.delta_p_tilde());
        if !(dp.is_finite() && dp > 0.0) {
            return err(format!("first kick must be positive (along +z), got {dp}"));
        }
        if !(dpt.is_finite() && dpt < 0.0) {
            return err(format!("second kick must oppose the first, got {dpt}"));
        }
        let ratio = -dpt / dp;
        if (ratio - self.energy_ratio).abs() > self.ratio_tolerance {
            return err(format!(
                "kick ratio {ratio} differs from energy_ratio {} by more than {}",
                self.energy_ratio, self.ratio_tolerance
            ));
        }
        if self.t2 < self.tau {
            return err("second pulse starts before the first one ends".into());
        }
        Ok(())
    }
}
