use num_complex::Complex64;

use super::HBAR;
use crate::error::{QwmError, Result};
use crate::quantum::Spectrum;
use crate::work::WorkDistribution;

/// Minimum-uncertainty Gaussian packet, possibly spread by free evolution.
///
/// `sigma` fixes the packet at its waist: position spread `σ/√2`, momentum
/// window `f(p) = σ/(ħ√π) · exp(−σ²p²/ħ²)`. Kicks move the momentum centre
/// only; `spread_time` counts free evolution since the waist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWavepacket {
    pub position: f64,
    pub momentum: f64,
    pub sigma: f64,
    pub mass: f64,
    pub spread_time: f64,
    pub weight: Complex64,
}

impl GaussianWavepacket {
    pub fn new(position: f64, momentum: f64, sigma: f64, mass: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(QwmError::invalid(
                "wavepacket",
                format!("sigma must be positive, got {sigma}"),
            ));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(QwmError::invalid(
                "wavepacket",
                format!("mass must be positive, got {mass}"),
            ));
        }
        Ok(GaussianWavepacket {
            position,
            momentum,
            sigma,
            mass,
            spread_time: 0.0,
            weight: Complex64::new(1.0, 0.0),
        })
    }

    /// `Δz_t = (σ/√2) √(1 + (ħ t / (m σ²))²)`
    pub fn position_spread(&self) -> f64 {
        let r = HBAR * self.spread_time / (self.mass * self.sigma * self.sigma);
        self.sigma * std::f64::consts::FRAC_1_SQRT_2 * (1.0 + r * r).sqrt()
    }

    /// Momentum standard deviation `ħ / (σ√2)`; constant under kicks and falls.
    pub fn momentum_spread(&self) -> f64 {
        HBAR / (self.sigma * std::f64::consts::SQRT_2)
    }

    /// Window function `f(p − p̄)` (unit weight).
    pub fn momentum_density(&self, p: f64) -> f64 {
        let x = self.sigma * (p - self.momentum) / HBAR;
        self.sigma / (HBAR * std::f64::consts::PI.sqrt()) * (-x * x).exp()
    }

    /// Momentum-space amplitude `⟨p|φ⟩` up to a global phase, for force-free
    /// spreading from a waist at `z̄ − p̄ t / m`.
    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let norm = (self.sigma / (HBAR * std::f64::consts::PI.sqrt())).sqrt();
        let x = self.sigma * (p - self.momentum) / HBAR;
        let waist = self.position - self.momentum * self.spread_time / self.mass;
        let phase = -p * waist / HBAR - p * p * self.spread_time / (2.0 * self.mass * HBAR);
        Complex64::from_polar(norm * (-0.5 * x * x).exp(), phase)
    }
}

/// Translation in momentum by `kick`.
pub fn momentum_kick(packet: &GaussianWavepacket, kick: f64) -> GaussianWavepacket {
    GaussianWavepacket {
        momentum: packet.momentum + kick,
        ..*packet
    }
}

/// Ballistic fall for a time `t` under acceleration `g` along `+z`.
pub fn free_fall(packet: &GaussianWavepacket, t: f64, g: f64) -> Result<GaussianWavepacket> {
    if !(t >= 0.0) {
        return Err(QwmError::Domain(format!(
            "fall time must be non-negative, got {t}"
        )));
    }
    Ok(GaussianWavepacket {
        position: packet.position + packet.momentum * t / packet.mass + 0.5 * g * t * t,
        momentum: packet.momentum + packet.mass * g * t,
        spread_time: packet.spread_time + t,
        ..*packet
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Coupling `λ > 0` (momentum per unit energy) and the direction along
/// which work is recorded: flag `(n, m)` is displaced by `sign · λ · w_nm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub lambda: f64,
    pub sign: Sign,
}

impl Coupling {
    pub fn new(lambda: f64, sign: Sign) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(QwmError::invalid(
                "coupling",
                format!("lambda must be non-negative, got {lambda}"),
            ));
        }
        Ok(Coupling { lambda, sign })
    }

    pub fn displacement(&self, work: f64) -> f64 {
        self.sign.factor() * self.lambda * work
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagState {
    pub n: usize,
    pub m: usize,
    pub work: f64,
    pub weight: f64,
    pub packet: GaussianWavepacket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlagStateSet {
    pub flags: Vec<FlagState>,
    pub coupling: Coupling,
}

impl FlagStateSet {
    pub fn total_weight(&self) -> f64 {
        self.flags.iter().map(|f| f.weight).sum()
    }

    pub fn get(&self, n: usize, m: usize) -> Option<&FlagState> {
        self.flags.iter().find(|f| f.n == n && f.m == m)
    }

    /// Applies `op` to every packet.
    pub fn map_packets(
        &self,
        mut op: impl FnMut(&FlagState) -> Result<GaussianWavepacket>,
    ) -> Result<FlagStateSet> {
        let flags = self
            .flags
            .iter()
            .map(|f| {
                Ok(FlagState {
                    packet: op(f)?,
                    ..*f
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FlagStateSet {
            flags,
            coupling: self.coupling,
        })
    }
}

/// One displaced copy `D_nm|φ⟩` of `initial` per work outcome.
pub fn flag_states(
    dist: &WorkDistribution,
    initial: &GaussianWavepacket,
    coupling: Coupling,
) -> FlagStateSet {
    let flags = dist
        .entries()
        .iter()
        .map(|e| FlagState {
            n: e.n,
            m: e.m,
            work: e.work,
            weight: e.probability,
            packet: momentum_kick(initial, coupling.displacement(e.work)),
        })
        .collect();
    FlagStateSet { flags, coupling }
}

/// Extra position shift acquired because the atoms fall between the two
/// entangling gates.
#[derive(Debug, Clone, PartialEq)]
pub struct InterPulseCorrection {
    /// `λ t / m_a`: position shift per unit final energy.
    pub coefficient: f64,
    /// `coefficient · Ẽ_m` for each final level.
    pub displacements: Vec<f64>,
    /// The energy-dependent phase of the commuted gate never affects
    /// probabilities; it is not reconstructed.
    pub phase_is_irrelevant: bool,
}

pub fn inter_pulse_fall_correction(
    final_side: &Spectrum,
    lambda: f64,
    t_between: f64,
    mass: f64,
) -> Result<InterPulseCorrection> {
    if !(t_between >= 0.0) {
        return Err(QwmError::Domain(format!(
            "time between pulses must be non-negative, got {t_between}"
        )));
    }
    if !(mass > 0.0) {
        return Err(QwmError::Domain(format!(
            "mass must be positive, got {mass}"
        )));
    }
    let coefficient = lambda * t_between / mass;
    Ok(InterPulseCorrection {
        coefficient,
        displacements: final_side
            .energies()
            .iter()
            .map(|e| coefficient * e)
            .collect(),
        phase_is_irrelevant: true,
    })
}
