//! Continuous-variable ancilla of the work meter: Gaussian flag states,
//! state-dependent momentum kicks, the smeared outcome density with its
//! coherence terms, and ballistic free fall.
//!
//! Kinematics are in SI units. The dimensionless energy scale `E` is mapped
//! to momentum through the coupling `λ` (momentum per unit `E`).

mod packet;
mod smear;

pub use packet::{
    flag_states, free_fall, inter_pulse_fall_correction, momentum_kick, Coupling, FlagState,
    FlagStateSet, GaussianWavepacket, InterPulseCorrection, Sign,
};
pub use smear::{
    coherence_error_bound, coherence_traces, simpson, smeared_density, CoherenceTrace, SmearGrid,
    SmearedOutcome,
};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
