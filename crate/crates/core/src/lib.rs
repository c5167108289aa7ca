//! Quantum work meter: two-point-measurement work statistics, a Gaussian
//! ancilla that records work in its momentum, and an atom-chip simulator
//! that infers `P(w)` and free-energy differences from cloud images.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ancilla;
pub mod chip;
pub mod error;
pub mod io;
pub mod quantum;
pub mod work;

pub use ancilla::{
    coherence_error_bound, flag_states, free_fall, smeared_density, Coupling, GaussianWavepacket,
    Sign, SmearGrid, SmearedOutcome,
};
pub use chip::{
    analyze_image, jarzynski_sweep, simulate_run, CloudImage, ExperimentConfig, RunResult,
    SweepMode, SweepTable,
};
pub use error::{QwmError, Result};
pub use quantum::{
    pseudo_thermal_state, random_unitary, rf_unitary, DrivingUnitary, HamiltonianPair,
    QuantumState, Spectrum,
};
pub use work::{
    delta_f_from_partition, delta_f_from_samples, jarzynski_average, manifold_fit, povm_elements,
    tpm_distribution, ManifoldFit, ManifoldOptions, WorkDistribution,
};
