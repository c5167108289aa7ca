//! Two-point-measurement work statistics, their POVM realisation, Jarzynski
//! functionals and the geometry of the Jarzynski manifold.

mod distribution;
mod jarzynski;
mod manifold;
mod povm;

pub use distribution::{
    tpm_distribution, transition_matrix, TransitionMatrix, WorkDistribution, WorkEntry,
    UNDEFINED_POPULATION, WORK_MERGE_TOL,
};
pub(crate) use jarzynski::mean_and_sem;
pub use jarzynski::{
    delta_f_from_partition, delta_f_from_samples, jarzynski_average, DeltaFEstimate,
    JarzynskiAverage,
};
pub use manifold::{manifold_fit, ManifoldFit, ManifoldOptions};
pub use povm::{povm_elements, PovmElementSet};
