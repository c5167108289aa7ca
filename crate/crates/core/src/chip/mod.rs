//! Monte Carlo emulation of the atom-chip work meter: state preparation,
//! two gradient kicks around an RF driving, free fall, time-of-flight
//! imaging, cloud fitting and inference of `P(w)` and `βΔF`.

mod analyze;
mod config;
mod fit;
mod simulate;
mod sweep;

pub use analyze::{analyze_image, nominal_clouds, CloudFit, RunResult};
pub use config::{ExperimentConfig, Schedule, BOHR_MAGNETON, RB87_MASS};
pub use fit::{fit_gaussian, GaussianFit};
pub use simulate::{
    cloud_trajectories, exact_distribution, simulate_run, CloudImage, CloudTruth, ShotParameters,
    SEPARABILITY_WIDTHS,
};
pub use sweep::{jarzynski_sweep, BetaSummary, SweepMode, SweepRow, SweepSummary, SweepTable};
