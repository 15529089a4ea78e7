//! Verifiers and estimators: pathwise symplecticity, momentum maps, strong
//! convergence order, ensemble temperature and energy diagnostics.

pub mod convergence;
pub mod momentum;
pub mod report;
pub mod stats;
pub mod symplectic;
pub mod temperature;

pub use convergence::{estimate_strong_order, ConvergenceOptions, ConvergenceReport};
pub use momentum::{check_momentum, check_momentum_rigid, MomentumReport};
pub use report::InvariantRow;
pub use stats::{energy_series, linear_fit, running_average, LinearFit};
pub use symplectic::{check_symplectic, symplectic_defect, SymplecticityReport};
pub use temperature::{temperature_study, InitialCondition, TemperatureOptions, TemperatureSeries};
