//! Monitoring momentum maps of declared symmetries along trajectories.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::systems::mech::{MechSystem, PhaseState};
use crate::systems::rigid::{LieBodyState, RigidBodySystem};

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumReport {
    pub symmetry: String,
    /// Size of the momentum at the first state (norm for vector momenta).
    pub initial: f64,
    /// `max_k |J_k − J_0|`.
    pub max_drift: f64,
    /// `max_k |J_{k+1} − J_k|`.
    pub max_step_drift: f64,
}

impl MomentumReport {
    fn from_series<T>(symmetry: &str, series: &[T], dist: impl Fn(&T, &T) -> f64, size: impl Fn(&T) -> f64) -> Self {
        let first = &series[0];
        MomentumReport {
            symmetry: symmetry.to_string(),
            initial: size(first),
            max_drift: series.iter().map(|j| dist(j, first)).fold(0.0, f64::max),
            max_step_drift: series.windows(2).map(|w| dist(&w[1], &w[0])).fold(0.0, f64::max),
        }
    }
}

/// Drift of `J = pᵀ(Aq + b)` for the symmetry `name` declared on `sys`.
pub fn check_momentum(sys: &MechSystem, name: &str, states: &[PhaseState]) -> Result<MomentumReport> {
    let sym = sys
        .symmetry(name)
        .ok_or_else(|| Error::SymmetryNotDeclared(name.to_string()))?;
    if states.is_empty() {
        return Err(Error::invalid("trajectory", "no states to check"));
    }
    let series: Vec<f64> = states.iter().map(|s| sym.momentum(&s.q, &s.p)).collect();
    Ok(MomentumReport::from_series(
        name,
        &series,
        |a, b| (a - b).abs(),
        |a| a.abs(),
    ))
}

/// Drift of total linear momentum `Σᵢ pᵢ` of a rigid-body system. The symmetry
/// is `"translation"` and must hold for every potential and noise field.
pub fn check_momentum_rigid(sys: &RigidBodySystem, name: &str, states: &[Vec<LieBodyState>]) -> Result<MomentumReport> {
    if name != "translation" || !sys.translation_invariant() {
        return Err(Error::SymmetryNotDeclared(name.to_string()));
    }
    if states.is_empty() {
        return Err(Error::invalid("trajectory", "no states to check"));
    }
    let series: Vec<Vec3> = states
        .iter()
        .map(|s| RigidBodySystem::total_linear_momentum(s))
        .collect();
    Ok(MomentumReport::from_series(
        name,
        &series,
        |a, b| (a - b).norm(),
        |a| a.norm(),
    ))
}
