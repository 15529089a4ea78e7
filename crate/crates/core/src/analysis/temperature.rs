//! Ensemble kinetic-energy statistics for Langevin-type models at a known
//! bath temperature.

use crate::ensemble::{self, Execution};
use crate::error::{Error, Result};
use crate::integrators::{simulate_steps, Method, StepperConfig};
use crate::noise::{derive_seed, keyed_rng, BrownianPath, NoiseAudit};
use crate::systems::catalog::thermal_state;
use crate::systems::mech::{MechSystem, PhaseState};

use super::stats::{linear_fit, mean};

const DOMAIN_INITIAL: u64 = 0x494e_4954;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Maxwell momenta and a Metropolis configuration at the bath temperature,
    /// drawn independently per member (shared across methods).
    Thermal,
    Fixed(PhaseState),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureOptions {
    pub horizon: f64,
    pub h: f64,
    pub paths: usize,
    pub seed: u64,
    /// Store the ensemble mean every this many steps.
    pub record_every: usize,
    pub execution: Execution,
    pub initial: InitialCondition,
}

impl Default for TemperatureOptions {
    fn default() -> Self {
        TemperatureOptions {
            horizon: 100.0,
            h: 0.1,
            paths: 500,
            seed: 0,
            record_every: 1,
            execution: Execution::default(),
            initial: InitialCondition::Thermal,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureSeries {
    pub method: Method,
    pub times: Vec<f64>,
    /// Ensemble mean of the kinetic energy at each recorded time.
    pub mean_kinetic: Vec<f64>,
    /// Equipartition value `dof · k_BT / 2`.
    pub target: f64,
    pub dof: usize,
    /// Mean of `mean_kinetic` over `[T/2, T]`.
    pub time_average: f64,
    /// Least-squares slope of `mean_kinetic` over `[T/2, T]`, per unit time.
    pub trend: f64,
    /// Digest of the noise consumed by the first ensemble member.
    pub noise_digest: u64,
}

impl TemperatureSeries {
    pub fn relative_error(&self) -> f64 {
        (self.time_average - self.target) / self.target
    }

    /// `2 · mean_kinetic / dof`, the instantaneous temperature.
    pub fn instantaneous_temperature(&self) -> Vec<f64> {
        self.mean_kinetic.iter().map(|k| 2.0 * k / self.dof as f64).collect()
    }
}

struct Member {
    kinetic: Vec<Vec<f64>>,
    audits: Vec<NoiseAudit>,
}

/// Run every method in `methods` on the same `paths` Brownian paths and the
/// same initial states, recording ensemble-mean kinetic energy.
pub fn temperature_study(
    sys: &MechSystem,
    methods: &[Method],
    opts: &TemperatureOptions,
) -> Result<Vec<TemperatureSeries>> {
    let bath = sys
        .bath()
        .ok_or_else(|| Error::Unsupported(format!("model `{}` has no heat bath", sys.name())))?;
    if !(bath.temperature > 0.0) {
        return Err(Error::InvalidTemperature(bath.temperature));
    }
    if methods.is_empty() || opts.paths == 0 {
        return Err(Error::invalid("temperature", "need at least one method and one path"));
    }
    let cfg = StepperConfig::new(opts.h)?;
    let ratio = opts.horizon / opts.h;
    let n_steps = ratio.round() as usize;
    if !(opts.horizon > 0.0) || (ratio - n_steps as f64).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(
            "h",
            format!("step {} does not divide the horizon {}", opts.h, opts.horizon),
        ));
    }
    let stride = opts.record_every.max(1);
    let channels = sys.noise_channels().max(1);

    let members = ensemble::try_map(opts.execution, opts.paths, |m| -> Result<Member> {
        let seed = derive_seed(opts.seed, m as u64);
        let path = BrownianPath::covering(seed, opts.h, n_steps, channels)?;
        let state0 = match &opts.initial {
            InitialCondition::Thermal => thermal_state(
                sys,
                bath.temperature,
                &mut keyed_rng(opts.seed, DOMAIN_INITIAL, m as u64, 0),
            ),
            InitialCondition::Fixed(s) => s.clone(),
        };
        let mut kinetic = Vec::with_capacity(methods.len());
        let mut audits = Vec::with_capacity(methods.len());
        for &method in methods {
            let traj = simulate_steps(sys, method, state0.clone(), &path, n_steps, &cfg, stride)?;
            kinetic.push(traj.states.iter().map(|s| sys.kinetic_energy(&s.p)).collect());
            audits.push(traj.audit);
        }
        Ok(Member { kinetic, audits })
    })?;

    for (m, member) in members.iter().enumerate() {
        if member.audits.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::invalid(
                "noise",
                format!("methods consumed different increments on member {m}"),
            ));
        }
    }

    let times: Vec<f64> = (0..=n_steps)
        .filter(|k| k % stride == 0 || *k == n_steps)
        .map(|k| k as f64 * opts.h)
        .collect();
    let dof = sys.dim();
    let target = 0.5 * dof as f64 * bath.temperature;
    let half = opts.horizon / 2.0;

    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let mut sums = vec![0.0; times.len()];
            for member in &members {
                for (s, k) in sums.iter_mut().zip(&member.kinetic[i]) {
                    *s += k;
                }
            }
            let mean_kinetic: Vec<f64> = sums.iter().map(|s| s / opts.paths as f64).collect();
            let (tail_t, tail_k): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(&mean_kinetic)
                .filter(|(t, _)| **t >= half - 1e-9 * opts.h)
                .map(|(t, k)| (*t, *k))
                .unzip();
            TemperatureSeries {
                method,
                time_average: mean(&tail_k),
                trend: linear_fit(&tail_t, &tail_k).map_or(0.0, |f| f.slope),
                times: times.clone(),
                mean_kinetic,
                target,
                dof,
                noise_digest: members[0].audits[i].digest(),
            }
        })
        .collect())
}
