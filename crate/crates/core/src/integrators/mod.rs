//! Time stepping: stochastic variational Euler on Rⁿ, on SO(3) and on
//! products of SE(3), its constrained variant, Euler–Maruyama baselines and a
//! stochastic Heun reference solver.
//!
//! Every stepper is a pure function of `(system, state, increments, config)`.
//! [`simulate`] drives any of them along a [`BrownianPath`].

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Retraction;
use crate::noise::{BrownianPath, NoiseAudit};
use crate::systems::mech::Vector;

pub mod constrained;
pub mod lie;
pub mod newton;
pub mod reference;
pub mod rigid;
pub mod vector;

pub use constrained::{svi_step_constrained, LambdaRecord};
pub use lie::svi_step_lie;
pub use reference::{heun_step, heun_step_lie, heun_step_rigid, reference_solve};
pub use rigid::svi_step_rigid_bodies;
pub use vector::{em_explicit_step, em_implicit_step, svi_step_rn, variational_euler_step};

/// States whose norm exceeds this are treated as a numerical blow-up.
pub const BLOWUP_NORM: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub h: f64,
    pub retraction: Retraction,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub constraint_tol: f64,
}

impl StepperConfig {
    pub fn new(h: f64) -> Result<Self> {
        StepperConfig {
            h,
            retraction: Retraction::default(),
            newton_tol: 1e-12,
            newton_max_iter: 25,
            constraint_tol: 1e-10,
        }
        .validated()
    }

    pub fn with_retraction(self, retraction: Retraction) -> Self {
        StepperConfig { retraction, ..self }
    }

    pub fn with_step(self, h: f64) -> Result<Self> {
        StepperConfig { h, ..self }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid(
                "h",
                format!("step size must be positive, got {}", self.h),
            ));
        }
        for (name, tol) in [("newton_tol", self.newton_tol), ("constraint_tol", self.constraint_tol)] {
            if !(tol > 0.0) {
                return Err(Error::invalid(name, format!("tolerance must be positive, got {tol}")));
            }
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter", "at least one iteration is required"));
        }
        Ok(self)
    }

    pub(crate) fn newton(&self) -> newton::NewtonOptions {
        newton::NewtonOptions::new(self.newton_tol, self.newton_max_iter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Stochastic variational Euler on Rⁿ.
    Svi,
    /// Deterministic variational (symplectic) Euler, ignoring all noise.
    VariationalEuler,
    /// Stochastic variational Euler on SO(3), body frame.
    SviLie,
    /// SHAKE-type constrained stochastic variational Euler.
    SviConstrained,
    /// Spatial scheme for several rigid bodies.
    SviRigid,
    /// Explicit Euler–Maruyama.
    Eem,
    /// Drift-implicit Euler–Maruyama.
    Iem,
    /// Stochastic Heun, used on fine grids as the convergence reference.
    Reference,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Svi,
        Method::VariationalEuler,
        Method::SviLie,
        Method::SviConstrained,
        Method::SviRigid,
        Method::Eem,
        Method::Iem,
        Method::Reference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svi => "svi",
            Method::VariationalEuler => "variational-euler",
            Method::SviLie => "svi-lie",
            Method::SviConstrained => "svi-constrained",
            Method::SviRigid => "svi-rigid",
            Method::Eem => "eem",
            Method::Iem => "iem",
            Method::Reference => "reference",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which part of the state enters an error norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorNorm {
    #[default]
    PhaseSpace,
    Momentum,
    Configuration,
}

impl ErrorNorm {
    pub fn name(self) -> &'static str {
        match self {
            ErrorNorm::PhaseSpace => "phase_space",
            ErrorNorm::Momentum => "momentum",
            ErrorNorm::Configuration => "configuration",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ErrorNorm::PhaseSpace, ErrorNorm::Momentum, ErrorNorm::Configuration]
            .into_iter()
            .find(|n| n.name() == s)
    }
}

/// A system that can be stepped by some subset of [`Method`].
pub trait Integrable: Sync {
    type State: Clone + Send + Sync + fmt::Debug;

    fn noise_channels(&self) -> usize;

    fn supports(&self, method: Method) -> bool;

    /// One step; constrained schemes also return their multiplier.
    fn step(
        &self,
        method: Method,
        state: &Self::State,
        increments: &[f64],
        cfg: &StepperConfig,
    ) -> Result<(Self::State, Option<Vector>)>;

    fn state_norm(&self, state: &Self::State) -> f64;

    fn distance(&self, a: &Self::State, b: &Self::State, norm: ErrorNorm) -> f64;

    /// Kinetic energy of a state.
    fn kinetic_energy(&self, state: &Self::State) -> f64;

    /// Total energy (kinetic plus potential).
    fn energy(&self, state: &Self::State) -> f64;
}

pub(crate) fn unsupported(system: &str, method: Method) -> Error {
    Error::Unsupported(format!("method `{method}` cannot step the {system} model"))
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub method: Method,
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// One multiplier per recorded step after the first (constrained schemes only).
    pub multipliers: Vec<Vector>,
    pub audit: NoiseAudit,
    pub steps: usize,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &S {
        self.states
            .last()
            .expect("a trajectory holds at least its initial state")
    }
}

/// Run `method` over every step of `path` at its step size, recording the
/// initial state, every `record_every`-th state and the final state.
///
/// The path must carry at least as many channels as the system has noise
/// potentials; surplus channels are ignored, so a one-channel path also drives
/// deterministic systems.
pub fn simulate<Sys: Integrable + ?Sized>(
    sys: &Sys,
    method: Method,
    state0: Sys::State,
    path: &BrownianPath,
    cfg: &StepperConfig,
    record_every: usize,
) -> Result<Trajectory<Sys::State>> {
    simulate_steps(sys, method, state0, path, path.steps(), cfg, record_every)
}

/// As [`simulate`], but stop after `n_steps` steps of the path.
pub fn simulate_steps<Sys: Integrable + ?Sized>(
    sys: &Sys,
    method: Method,
    state0: Sys::State,
    path: &BrownianPath,
    n_steps: usize,
    cfg: &StepperConfig,
    record_every: usize,
) -> Result<Trajectory<Sys::State>> {
    if !sys.supports(method) {
        return Err(Error::Unsupported(format!(
            "method `{method}` is not available for this system"
        )));
    }
    let channels = sys.noise_channels();
    if path.channels() < channels {
        return Err(Error::invalid(
            "path",
            format!("path has {} channels, the system needs {channels}", path.channels()),
        ));
    }
    if n_steps > path.steps() {
        return Err(Error::IndexOutOfRange {
            what: "path step",
            index: n_steps,
            limit: path.steps(),
        });
    }
    let dt = path.step_size();
    if ((dt - cfg.h) / cfg.h).abs() > 1e-12 {
        return Err(Error::invalid(
            "h",
            format!("step size {} does not match the path grid {dt}", cfg.h),
        ));
    }
    let stride = record_every.max(1);
    let t0 = path.horizon().0;
    let mut out = Trajectory {
        method,
        times: vec![t0],
        states: vec![state0.clone()],
        multipliers: Vec::new(),
        audit: NoiseAudit::default(),
        steps: n_steps,
    };
    let mut all = vec![0.0; path.channels()];
    let mut state = state0;
    for k in 0..n_steps {
        path.step_increments(k, &mut all)?;
        let incs = &all[..channels];
        out.audit.record(incs);
        let (next, lambda) = sys
            .step(method, &state, incs, cfg)
            .map_err(|e| e.at_step(k, path.seed()))?;
        let norm = sys.state_norm(&next);
        if !(norm <= BLOWUP_NORM) {
            return Err(Error::Blowup {
                step: k + 1,
                norm,
                seed: Some(path.seed()),
            });
        }
        state = next;
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            out.times.push(t0 + (k + 1) as f64 * dt);
            out.states.push(state.clone());
            if let Some(l) = lambda {
                out.multipliers.push(l);
            }
        }
    }
    Ok(out)
}
