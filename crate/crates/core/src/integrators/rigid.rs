//! Stochastic variational Euler for several rigid bodies in spatial variables
//! (`Ṙ = ω̂R`, `π = R𝕀Rᵀω`). Per body and step:
//!
//! ```text
//! p_{k+1} = p_k − h U_x − h c_t v_k + Σ (γ_q)_x ΔW_q
//! x_{k+1} = x_k + h p_{k+1}/m
//! R_{k+1} = τ(hω_{k+1}) R_k
//! (dτ⁻¹_{−hω_{k+1}})* π_{k+1} = (dτ⁻¹_{−hω_k})* π_k − h U_R − h c_r ω_k + Σ (γ_q)_R ΔW_q
//! ```
//!
//! with every force and torque evaluated at `(x_k, R_k)`. The maps `dτ⁻¹` here
//! are right-trivialized, so `dτ⁻¹_{−ξ}` is the left-trivialized tangent at
//! `ξ`. Only the last line is implicit.

use super::newton::solve_dual_momentum;
use super::{unsupported, ErrorNorm, Integrable, Method, StepperConfig};
use crate::error::Result;
use crate::geometry::{dtau_inv, dtau_inv_dual, tau, Retraction, Vec3};
use crate::systems::mech::Vector;
use crate::systems::rigid::{LieBodyState, Pose, RigidBodySystem};

/// Discrete spatial angular momentum `(dτ⁻¹_{−hω})* π`, the quantity the
/// rotational update transports.
pub fn discrete_angular_momentum(kind: Retraction, h: f64, s: &LieBodyState) -> Vec3 {
    dtau_inv_dual(kind, &(-s.omega * h), &s.pi)
}

pub fn svi_step_rigid_bodies(
    sys: &RigidBodySystem,
    states: &[LieBodyState],
    increments: &[f64],
    cfg: &StepperConfig,
) -> Result<Vec<LieBodyState>> {
    let (h, kind) = (cfg.h, cfg.retraction);
    let poses: Vec<Pose> = states.iter().map(LieBodyState::pose).collect();
    let grad = sys.potential_gradient(&poses);
    let noise = sys.noise_impulse(&poses, increments);
    let drag = sys.drag().unwrap_or_default();

    let mut out = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let body = &sys.bodies()[i];
        let p = s.p - grad[i].dx * h - s.v * (drag.translational * h) + noise[i].dx;
        let v = p / body.mass;
        let x = s.x + v * h;

        let rhs =
            discrete_angular_momentum(kind, h, s) - grad[i].dr * h - s.omega * (drag.rotational * h) + noise[i].dr;
        // With R_{k+1} = τ(hω)R_k and τ(hω)ᵀω = ω, the left side equals
        // (dτ⁻¹_{hω})* R_k𝕀R_kᵀ ω, which is what gets solved.
        let inertia_k = sys.spatial_inertia(i, &s.r);
        let omega = solve_dual_momentum(&|w| dtau_inv(kind, w), &inertia_k, &rhs, h, &cfg.newton())?;
        let r = tau(kind, &(omega * h)) * s.r;
        let pi = sys.spatial_inertia(i, &r) * omega;
        out.push(LieBodyState { x, v, p, r, omega, pi });
    }
    Ok(out)
}

impl Integrable for RigidBodySystem {
    type State = Vec<LieBodyState>;

    fn noise_channels(&self) -> usize {
        RigidBodySystem::noise_channels(self)
    }

    fn supports(&self, method: Method) -> bool {
        matches!(method, Method::Svi | Method::SviRigid | Method::Reference)
    }

    fn step(
        &self,
        method: Method,
        state: &Self::State,
        increments: &[f64],
        cfg: &StepperConfig,
    ) -> Result<(Self::State, Option<Vector>)> {
        match method {
            Method::Svi | Method::SviRigid => Ok((svi_step_rigid_bodies(self, state, increments, cfg)?, None)),
            Method::Reference => Ok((super::heun_step_rigid(self, state, increments, cfg), None)),
            _ => Err(unsupported(self.name(), method)),
        }
    }

    fn state_norm(&self, s: &Self::State) -> f64 {
        s.iter()
            .map(|b| {
                if b.is_finite() {
                    b.x.norm_squared() + b.p.norm_squared() + b.pi.norm_squared() + b.r.matrix().norm_squared()
                } else {
                    f64::INFINITY
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    fn distance(&self, a: &Self::State, b: &Self::State, norm: ErrorNorm) -> f64 {
        let mut config = 0.0;
        let mut momentum = 0.0;
        for (u, w) in a.iter().zip(b) {
            config += (u.x - w.x).norm_squared() + (u.r.matrix() - w.r.matrix()).norm_squared();
            momentum += (u.p - w.p).norm_squared() + (u.pi - w.pi).norm_squared();
        }
        match norm {
            ErrorNorm::PhaseSpace => (config + momentum).sqrt(),
            ErrorNorm::Momentum => momentum.sqrt(),
            ErrorNorm::Configuration => config.sqrt(),
        }
    }

    fn kinetic_energy(&self, s: &Self::State) -> f64 {
        RigidBodySystem::kinetic_energy(self, s)
    }

    fn energy(&self, s: &Self::State) -> f64 {
        RigidBodySystem::energy(self, s)
    }
}
