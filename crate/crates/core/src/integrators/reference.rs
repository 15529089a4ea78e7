//! Stochastic Heun (predictor–corrector) integration of the continuous
//! equations, used on fine grids as the oracle for convergence studies.
//!
//! The noise fields `∇γᵢ(q)` act on momenta only and depend on configuration
//! only, so they commute and Heun is strongly first order for the
//! Stratonovich equations, whose solution coincides with the Itô one here.

use super::{simulate, Integrable, Method, StepperConfig, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{tau, Mat3, Retraction, Vec3};
use crate::noise::BrownianPath;
use crate::systems::mech::{MechSystem, PhaseState, Vector};
use crate::systems::rigid::{BodyGradient, LieBodyState, LieBodySystem, LieState, Pose, RigidBodySystem};

/// Drift of `(q, p)`: `(M⁻¹p, −∇U(q) + F(q, M⁻¹p))`.
fn drift(sys: &MechSystem, q: &Vector, p: &Vector) -> (Vector, Vector) {
    let v = sys.velocity(p);
    let mut dp = sys.lagrangian_dq(q);
    if let Some(f) = sys.force() {
        dp += f.eval(q, &v);
    }
    (v, dp)
}

pub fn heun_step(sys: &MechSystem, s: &PhaseState, increments: &[f64], cfg: &StepperConfig) -> PhaseState {
    let h = cfg.h;
    let (dq0, dp0) = drift(sys, &s.q, &s.p);
    let n0 = sys.noise_impulse(&s.q, increments);
    let qt = &s.q + &dq0 * h;
    let pt = &s.p + &dp0 * h + &n0;
    let (dq1, dp1) = drift(sys, &qt, &pt);
    let n1 = sys.noise_impulse(&qt, increments);
    let q = &s.q + (dq0 + dq1) * (0.5 * h);
    let p = &s.p + (dp0 + dp1) * (0.5 * h) + (n0 + n1) * 0.5;
    PhaseState::from_momentum(sys, q, p)
}

/// Body-frame Heun for `ġ = g ξ̂`, `μ̇ = μ × ξ − U_g + Σ(γᵢ)_g ∘ Ẇᵢ`, with
/// configuration updates through the exponential map.
pub fn heun_step_lie(sys: &LieBodySystem, s: &LieState, increments: &[f64], cfg: &StepperConfig) -> LieState {
    let h = cfg.h;
    let inertia = sys.inertia();
    let xi_of = |mu: &Vec3| mu.component_div(&inertia);
    let rate = |g, mu: &Vec3| mu.cross(&xi_of(mu)) - sys.potential_gradient(g);

    let xi0 = xi_of(&s.mu);
    let f0 = rate(&s.g, &s.mu);
    let n0 = sys.noise_impulse(&s.g, increments);
    let gt = s.g * tau(Retraction::Exponential, &(xi0 * h));
    let mut_ = s.mu + f0 * h + n0;
    let xit = xi_of(&mut_);
    let f1 = rate(&gt, &mut_);
    let n1 = sys.noise_impulse(&gt, increments);

    let g = s.g * tau(Retraction::Exponential, &((xi0 + xit) * (0.5 * h)));
    let mu = s.mu + (f0 + f1) * (0.5 * h) + (n0 + n1) * 0.5;
    LieState { g, xi: xi_of(&mu), mu }
}

struct RigidRates {
    dx: Vec<Vec3>,
    dp: Vec<Vec3>,
    omega: Vec<Vec3>,
    dpi: Vec<Vec3>,
    noise: Vec<BodyGradient>,
}

fn rigid_rates(sys: &RigidBodySystem, states: &[LieBodyState], increments: &[f64]) -> RigidRates {
    let poses: Vec<Pose> = states.iter().map(LieBodyState::pose).collect();
    let grad = sys.potential_gradient(&poses);
    let drag = sys.drag().unwrap_or_default();
    let mut r = RigidRates {
        dx: Vec::new(),
        dp: Vec::new(),
        omega: Vec::new(),
        dpi: Vec::new(),
        noise: sys.noise_impulse(&poses, increments),
    };
    for (i, s) in states.iter().enumerate() {
        let body = &sys.bodies()[i];
        let v = s.p / body.mass;
        let omega = angular_velocity(sys, i, s.r.matrix(), &s.pi);
        r.dx.push(v);
        r.dp.push(-grad[i].dx - v * drag.translational);
        r.omega.push(omega);
        r.dpi.push(-grad[i].dr - omega * drag.rotational);
    }
    r
}

fn angular_velocity(sys: &RigidBodySystem, i: usize, r: &Mat3, pi: &Vec3) -> Vec3 {
    let body_pi = r.transpose() * pi;
    r * body_pi.component_div(&sys.bodies()[i].inertia)
}

/// Spatial Heun for `ẋ = p/m`, `ṗ = −U_x − c_t v`, `Ṙ = ω̂R`,
/// `π̇ = −U_R − c_r ω` plus the noise impulses.
pub fn heun_step_rigid(
    sys: &RigidBodySystem,
    states: &[LieBodyState],
    increments: &[f64],
    cfg: &StepperConfig,
) -> Vec<LieBodyState> {
    let h = cfg.h;
    let exp = |w: &Vec3| tau(Retraction::Exponential, w);
    let a = rigid_rates(sys, states, increments);
    let predicted: Vec<LieBodyState> = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = s.p + a.dp[i] * h + a.noise[i].dx;
            let pi = s.pi + a.dpi[i] * h + a.noise[i].dr;
            sys.state_from_momenta(i, s.x + a.dx[i] * h, p, exp(&(a.omega[i] * h)) * s.r, pi)
        })
        .collect();
    let b = rigid_rates(sys, &predicted, increments);
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let x = s.x + (a.dx[i] + b.dx[i]) * (0.5 * h);
            let p = s.p + (a.dp[i] + b.dp[i]) * (0.5 * h) + (a.noise[i].dx + b.noise[i].dx) * 0.5;
            let r = exp(&((a.omega[i] + b.omega[i]) * (0.5 * h))) * s.r;
            let pi = s.pi + (a.dpi[i] + b.dpi[i]) * (0.5 * h) + (a.noise[i].dr + b.noise[i].dr) * 0.5;
            sys.state_from_momenta(i, x, p, r, pi)
        })
        .collect()
}

/// Integrate with the Heun reference on `path` refined to `levels_ref` dyadic
/// levels. The refined path is coupled to `path`: its increments sum to those
/// of `path` on every coarse interval.
pub fn reference_solve<Sys: Integrable + ?Sized>(
    sys: &Sys,
    state0: Sys::State,
    path: &BrownianPath,
    levels_ref: u32,
    base: &StepperConfig,
) -> Result<Trajectory<Sys::State>> {
    if levels_ref < path.levels() {
        return Err(Error::invalid(
            "levels_ref",
            format!(
                "reference level {levels_ref} is coarser than the path ({})",
                path.levels()
            ),
        ));
    }
    let mut fine = path.clone();
    while fine.levels() < levels_ref {
        fine = fine.refine();
    }
    let cfg = base.with_step(fine.step_size())?;
    simulate(sys, Method::Reference, state0, &fine, &cfg, fine.steps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::catalog::make_oscillator;
    use crate::systems::mech::{Matrix, ScalarField};

    #[test]
    fn free_particle_with_additive_noise_is_exact() {
        let sys = MechSystem::builder("free", Matrix::identity(1, 1))
            .noise(ScalarField::linear(Vector::from_element(1, 0.7)))
            .build()
            .unwrap();
        let path = BrownianPath::sample(3, (0.0, 1.0), 6, 1).unwrap();
        let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 0.0), Vector::from_element(1, 1.0));
        let cfg = StepperConfig::new(1.0).unwrap();
        let traj = reference_solve(&sys, s0, &path, 10, &cfg).unwrap();
        let w: f64 = path.channel(0).iter().sum();
        assert!((traj.last().p[0] - (1.0 + 0.7 * w)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_oscillator_second_order() {
        let sys = make_oscillator(1.0, 1.0, 0.0).unwrap();
        let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 1.0), Vector::from_element(1, 0.0));
        let err = |levels| {
            let path = BrownianPath::sample(1, (0.0, 1.0), 0, 1).unwrap();
            let cfg = StepperConfig::new(1.0).unwrap();
            let t = reference_solve(&sys, s0.clone(), &path, levels, &cfg).unwrap();
            (t.last().q[0] - 1f64.cos()).abs()
        };
        let ratio = err(6) / err(7);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn reference_rejects_coarser_level() {
        let sys = make_oscillator(1.0, 1.0, 0.5).unwrap();
        let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 1.0), Vector::from_element(1, 0.0));
        let path = BrownianPath::sample(1, (0.0, 1.0), 5, 1).unwrap();
        assert!(reference_solve(&sys, s0, &path, 4, &StepperConfig::new(1.0).unwrap()).is_err());
    }
}
