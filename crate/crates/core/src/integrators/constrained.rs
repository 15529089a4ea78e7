//! Holonomically constrained stochastic variational Euler on Rⁿ.
//!
//! The multiplier enters the momentum update through `h G(q_k)ᵀλ`, with
//! `G = ∂g/∂q`, and is chosen so that the new configuration lies exactly on
//! `g = 0` (SHAKE placement):
//!
//! ```text
//! p_{k+1} = p_k − h∇U(q_k) + hF(q_k, v_k) + Σ∇γᵢ(q_k)ΔWᵢ + h G(q_k)ᵀλ_k
//! q_{k+1} = q_k + h M⁻¹p_{k+1},      g(q_{k+1}) = 0
//! ```

use super::newton;
use super::StepperConfig;
use crate::error::{Error, Result};
use crate::systems::mech::{MechSystem, PhaseState, Vector};

/// Largest acceptable condition number of the multiplier Jacobian.
const MAX_CONDITION: f64 = 1e12;

/// Discrete Lagrange multiplier of one constrained step.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaRecord {
    pub lambda: Vector,
}

pub fn svi_step_constrained(
    sys: &MechSystem,
    s: &PhaseState,
    increments: &[f64],
    cfg: &StepperConfig,
) -> Result<(PhaseState, LambdaRecord)> {
    let constraint = sys
        .constraint()
        .ok_or_else(|| Error::Unsupported(format!("model `{}` declares no constraint", sys.name())))?;
    let h = cfg.h;
    let minv = sys.mass_inv();

    let mut base = &s.p + sys.lagrangian_dq(&s.q) * h;
    if let Some(f) = sys.force() {
        base += f.eval(&s.q, &s.v) * h;
    }
    base += sys.noise_impulse(&s.q, increments);

    let gk_t = constraint.jacobian(&s.q).transpose();
    // q(λ) = q_k + h M⁻¹(base + h Gₖᵀλ)
    let free = &s.q + minv * &base * h;
    let reach = minv * &gk_t * (h * h);
    let position = |lambda: &Vector| &free + &reach * lambda;

    let residual = |lambda: &Vector| constraint.value(&position(lambda));
    let jacobian = |lambda: &Vector| constraint.jacobian(&position(lambda)) * &reach;

    let lambda0 = Vector::zeros(constraint.count());
    let sv = jacobian(&lambda0).singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficientConstraint { condition });
    }

    let opts = newton::NewtonOptions::new(cfg.constraint_tol, cfg.newton_max_iter);
    let sol = newton::solve(&residual, Some(&jacobian), lambda0, &opts)?;
    let lambda = sol.x;

    let p = base + &gk_t * &lambda * h;
    let v = sys.velocity(&p);
    let q = position(&lambda);
    Ok((PhaseState { q, v, p }, LambdaRecord { lambda }))
}
