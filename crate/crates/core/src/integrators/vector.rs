//! Steppers on Rⁿ: stochastic variational Euler, its deterministic
//! counterpart and the two Euler–Maruyama baselines.
//!
//! All four treat the force `F(q, v)` and the noise impulse `Σ∇γᵢ(q_k)ΔWᵢ`
//! identically; they differ only in where the drift is evaluated.

use super::newton;
use super::{unsupported, ErrorNorm, Integrable, Method, StepperConfig};
use crate::error::Result;
use crate::systems::mech::{Matrix, MechSystem, PhaseState, Vector};

/// `h·(−∇U(q) + F(q, v))`.
fn drift_impulse(sys: &MechSystem, q: &Vector, v: &Vector, h: f64) -> Vector {
    let mut out = sys.lagrangian_dq(q);
    if let Some(f) = sys.force() {
        out += f.eval(q, v);
    }
    out * h
}

/// Stochastic variational Euler on Rⁿ:
///
/// ```text
/// p_{k+1} = p_k + h ∂𝓛/∂q(q_k, v_k) + h F(q_k, v_k) + Σ ∇γᵢ(q_k) ΔWᵢ
/// v_{k+1} = M⁻¹ p_{k+1}
/// q_{k+1} = q_k + h v_{k+1}
/// ```
pub fn svi_step_rn(sys: &MechSystem, s: &PhaseState, increments: &[f64], cfg: &StepperConfig) -> PhaseState {
    let h = cfg.h;
    let mut p = &s.p + drift_impulse(sys, &s.q, &s.v, h);
    p += sys.noise_impulse(&s.q, increments);
    let v = sys.velocity(&p);
    let q = &s.q + &v * h;
    PhaseState { q, v, p }
}

/// Deterministic variational (symplectic) Euler, written out separately so
/// the zero-noise reduction of [`svi_step_rn`] can be checked against it.
pub fn variational_euler_step(sys: &MechSystem, s: &PhaseState, cfg: &StepperConfig) -> PhaseState {
    let h = cfg.h;
    let mut p = s.p.clone();
    p += drift_impulse(sys, &s.q, &s.v, h);
    let v = sys.velocity(&p);
    let mut q = s.q.clone();
    q.axpy(h, &v, 1.0);
    PhaseState { q, v, p }
}

/// Explicit Euler–Maruyama: every right-hand side at step k.
pub fn em_explicit_step(sys: &MechSystem, s: &PhaseState, increments: &[f64], cfg: &StepperConfig) -> PhaseState {
    let h = cfg.h;
    let q = &s.q + &s.v * h;
    let p = &s.p + drift_impulse(sys, &s.q, &s.v, h) + sys.noise_impulse(&s.q, increments);
    PhaseState::from_momentum(sys, q, p)
}

/// Drift-implicit Euler–Maruyama:
///
/// ```text
/// q_{k+1} = q_k + h M⁻¹ p_{k+1}
/// p_{k+1} = p_k + h(−∇U(q_{k+1}) + F(q_{k+1}, v_{k+1})) + Σ ∇γᵢ(q_k) ΔWᵢ
/// ```
///
/// solved for `p_{k+1}` by Newton iteration, with the analytic Hessian of `U`
/// when the system provides one.
pub fn em_implicit_step(
    sys: &MechSystem,
    s: &PhaseState,
    increments: &[f64],
    cfg: &StepperConfig,
) -> Result<PhaseState> {
    let h = cfg.h;
    let minv = sys.mass_inv();
    let base = &s.p + sys.noise_impulse(&s.q, increments);
    let config = |p: &Vector| (&s.q + minv * p * h, minv * p);
    let residual = |p: &Vector| {
        let (q1, v1) = config(p);
        p - &base - drift_impulse(sys, &q1, &v1, h)
    };
    let n = sys.dim();
    let jacobian = |p: &Vector| {
        let (q1, v1) = config(p);
        let mut j = Matrix::identity(n, n) + sys.potential().hessian(&q1) * minv * (h * h);
        if let Some(f) = sys.force() {
            let (fq, fv) = f.jacobians(&q1, &v1);
            j -= (fq * (h * h) + fv * h) * minv;
        }
        j
    };
    let guess = em_explicit_step(sys, s, increments, cfg).p;
    let scale = 1.0 + base.amax();
    let sol = newton::solve(&residual, Some(&jacobian), guess, &cfg.newton().scaled(scale))?;
    let p = sol.x;
    let (q, v) = config(&p);
    Ok(PhaseState { q, v, p })
}

impl Integrable for MechSystem {
    type State = PhaseState;

    fn noise_channels(&self) -> usize {
        MechSystem::noise_channels(self)
    }

    fn supports(&self, method: Method) -> bool {
        match method {
            Method::SviConstrained => self.constraint().is_some(),
            Method::Svi | Method::VariationalEuler | Method::Eem | Method::Iem | Method::Reference => {
                self.constraint().is_none()
            }
            Method::SviLie | Method::SviRigid => false,
        }
    }

    fn step(
        &self,
        method: Method,
        state: &PhaseState,
        increments: &[f64],
        cfg: &StepperConfig,
    ) -> Result<(PhaseState, Option<Vector>)> {
        Ok(match method {
            Method::Svi => (svi_step_rn(self, state, increments, cfg), None),
            Method::VariationalEuler => (variational_euler_step(self, state, cfg), None),
            Method::Eem => (em_explicit_step(self, state, increments, cfg), None),
            Method::Iem => (em_implicit_step(self, state, increments, cfg)?, None),
            Method::Reference => (super::heun_step(self, state, increments, cfg), None),
            Method::SviConstrained => {
                let (next, rec) = super::svi_step_constrained(self, state, increments, cfg)?;
                (next, Some(rec.lambda))
            }
            Method::SviLie | Method::SviRigid => return Err(unsupported(self.name(), method)),
        })
    }

    fn state_norm(&self, s: &PhaseState) -> f64 {
        s.norm()
    }

    fn distance(&self, a: &PhaseState, b: &PhaseState, norm: ErrorNorm) -> f64 {
        let dq = (&a.q - &b.q).norm_squared();
        let dp = (&a.p - &b.p).norm_squared();
        match norm {
            ErrorNorm::PhaseSpace => (dq + dp).sqrt(),
            ErrorNorm::Momentum => dp.sqrt(),
            ErrorNorm::Configuration => dq.sqrt(),
        }
    }

    fn kinetic_energy(&self, s: &PhaseState) -> f64 {
        MechSystem::kinetic_energy(self, &s.p)
    }

    fn energy(&self, s: &PhaseState) -> f64 {
        self.hamiltonian(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::catalog::{make_ballistic_analog, make_oscillator, BallisticParams};
    use crate::systems::mech::ScalarField;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn free_particle_drifts() {
        let sys = MechSystem::builder("free", Matrix::identity(1, 1)).build().unwrap();
        let s = PhaseState::from_momentum(&sys, v(&[0.0]), v(&[1.0]));
        let next = svi_step_rn(&sys, &s, &[], &StepperConfig::new(0.1).unwrap());
        assert_eq!(next.q[0], 0.1);
        assert_eq!(next.v[0], 1.0);
        assert_eq!(next.p[0], 1.0);
    }

    #[test]
    fn oscillator_hand_computed_step() {
        // p₁ = 0 − 0.1·1 + 0.5·0.2 = 0, so v₁ = 0 and q₁ = 1
        let sys = make_oscillator(1.0, 1.0, 0.5).unwrap();
        let s = PhaseState::from_momentum(&sys, v(&[1.0]), v(&[0.0]));
        let next = svi_step_rn(&sys, &s, &[0.2], &StepperConfig::new(0.1).unwrap());
        assert!(next.p[0].abs() < 1e-16);
        assert!(next.v[0].abs() < 1e-16);
        assert!((next.q[0] - 1.0).abs() < 1e-16);
    }

    #[test]
    fn explicit_and_implicit_energy_trends() {
        let sys = make_oscillator(1.0, 1.0, 0.0).unwrap();
        let cfg = StepperConfig::new(0.1).unwrap();
        let mut e = PhaseState::from_momentum(&sys, v(&[1.0]), v(&[0.0]));
        let mut i = e.clone();
        let mut he = sys.hamiltonian(&e);
        let mut hi = he;
        for _ in 0..50 {
            e = em_explicit_step(&sys, &e, &[], &cfg);
            i = em_implicit_step(&sys, &i, &[], &cfg).unwrap();
            let (ne, ni) = (sys.hamiltonian(&e), sys.hamiltonian(&i));
            assert!(ne > he && ni < hi);
            he = ne;
            hi = ni;
        }
        // |1 ± ih| = √1.01 per step for the explicit scheme
        assert!((he / 0.5 - 1.01f64.powi(50)).abs() < 1e-10);
    }

    #[test]
    fn implicit_step_satisfies_its_equations() {
        let sys = make_ballistic_analog(&BallisticParams {
            anharmonic: 0.3,
            ..Default::default()
        })
        .unwrap();
        let cfg = StepperConfig::new(0.1).unwrap();
        let s = PhaseState::from_momentum(&sys, v(&[0.4, -0.7]), v(&[0.3, 1.1]));
        let dw = [0.17];
        let n = em_implicit_step(&sys, &s, &dw, &cfg).unwrap();
        let f = sys.force().unwrap().eval(&n.q, &n.v);
        let rhs = &s.p - sys.potential().gradient(&n.q) * cfg.h + f * cfg.h + sys.noise_impulse(&s.q, &dw);
        assert!((&n.p - rhs).amax() < 1e-12);
        assert!((&n.q - (&s.q + &n.v * cfg.h)).amax() < 1e-15);
    }

    #[test]
    fn implicit_step_without_analytic_hessian() {
        let potential = ScalarField::new(|q| q[0].powi(4) / 4.0, |q| v(&[q[0].powi(3)]));
        let sys = MechSystem::builder("quartic", Matrix::identity(1, 1))
            .potential(potential)
            .build()
            .unwrap();
        let cfg = StepperConfig::new(0.05).unwrap();
        let s = PhaseState::from_momentum(&sys, v(&[1.2]), v(&[0.5]));
        let n = em_implicit_step(&sys, &s, &[], &cfg).unwrap();
        let rhs = s.p[0] - cfg.h * n.q[0].powi(3);
        assert!((n.p[0] - rhs).abs() < 1e-12);
    }

    #[test]
    fn legendre_holds_after_every_method() {
        let sys = make_ballistic_analog(&BallisticParams::default()).unwrap();
        let cfg = StepperConfig::new(0.1).unwrap();
        let s = PhaseState::from_momentum(&sys, v(&[0.4, -0.7]), v(&[0.3, 1.1]));
        for m in [
            Method::Svi,
            Method::VariationalEuler,
            Method::Eem,
            Method::Iem,
            Method::Reference,
        ] {
            let (n, _) = sys.step(m, &s, &[0.3], &cfg).unwrap();
            assert!(n.legendre_defect(&sys) <= 1e-12 * (1.0 + n.p.norm()), "{m}");
        }
    }
}
