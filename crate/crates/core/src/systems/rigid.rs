//! Collections of rigid bodies on SE(3)ᴷ and the single-body Lie-group model.
//!
//! Potentials and noise potentials are functions of the poses `(x_i, R_i)`.
//! Their derivatives use the spatial (right-trivialized) convention
//!
//! ```text
//! U_{x_i}ᵀ y = d/dε U(.., x_i + ε y, ..)
//! U_{R_i}ᵀ y = d/dε U(.., τ(ε y) R_i, ..)
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{tau, trace_pairing, Mat3, Retraction, Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: Vec3,
    pub r: Rotation,
}

/// Per-body derivative of a scalar field: `(U_x, U_R)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BodyGradient {
    pub dx: Vec3,
    pub dr: Vec3,
}

/// A scalar function of all body poses.
pub trait RigidField: Send + Sync {
    fn value(&self, poses: &[Pose]) -> f64;
    /// Adds this field's derivative to `grad` (one slot per body).
    fn accumulate_gradient(&self, poses: &[Pose], grad: &mut [BodyGradient]);
    fn describe(&self) -> String;
    /// Whether the field is unchanged by a common translation of all bodies.
    fn translation_invariant(&self) -> bool;
}

/// `½κ‖x_a − x_b‖²`.
#[derive(Clone, Debug)]
pub struct Spring {
    pub a: usize,
    pub b: usize,
    pub stiffness: f64,
}

impl RigidField for Spring {
    fn value(&self, poses: &[Pose]) -> f64 {
        0.5 * self.stiffness * (poses[self.a].x - poses[self.b].x).norm_squared()
    }

    fn accumulate_gradient(&self, poses: &[Pose], grad: &mut [BodyGradient]) {
        let d = (poses[self.a].x - poses[self.b].x) * self.stiffness;
        grad[self.a].dx += d;
        grad[self.b].dx -= d;
    }

    fn describe(&self) -> String {
        format!("spring(bodies {},{}; k={})", self.a, self.b, self.stiffness)
    }

    fn translation_invariant(&self) -> bool {
        true
    }
}

/// `−κ tr(R_aᵀ R_b)`, minimized when the two orientations coincide.
#[derive(Clone, Debug)]
pub struct Alignment {
    pub a: usize,
    pub b: usize,
    pub stiffness: f64,
}

impl RigidField for Alignment {
    fn value(&self, poses: &[Pose]) -> f64 {
        -self.stiffness * (poses[self.a].r.matrix().transpose() * poses[self.b].r.matrix()).trace()
    }

    fn accumulate_gradient(&self, poses: &[Pose], grad: &mut [BodyGradient]) {
        let ra = poses[self.a].r.matrix();
        let rb = poses[self.b].r.matrix();
        // U_{R_a}ᵀy = κ tr(ŷ R_b R_aᵀ) and U_{R_b} = −U_{R_a}
        let w = trace_pairing(&(rb * ra.transpose())) * self.stiffness;
        grad[self.a].dr += w;
        grad[self.b].dr -= w;
    }

    fn describe(&self) -> String {
        format!("alignment(bodies {},{}; k={})", self.a, self.b, self.stiffness)
    }

    fn translation_invariant(&self) -> bool {
        true
    }
}

/// `s · dᵀ(R c)`: a constant spatial load `s·d` applied at the body-fixed
/// offset `c`. With `d` pointing up this is the heavy-top gravity potential.
#[derive(Clone, Debug)]
pub struct PointLoad {
    pub body: usize,
    pub offset: Vec3,
    pub direction: Vec3,
    pub scale: f64,
}

impl RigidField for PointLoad {
    fn value(&self, poses: &[Pose]) -> f64 {
        self.scale * self.direction.dot(&poses[self.body].r.rotate(&self.offset))
    }

    fn accumulate_gradient(&self, poses: &[Pose], grad: &mut [BodyGradient]) {
        let arm = poses[self.body].r.rotate(&self.offset);
        grad[self.body].dr += arm.cross(&(self.direction * self.scale));
    }

    fn describe(&self) -> String {
        format!(
            "point_load(body {}; offset {:?}; direction {:?}; scale {})",
            self.body,
            self.offset.as_slice(),
            self.direction.as_slice(),
            self.scale
        )
    }

    fn translation_invariant(&self) -> bool {
        true
    }
}

/// `cᵀ(x_a − x_b)`, or `cᵀx_a` when `b` is `None`.
#[derive(Clone, Debug)]
pub struct LinearPosition {
    pub a: usize,
    pub b: Option<usize>,
    pub coefficient: Vec3,
}

impl RigidField for LinearPosition {
    fn value(&self, poses: &[Pose]) -> f64 {
        let rel = match self.b {
            Some(b) => poses[self.a].x - poses[b].x,
            None => poses[self.a].x,
        };
        self.coefficient.dot(&rel)
    }

    fn accumulate_gradient(&self, _poses: &[Pose], grad: &mut [BodyGradient]) {
        grad[self.a].dx += self.coefficient;
        if let Some(b) = self.b {
            grad[b].dx -= self.coefficient;
        }
    }

    fn describe(&self) -> String {
        match self.b {
            Some(b) => format!(
                "linear_relative(bodies {},{}; c={:?})",
                self.a,
                b,
                self.coefficient.as_slice()
            ),
            None => format!("linear_absolute(body {}; c={:?})", self.a, self.coefficient.as_slice()),
        }
    }

    fn translation_invariant(&self) -> bool {
        self.b.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Body {
    pub mass: f64,
    /// Principal moments of the diagonal body-frame inertia tensor.
    pub inertia: Vec3,
}

/// Linear drag on translational and spatial angular momentum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RigidDrag {
    pub translational: f64,
    pub rotational: f64,
}

/// State of one body: position, velocity, linear momentum, orientation,
/// spatial angular velocity and spatial angular momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieBodyState {
    pub x: Vec3,
    pub v: Vec3,
    pub p: Vec3,
    pub r: Rotation,
    pub omega: Vec3,
    pub pi: Vec3,
}

impl LieBodyState {
    pub fn pose(&self) -> Pose {
        Pose { x: self.x, r: self.r }
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.p.iter())
            .chain(self.pi.iter())
            .chain(self.r.matrix().iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Clone)]
pub struct RigidBodySystem {
    name: String,
    bodies: Vec<Body>,
    potential: Vec<Arc<dyn RigidField>>,
    noise: Vec<Arc<dyn RigidField>>,
    drag: Option<RigidDrag>,
}

impl fmt::Debug for RigidBodySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RigidBodySystem")
            .field("name", &self.name)
            .field("bodies", &self.bodies)
            .field(
                "potential",
                &self.potential.iter().map(|p| p.describe()).collect::<Vec<_>>(),
            )
            .field("noise", &self.noise.iter().map(|p| p.describe()).collect::<Vec<_>>())
            .field("drag", &self.drag)
            .finish()
    }
}

impl RigidBodySystem {
    pub fn new(name: impl Into<String>, bodies: Vec<Body>) -> Result<Self> {
        if bodies.is_empty() {
            return Err(Error::invalid("bodies", "at least one body is required"));
        }
        for (i, b) in bodies.iter().enumerate() {
            if !(b.mass > 0.0) || b.inertia.iter().any(|&j| !(j > 0.0)) {
                return Err(Error::invalid(
                    format!("bodies[{i}]"),
                    "mass and principal inertias must be positive",
                ));
            }
        }
        Ok(RigidBodySystem {
            name: name.into(),
            bodies,
            potential: Vec::new(),
            noise: Vec::new(),
            drag: None,
        })
    }

    pub fn with_potential(mut self, field: impl RigidField + 'static) -> Self {
        self.potential.push(Arc::new(field));
        self
    }

    pub fn with_noise(mut self, field: impl RigidField + 'static) -> Self {
        self.noise.push(Arc::new(field));
        self
    }

    pub fn with_drag(mut self, drag: RigidDrag) -> Self {
        self.drag = Some(drag);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    pub fn noise_channels(&self) -> usize {
        self.noise.len()
    }

    pub fn drag(&self) -> Option<RigidDrag> {
        self.drag
    }

    pub fn potential_fields(&self) -> &[Arc<dyn RigidField>] {
        &self.potential
    }

    pub fn noise_fields(&self) -> &[Arc<dyn RigidField>] {
        &self.noise
    }

    pub fn translation_invariant(&self) -> bool {
        self.potential
            .iter()
            .chain(self.noise.iter())
            .all(|f| f.translation_invariant())
    }

    /// Same system with the zero field on every noise channel.
    pub fn with_zeroed_noise(&self) -> RigidBodySystem {
        let zero: Arc<dyn RigidField> = Arc::new(LinearPosition {
            a: 0,
            b: Some(0),
            coefficient: Vec3::zeros(),
        });
        RigidBodySystem {
            noise: self.noise.iter().map(|_| zero.clone()).collect(),
            ..self.clone()
        }
    }

    pub fn potential_energy(&self, poses: &[Pose]) -> f64 {
        self.potential.iter().map(|f| f.value(poses)).sum()
    }

    pub fn potential_gradient(&self, poses: &[Pose]) -> Vec<BodyGradient> {
        let mut g = vec![BodyGradient::default(); self.bodies.len()];
        for f in &self.potential {
            f.accumulate_gradient(poses, &mut g);
        }
        g
    }

    /// `Σ_q (γ_q)_{x_i, R_i} ΔW_q` per body.
    pub fn noise_impulse(&self, poses: &[Pose], increments: &[f64]) -> Vec<BodyGradient> {
        let mut total = vec![BodyGradient::default(); self.bodies.len()];
        let mut g = vec![BodyGradient::default(); self.bodies.len()];
        for (field, dw) in self.noise.iter().zip(increments) {
            g.iter_mut().for_each(|s| *s = BodyGradient::default());
            field.accumulate_gradient(poses, &mut g);
            for (t, s) in total.iter_mut().zip(&g) {
                t.dx += s.dx * *dw;
                t.dr += s.dr * *dw;
            }
        }
        total
    }

    /// Spatial inertia `R 𝕀 Rᵀ` of body `i`.
    pub fn spatial_inertia(&self, i: usize, r: &Rotation) -> Mat3 {
        let m = r.matrix();
        m * Mat3::from_diagonal(&self.bodies[i].inertia) * m.transpose()
    }

    /// Builds a Legendre-consistent state from pose and momenta.
    pub fn state_from_momenta(&self, i: usize, x: Vec3, p: Vec3, r: Rotation, pi: Vec3) -> LieBodyState {
        let body = &self.bodies[i];
        let m = r.matrix();
        let inv = Mat3::from_diagonal(&body.inertia.map(|j| 1.0 / j));
        let omega = m * inv * m.transpose() * pi;
        LieBodyState {
            x,
            v: p / body.mass,
            p,
            r,
            omega,
            pi,
        }
    }

    /// Builds a Legendre-consistent state from pose and velocities.
    pub fn state_from_velocities(&self, i: usize, x: Vec3, v: Vec3, r: Rotation, omega: Vec3) -> LieBodyState {
        LieBodyState {
            x,
            v,
            p: v * self.bodies[i].mass,
            r,
            omega,
            pi: self.spatial_inertia(i, &r) * omega,
        }
    }

    /// Maximum over bodies of `(‖p − m v‖, ‖π − R𝕀Rᵀω‖)`.
    pub fn legendre_defect(&self, states: &[LieBodyState]) -> (f64, f64) {
        states.iter().enumerate().fold((0.0f64, 0.0f64), |(a, b), (i, s)| {
            let lin = (s.p - s.v * self.bodies[i].mass).norm();
            let ang = (s.pi - self.spatial_inertia(i, &s.r) * s.omega).norm();
            (a.max(lin), b.max(ang))
        })
    }

    pub fn kinetic_energy(&self, states: &[LieBodyState]) -> f64 {
        states
            .iter()
            .zip(&self.bodies)
            .map(|(s, b)| 0.5 * b.mass * s.v.norm_squared() + 0.5 * s.omega.dot(&s.pi))
            .sum()
    }

    pub fn energy(&self, states: &[LieBodyState]) -> f64 {
        let poses: Vec<Pose> = states.iter().map(LieBodyState::pose).collect();
        self.kinetic_energy(states) + self.potential_energy(&poses)
    }

    pub fn total_linear_momentum(states: &[LieBodyState]) -> Vec3 {
        states.iter().map(|s| s.p).sum()
    }

    /// Largest mismatch between analytic derivatives of every field and
    /// central differences along `x_i + t y` and `τ(t y) R_i`.
    pub fn derivative_check(&self, poses: &[Pose], step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let dirs = [Vec3::x(), Vec3::y(), Vec3::z()];
        for field in self.potential.iter().chain(self.noise.iter()) {
            let mut g = vec![BodyGradient::default(); self.bodies.len()];
            field.accumulate_gradient(poses, &mut g);
            for i in 0..self.bodies.len() {
                for y in &dirs {
                    let shifted = |t: f64| {
                        let mut ps = poses.to_vec();
                        ps[i].x += y * t;
                        field.value(&ps)
                    };
                    let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
                    worst = worst.max((fd - g[i].dx.dot(y)).abs() / (1.0 + fd.abs()));
                    let turned = |t: f64| {
                        let mut ps = poses.to_vec();
                        ps[i].r = tau(Retraction::Exponential, &(y * t)) * ps[i].r;
                        field.value(&ps)
                    };
                    let fd = (turned(step) - turned(-step)) / (2.0 * step);
                    worst = worst.max((fd - g[i].dr.dot(y)).abs() / (1.0 + fd.abs()));
                }
            }
        }
        worst
    }
}

/// Single rigid body on SO(3) described in the body frame: reduced Lagrangian
/// `l(g, ξ) = ½ξᵀ𝕀ξ − U(g)` with body angular velocity ξ and body momentum
/// `μ = 𝕀ξ`. Fields are borrowed from a one-body [`RigidBodySystem`] with the
/// body held at the origin, and converted to the left-trivialized convention
/// `U_gᵀ y = d/dε U(g τ(ε y)) = (gᵀ U_R)ᵀ y`.
#[derive(Clone, Debug)]
pub struct LieBodySystem {
    inner: RigidBodySystem,
}

/// Body-frame state `(g, ξ, μ)` of a [`LieBodySystem`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieState {
    pub g: Rotation,
    pub xi: Vec3,
    pub mu: Vec3,
}

impl LieBodySystem {
    pub fn from_rigid(sys: RigidBodySystem) -> Result<Self> {
        if sys.body_count() != 1 {
            return Err(Error::invalid(
                "bodies",
                "the body-frame Lie model holds exactly one body",
            ));
        }
        Ok(LieBodySystem { inner: sys })
    }

    pub fn free(inertia: Vec3) -> Result<Self> {
        Self::from_rigid(RigidBodySystem::new("free_body", vec![Body { mass: 1.0, inertia }])?)
    }

    pub fn rigid(&self) -> &RigidBodySystem {
        &self.inner
    }

    pub fn inertia(&self) -> Vec3 {
        self.inner.bodies[0].inertia
    }

    pub fn noise_channels(&self) -> usize {
        self.inner.noise_channels()
    }

    fn pose(g: &Rotation) -> [Pose; 1] {
        [Pose {
            x: Vec3::zeros(),
            r: *g,
        }]
    }

    pub fn state(&self, g: Rotation, xi: Vec3) -> LieState {
        LieState {
            g,
            xi,
            mu: self.inertia().component_mul(&xi),
        }
    }

    pub fn potential(&self, g: &Rotation) -> f64 {
        self.inner.potential_energy(&Self::pose(g))
    }

    /// Left-trivialized `U_g`.
    pub fn potential_gradient(&self, g: &Rotation) -> Vec3 {
        g.matrix().transpose() * self.inner.potential_gradient(&Self::pose(g))[0].dr
    }

    /// `Σ (γ_i)_g ΔW_i`, left-trivialized.
    pub fn noise_impulse(&self, g: &Rotation, increments: &[f64]) -> Vec3 {
        g.matrix().transpose() * self.inner.noise_impulse(&Self::pose(g), increments)[0].dr
    }

    pub fn energy(&self, s: &LieState) -> f64 {
        0.5 * s.xi.dot(&s.mu) + self.potential(&s.g)
    }

    /// Spatial angular momentum `g μ`.
    pub fn spatial_momentum(&self, s: &LieState) -> Vec3 {
        s.g.rotate(&s.mu)
    }
}

/// Helper for potentials given by a matrix pairing `⟨A, ŷ R⟩`.
pub fn pairing_gradient(dudr: &Mat3, r: &Rotation) -> Vec3 {
    // ⟨A, ŷR⟩ = tr(Aᵀ ŷ R) = tr(ŷ R Aᵀ)
    trace_pairing(&(r.matrix() * dudr.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poses() -> Vec<Pose> {
        vec![
            Pose {
                x: Vec3::new(0.3, -0.2, 1.0),
                r: tau(Retraction::Exponential, &Vec3::new(0.4, -0.3, 0.9)),
            },
            Pose {
                x: Vec3::new(-0.5, 0.8, 0.1),
                r: tau(Retraction::Exponential, &Vec3::new(-1.1, 0.2, 0.5)),
            },
        ]
    }

    #[test]
    fn field_derivatives_match_finite_differences() {
        let bodies = vec![
            Body {
                mass: 1.0,
                inertia: Vec3::new(1.0, 2.0, 3.0),
            },
            Body {
                mass: 2.0,
                inertia: Vec3::new(0.5, 0.7, 1.1),
            },
        ];
        let sys = RigidBodySystem::new("t", bodies)
            .unwrap()
            .with_potential(Spring {
                a: 0,
                b: 1,
                stiffness: 1.7,
            })
            .with_potential(Alignment {
                a: 0,
                b: 1,
                stiffness: 0.9,
            })
            .with_potential(PointLoad {
                body: 1,
                offset: Vec3::new(0.1, 0.2, 0.4),
                direction: Vec3::z(),
                scale: 9.81,
            })
            .with_noise(LinearPosition {
                a: 0,
                b: Some(1),
                coefficient: Vec3::new(0.2, 0.0, -0.3),
            });
        assert!(sys.derivative_check(&poses(), 1e-5) < 1e-5);
    }

    #[test]
    fn pairing_gradient_matches_alignment() {
        // U = −tr(R_aᵀR_b) has ∂U/∂R_a = −R_b, so the pairing helper must agree
        // with the closed form used by `Alignment`.
        let ps = poses();
        let mut g = vec![BodyGradient::default(); 2];
        Alignment {
            a: 0,
            b: 1,
            stiffness: 1.0,
        }
        .accumulate_gradient(&ps, &mut g);
        let via_pairing = pairing_gradient(&(-ps[1].r.matrix()), &ps[0].r);
        assert!((g[0].dr - via_pairing).norm() < 1e-14);
    }

    #[test]
    fn legendre_constructors_agree() {
        let sys = RigidBodySystem::new(
            "one",
            vec![Body {
                mass: 2.0,
                inertia: Vec3::new(1.0, 2.0, 3.0),
            }],
        )
        .unwrap();
        let r = tau(Retraction::Cayley, &Vec3::new(0.3, 0.1, -0.7));
        let s = sys.state_from_momenta(0, Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), r, Vec3::new(0.2, -0.5, 1.0));
        let (lin, ang) = sys.legendre_defect(&[s]);
        assert!(lin < 1e-15 && ang < 1e-14);
    }

    #[test]
    fn invalid_bodies_rejected() {
        assert!(RigidBodySystem::new("none", vec![]).is_err());
        assert!(RigidBodySystem::new(
            "neg",
            vec![Body {
                mass: 1.0,
                inertia: Vec3::new(1.0, -1.0, 1.0)
            }]
        )
        .is_err());
    }

    #[test]
    fn left_trivialized_gradient_of_heavy_top() {
        let sys = RigidBodySystem::new(
            "top",
            vec![Body {
                mass: 1.0,
                inertia: Vec3::new(1.0, 1.0, 0.5),
            }],
        )
        .unwrap()
        .with_potential(PointLoad {
            body: 0,
            offset: Vec3::z(),
            direction: Vec3::z(),
            scale: 2.0,
        });
        let lie = LieBodySystem::from_rigid(sys).unwrap();
        let g = tau(Retraction::Exponential, &Vec3::new(0.3, -0.6, 0.2));
        let grad = lie.potential_gradient(&g);
        for y in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let e = 1e-6;
            let up = lie.potential(&(g * tau(Retraction::Exponential, &(y * e))));
            let dn = lie.potential(&(g * tau(Retraction::Exponential, &(y * -e))));
            assert!(((up - dn) / (2.0 * e) - grad.dot(&y)).abs() < 1e-8);
        }
    }
}
