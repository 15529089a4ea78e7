//! Named models, each built from a flat map of numeric parameters.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::mech::{Constraint, ForceField, Matrix, MechSystem, PhaseState, ScalarField, Symmetry, ThermalBath, Vector};
use super::rigid::{Alignment, Body, LinearPosition, PointLoad, RigidBodySystem, RigidDrag, Spring};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Configuration space Rⁿ.
    Vector,
    /// Products of SE(3).
    Rigid,
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

#[derive(Clone, Debug)]
pub struct ModelInfo {
    pub name: &'static str,
    pub kind: ModelKind,
    pub summary: &'static str,
    /// Which equations of motion the model instantiates.
    pub anchor: &'static str,
    pub params: &'static [ParamSpec],
    /// Symmetries declared with default parameters.
    pub symmetries: Vec<String>,
    pub constrained: bool,
}

#[derive(Clone, Debug)]
pub enum Model {
    Vector(MechSystem),
    Rigid(RigidBodySystem),
}

const fn p(name: &'static str, default: f64, doc: &'static str) -> ParamSpec {
    ParamSpec { name, default, doc }
}

const OSCILLATOR: &[ParamSpec] = &[
    p("mass", 1.0, "particle mass"),
    p("stiffness", 1.0, "spring constant"),
    p("sigma", 0.5, "additive noise amplitude on the momentum"),
];

const PENDULUM: &[ParamSpec] = &[
    p("length", 1.0, "rod length"),
    p("mass", 1.0, "bob mass"),
    p("gravity", 1.0, "gravitational acceleration"),
    p("sigma", 0.3, "horizontal stochastic forcing amplitude"),
];

const BALLISTIC: &[ParamSpec] = &[
    p("temperature", 1.0, "bath temperature k_BT"),
    p("drag", 0.5, "drag on the carriage momentum"),
    p("carriage_stiffness", 1.0, "restoring stiffness of the carriage"),
    p("pendulum_stiffness", 0.25, "gravity/length of the pendulum"),
    p("coupling", 0.05, "spring coupling carriage and pendulum"),
    p("anharmonic", 0.0, "quartic term of the pendulum potential"),
];

const TWO_BODY: &[ParamSpec] = &[
    p("dims", 1.0, "spatial dimension (1, 2 or 3)"),
    p("mass1", 1.0, "mass of particle 1"),
    p("mass2", 2.0, "mass of particle 2"),
    p("stiffness", 1.0, "harmonic coupling"),
    p("quartic", 0.5, "quartic coupling"),
    p("sigma", 0.5, "noise on the relative coordinate"),
    p(
        "anchor_sigma",
        0.0,
        "noise on the absolute position of particle 1 (breaks translation symmetry)",
    ),
];

const LATTICE: &[ParamSpec] = &[
    p("sites", 8.0, "number of mobile masses"),
    p("stiffness", 1.0, "nearest-neighbour spring constant"),
    p("quartic", 1.0, "nearest-neighbour quartic coefficient"),
    p("temperature", 1.0, "bath temperature k_BT on the first site"),
    p("drag", 0.0, "drag on the first site (0 = isolated lattice)"),
];

const RIGID_PAIR: &[ParamSpec] = &[
    p("bodies", 2.0, "number of bodies (1 or 2)"),
    p("mass", 1.0, "mass of each body"),
    p("inertia1", 1.0, "first principal moment"),
    p("inertia2", 2.0, "second principal moment"),
    p("inertia3", 3.0, "third principal moment"),
    p("spring", 1.0, "translational spring between the bodies"),
    p("alignment", 0.5, "orientation coupling -k tr(R1^T R2)"),
    p("load", 0.0, "gravity-like load on body 0 applied at offset (0,0,1)"),
    p("sigma", 0.2, "noise on the relative position"),
    p("torque_sigma", 0.0, "noise torque on body 0 (load-type potential)"),
    p("drag_translational", 0.0, "drag on linear momentum"),
    p("drag_rotational", 0.0, "drag on angular momentum"),
];

pub fn catalog() -> Vec<ModelInfo> {
    vec![
        ModelInfo {
            name: "oscillator",
            kind: ModelKind::Vector,
            summary: "harmonic oscillator with additive momentum noise, U = k q^2/2, gamma = sigma q",
            anchor: "stochastic Hamilton-Pontryagin equations on R^n",
            params: OSCILLATOR,
            symmetries: vec![],
            constrained: false,
        },
        ModelInfo {
            name: "constrained_pendulum",
            kind: ModelKind::Vector,
            summary: "particle in the plane held on a circle, g(q) = |q|^2 - l^2",
            anchor: "constrained stochastic Hamilton-Pontryagin equations",
            params: PENDULUM,
            symmetries: vec![],
            constrained: true,
        },
        ModelInfo {
            name: "ballistic_analog",
            kind: ModelKind::Vector,
            summary: "carriage with a hanging pendulum, noise and drag on the carriage momentum only",
            anchor: "Langevin-type dissipative drift with degenerate momentum diffusion",
            params: BALLISTIC,
            symmetries: vec![],
            constrained: false,
        },
        ModelInfo {
            name: "two_body",
            kind: ModelKind::Vector,
            summary: "two particles with a translation-invariant coupling and relative noise",
            anchor: "stochastic Noether theorem (translation symmetry)",
            params: TWO_BODY,
            symmetries: vec!["translation_x".into()],
            constrained: false,
        },
        ModelInfo {
            name: "lattice",
            kind: ModelKind::Vector,
            summary: "fixed-end spring-mass chain with quartic nearest-neighbour bonds",
            anchor: "time-averaged instantaneous temperature of a spring-mass lattice",
            params: LATTICE,
            symmetries: vec![],
            constrained: false,
        },
        ModelInfo {
            name: "rigid_pair",
            kind: ModelKind::Rigid,
            summary: "one or two rigid bodies coupled through position and orientation",
            anchor: "Langevin-type equations for multiple rigid bodies",
            params: RIGID_PAIR,
            symmetries: vec!["translation".into()],
            constrained: false,
        },
    ]
}

pub fn model_info(name: &str) -> Option<ModelInfo> {
    catalog().into_iter().find(|m| m.name == name)
}

/// Resolve `given` against the model's parameter schema, filling defaults and
/// rejecting unknown keys.
pub fn resolve_params(name: &str, given: &Params) -> Result<Params> {
    let info = model_info(name).ok_or_else(|| Error::invalid("model", format!("unknown model `{name}`")))?;
    for key in given.keys() {
        if !info.params.iter().any(|s| s.name == key) {
            return Err(Error::invalid(
                format!("model.params.{key}"),
                format!("not a parameter of `{name}`"),
            ));
        }
    }
    Ok(info
        .params
        .iter()
        .map(|s| (s.name.to_string(), given.get(s.name).copied().unwrap_or(s.default)))
        .collect())
}

pub fn build(name: &str, given: &Params) -> Result<Model> {
    let prm = resolve_params(name, given)?;
    let g = |k: &str| prm[k];
    Ok(match name {
        "oscillator" => Model::Vector(make_oscillator(g("mass"), g("stiffness"), g("sigma"))?),
        "constrained_pendulum" => Model::Vector(make_constrained_pendulum(
            g("length"),
            g("mass"),
            g("gravity"),
            g("sigma"),
        )?),
        "ballistic_analog" => Model::Vector(make_ballistic_analog(&BallisticParams {
            temperature: g("temperature"),
            drag: g("drag"),
            carriage_stiffness: g("carriage_stiffness"),
            pendulum_stiffness: g("pendulum_stiffness"),
            coupling: g("coupling"),
            anharmonic: g("anharmonic"),
        })?),
        "two_body" => Model::Vector(make_two_body(&TwoBodyParams {
            dims: as_count("dims", g("dims"))?,
            masses: (g("mass1"), g("mass2")),
            stiffness: g("stiffness"),
            quartic: g("quartic"),
            sigma: g("sigma"),
            anchor_sigma: g("anchor_sigma"),
        })?),
        "lattice" => Model::Vector(make_lattice(
            as_count("sites", g("sites"))?,
            g("stiffness"),
            g("quartic"),
            g("temperature"),
            g("drag"),
        )?),
        "rigid_pair" => {
            let inertia = Vec3::new(g("inertia1"), g("inertia2"), g("inertia3"));
            let k = as_count("bodies", g("bodies"))?;
            Model::Rigid(make_rigid_pair(&RigidPairParams {
                bodies: vec![
                    Body {
                        mass: g("mass"),
                        inertia
                    };
                    k
                ],
                spring: g("spring"),
                alignment: g("alignment"),
                load: g("load"),
                sigma: g("sigma"),
                torque_sigma: g("torque_sigma"),
                drag: RigidDrag {
                    translational: g("drag_translational"),
                    rotational: g("drag_rotational"),
                },
            })?)
        }
        _ => unreachable!("resolve_params validated the name"),
    })
}

fn as_count(name: &str, x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x < 1e6 {
        Ok(x as usize)
    } else {
        Err(Error::invalid(name, format!("expected a positive integer, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be non-negative, got {x}")))
    }
}

/// `U = ½κq²`, `γ = σq` on R¹: `dp = −κq dt + σ dW`.
pub fn make_oscillator(mass: f64, stiffness: f64, sigma: f64) -> Result<MechSystem> {
    positive("mass", mass)?;
    non_negative("stiffness", stiffness)?;
    let potential = ScalarField::new(
        move |q| 0.5 * stiffness * q[0] * q[0],
        move |q| Vector::from_element(1, stiffness * q[0]),
    )
    .with_hessian(move |_| Matrix::from_element(1, 1, stiffness));
    let mut b = MechSystem::builder("oscillator", Matrix::from_element(1, 1, mass)).potential(potential);
    if sigma != 0.0 {
        b = b.noise(ScalarField::linear(Vector::from_element(1, sigma)));
    }
    b.build()
}

/// Particle in R² on the circle `‖q‖² = l²` under gravity `U = m·g·q_y`
/// with tangential forcing `γ = σ q_x`.
pub fn make_constrained_pendulum(length: f64, mass: f64, gravity: f64, sigma: f64) -> Result<MechSystem> {
    positive("length", length)?;
    positive("mass", mass)?;
    let weight = mass * gravity;
    let potential = ScalarField::new(move |q| weight * q[1], move |_| Vector::from_vec(vec![0.0, weight]))
        .with_hessian(|_| Matrix::zeros(2, 2));
    let l2 = length * length;
    let constraint = Constraint::new(
        1,
        move |q| Vector::from_element(1, q.norm_squared() - l2),
        |q| Matrix::from_row_slice(1, 2, &[2.0 * q[0], 2.0 * q[1]]),
    );
    let mut b = MechSystem::builder("constrained_pendulum", Matrix::identity(2, 2) * mass)
        .potential(potential)
        .constraint(constraint);
    if sigma != 0.0 {
        b = b.noise(ScalarField::linear(Vector::from_vec(vec![sigma, 0.0])));
    }
    b.build()
}

/// Feasible pendulum state at angle `theta` from the downward vertical with
/// angular rate `theta_dot`.
pub fn pendulum_state(sys: &MechSystem, length: f64, theta: f64, theta_dot: f64) -> PhaseState {
    let q = Vector::from_vec(vec![length * theta.sin(), -length * theta.cos()]);
    let v = Vector::from_vec(vec![length * theta.cos() * theta_dot, length * theta.sin() * theta_dot]);
    PhaseState::from_velocity(sys, q, v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallisticParams {
    pub temperature: f64,
    pub drag: f64,
    pub carriage_stiffness: f64,
    pub pendulum_stiffness: f64,
    pub coupling: f64,
    pub anharmonic: f64,
}

impl Default for BallisticParams {
    fn default() -> Self {
        BallisticParams {
            temperature: 1.0,
            drag: 0.5,
            carriage_stiffness: 1.0,
            pendulum_stiffness: 0.25,
            coupling: 0.05,
            anharmonic: 0.0,
        }
    }
}

/// Two unit masses, a carriage `q₀` tied to a spring and a small-angle
/// pendulum `q₁` hanging from it:
///
/// ```text
/// U = ½κ_c q₀² + ½κ_p q₁² + ¼β q₁⁴ + ½κ (q₀ − q₁)²
/// ```
///
/// Drag `−c v₀` and the noise potential `γ = σ q₀` act on the carriage only, so
/// the momentum diffusion matrix is degenerate. `σ² = 2 c k_BT`.
pub fn make_ballistic_analog(prm: &BallisticParams) -> Result<MechSystem> {
    if !(prm.temperature > 0.0) {
        return Err(Error::InvalidTemperature(prm.temperature));
    }
    non_negative("drag", prm.drag)?;
    non_negative("carriage_stiffness", prm.carriage_stiffness)?;
    non_negative("pendulum_stiffness", prm.pendulum_stiffness)?;
    non_negative("coupling", prm.coupling)?;
    non_negative("anharmonic", prm.anharmonic)?;
    let BallisticParams {
        carriage_stiffness: kc,
        pendulum_stiffness: kp,
        coupling: k,
        anharmonic: beta,
        ..
    } = *prm;
    let sigma = (2.0 * prm.drag * prm.temperature).sqrt();
    let potential = ScalarField::new(
        move |q| {
            let d = q[0] - q[1];
            0.5 * kc * q[0] * q[0] + 0.5 * kp * q[1] * q[1] + 0.25 * beta * q[1].powi(4) + 0.5 * k * d * d
        },
        move |q| {
            let d = q[0] - q[1];
            Vector::from_vec(vec![kc * q[0] + k * d, kp * q[1] + beta * q[1].powi(3) - k * d])
        },
    )
    .with_hessian(move |q| Matrix::from_row_slice(2, 2, &[kc + k, -k, -k, kp + 3.0 * beta * q[1] * q[1] + k]));
    let drag = Matrix::from_row_slice(2, 2, &[prm.drag, 0.0, 0.0, 0.0]);
    let mut b = MechSystem::builder("ballistic_analog", Matrix::identity(2, 2))
        .potential(potential)
        .bath(ThermalBath {
            temperature: prm.temperature,
            drag: prm.drag,
            sigma,
        });
    if prm.drag > 0.0 {
        b = b
            .force(ForceField::LinearDrag(drag))
            .noise(ScalarField::linear(Vector::from_vec(vec![sigma, 0.0])));
    }
    b.build()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoBodyParams {
    pub dims: usize,
    pub masses: (f64, f64),
    pub stiffness: f64,
    pub quartic: f64,
    pub sigma: f64,
    pub anchor_sigma: f64,
}

impl Default for TwoBodyParams {
    fn default() -> Self {
        TwoBodyParams {
            dims: 1,
            masses: (1.0, 2.0),
            stiffness: 1.0,
            quartic: 0.5,
            sigma: 0.5,
            anchor_sigma: 0.0,
        }
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Two particles in R^d, `q = (x₁, x₂)`, with `U = ½κr² + ¼βr⁴`, `r = x₁ − x₂`,
/// and one relative noise channel `γ_j = σ r_j` per axis. A non-zero
/// `anchor_sigma` adds the channel `γ = σ_a x₁,₀`, which breaks the declared
/// translation symmetry on purpose.
pub fn make_two_body(prm: &TwoBodyParams) -> Result<MechSystem> {
    let d = prm.dims;
    if !(1..=3).contains(&d) {
        return Err(Error::invalid("dims", "must be 1, 2 or 3"));
    }
    positive("mass1", prm.masses.0)?;
    positive("mass2", prm.masses.1)?;
    let (k, beta) = (prm.stiffness, prm.quartic);
    let rel = move |q: &Vector| Vector::from_fn(d, |i, _| q[i] - q[d + i]);
    let potential = ScalarField::new(
        move |q| {
            let r2 = rel(q).norm_squared();
            0.5 * k * r2 + 0.25 * beta * r2 * r2
        },
        move |q| {
            let r = rel(q);
            let f = &r * (k + beta * r.norm_squared());
            let mut g = Vector::zeros(2 * d);
            g.rows_mut(0, d).copy_from(&f);
            g.rows_mut(d, d).copy_from(&(-f));
            g
        },
    )
    .with_hessian(move |q| {
        let r = rel(q);
        let block =
            nalgebra::DMatrix::identity(d, d) * (k + beta * r.norm_squared()) + &r * r.transpose() * (2.0 * beta);
        let mut h = Matrix::zeros(2 * d, 2 * d);
        h.view_mut((0, 0), (d, d)).copy_from(&block);
        h.view_mut((d, d), (d, d)).copy_from(&block);
        h.view_mut((0, d), (d, d)).copy_from(&(-&block));
        h.view_mut((d, 0), (d, d)).copy_from(&(-&block));
        h
    });
    let mut mass = Matrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        mass[(i, i)] = prm.masses.0;
        mass[(d + i, d + i)] = prm.masses.1;
    }
    let mut b = MechSystem::builder("two_body", mass).potential(potential);
    if prm.sigma != 0.0 {
        for i in 0..d {
            let mut c = Vector::zeros(2 * d);
            c[i] = prm.sigma;
            c[d + i] = -prm.sigma;
            b = b.noise(ScalarField::linear(c));
        }
    }
    if prm.anchor_sigma != 0.0 {
        let mut c = Vector::zeros(2 * d);
        c[0] = prm.anchor_sigma;
        b = b.noise(ScalarField::linear(c));
    }
    for (i, axis) in AXES.iter().enumerate().take(d) {
        let mut dir = Vector::zeros(2 * d);
        dir[i] = 1.0;
        dir[d + i] = 1.0;
        b = b.symmetry(Symmetry::translation(format!("translation_{axis}"), dir));
    }
    b.build()
}

/// Chain of `sites` unit masses between two walls, bonds
/// `½κ(Δ)² + ¼β(Δ)⁴`; optionally the first mass is coupled to a heat bath.
pub fn make_lattice(sites: usize, stiffness: f64, quartic: f64, temperature: f64, drag: f64) -> Result<MechSystem> {
    if sites == 0 {
        return Err(Error::invalid("sites", "at least one site is required"));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidTemperature(temperature));
    }
    non_negative("drag", drag)?;
    let n = sites;
    let (k, beta) = (stiffness, quartic);
    // bond j joins site j-1 and site j, sites -1 and n are the walls
    let bond = move |q: &Vector, j: usize| {
        let left = if j == 0 { 0.0 } else { q[j - 1] };
        let right = if j == n { 0.0 } else { q[j] };
        right - left
    };
    let potential = ScalarField::new(
        move |q| {
            (0..=n)
                .map(|j| {
                    let d = bond(q, j);
                    0.5 * k * d * d + 0.25 * beta * d.powi(4)
                })
                .sum()
        },
        move |q| {
            let mut g = Vector::zeros(n);
            for j in 0..=n {
                let d = bond(q, j);
                let f = k * d + beta * d.powi(3);
                if j < n {
                    g[j] += f;
                }
                if j > 0 {
                    g[j - 1] -= f;
                }
            }
            g
        },
    );
    let sigma = (2.0 * drag * temperature).sqrt();
    let mut b = MechSystem::builder("lattice", Matrix::identity(n, n))
        .potential(potential)
        .bath(ThermalBath {
            temperature,
            drag,
            sigma,
        });
    if drag > 0.0 {
        let mut dm = Matrix::zeros(n, n);
        dm[(0, 0)] = drag;
        let mut c = Vector::zeros(n);
        c[0] = sigma;
        b = b.force(ForceField::LinearDrag(dm)).noise(ScalarField::linear(c));
    }
    b.build()
}

/// Canonical initial state at temperature `kbt`: Maxwell momenta and a
/// configuration from a seeded random-walk Metropolis chain on `exp(−U/kbt)`
/// started at the origin.
pub fn thermal_state<R: Rng>(sys: &MechSystem, kbt: f64, rng: &mut R) -> PhaseState {
    let n = sys.dim();
    let chol = sys.mass().clone().cholesky().expect("mass matrix is positive definite");
    let z = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p = chol.l() * z * kbt.sqrt();

    let u = sys.potential();
    let curvature = u.hessian(&Vector::zeros(n));
    let widths = Vector::from_fn(n, |i, _| (kbt / curvature[(i, i)].max(1e-3)).sqrt());
    let mut q = Vector::zeros(n);
    let mut energy = u.value(&q);
    for _ in 0..400 {
        let step = Vector::from_fn(n, |i, _| 0.8 * widths[i] * rng.sample::<f64, _>(StandardNormal));
        let trial = &q + step;
        let e = u.value(&trial);
        if rng.random::<f64>() < (-(e - energy) / kbt).exp() {
            q = trial;
            energy = e;
        }
    }
    PhaseState::from_momentum(sys, q, p)
}

#[derive(Clone, Debug)]
pub struct RigidPairParams {
    pub bodies: Vec<Body>,
    pub spring: f64,
    pub alignment: f64,
    pub load: f64,
    pub sigma: f64,
    pub torque_sigma: f64,
    pub drag: RigidDrag,
}

impl Default for RigidPairParams {
    fn default() -> Self {
        RigidPairParams {
            bodies: vec![
                Body {
                    mass: 1.0,
                    inertia: Vec3::new(1.0, 2.0, 3.0),
                };
                2
            ],
            spring: 1.0,
            alignment: 0.5,
            load: 0.0,
            sigma: 0.2,
            torque_sigma: 0.0,
            drag: RigidDrag::default(),
        }
    }
}

/// One or two rigid bodies. With two bodies: spring `½κ‖x₁ − x₂‖²`, orientation
/// coupling `−κ_a tr(R₁ᵀR₂)` and three relative-position noise channels
/// `γ_j = σ (x₁ − x₂)_j`. A non-zero `load` adds `load · e₃ᵀ(R₀ e₃)` on body 0
/// and `torque_sigma` adds three torque channels `σ_τ e_jᵀ(R₀ e₃)`.
pub fn make_rigid_pair(prm: &RigidPairParams) -> Result<RigidBodySystem> {
    let k = prm.bodies.len();
    if !(1..=2).contains(&k) {
        return Err(Error::invalid("bodies", "rigid_pair holds one or two bodies"));
    }
    let mut sys = RigidBodySystem::new("rigid_pair", prm.bodies.clone())?;
    if k == 2 {
        if prm.spring != 0.0 {
            sys = sys.with_potential(Spring {
                a: 0,
                b: 1,
                stiffness: prm.spring,
            });
        }
        if prm.alignment != 0.0 {
            sys = sys.with_potential(Alignment {
                a: 0,
                b: 1,
                stiffness: prm.alignment,
            });
        }
        if prm.sigma != 0.0 {
            for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
                sys = sys.with_noise(LinearPosition {
                    a: 0,
                    b: Some(1),
                    coefficient: axis * prm.sigma,
                });
            }
        }
    }
    if prm.load != 0.0 {
        sys = sys.with_potential(PointLoad {
            body: 0,
            offset: Vec3::z(),
            direction: Vec3::z(),
            scale: prm.load,
        });
    }
    if prm.torque_sigma != 0.0 {
        for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
            sys = sys.with_noise(PointLoad {
                body: 0,
                offset: Vec3::z(),
                direction: axis,
                scale: prm.torque_sigma,
            });
        }
    }
    if prm.drag != RigidDrag::default() {
        non_negative("drag_translational", prm.drag.translational)?;
        non_negative("drag_rotational", prm.drag.rotational)?;
        sys = sys.with_drag(prm.drag);
    }
    Ok(sys)
}
