//! Mechanical systems on Rⁿ with separable Lagrangian `½vᵀMv − U(q)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type ForceFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// A configuration-dependent scalar with its gradient and, optionally, Hessian.
#[derive(Clone)]
pub struct ScalarField {
    value: ScalarFn,
    gradient: VectorFn,
    hessian: Option<MatrixFn>,
}

impl ScalarField {
    pub fn new(
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// The field `c·q` for a fixed covector `c`.
    pub fn linear(coefficients: Vector) -> Self {
        let n = coefficients.len();
        let c1 = coefficients.clone();
        let c2 = coefficients;
        ScalarField::new(move |q| c1.dot(q), move |_| c2.clone()).with_hessian(move |_| Matrix::zeros(n, n))
    }

    pub fn zero(n: usize) -> Self {
        ScalarField::new(|_| 0.0, move |_| Vector::zeros(n)).with_hessian(move |_| Matrix::zeros(n, n))
    }

    pub fn value(&self, q: &Vector) -> f64 {
        (self.value)(q)
    }

    pub fn gradient(&self, q: &Vector) -> Vector {
        (self.gradient)(q)
    }

    /// Analytic Hessian when available, else central differences of the gradient.
    pub fn hessian(&self, q: &Vector) -> Matrix {
        match &self.hessian {
            Some(h) => h(q),
            None => fd_jacobian(&*self.gradient, q, 1e-6),
        }
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

/// Central-difference Jacobian of a vector map.
pub(crate) fn fd_jacobian(f: &dyn Fn(&Vector) -> Vector, x: &Vector, step: f64) -> Matrix {
    let n = x.len();
    let f0 = f(x);
    let mut jac = Matrix::zeros(f0.len(), n);
    let mut xp = x.clone();
    for j in 0..n {
        let e = step * (1.0 + x[j].abs());
        xp[j] = x[j] + e;
        let fp = f(&xp);
        xp[j] = x[j] - e;
        let fm = f(&xp);
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * e)));
    }
    jac
}

/// Nonconservative force `F(q, v)` entering through the Lagrange–d'Alembert term.
#[derive(Clone)]
pub enum ForceField {
    /// `F = -D v` for a constant symmetric positive semi-definite drag matrix.
    LinearDrag(Matrix),
    General(ForceFn),
}

impl ForceField {
    pub fn eval(&self, q: &Vector, v: &Vector) -> Vector {
        match self {
            ForceField::LinearDrag(d) => -(d * v),
            ForceField::General(f) => f(q, v),
        }
    }

    /// `(∂F/∂q, ∂F/∂v)`.
    pub fn jacobians(&self, q: &Vector, v: &Vector) -> (Matrix, Matrix) {
        match self {
            ForceField::LinearDrag(d) => (Matrix::zeros(d.nrows(), q.len()), -d.clone()),
            ForceField::General(f) => {
                let dq = fd_jacobian(&|x: &Vector| f(x, v), q, 1e-6);
                let dv = fd_jacobian(&|x: &Vector| f(q, x), v, 1e-6);
                (dq, dv)
            }
        }
    }
}

impl fmt::Debug for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceField::LinearDrag(d) => write!(f, "LinearDrag({:?})", d.as_slice()),
            ForceField::General(_) => write!(f, "General(..)"),
        }
    }
}

/// Holonomic constraint `g(q) = 0` with values in Rᵏ.
#[derive(Clone)]
pub struct Constraint {
    count: usize,
    value: VectorFn,
    jacobian: MatrixFn,
}

impl Constraint {
    pub fn new(
        count: usize,
        value: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jacobian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Constraint {
            count,
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self, q: &Vector) -> Vector {
        (self.value)(q)
    }

    /// `∂g/∂q`, a k×n matrix.
    pub fn jacobian(&self, q: &Vector) -> Matrix {
        (self.jacobian)(q)
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Constraint(k = {})", self.count)
    }
}

/// A one-parameter symmetry with infinitesimal generator `ξ_Q(q) = A q + b`.
/// Its momentum map is `J(q, p) = ⟨p, A q + b⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symmetry {
    pub name: String,
    pub linear: Matrix,
    pub offset: Vector,
}

impl Symmetry {
    pub fn translation(name: impl Into<String>, direction: Vector) -> Self {
        let n = direction.len();
        Symmetry {
            name: name.into(),
            linear: Matrix::zeros(n, n),
            offset: direction,
        }
    }

    pub fn rotation(name: impl Into<String>, generator: Matrix) -> Self {
        let n = generator.nrows();
        Symmetry {
            name: name.into(),
            linear: generator,
            offset: Vector::zeros(n),
        }
    }

    pub fn momentum(&self, q: &Vector, p: &Vector) -> f64 {
        p.dot(&(&self.linear * q + &self.offset))
    }
}

/// Target of a fluctuation–dissipation pairing `σ² = 2 c k_BT`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalBath {
    pub temperature: f64,
    pub drag: f64,
    pub sigma: f64,
}

/// Point `(q, v, p)` of the Pontryagin bundle over Rⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub q: Vector,
    pub v: Vector,
    pub p: Vector,
}

impl PhaseState {
    /// State with `v = M⁻¹p`.
    pub fn from_momentum(sys: &MechSystem, q: Vector, p: Vector) -> Self {
        let v = sys.velocity(&p);
        PhaseState { q, v, p }
    }

    /// State with `p = Mv`.
    pub fn from_velocity(sys: &MechSystem, q: Vector, v: Vector) -> Self {
        let p = sys.mass() * &v;
        PhaseState { q, v, p }
    }

    /// `‖p − Mv‖`.
    pub fn legendre_defect(&self, sys: &MechSystem) -> f64 {
        (&self.p - sys.mass() * &self.v).norm()
    }

    /// Euclidean norm of the canonical coordinates `(q, p)`.
    pub fn norm(&self) -> f64 {
        (self.q.norm_squared() + self.p.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.q
            .iter()
            .chain(self.p.iter())
            .chain(self.v.iter())
            .all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug)]
pub struct MechSystem {
    name: String,
    mass: Matrix,
    mass_inv: Matrix,
    potential: ScalarField,
    noise: Vec<ScalarField>,
    force: Option<ForceField>,
    constraint: Option<Constraint>,
    symmetries: Vec<Symmetry>,
    bath: Option<ThermalBath>,
}

impl MechSystem {
    pub fn builder(name: impl Into<String>, mass: Matrix) -> MechSystemBuilder {
        let n = mass.nrows();
        MechSystemBuilder {
            name: name.into(),
            mass,
            potential: ScalarField::zero(n),
            noise: Vec::new(),
            force: None,
            constraint: None,
            symmetries: Vec::new(),
            bath: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    pub fn mass_inv(&self) -> &Matrix {
        &self.mass_inv
    }

    pub fn velocity(&self, p: &Vector) -> Vector {
        &self.mass_inv * p
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn noise(&self) -> &[ScalarField] {
        &self.noise
    }

    pub fn noise_channels(&self) -> usize {
        self.noise.len()
    }

    pub fn force(&self) -> Option<&ForceField> {
        self.force.as_ref()
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    pub fn symmetries(&self) -> &[Symmetry] {
        &self.symmetries
    }

    pub fn symmetry(&self, name: &str) -> Option<&Symmetry> {
        self.symmetries.iter().find(|s| s.name == name)
    }

    pub fn bath(&self) -> Option<&ThermalBath> {
        self.bath.as_ref()
    }

    /// `∂𝓛/∂q = −∇U(q)`.
    pub fn lagrangian_dq(&self, q: &Vector) -> Vector {
        -self.potential.gradient(q)
    }

    pub fn kinetic_energy(&self, p: &Vector) -> f64 {
        0.5 * p.dot(&(&self.mass_inv * p))
    }

    pub fn hamiltonian(&self, state: &PhaseState) -> f64 {
        self.kinetic_energy(&state.p) + self.potential.value(&state.q)
    }

    /// `Σᵢ ∇γᵢ(q) ΔWᵢ`.
    pub fn noise_impulse(&self, q: &Vector, increments: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (field, dw) in self.noise.iter().zip(increments) {
            out.axpy(*dw, &field.gradient(q), 1.0);
        }
        out
    }

    /// Same system with every noise potential removed.
    pub fn without_noise(&self) -> MechSystem {
        MechSystem {
            noise: Vec::new(),
            ..self.clone()
        }
    }

    /// Same system with every noise potential replaced by the zero field, so the
    /// channel count (and hence increment consumption) is unchanged.
    pub fn with_zeroed_noise(&self) -> MechSystem {
        let n = self.dim();
        MechSystem {
            noise: self.noise.iter().map(|_| ScalarField::zero(n)).collect(),
            ..self.clone()
        }
    }

    /// Largest relative mismatch between analytic gradients (potential and
    /// every noise potential) and central differences over `points` random
    /// configurations drawn with standard deviation `spread`.
    pub fn gradient_check<R: Rng>(&self, rng: &mut R, points: usize, spread: f64, step: f64) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let q = Vector::from_fn(n, |_, _| spread * rng.sample::<f64, _>(StandardNormal));
            for field in std::iter::once(&self.potential).chain(self.noise.iter()) {
                let analytic = field.gradient(&q);
                let mut qp = q.clone();
                for j in 0..n {
                    qp[j] = q[j] + step;
                    let up = field.value(&qp);
                    qp[j] = q[j] - step;
                    let um = field.value(&qp);
                    qp[j] = q[j];
                    let fd = (up - um) / (2.0 * step);
                    let err = (fd - analytic[j]).abs() / (1.0 + analytic[j].abs());
                    worst = worst.max(err);
                }
            }
        }
        worst
    }
}

pub struct MechSystemBuilder {
    name: String,
    mass: Matrix,
    potential: ScalarField,
    noise: Vec<ScalarField>,
    force: Option<ForceField>,
    constraint: Option<Constraint>,
    symmetries: Vec<Symmetry>,
    bath: Option<ThermalBath>,
}

impl MechSystemBuilder {
    pub fn potential(mut self, field: ScalarField) -> Self {
        self.potential = field;
        self
    }

    pub fn noise(mut self, field: ScalarField) -> Self {
        self.noise.push(field);
        self
    }

    pub fn force(mut self, force: ForceField) -> Self {
        self.force = Some(force);
        self
    }

    pub fn constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetries.push(symmetry);
        self
    }

    pub fn bath(mut self, bath: ThermalBath) -> Self {
        self.bath = Some(bath);
        self
    }

    pub fn build(self) -> Result<MechSystem> {
        let m = &self.mass;
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::invalid("mass", "mass matrix must be square and non-empty"));
        }
        if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
            return Err(Error::invalid("mass", "mass matrix must be symmetric"));
        }
        let min_eig = m.clone().symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(Error::invalid(
                "mass",
                format!("mass matrix must be positive definite (min eigenvalue {min_eig})"),
            ));
        }
        let mass_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("mass", "mass matrix is singular"))?;
        Ok(MechSystem {
            name: self.name,
            mass: self.mass,
            mass_inv,
            potential: self.potential,
            noise: self.noise,
            force: self.force,
            constraint: self.constraint,
            symmetries: self.symmetries,
            bath: self.bath,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_mass() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(MechSystem::builder("bad", m).build().is_err());
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(MechSystem::builder("asym", m).build().is_err());
    }

    #[test]
    fn legendre_consistent_constructors() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let sys = MechSystem::builder("s", m).build().unwrap();
        let s = PhaseState::from_momentum(&sys, Vector::zeros(2), Vector::from_vec(vec![1.0, -2.0]));
        assert!(s.legendre_defect(&sys) < 1e-14);
        let t = PhaseState::from_velocity(&sys, Vector::zeros(2), s.v.clone());
        assert!((t.p - s.p).norm() < 1e-14);
    }

    #[test]
    fn fd_hessian_fallback() {
        let f = ScalarField::new(
            |q| q[0].powi(3) + q[0] * q[1],
            |q| Vector::from_vec(vec![3.0 * q[0] * q[0] + q[1], q[0]]),
        );
        let q = Vector::from_vec(vec![0.7, -0.2]);
        let h = f.hessian(&q);
        assert!((h[(0, 0)] - 4.2).abs() < 1e-6);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn momentum_map_of_translation() {
        let s = Symmetry::translation("x", Vector::from_vec(vec![1.0, 1.0]));
        let q = Vector::from_vec(vec![3.0, 4.0]);
        let p = Vector::from_vec(vec![0.5, -0.25]);
        assert_eq!(s.momentum(&q, &p), 0.25);
    }
}
