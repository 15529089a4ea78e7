//! Pathwise symplecticity of one-step maps with frozen noise increments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::integrators::{Integrable, Method, StepperConfig};
use crate::noise::keyed_rng;
use crate::systems::mech::{Matrix, MechSystem, PhaseState, Vector};

const DOMAIN_SYMPLECTIC: u64 = 0x5359_4d50;

#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticityReport {
    pub method: Method,
    pub samples: usize,
    /// Largest `‖DFᵀ J DF − J‖_F` over the samples.
    pub max_defect: f64,
    /// Smallest defect over the samples.
    pub min_defect: f64,
    pub mean_defect: f64,
    pub fd_step: f64,
}

/// Canonical structure matrix `[[0, I], [−I, 0]]` of size `2n`.
pub fn canonical_structure(n: usize) -> Matrix {
    let mut j = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Central-difference Jacobian of `(q, p) ↦ (q', p')` for one step with the
/// given frozen increments.
pub fn one_step_jacobian(
    sys: &MechSystem,
    method: Method,
    state: &PhaseState,
    increments: &[f64],
    cfg: &StepperConfig,
    fd_step: f64,
) -> Result<Matrix> {
    let n = sys.dim();
    let pack = |s: &PhaseState| {
        let mut z = Vector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(&s.q);
        z.rows_mut(n, n).copy_from(&s.p);
        z
    };
    let z0 = pack(state);
    let map = |z: &Vector| -> Result<Vector> {
        let s = PhaseState::from_momentum(sys, z.rows(0, n).into_owned(), z.rows(n, n).into_owned());
        Ok(pack(&sys.step(method, &s, increments, cfg)?.0))
    };
    let mut jac = Matrix::zeros(2 * n, 2 * n);
    let mut z = z0.clone();
    for j in 0..2 * n {
        z[j] = z0[j] + fd_step;
        let plus = map(&z)?;
        z[j] = z0[j] - fd_step;
        let minus = map(&z)?;
        z[j] = z0[j];
        jac.set_column(j, &((plus - minus) / (2.0 * fd_step)));
    }
    Ok(jac)
}

/// `‖DFᵀ J DF − J‖_F` at one (state, increments) sample.
pub fn symplectic_defect(
    sys: &MechSystem,
    method: Method,
    state: &PhaseState,
    increments: &[f64],
    cfg: &StepperConfig,
    fd_step: f64,
) -> Result<f64> {
    let df = one_step_jacobian(sys, method, state, increments, cfg, fd_step)?;
    let j = canonical_structure(sys.dim());
    Ok((df.transpose() * &j * df - j).norm())
}

/// Defects at `n_samples` random states (standard normal `q`, `p`) and frozen
/// increments drawn from `N(0, h)`, seeded by `seed`.
pub fn check_symplectic(
    sys: &MechSystem,
    method: Method,
    cfg: &StepperConfig,
    n_samples: usize,
    fd_step: f64,
    seed: u64,
) -> Result<SymplecticityReport> {
    if sys.constraint().is_some() {
        return Err(Error::Unsupported(
            "the symplecticity check applies to unconstrained systems".into(),
        ));
    }
    if !(fd_step > 0.0) {
        return Err(Error::invalid("fd_step", "must be positive"));
    }
    let n = sys.dim();
    let mut rng = keyed_rng(seed, DOMAIN_SYMPLECTIC, 0, 0);
    let mut normal = move || rng.sample::<f64, _>(StandardNormal);
    let mut max_defect: f64 = 0.0;
    let mut min_defect = f64::INFINITY;
    let mut total = 0.0;
    for _ in 0..n_samples {
        let q = Vector::from_fn(n, |_, _| normal());
        let p = Vector::from_fn(n, |_, _| normal());
        let incs: Vec<f64> = (0..sys.noise_channels()).map(|_| cfg.h.sqrt() * normal()).collect();
        let state = PhaseState::from_momentum(sys, q, p);
        let d = symplectic_defect(sys, method, &state, &incs, cfg, fd_step)?;
        max_defect = max_defect.max(d);
        min_defect = min_defect.min(d);
        total += d;
    }
    Ok(SymplecticityReport {
        method,
        samples: n_samples,
        max_defect,
        min_defect: if n_samples > 0 { min_defect } else { 0.0 },
        mean_defect: if n_samples > 0 { total / n_samples as f64 } else { 0.0 },
        fd_step,
    })
}
