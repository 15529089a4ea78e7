//! Newton iteration for the small dense systems arising in implicit steps.

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::systems::mech::{fd_jacobian, Matrix, Vector};

/// Iterations taken at full step before the solver switches to half steps.
const UNDAMPED_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Convergence when `‖r‖∞ ≤ tol · scale`.
    pub tol: f64,
    pub scale: f64,
    pub max_iter: usize,
    /// Central-difference step used when no Jacobian is supplied.
    pub fd_step: f64,
}

impl NewtonOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        NewtonOptions {
            tol,
            scale: 1.0,
            max_iter,
            fd_step: 1e-7,
        }
    }

    pub fn scaled(self, scale: f64) -> Self {
        NewtonOptions { scale, ..self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSolution {
    pub x: Vector,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve `residual(x) = 0` starting from `x0`.
///
/// Once the tolerance is met one further step is attempted and kept only if it
/// lowers the residual, which pushes well-conditioned problems down to
/// roundoff. After [`UNDAMPED_ITERATIONS`] full steps the update is halved.
pub fn solve(
    residual: &dyn Fn(&Vector) -> Vector,
    jacobian: Option<&dyn Fn(&Vector) -> Matrix>,
    x0: Vector,
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let threshold = opts.tol * opts.scale;
    let mut x = x0;
    let mut r = residual(&x);
    let mut norm = r.amax();
    let mut iterations = 0;
    let mut converged = norm <= threshold;
    let mut polished = false;
    while !(converged && polished) {
        if !converged && iterations >= opts.max_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        let jac = match jacobian {
            Some(j) => j(&x),
            None => fd_jacobian(residual, &x, opts.fd_step),
        };
        let Some(dx) = jac.lu().solve(&r) else {
            if converged {
                break;
            }
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        };
        let damping = if iterations >= UNDAMPED_ITERATIONS { 0.5 } else { 1.0 };
        let trial = &x - dx * damping;
        let r_trial = residual(&trial);
        let n_trial = r_trial.amax();
        iterations += 1;
        if converged {
            polished = true;
            if n_trial < norm {
                x = trial;
                r = r_trial;
                norm = n_trial;
            }
        } else {
            x = trial;
            r = r_trial;
            norm = n_trial;
            if !norm.is_finite() {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: norm,
                });
            }
            converged = norm <= threshold;
        }
    }
    Ok(NewtonSolution {
        x,
        iterations,
        residual: norm,
    })
}

/// Solve `(dτ⁻¹_{hw})ᵀ A w = rhs` for `w`, where `dtau` evaluates the
/// trivialized tangent. Used by both rotational schemes.
pub(crate) fn solve_dual_momentum(
    dtau: &dyn Fn(&Vec3) -> Mat3,
    a: &Mat3,
    rhs: &Vec3,
    h: f64,
    opts: &NewtonOptions,
) -> Result<Vec3> {
    let to3 = |x: &Vector| Vec3::new(x[0], x[1], x[2]);
    let residual = |x: &Vector| {
        let w = to3(x);
        let r = dtau(&(w * h)).transpose() * (a * w) - rhs;
        Vector::from_column_slice(r.as_slice())
    };
    let guess = a.try_inverse().map(|ai| ai * rhs).unwrap_or(*rhs);
    let scale = 1.0 + rhs.amax();
    let sol = solve(
        &residual,
        None,
        Vector::from_column_slice(guess.as_slice()),
        &NewtonOptions {
            fd_step: 1e-6 * (1.0 + guess.amax()),
            ..opts.scaled(scale)
        },
    )?;
    Ok(to3(&sol.x))
}
