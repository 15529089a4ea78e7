//! SO(3) machinery used by the Lie-group schemes.
//!
//! Vectors in R³ double as elements of 𝔰𝔬(3) through [`hat`]. Two retractions
//! τ: 𝔰𝔬(3) → SO(3) are provided, the exponential map (Rodrigues' formula) and
//! the Cayley map `(I - ξ̂/2)⁻¹(I + ξ̂/2)`, together with their inverses and the
//! right-trivialized tangent of τ⁻¹:
//!
//! ```text
//! τ(ξ + εδ) = (I + ε·(dτ_ξ δ)^) τ(ξ) + O(ε²),     dτ⁻¹_ξ = (dτ_ξ)⁻¹
//! ```
//!
//! so that `τ(εη)·τ(ξ) = τ(ξ + ε·dτ⁻¹_ξ η) + O(ε²)`. On 𝔰𝔬(3) the adjoint
//! action `ad_ξ` is `hat(ξ)`, which gives the closed forms
//!
//! ```text
//! dexp⁻¹_ξ = I - ξ̂/2 + (1 - (θ/2)·cot(θ/2))/θ² · ξ̂²,   θ = |ξ|
//! dcay⁻¹_ξ = I - ξ̂/2 + ξ ξᵀ/4
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle the trigonometric coefficients switch to Taylor series.
const SMALL_ANGLE: f64 = 1e-4;

/// Distance from π inside which the principal exponential logarithm is refused.
const EXP_CUT_LOCUS_GUARD: f64 = 1e-8;

/// Skew matrix of `v`, so that `hat(v) * w == v.cross(&w)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Fails when `m` is not skew-symmetric to 1e-10.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let asymmetry = (m + m.transpose()).norm();
    if asymmetry > 1e-10 * m.norm().max(1.0) {
        return Err(Error::NonSkewInput { asymmetry });
    }
    Ok(vee_unchecked(m))
}

/// Axial vector of the skew part of `m`: `vee((m - mᵀ)/2)`.
pub fn axial(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

fn vee_unchecked(m: &Mat3) -> Vec3 {
    axial(m)
}

/// A rotation matrix. Construction through [`Rotation::from_matrix`] checks
/// `RᵀR = I` and `det R = +1` to 1e-10.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation({:?})", self.0.as_slice())
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let r = Rotation(m);
        let defect = r.orthogonality_defect();
        if defect > 1e-10 || (m.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(
                "rotation",
                format!("matrix is not in SO(3) (|RᵀR - I| = {defect:.3e})"),
            ));
        }
        Ok(r)
    }

    /// Rotation by `angle` about the (normalized) `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        tau(Retraction::Exponential, &(axis * (angle / n)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    /// Closest rotation in the Frobenius sense (polar factor).
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut d = Mat3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Rotation(u * d * v_t)
    }

    /// Re-orthonormalize only if the drift exceeds `threshold`. Returns whether
    /// a projection happened.
    pub fn reorthonormalize(&mut self, threshold: f64) -> bool {
        if self.orthogonality_defect() > threshold {
            *self = Self::project(&self.0);
            true
        } else {
            false
        }
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rotation> for &'a Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Choice of local coordinates τ: 𝔰𝔬(3) → SO(3).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Retraction {
    Exponential,
    #[default]
    Cayley,
}

impl Retraction {
    pub fn name(self) -> &'static str {
        match self {
            Retraction::Exponential => "exponential",
            Retraction::Cayley => "cayley",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Some(Retraction::Exponential),
            "cay" | "cayley" => Some(Retraction::Cayley),
            _ => None,
        }
    }
}

/// `sin θ / θ` and `(1 − cos θ)/θ²`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    }
}

pub fn tau(kind: Retraction, xi: &Vec3) -> Rotation {
    let k = hat(xi);
    let k2 = k * k;
    let m = match kind {
        Retraction::Exponential => {
            let (a, b) = rodrigues_coefficients(xi.norm());
            Mat3::identity() + k * a + k2 * b
        }
        Retraction::Cayley => {
            let c = 4.0 / (4.0 + xi.norm_squared());
            Mat3::identity() + (k + k2 * 0.5) * c
        }
    };
    Rotation(m)
}

pub fn tau_inv(kind: Retraction, r: &Rotation) -> Result<Vec3> {
    let m = r.matrix();
    let trace = m.trace();
    match kind {
        Retraction::Cayley => {
            let denom = 1.0 + trace;
            if denom.abs() < 1e-12 {
                return Err(Error::OutOfDomain {
                    reason: "trace(R) = -1 (half-turn) is singular for the Cayley map",
                });
            }
            // vee(R - Rᵀ) = 2·axial(R)
            Ok(axial(m) * (4.0 / denom))
        }
        Retraction::Exponential => {
            let w = axial(m);
            let sin_t = w.norm();
            let cos_t = (0.5 * (trace - 1.0)).clamp(-1.0, 1.0);
            let theta = sin_t.atan2(cos_t);
            if PI - theta < EXP_CUT_LOCUS_GUARD {
                return Err(Error::OutOfDomain {
                    reason: "rotation angle within 1e-8 of pi",
                });
            }
            if theta < SMALL_ANGLE {
                let t2 = theta * theta;
                return Ok(w * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
            }
            if cos_t > -0.9 {
                return Ok(w * (theta / sin_t));
            }
            // Near a half-turn the skew part is ill-conditioned; recover the axis
            // from the symmetric part (R + Rᵀ)/2 − cos θ·I = (1 − cos θ)·a aᵀ.
            let s = (m + m.transpose()) * 0.5 - Mat3::identity() * cos_t;
            let col = (0..3).max_by(|&i, &j| s[(i, i)].total_cmp(&s[(j, j)])).unwrap_or(0);
            let mut axis = s.column(col).into_owned();
            axis /= axis.norm();
            if axis.dot(&w) < 0.0 {
                axis = -axis;
            }
            Ok(axis * theta)
        }
    }
}

/// Right-trivialized tangent of τ⁻¹ at `xi`, as a 3×3 matrix.
pub fn dtau_inv(kind: Retraction, xi: &Vec3) -> Mat3 {
    let k = hat(xi);
    match kind {
        Retraction::Cayley => Mat3::identity() - k * 0.5 + xi * xi.transpose() * 0.25,
        Retraction::Exponential => {
            let theta = xi.norm();
            let c = if theta < SMALL_ANGLE {
                let t2 = theta * theta;
                1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
            } else {
                let half = 0.5 * theta;
                (1.0 - half * half.cos() / half.sin()) / (theta * theta)
            };
            Mat3::identity() - k * 0.5 + k * k * c
        }
    }
}

/// `(dτ⁻¹_ξ)* μ`, the dual of [`dtau_inv`] applied to a momentum.
pub fn dtau_inv_dual(kind: Retraction, xi: &Vec3, mu: &Vec3) -> Vec3 {
    dtau_inv(kind, xi).transpose() * mu
}

/// The vector `w` with `wᵀy = tr(ŷ A)` for all `y`.
pub fn trace_pairing(a: &Mat3) -> Vec3 {
    -2.0 * axial(a)
}
