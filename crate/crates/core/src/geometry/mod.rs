//! Sphere and tangent-bundle primitives.
//!
//! Orientations of rigid rods live on the unit sphere 𝕊², angular velocities
//! on its tangent bundle T𝕊² = {(n, ω) : |n| = 1, ω·n = 0}. This module holds
//! the coordinate charts, projections and rotations the engines build on; the
//! differential operators live in [`calculus`] and the vector-calculus
//! identities used by the rod kinetic model are checked numerically in
//! [`identities`].

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{invalid, Result};

pub mod calculus;
pub mod identities;

pub use calculus::{rotational_divergence, rotational_gradient, sphere_divergence};
pub use identities::{bundle_change_of_variables_check, cross_chain_identity_check};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Default central-difference step, in radians for chart derivatives and in
/// ambient units for the ℝ³ identity checks.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Below this value of sin θ a derivative is evaluated in a rotated chart.
pub const POLE_CHART_THRESHOLD: f64 = 0.5;

/// A point on 𝕊².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVector(Vec3);

impl UnitVector {
    /// Normalizes `v`. Fails for zero or non-finite input.
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(invalid("n", format!("cannot normalize {v:?}")));
        }
        Ok(Self(v / norm))
    }

    /// Wraps a vector the caller knows to be of unit length, renormalizing
    /// to clean up rounding drift.
    pub fn renormalized(v: Vec3) -> Self {
        Self(v / v.norm())
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vec3::new(x, y, z))
    }

    pub fn e1() -> Self {
        Self(Vec3::x())
    }

    pub fn e2() -> Self {
        Self(Vec3::y())
    }

    pub fn e3() -> Self {
        Self(Vec3::z())
    }

    #[inline]
    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    #[inline]
    pub fn dot(&self, v: &Vec3) -> f64 {
        self.0.dot(v)
    }

    pub fn to_sph(&self) -> SphCoord {
        let n = &self.0;
        let rho = (n.x * n.x + n.y * n.y).sqrt();
        SphCoord::new(rho.atan2(n.z), n.y.atan2(n.x))
    }

    /// The tangent projector Id − n⊗n.
    pub fn tangent_projector(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.0 * self.0.transpose()
    }
}

impl std::ops::Neg for UnitVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

/// A vector in the tangent plane T_n𝕊².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    v: Vec3,
}

impl TangentVector {
    pub fn zero(base: UnitVector) -> Self {
        Self {
            base,
            v: Vec3::zeros(),
        }
    }

    /// Builds a tangent vector by projecting `v` onto T_n𝕊².
    pub fn projected(v: Vec3, base: UnitVector) -> Self {
        tangent_project(&v, &base)
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.v
    }

    pub fn into_inner(self) -> Vec3 {
        self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }
}

/// Polar/azimuthal coordinates, θ ∈ [0, π], φ ∈ [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphCoord {
    pub theta: f64,
    pub phi: f64,
}

impl SphCoord {
    /// Wraps φ into [0, 2π); θ is taken as given.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    pub fn to_unit(&self) -> UnitVector {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        UnitVector::renormalized(Vec3::new(st * cp, st * sp, ct))
    }
}

/// The moving frame {n, e_θ, e_φ} of a chart point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalBasis {
    pub n: UnitVector,
    pub e_theta: Vec3,
    pub e_phi: Vec3,
    /// Set when sin θ < 1e-14: the frame is still orthonormal but φ is not
    /// determined by n, so e_θ and e_φ follow the supplied φ by convention.
    pub degenerate: bool,
}

/// Evaluates n, e_θ = (cosθcosφ, cosθsinφ, −sinθ) and e_φ = (−sinφ, cosφ, 0).
pub fn spherical_basis(c: SphCoord) -> SphericalBasis {
    let (st, ct) = c.theta.sin_cos();
    let (sp, cp) = c.phi.sin_cos();
    SphericalBasis {
        n: UnitVector::renormalized(Vec3::new(st * cp, st * sp, ct)),
        e_theta: Vec3::new(ct * cp, ct * sp, -st),
        e_phi: Vec3::new(-sp, cp, 0.0),
        degenerate: st.abs() < 1e-14,
    }
}

/// Returns (Id − n⊗n) v.
pub fn tangent_project(v: &Vec3, n: &UnitVector) -> TangentVector {
    let nn = n.as_vec();
    let mut t = v - nn * nn.dot(v);
    // one correction pass removes the O(eps·|v|) normal residue
    t -= nn * nn.dot(&t);
    TangentVector { base: *n, v: t }
}

/// Returns K ∈ SO(3) with K e₃ = n.
///
/// Away from the south pole K is the minimal rotation about e₃ × n. For
/// n·e₃ < −0.9 the rotation is composed with the half turn about e₁, which is
/// exactly what is returned for n = −e₃.
pub fn rotate_to_pole(n: &UnitVector) -> Rotation3<f64> {
    let v = n.as_vec();
    if v.z >= -0.9 {
        Rotation3::from_matrix_unchecked(minimal_rotation_from_e3(v))
    } else {
        // m = Rx(π)ᵀ n lies near +e₃
        let m = Vec3::new(v.x, -v.y, -v.z);
        let half_turn = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        Rotation3::from_matrix_unchecked(half_turn * minimal_rotation_from_e3(&m))
    }
}

// Rodrigues form I + [w]× + [w]×²/(1 + c) with w = e₃ × n, c = n·e₃.
fn minimal_rotation_from_e3(n: &Vec3) -> Matrix3<f64> {
    let w = Vec3::new(-n.y, n.x, 0.0);
    let c = n.z;
    let wx = w.cross_matrix();
    Matrix3::identity() + wx + wx * wx / (1.0 + c)
}

/// Moves n along the great circle with initial velocity `v` (tangent at n)
/// for unit time: n cos|v| + v̂ sin|v|.
pub fn exp_map(n: &UnitVector, v: &Vec3) -> UnitVector {
    let angle = v.norm();
    if angle < 1e-300 {
        return *n;
    }
    let (s, c) = angle.sin_cos();
    UnitVector::renormalized(n.as_vec() * c + v * (s / angle))
}

/// Fixed chart rotation (quarter turn about e₂) that carries the poles to the
/// equator.
pub(crate) fn pole_chart() -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), PI / 2.0)
}
