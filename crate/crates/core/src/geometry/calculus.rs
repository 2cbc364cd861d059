//! Finite-difference rotational gradient and surface divergence in (θ, φ).
//!
//! ℛ = n × ∇ₙ = e_φ ∂_θ − (e_θ / sin θ) ∂_φ, written out in Cartesian
//! components as
//!
//! ```text
//! ℛ = ( −cosφ cosθ/sinθ ∂_φ − sinφ ∂_θ,
//!       −sinφ cosθ/sinθ ∂_φ + cosφ ∂_θ,
//!        ∂_φ )
//! ```
//!
//! Both operators carry 1/sin θ. Points with sin θ below
//! [`POLE_CHART_THRESHOLD`](super::POLE_CHART_THRESHOLD) are evaluated in a
//! chart rotated by a quarter turn about e₂, which puts them near the equator.
//! The operators commute with rotations, so the result is rotated back.

use super::{pole_chart, spherical_basis, SphCoord, UnitVector, Vec3, POLE_CHART_THRESHOLD};

fn sin_theta(n: &UnitVector) -> f64 {
    let v = n.as_vec();
    (v.x * v.x + v.y * v.y).sqrt()
}

/// ℛf at `n` by 2nd-order central differences of step `h` (radians).
pub fn rotational_gradient<F>(f: F, n: &UnitVector, h: f64) -> Vec3
where
    F: Fn(&UnitVector) -> f64,
{
    if sin_theta(n) < POLE_CHART_THRESHOLD {
        let r = pole_chart();
        let g = |m: &UnitVector| {
            f(&UnitVector::renormalized(
                r.inverse_transform_vector(m.as_vec()),
            ))
        };
        let m = UnitVector::renormalized(r * n.as_vec());
        return r.inverse_transform_vector(&chart_rotational_gradient(g, &m, h));
    }
    chart_rotational_gradient(f, n, h)
}

fn chart_rotational_gradient<F>(f: F, n: &UnitVector, h: f64) -> Vec3
where
    F: Fn(&UnitVector) -> f64,
{
    let c = n.to_sph();
    let at = |t: f64, p: f64| f(&SphCoord::new(t, p).to_unit());
    let d_theta = (at(c.theta + h, c.phi) - at(c.theta - h, c.phi)) / (2.0 * h);
    let d_phi = (at(c.theta, c.phi + h) - at(c.theta, c.phi - h)) / (2.0 * h);
    let (st, ct) = c.theta.sin_cos();
    let (sp, cp) = c.phi.sin_cos();
    Vec3::new(
        -cp * ct / st * d_phi - sp * d_theta,
        -sp * ct / st * d_phi + cp * d_theta,
        d_phi,
    )
}

/// Surface divergence (1/sinθ) ∂_θ(sinθ A_θ) + (1/sinθ) ∂_φ A_φ of a tangent
/// field given in ambient components.
pub fn sphere_divergence<A>(field: A, c: SphCoord, h: f64) -> f64
where
    A: Fn(&UnitVector) -> Vec3,
{
    let n = c.to_unit();
    if sin_theta(&n) < POLE_CHART_THRESHOLD {
        let r = pole_chart();
        let rotated = |m: &UnitVector| {
            let back = UnitVector::renormalized(r.inverse_transform_vector(m.as_vec()));
            r * field(&back)
        };
        let m = UnitVector::renormalized(r * n.as_vec());
        return chart_divergence(rotated, m.to_sph(), h);
    }
    chart_divergence(field, c, h)
}

fn chart_divergence<A>(field: A, c: SphCoord, h: f64) -> f64
where
    A: Fn(&UnitVector) -> Vec3,
{
    let a_theta = |t: f64, p: f64| {
        let b = spherical_basis(SphCoord::new(t, p));
        t.sin() * field(&b.n).dot(&b.e_theta)
    };
    let a_phi = |t: f64, p: f64| {
        let b = spherical_basis(SphCoord::new(t, p));
        field(&b.n).dot(&b.e_phi)
    };
    let d_theta = (a_theta(c.theta + h, c.phi) - a_theta(c.theta - h, c.phi)) / (2.0 * h);
    let d_phi = (a_phi(c.theta, c.phi + h) - a_phi(c.theta, c.phi - h)) / (2.0 * h);
    (d_theta + d_phi) / c.theta.sin()
}

/// ℛ·A = Σᵢ (ℛAᵢ)ᵢ for an ambient vector field A on the sphere.
pub fn rotational_divergence<A>(field: A, n: &UnitVector, h: f64) -> f64
where
    A: Fn(&UnitVector) -> Vec3,
{
    (0..3)
        .map(|i| rotational_gradient(|m| field(m)[i], n, h)[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_FD_STEP as H;
    use crate::quadrature::SphereQuadrature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_unit(rng: &mut impl Rng) -> UnitVector {
        let z: f64 = rng.random_range(-1.0..1.0);
        let p: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        UnitVector::from_xyz(s * p.cos(), s * p.sin(), z).unwrap()
    }

    #[test]
    fn gradient_of_linear_function_is_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = random_unit(&mut rng);
            let a = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let g = rotational_gradient(|m| m.dot(&a), &n, H);
            assert!((g - n.as_vec().cross(&a)).norm() < 1e-8, "{g:?}");
        }
    }

    #[test]
    fn gradient_of_e3_component() {
        let n = UnitVector::from_xyz(0.2, -0.5, 0.7).unwrap();
        let g = rotational_gradient(|m| m.as_vec().z, &n, H);
        let v = n.as_vec();
        assert!((g - Vec3::new(v.y, -v.x, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let n = UnitVector::from_xyz(1.0, 1.0, 0.0).unwrap();
        assert!(rotational_gradient(|_| 1.0, &n, H).norm() < 1e-12);
    }

    #[test]
    fn gradient_at_pole_of_even_function() {
        let g = rotational_gradient(|m| m.as_vec().x.powi(2), &UnitVector::e3(), H);
        assert!(g.norm() < 1e-8);
        let g = rotational_gradient(|m| m.as_vec().x.powi(2), &-UnitVector::e3(), H);
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn gradient_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = random_unit(&mut rng);
            let f = |m: &UnitVector| {
                let v = m.as_vec();
                v.x * v.y * v.y + (2.0 * v.z).sin() + v.x.exp()
            };
            let g = rotational_gradient(f, &n, H);
            assert!(g.dot(n.as_vec()).abs() < 1e-9);
        }
    }

    #[test]
    fn divergence_of_e_phi_is_zero() {
        let field = |m: &UnitVector| spherical_basis(m.to_sph()).e_phi;
        for &(t, p) in &[(0.7, 0.1), (1.5, 4.0), (2.9, 2.0)] {
            assert!(sphere_divergence(field, SphCoord::new(t, p), H).abs() < 1e-8);
        }
    }

    #[test]
    fn divergence_of_sin_theta_e_theta() {
        let field = |m: &UnitVector| {
            let b = spherical_basis(m.to_sph());
            m.to_sph().theta.sin() * b.e_theta
        };
        for &(t, p) in &[(0.7, 0.1), (1.2, 4.0), (2.5, 2.0)] {
            let d = sphere_divergence(field, SphCoord::new(t, p), H);
            assert!((d - 2.0 * f64::cos(t)).abs() < 1e-8, "{d}");
        }
        // in the rotated chart near the pole, the field is still smooth there
        // (it is the projection of −e₃), so the analytic value still applies
        let d = sphere_divergence(field, SphCoord::new(0.05, 1.0), H);
        assert!((d - 2.0 * 0.05f64.cos()).abs() < 1e-7, "{d}");
    }

    #[test]
    fn divergence_of_rotational_gradient_integrates_to_zero() {
        let quad = SphereQuadrature::new(24, 48).unwrap();
        let field = |m: &UnitVector| m.as_vec().cross(&Vec3::z());
        let total: f64 = quad
            .nodes()
            .iter()
            .zip(quad.weights())
            .map(|(n, w)| w * sphere_divergence(field, n.to_sph(), H))
            .sum();
        assert!(total.abs() < 1e-6);
    }

    #[test]
    fn rotational_divergence_of_tangent_field_integrates_to_zero() {
        let quad = SphereQuadrature::new(24, 48).unwrap();
        let field = |m: &UnitVector| {
            let v = m.as_vec();
            crate::geometry::tangent_project(&Vec3::new(v.y * v.z, v.x.powi(3), 1.0 + v.x), m)
                .into_inner()
        };
        let total: f64 = quad
            .nodes()
            .iter()
            .zip(quad.weights())
            .map(|(n, w)| w * rotational_divergence(field, n, H))
            .sum();
        assert!(total.abs() < 1e-6, "{total}");
    }

    #[test]
    fn laplacian_of_p2_is_minus_six_p2() {
        // ℛ·ℛ P₂(n·e₃) = −6 P₂
        let p2 = |m: &UnitVector| 0.5 * (3.0 * m.as_vec().z.powi(2) - 1.0);
        let n = UnitVector::from_xyz(0.3, 0.4, 0.5).unwrap();
        let h = 1e-4;
        let lap = rotational_divergence(|m| rotational_gradient(p2, m, h), &n, h);
        assert!((lap + 6.0 * p2(&n)).abs() < 1e-5, "{lap}");
    }
}
