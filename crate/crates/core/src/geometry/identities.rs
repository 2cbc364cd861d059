//! Numerical checks of the chain-rule identities behind the rod kinetic
//! equation on the tangent bundle:
//!
//! * for x = a × y: ∇_y g = −a × ∇_x g and a·∇_y g = 0;
//! * for ṅ = ω × n: ∇_n f|_ω = ∇_m f − ω × ∇_ṅ f and ∇_ω f = n × ∇_ṅ f;
//! * (n × ∇_n)·g = −∇_n·(n × g), and the same with ∇_ω at fixed n.
//!
//! All derivatives are ambient central differences in ℝ³.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{UnitVector, Vec3};

fn grad<F: Fn(&Vec3) -> f64>(f: F, at: &Vec3, h: f64) -> Vec3 {
    let mut g = Vec3::zeros();
    for i in 0..3 {
        let mut plus = *at;
        let mut minus = *at;
        plus[i] += h;
        minus[i] -= h;
        g[i] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    g
}

// J[(i, k)] = ∂g_i/∂z_k
fn jacobian<G: Fn(&Vec3) -> Vec3>(g: G, at: &Vec3, h: f64) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut plus = *at;
        let mut minus = *at;
        plus[k] += h;
        minus[k] -= h;
        j.set_column(k, &((g(&plus) - g(&minus)) / (2.0 * h)));
    }
    j
}

fn div<G: Fn(&Vec3) -> Vec3>(g: G, at: &Vec3, h: f64) -> f64 {
    jacobian(g, at, h).trace()
}

// (n × ∇)·g = ε_ijk n_j ∂_k g_i
fn curl_dot(n: &Vec3, j: &Matrix3<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let row = Vec3::new(j[(i, 0)], j[(i, 1)], j[(i, 2)]);
        s += n.cross(&row)[i];
    }
    s
}

/// Residuals of the cross-product chain rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossChainResidual {
    /// |∇_y g(a×y) + a × ∇_x g|
    pub gradient: f64,
    /// |a·∇_y g(a×y)|
    pub axial: f64,
}

impl CrossChainResidual {
    pub fn max(&self) -> f64 {
        self.gradient.max(self.axial)
    }
}

pub fn cross_chain_identity_check<G>(a: &Vec3, g: G, y: &Vec3, h: f64) -> CrossChainResidual
where
    G: Fn(&Vec3) -> f64,
{
    let grad_y = grad(|yy| g(&a.cross(yy)), y, h);
    let grad_x = grad(&g, &a.cross(y), h);
    CrossChainResidual {
        gradient: (grad_y + a.cross(&grad_x)).norm(),
        axial: a.dot(&grad_y).abs(),
    }
}

/// Residuals of the tangent-bundle change of variables and the rotational
/// divergence identities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BundleResiduals {
    pub orientation_gradient: f64,
    pub angular_gradient: f64,
    pub rotational_divergence: f64,
    pub angular_divergence: f64,
}

impl BundleResiduals {
    pub fn max(&self) -> f64 {
        self.orientation_gradient
            .max(self.angular_gradient)
            .max(self.rotational_divergence)
            .max(self.angular_divergence)
    }
}

/// `f(m, ṅ)` is a scalar field on ℝ³×ℝ³ and `g(n, ω)` a vector field; both
/// are pulled back through (n, ω) ↦ (n, ω × n) where needed.
pub fn bundle_change_of_variables_check<F, G>(
    n: &UnitVector,
    omega: &Vec3,
    f: F,
    g: G,
    h: f64,
) -> BundleResiduals
where
    F: Fn(&Vec3, &Vec3) -> f64,
    G: Fn(&Vec3, &Vec3) -> Vec3,
{
    let n = n.as_vec();
    let ndot = omega.cross(n);

    let pulled = |nn: &Vec3, om: &Vec3| f(nn, &om.cross(nn));
    let grad_n = grad(|nn| pulled(nn, omega), n, h);
    let grad_w = grad(|om| pulled(n, om), omega, h);
    let grad_m = grad(|m| f(m, &ndot), n, h);
    let grad_ndot = grad(|v| f(n, v), &ndot, h);

    let orientation_gradient = (grad_n - (grad_m - omega.cross(&grad_ndot))).norm();
    let angular_gradient = (grad_w - n.cross(&grad_ndot)).norm();

    let jn = jacobian(|nn| g(nn, omega), n, h);
    let lhs_n = curl_dot(n, &jn);
    let rhs_n = -div(|nn| nn.cross(&g(nn, omega)), n, h);

    let jw = jacobian(|om| g(n, om), omega, h);
    let lhs_w = curl_dot(n, &jw);
    let rhs_w = -div(|om| n.cross(&g(n, om)), omega, h);

    BundleResiduals {
        orientation_gradient,
        angular_gradient,
        rotational_divergence: (lhs_n - rhs_n).abs(),
        angular_divergence: (lhs_w - rhs_w).abs(),
    }
}

/// A cubic polynomial on ℝ⁶ used as a test field:
/// c + b·z + zᵀAz + Σₖ tₖ (uₖ·z)³.
#[derive(Clone, Debug)]
pub struct PolyField {
    c: f64,
    b: [f64; 6],
    a: [[f64; 6]; 6],
    cubic: Vec<(f64, [f64; 6])>,
}

impl PolyField {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut u = || rng.random_range(-1.0..1.0);
        let c = u();
        let b = std::array::from_fn(|_| u());
        let a = std::array::from_fn(|_| std::array::from_fn(|_| 0.5 * u()));
        let cubic = (0..2)
            .map(|_| (0.5 * u(), std::array::from_fn(|_| u())))
            .collect();
        Self { c, b, a, cubic }
    }

    pub fn eval(&self, z: &[f64; 6]) -> f64 {
        let dot = |v: &[f64; 6]| v.iter().zip(z).map(|(p, q)| p * q).sum::<f64>();
        let mut quad = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                quad += z[i] * self.a[i][j] * z[j];
            }
        }
        let cub: f64 = self.cubic.iter().map(|(t, u)| t * dot(u).powi(3)).sum();
        self.c + dot(&self.b) + quad + cub
    }

    pub fn eval2(&self, x: &Vec3, y: &Vec3) -> f64 {
        self.eval(&[x.x, x.y, x.z, y.x, y.y, y.z])
    }
}

/// Scalar and vector polynomial fields for one battery entry.
#[derive(Clone, Debug)]
pub struct BatteryField {
    pub scalar: PolyField,
    pub vector: [PolyField; 3],
}

impl BatteryField {
    pub fn vector_at(&self, x: &Vec3, y: &Vec3) -> Vec3 {
        Vec3::new(
            self.vector[0].eval2(x, y),
            self.vector[1].eval2(x, y),
            self.vector[2].eval2(x, y),
        )
    }
}

pub const BATTERY_SIZE: usize = 20;

/// The fixed battery of polynomial fields used by the identity checks.
pub fn polynomial_battery() -> Vec<BatteryField> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_ba77);
    (0..BATTERY_SIZE)
        .map(|_| BatteryField {
            scalar: PolyField::random(&mut rng),
            vector: std::array::from_fn(|_| PolyField::random(&mut rng)),
        })
        .collect()
}
