//! Spring laws, imposed linear flows and the excluded-volume potential of a
//! rod suspension.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    rotational_gradient, tangent_project, TangentVector, UnitVector, Vec3, DEFAULT_FD_STEP,
};
use crate::quadrature::SphereQuadrature;
use crate::sph::{
    legendre_p, mode_count, mode_degree, real_sph_eval, real_sph_eval_with_gradient, SphGrid,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpringKind {
    Hookean,
    Fene,
}

/// Spring connecting the two beads of a dumbbell.
///
/// The force on the end-to-end vector is F = H n (Hookean) or
/// F = H n / (1 − |n|²/n0²) (FENE), and the potential satisfies F = ∇ₙU.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringModel {
    pub kind: SpringKind,
    pub h: f64,
    /// Maximum extension; unused for Hookean springs.
    pub n0: f64,
}

impl SpringModel {
    pub fn hookean(h: f64) -> Result<Self> {
        let s = Self {
            kind: SpringKind::Hookean,
            h,
            n0: f64::INFINITY,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn fene(h: f64, n0: f64) -> Result<Self> {
        let s = Self {
            kind: SpringKind::Fene,
            h,
            n0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(
                "H",
                format!("spring constant must be positive, got {}", self.h),
            ));
        }
        if self.kind == SpringKind::Fene && !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(invalid(
                "n0",
                format!("maximum extension must be positive, got {}", self.n0),
            ));
        }
        Ok(())
    }

    pub fn is_fene(&self) -> bool {
        self.kind == SpringKind::Fene
    }

    /// Whether |n|² lies strictly inside the admissible domain.
    pub fn in_domain(&self, r2: f64) -> bool {
        match self.kind {
            SpringKind::Hookean => r2.is_finite(),
            SpringKind::Fene => r2 < self.n0 * self.n0,
        }
    }

    fn domain_error(&self, r2: f64) -> Error {
        Error::FeneDomain {
            extension: r2.sqrt(),
            n0: self.n0,
        }
    }

    /// The scalar c with F(n) = c n, given r2 = |n|².
    #[inline]
    pub fn force_factor(&self, r2: f64) -> Result<f64> {
        match self.kind {
            SpringKind::Hookean => Ok(self.h),
            SpringKind::Fene => {
                let s = 1.0 - r2 / (self.n0 * self.n0);
                if s > 0.0 {
                    Ok(self.h / s)
                } else {
                    Err(self.domain_error(r2))
                }
            }
        }
    }

    pub fn force(&self, n: &Vec3) -> Result<Vec3> {
        Ok(n * self.force_factor(n.norm_squared())?)
    }

    /// U as a function of r2 = |n|².
    pub fn potential_r2(&self, r2: f64) -> Result<f64> {
        match self.kind {
            SpringKind::Hookean => Ok(0.5 * self.h * r2),
            SpringKind::Fene => {
                let s = 1.0 - r2 / (self.n0 * self.n0);
                if s > 0.0 {
                    Ok(-0.5 * self.h * self.n0 * self.n0 * s.ln())
                } else {
                    Err(self.domain_error(r2))
                }
            }
        }
    }

    pub fn potential(&self, n: &Vec3) -> Result<f64> {
        self.potential_r2(n.norm_squared())
    }

    /// Solves m + b·F(m) = rhs for m with b ≥ 0.
    ///
    /// F is radial, so m ∥ rhs and only |m| is unknown. For the FENE spring
    /// r(1 + bH/(1 − r²/n0²)) = |rhs| has exactly one root in [0, n0), which
    /// makes the semi-implicit spring update confining.
    pub fn implicit_solve(&self, rhs: &Vec3, b: f64) -> Vec3 {
        let rho = rhs.norm();
        if rho == 0.0 {
            return *rhs;
        }
        let c = b * self.h;
        match self.kind {
            SpringKind::Hookean => rhs / (1.0 + c),
            SpringKind::Fene => {
                let target = rho / self.n0;
                let g = |u: f64| u * (1.0 + c / (1.0 - u * u)) - target;
                let dg = |u: f64| {
                    let s = 1.0 - u * u;
                    1.0 + c * (1.0 + u * u) / (s * s)
                };
                let (mut lo, mut hi) = (0.0, (target / (1.0 + c)).min(1.0));
                let mut u = 0.5 * (lo + hi);
                for _ in 0..200 {
                    let gu = g(u);
                    if gu > 0.0 {
                        hi = u;
                    } else {
                        lo = u;
                    }
                    let newton = u - gu / dg(u);
                    let next = if newton > lo && newton < hi {
                        newton
                    } else {
                        0.5 * (lo + hi)
                    };
                    if (next - u).abs() <= 1e-16 * u.max(1e-300) || hi - lo <= 1e-16 {
                        u = next;
                        break;
                    }
                    u = next;
                }
                rhs * (u * self.n0 / rho)
            }
        }
    }
}

/// Spring force for an end-to-end vector of any dimension.
pub fn spring_force(n: &[f64], model: &SpringModel) -> Result<Vec<f64>> {
    let r2: f64 = n.iter().map(|v| v * v).sum();
    let c = model.force_factor(r2)?;
    Ok(n.iter().map(|v| c * v).collect())
}

pub fn spring_potential(n: &[f64], model: &SpringModel) -> Result<f64> {
    model.potential_r2(n.iter().map(|v| v * v).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    Quiescent,
    SimpleShear,
    PlanarExtension,
    GeneralLinear,
}

/// Imposed homogeneous flow u(x) = κ x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowField {
    pub kind: FlowKind,
    pub kappa: Matrix3<f64>,
}

impl FlowField {
    pub fn quiescent() -> Self {
        Self {
            kind: FlowKind::Quiescent,
            kappa: Matrix3::zeros(),
        }
    }

    /// u = (γ̇ x₂, 0, 0).
    pub fn simple_shear(rate: f64) -> Self {
        let mut kappa = Matrix3::zeros();
        kappa[(0, 1)] = rate;
        Self {
            kind: FlowKind::SimpleShear,
            kappa,
        }
    }

    /// u = (ε̇ x₁, −ε̇ x₂, 0).
    pub fn planar_extension(rate: f64) -> Self {
        Self {
            kind: FlowKind::PlanarExtension,
            kappa: Matrix3::from_diagonal(&Vec3::new(rate, -rate, 0.0)),
        }
    }

    pub fn general(kappa: Matrix3<f64>) -> Self {
        Self {
            kind: FlowKind::GeneralLinear,
            kappa,
        }
    }

    pub fn is_quiescent(&self) -> bool {
        self.kappa.iter().all(|v| *v == 0.0)
    }

    pub fn is_incompressible(&self, tol: f64) -> bool {
        self.kappa.trace().abs() <= tol
    }

    #[inline]
    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        self.kappa * x
    }

    /// Returns (u(x), ∇u) = (κx, κ).
    pub fn eval(&self, x: &Vec3) -> (Vec3, Matrix3<f64>) {
        (self.kappa * x, self.kappa)
    }
}

pub fn flow_eval(flow: &FlowField, x: &Vec3) -> (Vec3, Matrix3<f64>) {
    flow.eval(x)
}

/// Orientation density sampled at the nodes of a [`SphereQuadrature`].
#[derive(Clone, Debug, PartialEq)]
pub struct SphereDensity {
    pub n_theta: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
}

impl SphereDensity {
    pub fn from_fn<F: Fn(&UnitVector) -> f64>(quad: &SphereQuadrature, f: F) -> Self {
        Self {
            n_theta: quad.n_theta(),
            n_phi: quad.n_phi(),
            values: quad.nodes().iter().map(f).collect(),
        }
    }

    pub fn uniform(quad: &SphereQuadrature) -> Self {
        Self::from_fn(quad, |_| 0.25 / std::f64::consts::PI)
    }

    pub fn matches(&self, quad: &SphereQuadrature) -> bool {
        self.n_theta == quad.n_theta()
            && self.n_phi == quad.n_phi()
            && self.values.len() == quad.len()
    }

    pub fn mass(&self, quad: &SphereQuadrature) -> Result<f64> {
        if !self.matches(quad) {
            return Err(grid_mismatch(self, quad));
        }
        Ok(quad.integrate_values(&self.values))
    }
}

fn grid_mismatch(rho: &SphereDensity, quad: &SphereQuadrature) -> Error {
    Error::GridMismatch(format!(
        "density sampled on {}x{} nodes, quadrature has {}x{}",
        rho.n_theta,
        rho.n_phi,
        quad.n_theta(),
        quad.n_phi()
    ))
}

/// Eigenvalues λ_l of the kernel |n × n′| = √(1 − (n·n′)²) acting on degree-l
/// harmonics: ∫ |n × n′| Y(n′) dn′ = λ_l Y(n).
///
/// λ_l = 2π ∫ √(1−t²) P_l(t) dt, evaluated by Gauss–Chebyshev quadrature of
/// the second kind, which is exact for these polynomial integrands.
pub fn kernel_eigenvalues(l_max: usize) -> Vec<f64> {
    let k = l_max + 8;
    let mut lambda = vec![0.0; l_max + 1];
    for i in 1..=k {
        let a = i as f64 * std::f64::consts::PI / (k + 1) as f64;
        let w = std::f64::consts::PI / (k + 1) as f64 * a.sin().powi(2);
        let p = legendre_p(l_max, a.cos());
        for l in 0..=l_max {
            lambda[l] += 2.0 * std::f64::consts::PI * w * p[l];
        }
    }
    lambda
}

/// A potential on 𝕊² stored as real spherical-harmonic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    l_max: usize,
    coeffs: Vec<f64>,
}

impl PotentialField {
    pub fn new(l_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mode_count(l_max) {
            return Err(invalid(
                "coeffs",
                format!("expected {} coefficients", mode_count(l_max)),
            ));
        }
        Ok(Self { l_max, coeffs })
    }

    /// U(n) = −α P₂(n·d), an aligning Maier–Saupe-type field along d.
    pub fn aligning(strength: f64, director: &UnitVector) -> Self {
        // P₂(n·d) = (4π/5) Σ_m Y_2m(n) Y_2m(d)
        let yd = real_sph_eval(2, director);
        let mut coeffs = vec![0.0; mode_count(2)];
        for k in 4..9 {
            coeffs[k] = -strength * 4.0 * std::f64::consts::PI / 5.0 * yd[k];
        }
        Self { l_max: 2, coeffs }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self, n: &UnitVector) -> f64 {
        real_sph_eval(self.l_max, n)
            .iter()
            .zip(&self.coeffs)
            .map(|(y, c)| y * c)
            .sum()
    }

    /// ℛU(n) from the analytic derivatives of the harmonics.
    pub fn rotational_gradient(&self, n: &UnitVector) -> Vec3 {
        let (_, g) = real_sph_eval_with_gradient(self.l_max, n);
        g.iter().zip(&self.coeffs).map(|(g, c)| g * *c).sum()
    }
}

/// Excluded-volume potential U(n) = strength · ∫ |n × n′| ρ(n′) dn′.
///
/// The density is first projected onto harmonics of degree ≤ L with
/// L = min(n_theta − 1, (n_phi − 1)/2), for which the projection is exact;
/// the kernel then acts diagonally. For densities of degree ≤ L this equals
/// the exact integral; for rougher densities it is the integral against the
/// degree-L truncation of the kernel.
#[derive(Clone, Debug)]
pub struct OnsagerPotential {
    strength: f64,
    grid: SphGrid,
    lambda: Vec<f64>,
}

impl OnsagerPotential {
    pub fn new(strength: f64, quad: SphereQuadrature) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(invalid(
                "strength",
                format!("must be finite and non-negative, got {strength}"),
            ));
        }
        let l_max = (quad.n_theta() - 1).min((quad.n_phi() - 1) / 2);
        let grid = SphGrid::new(l_max, quad)?;
        Ok(Self {
            strength,
            grid,
            lambda: kernel_eigenvalues(l_max),
        })
    }

    /// Default 32×64 product quadrature.
    pub fn with_default_quadrature(strength: f64) -> Result<Self> {
        Self::new(strength, SphereQuadrature::default())
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        self.grid.quadrature()
    }

    pub fn l_max(&self) -> usize {
        self.grid.l_max()
    }

    /// The potential generated by `rho` as a harmonic expansion.
    pub fn potential_field(&self, rho: &SphereDensity) -> Result<PotentialField> {
        if !rho.matches(self.quadrature()) {
            return Err(grid_mismatch(rho, self.quadrature()));
        }
        let mut c = self.grid.analyze(&rho.values);
        for (k, ck) in c.iter_mut().enumerate() {
            let (l, _) = mode_degree(k);
            *ck *= self.strength * self.lambda[l];
        }
        PotentialField::new(self.grid.l_max(), c)
    }

    pub fn potential(&self, rho: &SphereDensity, n: &UnitVector) -> Result<f64> {
        Ok(self.potential_field(rho)?.value(n))
    }

    /// −ℛU(n), by central differences of the potential in the sphere chart.
    pub fn torque(&self, rho: &SphereDensity, n: &UnitVector) -> Result<TangentVector> {
        let field = self.potential_field(rho)?;
        let g = rotational_gradient(|m| field.value(m), n, DEFAULT_FD_STEP);
        Ok(tangent_project(&(-g), n))
    }
}

pub fn onsager_potential(
    rho: &SphereDensity,
    n: &UnitVector,
    pot: &OnsagerPotential,
) -> Result<f64> {
    pot.potential(rho, n)
}

pub fn onsager_torque(
    rho: &SphereDensity,
    n: &UnitVector,
    pot: &OnsagerPotential,
) -> Result<TangentVector> {
    pot.torque(rho, n)
}
