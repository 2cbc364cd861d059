//! Doi (Smoluchowski) equation for the orientation density of rigid rods,
//!
//!   ∂ₜρ + ℛ·((n × κn) ρ) = D_r ℛ·(ℛρ + ρ ℛU/k_BT),
//!
//! by a Galerkin method in real spherical harmonics. Rotational diffusion
//! is diagonal (eigenvalue −l(l+1)) and is integrated exactly; flow and
//! potential terms are evaluated on a quadrature grid that integrates the
//! triple products exactly, inside a Lawson (integrating-factor) RK4 step.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::forces::{kernel_eigenvalues, FlowField, PotentialField};
use crate::geometry::{UnitVector, Vec3};
use crate::sph::{mode_count, mode_degree, mode_index, SphGrid};

use super::limit::NEGATIVITY_TOLERANCE;

#[derive(Clone, Debug, PartialEq)]
pub enum DoiPotential {
    None,
    /// A prescribed U(n).
    Fixed(PotentialField),
    /// The self-consistent U = α ∫|n × n′| ρ(n′) dn′.
    Onsager {
        strength: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoiParams {
    pub d_r: f64,
    pub kbt: f64,
    pub flow: FlowField,
    pub potential: DoiPotential,
}

impl DoiParams {
    pub fn free(d_r: f64) -> Self {
        Self {
            d_r,
            kbt: 1.0,
            flow: FlowField::quiescent(),
            potential: DoiPotential::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_r > 0.0 && self.d_r.is_finite()) {
            return Err(invalid(
                "D_r",
                format!("must be positive, got {}", self.d_r),
            ));
        }
        if !(self.kbt > 0.0 && self.kbt.is_finite()) {
            return Err(invalid(
                "kBT",
                format!("must be positive, got {}", self.kbt),
            ));
        }
        if let DoiPotential::Onsager { strength } = self.potential {
            if !(strength >= 0.0 && strength.is_finite()) {
                return Err(invalid(
                    "strength",
                    format!("must be non-negative, got {strength}"),
                ));
            }
        }
        Ok(())
    }
}

/// ∫ρ Y_00 = c_00, so unit mass means c_00 = 1/√(4π).
fn unit_mass_c00() -> f64 {
    1.0 / (4.0 * PI).sqrt()
}

#[derive(Clone, Debug)]
pub struct DoiSolver {
    params: DoiParams,
    grid: SphGrid,
    lambda: Vec<f64>,
    // l(l+1) per mode
    eig: Vec<f64>,
    // (n × κn) at the nodes, in (e_θ, e_φ) components
    flow_theta: Vec<f64>,
    flow_phi: Vec<f64>,
    fixed_rgrad: Option<Vec<Vec3>>,
}

impl DoiSolver {
    pub fn new(params: DoiParams, l_max: usize) -> Result<Self> {
        params.validate()?;
        if l_max < 2 {
            return Err(invalid("l_max", format!("must be at least 2, got {l_max}")));
        }
        let grid = SphGrid::for_cubic_products(l_max)?;
        let kappa = params.flow.kappa;
        let (mut flow_theta, mut flow_phi) = (Vec::new(), Vec::new());
        for (k, n) in grid.quadrature().nodes().iter().enumerate() {
            let v = n.as_vec().cross(&(kappa * n.as_vec()));
            flow_theta.push(v.dot(&grid.e_theta()[k]));
            flow_phi.push(v.dot(&grid.e_phi()[k]));
        }
        let fixed_rgrad = match &params.potential {
            DoiPotential::Fixed(u) => {
                let mut c = vec![0.0; mode_count(l_max)];
                for (k, &v) in u.coeffs().iter().enumerate() {
                    let (l, _) = mode_degree(k);
                    if l > l_max && v != 0.0 {
                        return Err(invalid(
                            "potential",
                            format!("degree {} exceeds the solver's l_max {l_max}", u.l_max()),
                        ));
                    }
                    if l <= l_max {
                        c[k] = v;
                    }
                }
                Some(grid.synthesize_rgrad(&c))
            }
            _ => None,
        };
        let eig = (0..mode_count(l_max))
            .map(|k| {
                let l = mode_degree(k).0 as f64;
                l * (l + 1.0)
            })
            .collect();
        Ok(Self {
            params,
            lambda: kernel_eigenvalues(l_max),
            grid,
            eig,
            flow_theta,
            flow_phi,
            fixed_rgrad,
        })
    }

    pub fn params(&self) -> &DoiParams {
        &self.params
    }

    pub fn grid(&self) -> &SphGrid {
        &self.grid
    }

    pub fn l_max(&self) -> usize {
        self.grid.l_max()
    }

    /// Coefficients of the degree-l_max projection of `f`, scaled to unit mass.
    pub fn project<F: Fn(&UnitVector) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        let vals: Vec<f64> = self.grid.quadrature().nodes().iter().map(f).collect();
        let mut c = self.grid.analyze(&vals);
        if !(c[0] > 0.0 && c[0].is_finite()) {
            return Err(invalid(
                "rho0",
                "must have positive finite mass".to_string(),
            ));
        }
        let s = unit_mass_c00() / c[0];
        for v in c.iter_mut() {
            *v *= s;
        }
        Ok(c)
    }

    pub fn uniform(&self) -> Vec<f64> {
        let mut c = vec![0.0; mode_count(self.l_max())];
        c[0] = unit_mass_c00();
        c
    }

    pub fn values(&self, c: &[f64]) -> Vec<f64> {
        self.grid.synthesize(c)
    }

    pub fn mass(&self, c: &[f64]) -> f64 {
        c[0] * (4.0 * PI).sqrt()
    }

    /// ⟨P_l(n·e₃)⟩ = √(4π/(2l+1)) c_l0.
    pub fn zonal_moment(&self, c: &[f64], l: usize) -> f64 {
        (4.0 * PI / (2 * l + 1) as f64).sqrt() * c[mode_index(l, 0)]
    }

    /// ⟨n ⊗ n⟩ by quadrature.
    pub fn second_moment(&self, c: &[f64]) -> Matrix3<f64> {
        let v = self.values(c);
        let q = self.grid.quadrature();
        let mut m = Matrix3::zeros();
        for ((n, w), r) in q.nodes().iter().zip(q.weights()).zip(&v) {
            m += n.as_vec() * n.as_vec().transpose() * (w * r);
        }
        m
    }

    /// ∫ ρ ln ρ by quadrature; nonpositive node values contribute zero.
    pub fn entropy_functional(&self, c: &[f64]) -> f64 {
        let v = self.values(c);
        let w = self.grid.quadrature().weights();
        v.iter()
            .zip(w)
            .map(|(r, w)| if *r > 0.0 { w * r * r.ln() } else { 0.0 })
            .sum()
    }

    fn potential_rgrad(&self, c: &[f64]) -> Option<Vec<Vec3>> {
        match &self.params.potential {
            DoiPotential::None => None,
            DoiPotential::Fixed(_) => self.fixed_rgrad.clone(),
            DoiPotential::Onsager { strength } => {
                let u = self.onsager_coeffs(c, *strength);
                Some(self.grid.synthesize_rgrad(&u))
            }
        }
    }

    fn onsager_coeffs(&self, c: &[f64], strength: f64) -> Vec<f64> {
        c.iter()
            .enumerate()
            .map(|(k, v)| strength * self.lambda[mode_degree(k).0] * v)
            .collect()
    }

    /// Flow and potential terms in coefficient space.
    fn nonlinear(&self, c: &[f64]) -> Vec<f64> {
        let rho = self.values(c);
        let n = rho.len();
        let mut vt: Vec<f64> = (0..n).map(|k| self.flow_theta[k] * rho[k]).collect();
        let mut vp: Vec<f64> = (0..n).map(|k| self.flow_phi[k] * rho[k]).collect();
        if let Some(g) = self.potential_rgrad(c) {
            let s = self.params.d_r / self.params.kbt;
            for k in 0..n {
                vt[k] -= s * rho[k] * g[k].dot(&self.grid.e_theta()[k]);
                vp[k] -= s * rho[k] * g[k].dot(&self.grid.e_phi()[k]);
            }
        }
        self.grid.analyze_rdiv(&vt, &vp)
    }

    fn decay(&self, h: f64) -> Vec<f64> {
        self.eig
            .iter()
            .map(|e| (-self.params.d_r * e * h).exp())
            .collect()
    }

    /// One integrating-factor RK4 step.
    pub fn step(&self, c: &[f64], h: f64) -> Vec<f64> {
        let e1 = self.decay(h);
        let e2 = self.decay(0.5 * h);
        let n = c.len();
        let k1 = self.nonlinear(c);
        let a: Vec<f64> = (0..n).map(|i| e2[i] * (c[i] + 0.5 * h * k1[i])).collect();
        let k2 = self.nonlinear(&a);
        let b: Vec<f64> = (0..n).map(|i| e2[i] * c[i] + 0.5 * h * k2[i]).collect();
        let k3 = self.nonlinear(&b);
        let d: Vec<f64> = (0..n).map(|i| e1[i] * c[i] + h * e2[i] * k3[i]).collect();
        let k4 = self.nonlinear(&d);
        (0..n)
            .map(|i| {
                e1[i] * c[i] + h / 6.0 * (e1[i] * k1[i] + 2.0 * e2[i] * (k2[i] + k3[i]) + k4[i])
            })
            .collect()
    }

    /// Fixed steps of at most `dt` up to `t_final`. Aborts if the density
    /// drops below −1e-12 at a node.
    pub fn advance(&self, c: &[f64], t_final: f64, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let n = (t_final / dt).ceil().max(0.0) as usize;
        let mut c = c.to_vec();
        if n == 0 {
            return Ok(c);
        }
        let h = t_final / n as f64;
        for _ in 0..n {
            c = self.step(&c, h);
            self.check(&c)?;
        }
        Ok(c)
    }

    fn check(&self, c: &[f64]) -> Result<()> {
        for (cell, v) in self.values(c).into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    trajectory: cell,
                    step: 0,
                });
            }
            if v < -NEGATIVITY_TOLERANCE {
                return Err(Error::NegativeDensity { value: v, cell });
            }
        }
        Ok(())
    }
}

/// Advances `rho0` (harmonic coefficients of degree ≤ l_max) to `t_final`.
pub fn solve_doi_limit(
    rho0: &[f64],
    params: &DoiParams,
    t_final: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let l_max = (rho0.len() as f64).sqrt() as usize - 1;
    if mode_count(l_max) != rho0.len() {
        return Err(Error::GridMismatch(format!(
            "{} coefficients is not (l_max + 1)²",
            rho0.len()
        )));
    }
    let solver = DoiSolver::new(params.clone(), l_max)?;
    solver.check(rho0)?;
    solver.advance(rho0, t_final, dt)
}

/// Scalar order parameter S = (3/2) λ_max(⟨nn⟩ − I/3) and its director.
pub fn order_parameter(second_moment: &Matrix3<f64>) -> (f64, Vec3) {
    let q = second_moment - Matrix3::identity() * (second_moment.trace() / 3.0);
    let eig = SymmetricEigen::new(q);
    let i = eig.eigenvalues.imax();
    (
        1.5 * eig.eigenvalues[i],
        eig.eigenvectors.column(i).into_owned(),
    )
}

/// Result of a self-consistent Onsager solve.
#[derive(Clone, Debug)]
pub struct OnsagerState {
    pub strength: f64,
    pub coeffs: Vec<f64>,
    /// Node values ρ = exp(−U[ρ]/k_BT)/Z.
    pub density: Vec<f64>,
    pub order: f64,
    /// |S(ρ) − S(exp(−U[ρ]/k_BT)/Z)|.
    pub self_consistency: f64,
    pub iterations: usize,
}

/// Stationary Onsager density at u = 0 by damped fixed-point iteration of
/// ρ ↦ exp(−U[ρ]/k_BT)/Z, with U[ρ] built from the degree-l_max projection
/// of ρ. `initial` holds node values on the solver grid.
pub fn onsager_steady_state(
    solver: &DoiSolver,
    initial: &[f64],
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<OnsagerState> {
    let strength = match solver.params.potential {
        DoiPotential::Onsager { strength } => strength,
        _ => {
            return Err(invalid(
                "potential",
                "an Onsager potential is required".to_string(),
            ))
        }
    };
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(invalid(
            "damping",
            format!("must lie in (0, 1], got {damping}"),
        ));
    }
    let q = solver.grid.quadrature();
    let kbt = solver.params.kbt;
    let boltzmann = |rho: &[f64]| -> Vec<f64> {
        let c = solver.grid.analyze(rho);
        let u = solver.grid.synthesize(&solver.onsager_coeffs(&c, strength));
        let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut next: Vec<f64> = u.iter().map(|v| (-(v - umin) / kbt).exp()).collect();
        let z = q.integrate_values(&next);
        for v in next.iter_mut() {
            *v /= z;
        }
        next
    };
    let order_of = |rho: &[f64]| {
        let mut m = Matrix3::zeros();
        for ((n, w), r) in q.nodes().iter().zip(q.weights()).zip(rho) {
            m += n.as_vec() * n.as_vec().transpose() * (w * r);
        }
        order_parameter(&m).0
    };
    let mut rho = initial.to_vec();
    let z = q.integrate_values(&rho);
    for v in rho.iter_mut() {
        *v /= z;
    }
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let next = boltzmann(&rho);
        change = next
            .iter()
            .zip(&rho)
            .zip(q.weights())
            .map(|((a, b), w)| w * (a - b).abs())
            .sum::<f64>();
        for (r, n) in rho.iter_mut().zip(&next) {
            *r += damping * (n - *r);
        }
        if change < tol {
            let order = order_of(&rho);
            let reinserted = order_of(&boltzmann(&rho));
            return Ok(OnsagerState {
                strength,
                coeffs: solver.grid.analyze(&rho),
                density: rho,
                order,
                self_consistency: (order - reinserted).abs(),
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: change,
    })
}

/// Continuation in the Onsager strength: each solve starts from the previous
/// state plus a small uniaxial perturbation along e₃.
pub fn onsager_sweep(
    l_max: usize,
    kbt: f64,
    strengths: &[f64],
    damping: f64,
    tol: f64,
) -> Result<Vec<OnsagerState>> {
    let mut out = Vec::with_capacity(strengths.len());
    let mut prev: Option<Vec<f64>> = None;
    for &a in strengths {
        let params = DoiParams {
            d_r: 1.0,
            kbt,
            flow: FlowField::quiescent(),
            potential: DoiPotential::Onsager { strength: a },
        };
        let solver = DoiSolver::new(params, l_max)?;
        let nodes = solver.grid.quadrature().nodes();
        let mut init: Vec<f64> = match &prev {
            Some(p) => p.clone(),
            None => vec![1.0 / (4.0 * PI); nodes.len()],
        };
        for (v, n) in init.iter_mut().zip(nodes) {
            let x = n.as_vec().z;
            *v *= 1.0 + 1e-3 * (1.5 * x * x - 0.5);
        }
        let state = onsager_steady_state(&solver, &init, damping, tol, 100_000)?;
        prev = Some(state.density.clone());
        out.push(state);
    }
    Ok(out)
}

/// Smallest strength in a sweep whose steady state has S above `level`.
pub fn nematic_threshold(states: &[OnsagerState], level: f64) -> Option<f64> {
    states.iter().find(|s| s.order > level).map(|s| s.strength)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vmf(kappa: f64) -> impl Fn(&UnitVector) -> f64 {
        move |n| (kappa * (n.as_vec().z - 1.0)).exp()
    }

    #[test]
    fn p2_decays_at_six_d_r() {
        let d_r = 0.5;
        let s = DoiSolver::new(DoiParams::free(d_r), 16).unwrap();
        let c0 = s.project(vmf(5.0)).unwrap();
        let p0 = s.zonal_moment(&c0, 2);
        for t in [0.1, 0.5, 2.0] {
            let c = s.advance(&c0, t, 0.01).unwrap();
            let p = s.zonal_moment(&c, 2);
            assert!((p / p0 - (-6.0 * d_r * t).exp()).abs() < 1e-12);
            assert!((s.mass(&c) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_converges_spectrally() {
        // ⟨P₂⟩ of the vMF density, coth κ − 1/κ form: 1 − 3(coth κ − 1/κ)/κ
        let k: f64 = 5.0;
        let l = 1.0 / k.tanh() - 1.0 / k;
        let exact = 1.0 - 3.0 * l / k;
        let s = DoiSolver::new(DoiParams::free(1.0), 16).unwrap();
        let c = s.project(vmf(k)).unwrap();
        assert!((s.zonal_moment(&c, 2) - exact).abs() < 1e-8);
    }

    #[test]
    fn uniform_is_invariant_and_entropy_decreases() {
        let s = DoiSolver::new(DoiParams::free(1.0), 12).unwrap();
        let u = s.uniform();
        let v = s.advance(&u, 1.0, 0.05).unwrap();
        assert!(u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-15));
        let mut c = s.project(vmf(3.0)).unwrap();
        let mut h = s.entropy_functional(&c);
        for _ in 0..50 {
            c = s.step(&c, 0.02);
            let h1 = s.entropy_functional(&c);
            assert!(h1 <= h + 1e-12);
            h = h1;
        }
    }

    #[test]
    fn shear_keeps_mass_and_tilts_the_director() {
        let p = DoiParams {
            d_r: 1.0,
            kbt: 1.0,
            flow: FlowField::simple_shear(2.0),
            potential: DoiPotential::None,
        };
        let s = DoiSolver::new(p, 16).unwrap();
        let c = s.advance(&s.uniform(), 5.0, 0.005).unwrap();
        assert!((s.mass(&c) - 1.0).abs() < 1e-13);
        let m = s.second_moment(&c);
        // shear aligns rods with positive n₁n₂
        assert!(m[(0, 1)] > 0.01, "{}", m[(0, 1)]);
    }

    #[test]
    fn fixed_aligning_potential_relaxes_to_its_boltzmann_density() {
        let e3 = UnitVector::e3();
        let u = PotentialField::aligning(2.0, &e3);
        let p = DoiParams {
            d_r: 1.0,
            kbt: 1.0,
            flow: FlowField::quiescent(),
            potential: DoiPotential::Fixed(u.clone()),
        };
        let s = DoiSolver::new(p, 20).unwrap();
        let c = s.advance(&s.uniform(), 4.0, 0.002).unwrap();
        let target = s.project(|n| (-u.value(n)).exp()).unwrap();
        let err = c
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn onsager_isotropic_below_and_nematic_above_the_spinodal() {
        let spinodal = 32.0 / PI;
        let states = onsager_sweep(16, 1.0, &[6.0, 9.0, 12.0, 14.0], 0.5, 1e-12).unwrap();
        assert!(states[0].order.abs() < 1e-6 && states[1].order.abs() < 1e-6);
        assert!(states[2].order > 0.3 && states[3].order > states[2].order);
        for s in &states {
            assert!(s.self_consistency < 1e-4);
        }
        let t = nematic_threshold(&states, 0.1).unwrap();
        assert!(t > spinodal - 3.0 && t < 12.0 + 1e-12);
    }
}
