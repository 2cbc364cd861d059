//! Configuration-space Fokker–Planck equation of the inertia-free dumbbell,
//!
//!   ∂ₜρ + ∇ₙ·((κn − 2F/ζ)ρ) = (2k_BT/ζ)Δₙρ,
//!
//! on a finite-volume grid of the ball |n| < n0 (FENE) or of a box of six
//! Gaussian widths (Hookean). Face fluxes are Scharfetter–Gummel fluxes, so
//! that with κ = 0 the discrete stationary state is exactly exp(−U/k_BT)
//! sampled at the cell centres. Time stepping is TR-BDF2 on the whole
//! operator.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::banded::BandedMatrix;
use super::{bernoulli, TRBDF2_GAMMA};
use crate::error::{invalid, Error, Result};
use crate::forces::{FlowField, SpringModel};
use crate::geometry::Vec3;

/// Half-width of the Hookean box in units of √(k_BT/H).
pub const HOOKEAN_WIDTHS: f64 = 6.0;

/// Densities below this are treated as rounding noise, not as a failure.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

const MAX_HALVINGS: u32 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct LimitParams {
    pub zeta: f64,
    pub kbt: f64,
    pub spring: SpringModel,
    pub flow: FlowField,
}

impl LimitParams {
    pub fn new(zeta: f64, kbt: f64, spring: SpringModel, flow: FlowField) -> Result<Self> {
        let p = Self {
            zeta,
            kbt,
            spring,
            flow,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(invalid(
                "zeta",
                format!("must be positive, got {}", self.zeta),
            ));
        }
        if !(self.kbt > 0.0 && self.kbt.is_finite()) {
            return Err(invalid(
                "kBT",
                format!(
                    "the limit solver needs a positive temperature, got {}",
                    self.kbt
                ),
            ));
        }
        self.spring.validate()
    }

    pub fn diffusivity(&self) -> f64 {
        2.0 * self.kbt / self.zeta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BallGeometry {
    /// d = 1: uniform cells on (−R, R).
    Interval { cells: usize },
    /// d = 2: uniform square cells on (−R, R)²; Hookean only.
    Square { cells: usize },
    /// d = 2: polar cells, `radial` rings of `angular` sectors.
    Disk { radial: usize, angular: usize },
    /// d = 3, radially symmetric densities: spherical shells. Quiescent flow only.
    Shells { radial: usize },
}

impl BallGeometry {
    pub fn dim(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            Self::Square { .. } | Self::Disk { .. } => 2,
            Self::Shells { .. } => 3,
        }
    }

    /// Standard resolution ladder: level k doubles every axis k times.
    pub fn refined(self, level: u32) -> Self {
        let s = 1usize << level;
        match self {
            Self::Interval { cells } => Self::Interval { cells: cells * s },
            Self::Square { cells } => Self::Square { cells: cells * s },
            Self::Disk { radial, angular } => Self::Disk {
                radial: radial * s,
                angular: angular * s,
            },
            Self::Shells { radial } => Self::Shells { radial: radial * s },
        }
    }

    /// Level-0 grid of the ladder for dimension `dim` and spring type.
    pub fn base(dim: usize, fene: bool) -> Result<Self> {
        match (dim, fene) {
            (1, _) => Ok(Self::Interval { cells: 32 }),
            (2, false) => Ok(Self::Square { cells: 32 }),
            (2, true) => Ok(Self::Disk {
                radial: 16,
                angular: 32,
            }),
            (3, _) => Ok(Self::Shells { radial: 32 }),
            _ => Err(invalid("dim", format!("must be 1, 2 or 3, got {dim}"))),
        }
    }
}

#[derive(Clone, Debug)]
struct Face {
    i: usize,
    j: usize,
    area: f64,
    dist: f64,
    point: Vec3,
    // unit normal from i to j
    normal: Vec3,
}

/// Cells and faces of the configuration grid.
#[derive(Clone, Debug)]
pub struct BallGrid {
    geometry: BallGeometry,
    extent: f64,
    centres: Vec<Vec3>,
    volumes: Vec<f64>,
    faces: Vec<Face>,
    bandwidth: usize,
}

fn check_cells(name: &'static str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(invalid(
            name,
            format!("needs at least {min} cells, got {n}"),
        ));
    }
    Ok(())
}

impl BallGrid {
    /// `extent` is R: the ball radius or the box half-width.
    pub fn new(geometry: BallGeometry, extent: f64) -> Result<Self> {
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(invalid("extent", format!("must be positive, got {extent}")));
        }
        let mut centres = Vec::new();
        let mut volumes = Vec::new();
        let mut faces = Vec::new();
        let e1 = Vector3::x();
        let bandwidth;
        match geometry {
            BallGeometry::Interval { cells } => {
                check_cells("cells", cells, 4)?;
                let h = 2.0 * extent / cells as f64;
                for i in 0..cells {
                    centres.push(e1 * (-extent + (i as f64 + 0.5) * h));
                    volumes.push(h);
                }
                for i in 0..cells - 1 {
                    faces.push(Face {
                        i,
                        j: i + 1,
                        area: 1.0,
                        dist: h,
                        point: e1 * (-extent + (i + 1) as f64 * h),
                        normal: e1,
                    });
                }
                bandwidth = 1;
            }
            BallGeometry::Square { cells } => {
                check_cells("cells", cells, 4)?;
                let h = 2.0 * extent / cells as f64;
                let c = |i: usize| -extent + (i as f64 + 0.5) * h;
                let idx = |i: usize, j: usize| i * cells + j;
                for i in 0..cells {
                    for j in 0..cells {
                        centres.push(Vector3::new(c(i), c(j), 0.0));
                        volumes.push(h * h);
                    }
                }
                for i in 0..cells {
                    for j in 0..cells {
                        if i + 1 < cells {
                            faces.push(Face {
                                i: idx(i, j),
                                j: idx(i + 1, j),
                                area: h,
                                dist: h,
                                point: Vector3::new(c(i) + 0.5 * h, c(j), 0.0),
                                normal: e1,
                            });
                        }
                        if j + 1 < cells {
                            faces.push(Face {
                                i: idx(i, j),
                                j: idx(i, j + 1),
                                area: h,
                                dist: h,
                                point: Vector3::new(c(i), c(j) + 0.5 * h, 0.0),
                                normal: Vector3::y(),
                            });
                        }
                    }
                }
                bandwidth = cells;
            }
            BallGeometry::Disk { radial, angular } => {
                check_cells("radial", radial, 4)?;
                check_cells("angular", angular, 4)?;
                let dr = extent / radial as f64;
                let dphi = 2.0 * PI / angular as f64;
                let idx = |k: usize, l: usize| k * angular + l;
                let radial_dir = |phi: f64| Vector3::new(phi.cos(), phi.sin(), 0.0);
                for k in 0..radial {
                    let (r0, r1) = (k as f64 * dr, (k + 1) as f64 * dr);
                    let rc = 0.5 * (r0 + r1);
                    for l in 0..angular {
                        let phi = (l as f64 + 0.5) * dphi;
                        centres.push(radial_dir(phi) * rc);
                        volumes.push(0.5 * (r1 * r1 - r0 * r0) * dphi);
                        // sector face towards l + 1
                        let pf = (l + 1) as f64 * dphi;
                        faces.push(Face {
                            i: idx(k, l),
                            j: idx(k, (l + 1) % angular),
                            area: dr,
                            dist: rc * dphi,
                            point: radial_dir(pf) * rc,
                            normal: Vector3::new(-pf.sin(), pf.cos(), 0.0),
                        });
                        if k + 1 < radial {
                            faces.push(Face {
                                i: idx(k, l),
                                j: idx(k + 1, l),
                                area: r1 * dphi,
                                dist: dr,
                                point: radial_dir(phi) * r1,
                                normal: radial_dir(phi),
                            });
                        }
                    }
                }
                bandwidth = angular;
            }
            BallGeometry::Shells { radial } => {
                check_cells("radial", radial, 4)?;
                let dr = extent / radial as f64;
                for k in 0..radial {
                    let (r0, r1) = (k as f64 * dr, (k + 1) as f64 * dr);
                    centres.push(e1 * (0.5 * (r0 + r1)));
                    volumes.push(4.0 / 3.0 * PI * (r1.powi(3) - r0.powi(3)));
                    if k + 1 < radial {
                        faces.push(Face {
                            i: k,
                            j: k + 1,
                            area: 4.0 * PI * r1 * r1,
                            dist: dr,
                            point: e1 * r1,
                            normal: e1,
                        });
                    }
                }
                bandwidth = 1;
            }
        }
        Ok(Self {
            geometry,
            extent,
            centres,
            volumes,
            faces,
            bandwidth,
        })
    }

    pub fn geometry(&self) -> BallGeometry {
        self.geometry
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    /// Representative point of each cell. For shells the point lies on the
    /// first axis at the mid radius.
    pub fn centres(&self) -> &[Vec3] {
        &self.centres
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Cell values of `f` at the centres.
    pub fn sample<F: Fn(&Vec3) -> f64>(&self, f: F) -> Vec<f64> {
        self.centres.iter().map(f).collect()
    }

    /// ∫ρ by the cell rule.
    pub fn mass(&self, rho: &[f64]) -> f64 {
        crate::collision::neumaier_sum(self.volumes.iter().zip(rho).map(|(v, r)| v * r))
    }

    pub fn normalize(&self, rho: &mut [f64]) {
        let m = self.mass(rho);
        for r in rho.iter_mut() {
            *r /= m;
        }
    }

    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.volumes
            .iter()
            .zip(a.iter().zip(b))
            .map(|(v, (x, y))| v * (x - y).abs())
            .sum()
    }

    /// Mean of ⟨n_a n_b⟩ over the density (shells: isotropic, from ⟨|n|²⟩/3).
    pub fn second_moments(&self, rho: &[f64]) -> nalgebra::Matrix3<f64> {
        let mut m = nalgebra::Matrix3::zeros();
        for ((c, v), r) in self.centres.iter().zip(&self.volumes).zip(rho) {
            if let BallGeometry::Shells { .. } = self.geometry {
                m += nalgebra::Matrix3::identity() * (v * r * c.norm_squared() / 3.0);
            } else {
                m += c * c.transpose() * (v * r);
            }
        }
        m
    }
}

/// Solver for the limit equation on a fixed grid.
#[derive(Clone, Debug)]
pub struct LimitSolver {
    params: LimitParams,
    grid: BallGrid,
    // dm/dt = L ρ in band storage, m = Vρ
    operator: BandedMatrix,
}

impl LimitSolver {
    pub fn new(params: LimitParams, geometry: BallGeometry) -> Result<Self> {
        let extent = if params.spring.is_fene() {
            params.spring.n0
        } else {
            HOOKEAN_WIDTHS * (params.kbt / params.spring.h).sqrt()
        };
        Self::with_extent(params, geometry, extent)
    }

    /// Hookean problems on a box of half-width `extent` instead of the
    /// default six widths. For FENE springs the extent must be n0.
    pub fn with_extent(params: LimitParams, geometry: BallGeometry, extent: f64) -> Result<Self> {
        params.validate()?;
        if params.spring.is_fene() && extent != params.spring.n0 {
            return Err(invalid(
                "extent",
                format!("the FENE ball has radius n0, got {extent}"),
            ));
        }
        let fene = params.spring.is_fene();
        let k = params.flow.kappa;
        match geometry {
            BallGeometry::Interval { .. } => {
                let off = k.norm_squared() - k[(0, 0)] * k[(0, 0)];
                if off > 0.0 {
                    return Err(invalid("flow", "d = 1 admits only κ₁₁".to_string()));
                }
            }
            BallGeometry::Square { .. } | BallGeometry::Disk { .. } => {
                let planar = k.fixed_view::<2, 2>(0, 0).norm_squared();
                if k.norm_squared() - planar > 0.0 {
                    return Err(invalid(
                        "flow",
                        "d = 2 needs a planar velocity gradient".to_string(),
                    ));
                }
                if fene && matches!(geometry, BallGeometry::Square { .. }) {
                    return Err(invalid(
                        "geometry",
                        "the FENE ball needs the disk grid, not the square".to_string(),
                    ));
                }
            }
            BallGeometry::Shells { .. } => {
                if !params.flow.is_quiescent() {
                    return Err(invalid(
                        "flow",
                        "the shell grid only represents radially symmetric, quiescent problems"
                            .to_string(),
                    ));
                }
            }
        }
        let grid = BallGrid::new(geometry, extent)?;
        let operator = assemble(&params, &grid)?;
        Ok(Self {
            params,
            grid,
            operator,
        })
    }

    pub fn params(&self) -> &LimitParams {
        &self.params
    }

    pub fn grid(&self) -> &BallGrid {
        &self.grid
    }

    /// Cell values of `f`, normalized to unit mass on the grid.
    pub fn project<F: Fn(&Vec3) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        let mut rho = self.grid.sample(f);
        self.check_density(&rho)?;
        self.grid.normalize(&mut rho);
        Ok(rho)
    }

    fn check_density(&self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "density has {} cells, grid has {}",
                rho.len(),
                self.grid.len()
            )));
        }
        for (cell, &v) in rho.iter().enumerate() {
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

    /// exp(−U/k_BT) at the centres, normalized by the cell rule.
    pub fn boltzmann_density(&self) -> Result<Vec<f64>> {
        let kbt = self.params.kbt;
        let spring = &self.params.spring;
        let mut rho = Vec::with_capacity(self.grid.len());
        for c in &self.grid.centres {
            rho.push((-spring.potential(c)? / kbt).exp());
        }
        self.grid.normalize(&mut rho);
        Ok(rho)
    }

    /// dρ/dt of the discrete operator.
    pub fn rate(&self, rho: &[f64]) -> Vec<f64> {
        let dm = self.operator.mul(rho);
        dm.iter()
            .zip(&self.grid.volumes)
            .map(|(d, v)| d / v)
            .collect()
    }

    /// Stationary density of unit mass by inverse iteration on the null
    /// space of the discrete operator.
    pub fn steady_state(&self) -> Result<Vec<f64>> {
        let tau = 1e6 * self.params.zeta / self.params.spring.h;
        let lu = self.implicit_matrix(tau)?;
        let mut rho = self.boltzmann_density()?;
        let mut change = f64::INFINITY;
        for it in 0..50 {
            let mut next: Vec<f64> = rho
                .iter()
                .zip(&self.grid.volumes)
                .map(|(r, v)| r * v)
                .collect();
            lu.solve(&mut next);
            self.grid.normalize(&mut next);
            change = self.grid.l1_distance(&next, &rho);
            rho = next;
            if change < 1e-15 && it > 0 {
                for r in rho.iter_mut() {
                    *r = r.max(0.0);
                }
                return Ok(rho);
            }
        }
        Err(Error::NoConvergence {
            iterations: 50,
            residual: change,
        })
    }

    // V − c L, factorized
    fn implicit_matrix(&self, c: f64) -> Result<BandedMatrix> {
        let n = self.grid.len();
        let mut m = BandedMatrix::zeros(n, self.grid.bandwidth);
        for i in 0..n {
            let lo = i.saturating_sub(self.grid.bandwidth);
            let hi = (i + self.grid.bandwidth + 1).min(n);
            for j in lo..hi {
                let l = self.operator.get(i, j);
                if l != 0.0 {
                    m.add(i, j, -c * l);
                }
            }
            m.add(i, i, self.grid.volumes[i]);
        }
        m.factorize()?;
        Ok(m)
    }

    /// Stepper with a fixed nominal step.
    pub fn stepper(&self, dt: f64) -> Result<LimitStepper<'_>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(LimitStepper {
            solver: self,
            dt,
            lu: self.implicit_matrix(0.5 * TRBDF2_GAMMA * dt)?,
            half: None,
        })
    }
}

/// TR-BDF2 steps of fixed size for one [`LimitSolver`].
pub struct LimitStepper<'a> {
    solver: &'a LimitSolver,
    dt: f64,
    lu: BandedMatrix,
    half: Option<Box<LimitStepper<'a>>>,
}

impl LimitStepper<'_> {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn trial(&self, rho: &[f64]) -> Vec<f64> {
        let g = TRBDF2_GAMMA;
        let v = &self.solver.grid.volumes;
        let c = 0.5 * g * self.dt;
        let lr = self.solver.operator.mul(rho);
        let mut stage: Vec<f64> = (0..rho.len()).map(|i| v[i] * rho[i] + c * lr[i]).collect();
        self.lu.solve(&mut stage);
        let a = 1.0 / (g * (2.0 - g));
        let b = (1.0 - g) * (1.0 - g) * a;
        let mut next: Vec<f64> = (0..rho.len())
            .map(|i| v[i] * (a * stage[i] - b * rho[i]))
            .collect();
        self.lu.solve(&mut next);
        next
    }

    /// One step of size dt. A step that would leave a density below
    /// −1e-12 is redone as two half steps, recursively.
    pub fn step(&mut self, rho: &mut Vec<f64>) -> Result<()> {
        self.step_depth(rho, 0)
    }

    fn step_depth(&mut self, rho: &mut Vec<f64>, depth: u32) -> Result<()> {
        let next = self.trial(rho);
        let (cell, worst) =
            next.iter().enumerate().fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        if worst >= -NEGATIVITY_TOLERANCE && worst.is_finite() {
            *rho = next;
            return Ok(());
        }
        if depth >= MAX_HALVINGS {
            return Err(Error::NegativeDensity { value: worst, cell });
        }
        if self.half.is_none() {
            self.half = Some(Box::new(self.solver.stepper(0.5 * self.dt)?));
        }
        let half = self.half.as_mut().expect("just built");
        half.step_depth(rho, depth + 1)?;
        half.step_depth(rho, depth + 1)
    }

    /// Steps until `t_final`; the last step is shortened to land on it.
    pub fn advance(&mut self, rho: &mut Vec<f64>, t_final: f64) -> Result<()> {
        let n = (t_final / self.dt - 1e-9).ceil().max(0.0) as usize;
        if n == 0 {
            return Ok(());
        }
        let last = t_final - (n - 1) as f64 * self.dt;
        for _ in 0..n - 1 {
            self.step(rho)?;
        }
        if (last - self.dt).abs() <= 1e-12 * self.dt {
            self.step(rho)
        } else {
            self.solver.stepper(last)?.step(rho)
        }
    }
}

fn assemble(params: &LimitParams, grid: &BallGrid) -> Result<BandedMatrix> {
    let d = params.diffusivity();
    let kbt = params.kbt;
    let kappa = params.flow.kappa;
    let mut u = Vec::with_capacity(grid.len());
    for c in &grid.centres {
        u.push(params.spring.potential(c)?);
    }
    let mut l = BandedMatrix::zeros(grid.len(), grid.bandwidth);
    for f in &grid.faces {
        let s = (kappa * f.point).dot(&f.normal) * f.dist / d - (u[f.j] - u[f.i]) / kbt;
        let c = d * f.area / f.dist;
        // flux i → j = a ρ_i − b ρ_j
        let a = c * bernoulli(-s);
        let b = c * bernoulli(s);
        l.add(f.i, f.i, -a);
        l.add(f.i, f.j, b);
        l.add(f.j, f.i, a);
        l.add(f.j, f.j, -b);
    }
    Ok(l)
}

/// Advances `rho0` (cell values on `geometry`) to `t_final` with step `dt`.
pub fn solve_fene_limit(
    rho0: &[f64],
    params: &LimitParams,
    geometry: BallGeometry,
    t_final: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let solver = LimitSolver::new(params.clone(), geometry)?;
    solver.check_density(rho0)?;
    let mut rho = rho0.to_vec();
    solver.stepper(dt)?.advance(&mut rho, t_final)?;
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hookean(flow: FlowField) -> LimitParams {
        LimitParams::new(1.0, 1.0, SpringModel::hookean(1.0).unwrap(), flow).unwrap()
    }

    fn fene() -> LimitParams {
        LimitParams::new(
            1.0,
            1.0,
            SpringModel::fene(1.0, 3.0).unwrap(),
            FlowField::quiescent(),
        )
        .unwrap()
    }

    fn gaussian(n: &Vec3, d: usize) -> f64 {
        (-0.5 * n.norm_squared()).exp() / (2.0 * PI).powf(0.5 * d as f64)
    }

    #[test]
    fn hookean_steady_state_is_the_gaussian() {
        for g in [
            BallGeometry::Interval { cells: 32 },
            BallGeometry::Square { cells: 32 },
        ] {
            let s = LimitSolver::new(hookean(FlowField::quiescent()), g.refined(2)).unwrap();
            let rho = s.steady_state().unwrap();
            let exact = s.grid().sample(|n| gaussian(n, g.dim()));
            let d = s.grid().l1_distance(&rho, &exact);
            assert!(d < 1e-6, "{g:?}: {d}");
        }
    }

    #[test]
    fn fene_steady_state_in_two_and_three_dimensions() {
        let b = 1.0 * 9.0 / 2.0;
        for g in [
            BallGeometry::Interval { cells: 64 },
            BallGeometry::Disk {
                radial: 32,
                angular: 32,
            },
            BallGeometry::Shells { radial: 64 },
        ] {
            let s = LimitSolver::new(fene(), g).unwrap();
            let rho = s.steady_state().unwrap();
            let exact = s
                .project(|n| (1.0 - n.norm_squared() / 9.0).powf(b))
                .unwrap();
            let d = s.grid().l1_distance(&rho, &exact);
            assert!(d < 1e-10, "{g:?}: {d}");
        }
    }

    #[test]
    fn mass_is_conserved_and_relaxation_reaches_equilibrium() {
        let s = LimitSolver::new(
            fene(),
            BallGeometry::Disk {
                radial: 24,
                angular: 32,
            },
        )
        .unwrap();
        let mut rho = s
            .project(|n| (-((n.x - 1.0).powi(2) + n.y * n.y) / 0.2).exp())
            .unwrap();
        let mut st = s.stepper(0.01).unwrap();
        for _ in 0..100 {
            st.step(&mut rho).unwrap();
            assert!((s.grid().mass(&rho) - 1.0).abs() < 1e-12);
        }
        st.advance(&mut rho, 10.0).unwrap();
        let eq = s.steady_state().unwrap();
        assert!(s.grid().l1_distance(&rho, &eq) < 1e-6);
    }

    #[test]
    fn steady_state_is_stationary() {
        let s = LimitSolver::new(
            fene(),
            BallGeometry::Disk {
                radial: 16,
                angular: 32,
            },
        )
        .unwrap();
        let eq = s.steady_state().unwrap();
        let mut rho = eq.clone();
        s.stepper(0.05).unwrap().advance(&mut rho, 1.0).unwrap();
        let diff = rho
            .iter()
            .zip(&eq)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn hookean_relaxation_in_one_dimension_matches_the_ou_solution() {
        // ρ0 Gaussian (m0, s0); drift −2n, D = 2: mean m0 e^{−2t}, variance 1 + (s0 − 1) e^{−4t}
        let s = LimitSolver::new(
            hookean(FlowField::quiescent()),
            BallGeometry::Interval { cells: 512 },
        )
        .unwrap();
        let (m0, v0) = (1.0, 0.25);
        let normal =
            |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
        let mut rho = s.project(|n| normal(n.x, m0, v0)).unwrap();
        s.stepper(1e-3).unwrap().advance(&mut rho, 1.0).unwrap();
        let (m, v) = (m0 * (-2.0f64).exp(), 1.0 + (v0 - 1.0) * (-4.0f64).exp());
        let exact = s.project(|n| normal(n.x, m, v)).unwrap();
        let d = s.grid().l1_distance(&rho, &exact);
        assert!(d < 1e-3, "{d}");
    }

    #[test]
    fn shear_produces_positive_first_normal_and_shear_moments() {
        let flow = FlowField::simple_shear(0.5);
        let s = LimitSolver::new(hookean(flow), BallGeometry::Square { cells: 64 }).unwrap();
        let rho = s.steady_state().unwrap();
        let m = s.grid().second_moments(&rho);
        // Lyapunov oracle (κ − 2)C + C(κ − 2)ᵀ + 4 = 0: C12 = γ̇/4, C11 = 1 + γ̇²/8
        assert!((m[(0, 1)] - 0.125).abs() < 2e-3, "{}", m[(0, 1)]);
        assert!(
            (m[(0, 0)] - (1.0 + 0.25 * 0.25 / 2.0)).abs() < 5e-3,
            "{}",
            m[(0, 0)]
        );
    }

    #[test]
    fn rejects_negative_input_and_three_dimensional_flow() {
        let s = LimitSolver::new(fene(), BallGeometry::Interval { cells: 8 }).unwrap();
        let mut rho = vec![1.0; 8];
        rho[3] = -1.0;
        assert!(matches!(
            solve_fene_limit(
                &rho,
                s.params(),
                BallGeometry::Interval { cells: 8 },
                1.0,
                0.1
            ),
            Err(Error::NegativeDensity { cell: 3, .. })
        ));
        let p = hookean(FlowField::simple_shear(1.0));
        assert!(LimitSolver::new(p, BallGeometry::Shells { radial: 8 }).is_err());
    }
}
