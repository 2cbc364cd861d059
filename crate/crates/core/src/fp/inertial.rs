//! The full inertial dumbbell equation in one configuration dimension and
//! without x-dependence,
//!
//!   ε²∂ₜf + ε∂ₙ(qf) + ε∂_q((ζκn − 2F)f) = Q(f),
//!
//! on a tensor grid over (n, p, q). With no x-dependence the p-direction
//! only feels its own collision operator, so a density g(n, q)·h(p) stays a
//! product; the solver stores the two factors.
//!
//! Strang splitting: half steps of the free streaming part
//! −(1/ε)(∂ₙ(qf) + ∂_q(Gf)), G = ζκn − 2F, by RK4 around a TR-BDF2 step of
//! Q/ε² with the flux stencil of [`crate::collision`]. The step is kept at
//! a small fraction of the relaxation time ε²/ζ, where the splitting error
//! in the effective diffusion is second order in that fraction.
//!
//! In one dimension G = −2U_eff′ with U_eff = U − ζκn²/4, and streaming
//! preserves ρ_ref(n)M(q) with ρ_ref = exp(−U_eff/k_BT). The streaming
//! fluxes act on φ = f/(ρ̄_ref M): the n-flux carries the weight ρ_ref at the
//! face, the q-flux the weight S_i W_{j+½}, where S_i = σ²(ρ_ref(n_{i+½}) −
//! ρ_ref(n_{i−½}))/h is the exact cell average of Gρ_ref and W are the
//! collision face weights. The two flux differences then cancel for constant
//! φ, so ρ_ref M is an exact discrete equilibrium of the whole scheme.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rayon::prelude::*;

use super::limit::{LimitParams, NEGATIVITY_TOLERANCE};
use super::TRBDF2_GAMMA;
use crate::collision::{face_weights, neumaier_sum, Axis};
use crate::error::{invalid, Error, Result};
use crate::forces::{FlowField, SpringModel};
use crate::geometry::Vec3;
use crate::quadrature::gauss_legendre;

/// Half-width of the Hookean n box in units of √(k_BT/H).
pub const REDUCED_HOOKEAN_WIDTHS: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedParams {
    pub zeta: f64,
    pub kbt: f64,
    pub spring: SpringModel,
    /// κ₁₁, the only velocity gradient a one-dimensional n sees.
    pub kappa: f64,
}

impl ReducedParams {
    pub fn validate(&self) -> Result<()> {
        self.limit_params().map(|_| ())
    }

    /// Matching parameters of the inertia-free equation.
    pub fn limit_params(&self) -> Result<LimitParams> {
        let mut k = Matrix3::zeros();
        k[(0, 0)] = self.kappa;
        let flow = if self.kappa == 0.0 {
            FlowField::quiescent()
        } else {
            FlowField::general(k)
        };
        LimitParams::new(self.zeta, self.kbt, self.spring, flow)
    }

    /// Velocity variance 2k_BT of the dumbbell Maxwellian.
    pub fn variance(&self) -> f64 {
        2.0 * self.kbt
    }

    /// Box half-width: n0, or 8 equilibrium widths for a Hookean spring.
    /// The kinetic transport meets the box wall with a reflecting zero-flux
    /// condition, so the density there has to be negligible, not just small.
    pub fn extent(&self) -> f64 {
        if self.spring.is_fene() {
            self.spring.n0
        } else {
            REDUCED_HOOKEAN_WIDTHS * (self.kbt / self.spring.h).sqrt()
        }
    }

    /// G(n) = ζκn − 2F(n).
    pub fn drive(&self, n: f64) -> Result<f64> {
        Ok(self.zeta * self.kappa * n - 2.0 * self.spring.force(&Vec3::new(n, 0.0, 0.0))?.x)
    }

    /// U_eff(n) = U(n) − ζκn²/4, so that G = −2U_eff′.
    pub fn effective_potential(&self, n: f64) -> Result<f64> {
        Ok(self.spring.potential(&Vec3::new(n, 0.0, 0.0))? - 0.25 * self.zeta * self.kappa * n * n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedInertialGrid {
    pub n_cells: usize,
    pub extent: f64,
    pub p: Axis,
    pub q: Axis,
}

impl ReducedInertialGrid {
    pub fn new(n_cells: usize, extent: f64, p: Axis, q: Axis) -> Result<Self> {
        if n_cells < 8 {
            return Err(invalid(
                "n_cells",
                format!("needs at least 8 cells, got {n_cells}"),
            ));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(invalid("extent", format!("must be positive, got {extent}")));
        }
        Ok(Self {
            n_cells,
            extent,
            p,
            q,
        })
    }

    /// `n_cells` configuration cells on [`ReducedParams::extent`] and velocity
    /// axes of `v_points` nodes reaching 8 thermal widths.
    pub fn for_params(params: &ReducedParams, n_cells: usize, v_points: usize) -> Result<Self> {
        let ax = Axis::new(v_points, 8.0 * params.variance().sqrt())?;
        Self::new(n_cells, params.extent(), ax, ax)
    }

    pub fn n_spacing(&self) -> f64 {
        2.0 * self.extent / self.n_cells as f64
    }

    pub fn n_centre(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.n_spacing()
    }

    /// Cell averages of `f` over the n cells (4-point Gauss–Legendre).
    pub fn cell_averages<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        let (x, w) = gauss_legendre(4).expect("fixed order");
        let h = self.n_spacing();
        (0..self.n_cells)
            .map(|i| {
                let c = self.n_centre(i);
                x.iter()
                    .zip(&w)
                    .map(|(x, w)| 0.5 * w * f(c + 0.5 * h * x))
                    .sum()
            })
            .collect()
    }
}

/// f(n, p, q) = g(n, q) h(p); `g` is stored n-major.
#[derive(Clone, Debug, PartialEq)]
pub struct InertialDensity {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl InertialDensity {
    /// ρ(n) M(p) M(q)/∫M, with ρ given as cell values of unit mass.
    pub fn local_equilibrium(
        grid: &ReducedInertialGrid,
        rho: &[f64],
        variance: f64,
    ) -> Result<Self> {
        if rho.len() != grid.n_cells {
            return Err(Error::GridMismatch(format!(
                "{} density values for {} cells",
                rho.len(),
                grid.n_cells
            )));
        }
        let maxwell = |ax: &Axis| {
            let (m, _) = face_weights(&ax.centres(), variance, 0.0);
            let z = neumaier_sum(m.iter().map(|v| v * ax.spacing()));
            m.into_iter().map(|v| v / z).collect::<Vec<_>>()
        };
        let mq = maxwell(&grid.q);
        let mut g = Vec::with_capacity(grid.n_cells * grid.q.points);
        for r in rho {
            g.extend(mq.iter().map(|m| r * m));
        }
        Ok(Self {
            g,
            h: maxwell(&grid.p),
        })
    }

    pub fn mass(&self, grid: &ReducedInertialGrid) -> f64 {
        let gq = neumaier_sum(self.g.iter().copied()) * grid.n_spacing() * grid.q.spacing();
        gq * neumaier_sum(self.h.iter().copied()) * grid.p.spacing()
    }

    pub fn min(&self) -> f64 {
        let a = self.g.iter().cloned().fold(f64::INFINITY, f64::min);
        let b = self.h.iter().cloned().fold(f64::INFINITY, f64::min);
        a.min(b)
    }
}

/// Cell values of ρ = ∫f dp dq, J₁ = (1/ε)∫p f dp dq and J₂ = (1/ε)∫q f dp dq.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxMoments {
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

pub fn flux_moments(
    f: &InertialDensity,
    grid: &ReducedInertialGrid,
    epsilon: f64,
) -> Result<FluxMoments> {
    if !(epsilon > 0.0) {
        return Err(invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    let nq = grid.q.points;
    if f.g.len() != grid.n_cells * nq || f.h.len() != grid.p.points {
        return Err(Error::GridMismatch(
            "density does not match the grid".to_string(),
        ));
    }
    let (hp, hq) = (grid.p.spacing(), grid.q.spacing());
    let p = grid.p.centres();
    let q = grid.q.centres();
    let h0 = neumaier_sum(f.h.iter().copied()) * hp;
    let h1 = neumaier_sum(f.h.iter().zip(&p).map(|(h, p)| h * p)) * hp;
    let mut out = FluxMoments {
        rho: Vec::with_capacity(grid.n_cells),
        j1: Vec::with_capacity(grid.n_cells),
        j2: Vec::with_capacity(grid.n_cells),
    };
    for row in f.g.chunks(nq) {
        let g0 = neumaier_sum(row.iter().copied()) * hq;
        let g1 = neumaier_sum(row.iter().zip(&q).map(|(g, q)| g * q)) * hq;
        out.rho.push(g0 * h0);
        out.j1.push(g0 * h1 / epsilon);
        out.j2.push(g1 * h0 / epsilon);
    }
    Ok(out)
}

/// Factorized I − cA for a tridiagonal A (Thomas algorithm without pivoting;
/// I − cA is an M-matrix here).
#[derive(Clone, Debug)]
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for j in 0..n {
            let mut s = self.diag[j] * x[j];
            if j > 0 {
                s += self.lower[j] * x[j - 1];
            }
            if j + 1 < n {
                s += self.upper[j] * x[j + 1];
            }
            out[j] = s;
        }
    }
}

#[derive(Clone, Debug)]
struct Factored {
    mult: Vec<f64>,
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl Factored {
    fn new(a: &Tridiagonal, c: f64) -> Self {
        let n = a.diag.len();
        let mut mult = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        let upper: Vec<f64> = a.upper.iter().map(|u| -c * u).collect();
        pivot[0] = 1.0 - c * a.diag[0];
        for j in 1..n {
            mult[j] = -c * a.lower[j] / pivot[j - 1];
            pivot[j] = 1.0 - c * a.diag[j] - mult[j] * upper[j - 1];
        }
        Self { mult, pivot, upper }
    }

    fn solve(&self, r: &mut [f64]) {
        let n = r.len();
        for j in 1..n {
            r[j] -= self.mult[j] * r[j - 1];
        }
        r[n - 1] /= self.pivot[n - 1];
        for j in (0..n - 1).rev() {
            r[j] = (r[j] - self.upper[j] * r[j + 1]) / self.pivot[j];
        }
    }
}

/// Q/ε² along one velocity line.
fn collision_line(ax: &Axis, variance: f64, zeta: f64, eps: f64) -> Tridiagonal {
    let v = ax.centres();
    let n = v.len();
    let h = ax.spacing();
    let (m, w) = face_weights(&v, variance, 0.0);
    let coef = zeta * variance / (h * h * eps * eps);
    let mut t = Tridiagonal {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    for j in 0..n - 1 {
        // F = W (f_{j+1}/M_{j+1} − f_j/M_j); +F into j, −F into j+1
        let a = coef * w[j] / m[j + 1];
        let b = coef * w[j] / m[j];
        t.upper[j] += a;
        t.diag[j] -= b;
        t.lower[j + 1] += b;
        t.diag[j + 1] -= a;
    }
    t
}

/// Tuning of the reduced solver's step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedOptions {
    /// Step as a fraction of the velocity relaxation time ε²/ζ.
    pub relaxation_fraction: f64,
    /// Bound on |λ|·(h/2) for the streaming eigenvalues λ; RK4 is stable
    /// on the imaginary axis up to 2√2.
    pub courant: f64,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self {
            relaxation_fraction: 0.05,
            courant: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReducedInertialSolver {
    params: ReducedParams,
    grid: ReducedInertialGrid,
    epsilon: f64,
    dt_max: f64,
    // ρ_ref at the n faces (ends included), its cell averages and S_i
    rho_face: Vec<f64>,
    rho_cell: Vec<f64>,
    force_cell: Vec<f64>,
    m_q: Vec<f64>,
    w_q: Vec<f64>,
    q_line: Tridiagonal,
    p_line: Tridiagonal,
}

impl ReducedInertialSolver {
    pub fn new(
        params: ReducedParams,
        grid: ReducedInertialGrid,
        epsilon: f64,
        options: ReducedOptions,
    ) -> Result<Self> {
        params.validate()?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(
                "epsilon",
                format!("must be positive, got {epsilon}"),
            ));
        }
        if !params.spring.is_fene() && params.zeta * params.kappa >= 2.0 * params.spring.h {
            return Err(invalid(
                "kappa",
                "a Hookean dumbbell has no stationary state once ζκ ≥ 2H".to_string(),
            ));
        }
        let s2 = params.variance();
        for (name, ax) in [("p", &grid.p), ("q", &grid.q)] {
            if ax.v_max < 6.0 * s2.sqrt() * (1.0 - 1e-12) {
                return Err(invalid(
                    "v_max",
                    format!("{name} axis reaches {} < 6 thermal widths", ax.v_max),
                ));
            }
        }
        let nn = grid.n_cells;
        let hn = grid.n_spacing();
        let face = |i: usize| -grid.extent + i as f64 * hn;
        // exp(−U_eff/k_BT) relative to its value at n = 0; the FENE end
        // faces sit on the singularity, where the weight is zero
        let u0 = params.effective_potential(0.0)?;
        let weight = |n: f64| -> Result<f64> {
            if params.spring.is_fene() && n.abs() >= params.spring.n0 * (1.0 - 1e-12) {
                return Ok(0.0);
            }
            Ok((-(params.effective_potential(n)? - u0) / params.kbt).exp())
        };
        let rho_face = (0..=nn)
            .map(|i| weight(face(i)))
            .collect::<Result<Vec<_>>>()?;
        let (x, w) = gauss_legendre(4)?;
        let mut rho_cell = Vec::with_capacity(nn);
        for i in 0..nn {
            let c = grid.n_centre(i);
            let mut avg = 0.0;
            for (x, w) in x.iter().zip(&w) {
                avg += 0.5 * w * weight(c + 0.5 * hn * x)?;
            }
            rho_cell.push(avg);
        }
        if rho_cell.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid(
                "extent",
                "exp(−U_eff/kBT) under- or overflows on the n box".to_string(),
            ));
        }
        let force_cell: Vec<f64> = (0..nn)
            .map(|i| s2 * (rho_face[i + 1] - rho_face[i]) / hn)
            .collect();
        let (m_q, w_q) = face_weights(&grid.q.centres(), s2, 0.0);
        let q_line = collision_line(&grid.q, s2, params.zeta, epsilon);
        let p_line = collision_line(&grid.p, s2, params.zeta, epsilon);
        // streaming eigenvalue bound: 1.372 for the 4th-order n stencil, 1 for
        // the central q stencil (|G| from S_i/ρ̄_i)
        let gmax = force_cell
            .iter()
            .zip(&rho_cell)
            .map(|(s, r)| (s / (s2 * r)).abs() * s2)
            .fold(0.0, f64::max);
        let lam = 1.372 * grid.q.v_max / (epsilon * hn) + gmax / (epsilon * grid.q.spacing());
        let stream = 2.0 * options.courant / lam;
        let relax = options.relaxation_fraction * epsilon * epsilon / params.zeta;
        Ok(Self {
            params,
            grid,
            epsilon,
            dt_max: relax.min(stream),
            rho_face,
            rho_cell,
            force_cell,
            m_q,
            w_q,
            q_line,
            p_line,
        })
    }

    pub fn grid(&self) -> &ReducedInertialGrid {
        &self.grid
    }

    pub fn params(&self) -> &ReducedParams {
        &self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    /// Cell values of the exact discrete equilibrium ρ_ref, unit mass.
    pub fn reference_density(&self) -> Vec<f64> {
        let z = neumaier_sum(self.rho_cell.iter().copied()) * self.grid.n_spacing();
        self.rho_cell.iter().map(|r| r / z).collect()
    }

    // streaming rate −(1/ε)(∂ₙ(qf) + ∂_q(Gf)); zero flux through every end
    fn transport_rate(&self, g: &[f64], out: &mut [f64]) {
        let nn = self.grid.n_cells;
        let nq = self.grid.q.points;
        let hn = self.grid.n_spacing();
        let hq = self.grid.q.spacing();
        let q = self.grid.q.centres();
        let inv = 1.0 / self.epsilon;
        let phi: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(k, v)| v / (self.rho_cell[k / nq] * self.m_q[k % nq]))
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut face = vec![0.0; nn + 1];
        for j in 0..nq {
            let f = |i: usize| phi[i * nq + j];
            for i in 1..nn {
                // face between cells i−1 and i
                let v = if i >= 2 && i + 1 < nn {
                    (7.0 * (f(i - 1) + f(i)) - f(i - 2) - f(i + 1)) / 12.0
                } else {
                    0.5 * (f(i - 1) + f(i))
                };
                face[i] = inv * q[j] * self.m_q[j] * self.rho_face[i] * v;
            }
            for i in 0..nn {
                out[i * nq + j] -= (face[i + 1] - face[i]) / hn;
            }
        }
        for i in 0..nn {
            let s = inv * self.force_cell[i];
            let row = &phi[i * nq..(i + 1) * nq];
            let o = &mut out[i * nq..(i + 1) * nq];
            for j in 0..nq - 1 {
                let flux = s * self.w_q[j] * 0.5 * (row[j] + row[j + 1]);
                o[j] -= flux / hq;
                o[j + 1] += flux / hq;
            }
        }
    }

    fn transport(&self, g: &mut [f64], h: f64) {
        let n = g.len();
        let mut k = vec![0.0; n];
        let mut acc = g.to_vec();
        let mut stage = vec![0.0; n];
        let weights = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        let next = [0.5, 0.5, 1.0];
        self.transport_rate(g, &mut k);
        for s in 0..4 {
            for i in 0..n {
                acc[i] += h * weights[s] * k[i];
            }
            if s < 3 {
                for i in 0..n {
                    stage[i] = g[i] + next[s] * h * k[i];
                }
                self.transport_rate(&stage, &mut k);
            }
        }
        g.copy_from_slice(&acc);
    }

    // TR-BDF2 over h; both stages solve with I − (γh/2)A
    fn collide(line: &Tridiagonal, lu: &Factored, x: &mut [f64], scratch: &mut [f64], h: f64) {
        let g = TRBDF2_GAMMA;
        let a = 1.0 / (g * (2.0 - g));
        let b = (1.0 - g) * (1.0 - g) * a;
        let c = 0.5 * g * h;
        line.apply(x, scratch);
        let n = x.len();
        let mut stage: Vec<f64> = (0..n).map(|j| x[j] + c * scratch[j]).collect();
        lu.solve(&mut stage);
        for j in 0..n {
            x[j] = a * stage[j] - b * x[j];
        }
        lu.solve(x);
    }

    /// One Strang step T(h/2) C(h) T(h/2) with factors built for h.
    pub fn step(&self, f: &mut InertialDensity, lus: &StepFactors) {
        let h = lus.h;
        self.transport(&mut f.g, 0.5 * h);
        let nq = self.grid.q.points;
        f.g.par_chunks_mut(nq).for_each(|row| {
            let mut scratch = vec![0.0; nq];
            Self::collide(&self.q_line, &lus.q, row, &mut scratch, h);
        });
        let mut scratch = vec![0.0; f.h.len()];
        Self::collide(&self.p_line, &lus.p, &mut f.h, &mut scratch, h);
        self.transport(&mut f.g, 0.5 * h);
    }

    /// Factorizations for step size `h`.
    pub fn factors(&self, h: f64) -> StepFactors {
        let c = 0.5 * TRBDF2_GAMMA * h;
        StepFactors {
            h,
            q: Factored::new(&self.q_line, c),
            p: Factored::new(&self.p_line, c),
        }
    }

    /// Equal steps of at most dt_max up to `t_final`; aborts on a value
    /// below −1e-12 or a mass drift above 1e-10.
    pub fn advance(&self, f: &mut InertialDensity, t_final: f64) -> Result<()> {
        let steps = (t_final / self.dt_max - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return Ok(());
        }
        let h = t_final / steps as f64;
        let lus = self.factors(h);
        let m0 = f.mass(&self.grid);
        for k in 0..steps {
            self.step(f, &lus);
            if k % 64 == 63 || k + 1 == steps {
                let (cell, worst) =
                    f.g.iter()
                        .enumerate()
                        .fold(
                            (0, f64::INFINITY),
                            |a, (i, &v)| if v < a.1 { (i, v) } else { a },
                        );
                if !worst.is_finite() || worst < -NEGATIVITY_TOLERANCE {
                    return Err(Error::NegativeDensity { value: worst, cell });
                }
                let drift = (f.mass(&self.grid) - m0).abs();
                if drift > 1e-10 * m0.abs().max(1.0) {
                    return Err(Error::NoConvergence {
                        iterations: k + 1,
                        residual: drift,
                    });
                }
            }
        }
        Ok(())
    }

    /// n-marginal ∫f dp dq as cell values.
    pub fn marginal(&self, f: &InertialDensity) -> Vec<f64> {
        flux_moments(f, &self.grid, self.epsilon)
            .expect("density built for this grid")
            .rho
    }
}

/// Factorizations of the collision lines for one step size.
#[derive(Clone, Debug)]
pub struct StepFactors {
    h: f64,
    q: Factored,
    p: Factored,
}

impl StepFactors {
    pub fn step_size(&self) -> f64 {
        self.h
    }
}

/// Advances `f0` to `t_final`.
pub fn solve_inertial_reduced(
    f0: &InertialDensity,
    params: &ReducedParams,
    grid: &ReducedInertialGrid,
    epsilon: f64,
    t_final: f64,
) -> Result<InertialDensity> {
    let solver = ReducedInertialSolver::new(
        params.clone(),
        grid.clone(),
        epsilon,
        ReducedOptions::default(),
    )?;
    if f0.min() < -NEGATIVITY_TOLERANCE {
        return Err(invalid("f0", "must be non-negative".to_string()));
    }
    let mut f = f0.clone();
    solver.advance(&mut f, t_final)?;
    Ok(f)
}

/// Cell averages of the normal density with mean `m` and variance `v`.
pub fn normal_cell_averages(grid: &ReducedInertialGrid, m: f64, v: f64) -> Vec<f64> {
    grid.cell_averages(|x| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
}
