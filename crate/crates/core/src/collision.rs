//! Velocity-space collision operators, their Maxwellians and cell problems.
//!
//! Both models share the form
//!
//! ```text
//! Q(f) = Σ_a ζ_a σ² ∂_a( M ∂_a(f/M) ),   M = exp(−|v|²/(2σ²))
//! ```
//!
//! with σ² = 2k_BT for the dumbbell (v = (p, q), ζ_a = ζ) and σ² = k_BT for
//! the rod (v = (p, ω), ζ_a = ζ_t on p axes and ζ_r on ω axes). The ω axes
//! are coordinates in the tangent plane at a fixed n, in the frame
//! (K e₁, K e₂) with K = rotate_to_pole(n).
//!
//! Discretization: cell-centred grid on [−v_max, v_max] per axis, zero flux
//! through the outer faces, and along axis a
//!
//! ```text
//! (Q_a f)_i = ζ_a σ² (W_{i+½}(g_{i+1} − g_i) − W_{i−½}(g_i − g_{i−1})) / h²,   g = f/M
//! ```
//!
//! The face weights W_{j+½} = −Σ_{i≤j} h v_i M_i / σ² approximate M at the
//! face and make Q_h(v_a M) = −ζ_a v_a M hold exactly. Conservation,
//! M-weighted symmetry and dissipativity follow from the flux form.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{rotate_to_pole, UnitVector, Vec3};
use crate::quadrature::{gauss_hermite, gauss_legendre};

pub const MIN_POINTS_PER_AXIS: usize = 8;
pub const MIN_THERMAL_WIDTHS: f64 = 6.0;

/// Compensated (Neumaier) sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Dumbbell,
    Rod,
}

/// The equilibrium exp(−(p² + q²)/(4k_BT)) (dumbbell) or
/// exp(−(p² + ω²)/(2k_BT)) (rod), unnormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxwellianSpec {
    pub model: Model,
    pub kbt: f64,
}

impl MaxwellianSpec {
    pub fn new(model: Model, kbt: f64) -> Result<Self> {
        if !(kbt > 0.0 && kbt.is_finite()) {
            return Err(invalid("kBT", format!("must be positive, got {kbt}")));
        }
        Ok(Self { model, kbt })
    }

    /// Per-component variance σ².
    pub fn variance(&self) -> f64 {
        match self.model {
            Model::Dumbbell => 2.0 * self.kbt,
            Model::Rod => self.kbt,
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        let r2: f64 = v.iter().map(|x| x * x).sum();
        (-r2 / (2.0 * self.variance())).exp()
    }

    /// C = ∫M over `dims` velocity components: (2πσ²)^{dims/2}.
    pub fn normalization(&self, dims: usize) -> f64 {
        (2.0 * std::f64::consts::PI * self.variance()).powf(dims as f64 / 2.0)
    }
}

/// A uniform cell-centred axis on [−v_max, v_max].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub points: usize,
    pub v_max: f64,
}

impl Axis {
    pub fn new(points: usize, v_max: f64) -> Result<Self> {
        if points < MIN_POINTS_PER_AXIS {
            return Err(invalid(
                "points",
                format!("need at least {MIN_POINTS_PER_AXIS} points per axis, got {points}"),
            ));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(invalid("v_max", format!("must be positive, got {v_max}")));
        }
        Ok(Self { points, v_max })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / self.points as f64
    }

    pub fn centre(&self, i: usize) -> f64 {
        let h = self.spacing();
        // symmetric about 0 to rounding
        (i as f64 - 0.5 * (self.points as f64 - 1.0)) * h
    }

    pub fn centres(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.centre(i)).collect()
    }
}

/// Tensor product of axes, stored row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl VelocityGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("axes", "need at least one axis"));
        }
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len() - 1).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].points;
        }
        let len = strides[0] * axes[0].points;
        Ok(Self { axes, strides, len })
    }

    /// `dims` identical axes with `points` cells and half-width
    /// `widths`·σ of the given Maxwellian.
    pub fn uniform(dims: usize, points: usize, widths: f64, spec: &MaxwellianSpec) -> Result<Self> {
        let axis = Axis::new(points, widths * spec.variance().sqrt())?;
        Self::new(vec![axis; dims])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for a in 0..self.dims() {
            idx[a] = k / self.strides[a];
            k %= self.strides[a];
        }
        idx
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .zip(&self.axes)
            .map(|(&i, ax)| ax.centre(i))
            .collect()
    }

    pub fn sample<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        (0..self.len)
            .into_par_iter()
            .map(|k| f(&self.point(k)))
            .collect()
    }

    /// Σ f_k times the cell volume, with compensated summation.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        neumaier_sum(f.iter().copied()) * self.cell_volume()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        (neumaier_sum(f.iter().map(|v| v * v)) * self.cell_volume()).sqrt()
    }
}

/// Ambient angular velocity with tangent-frame coordinates (w₁, w₂) at n.
pub fn tangent_point(n: &UnitVector, w1: f64, w2: f64) -> Vec3 {
    rotate_to_pole(n) * Vec3::new(w1, w2, 0.0)
}

/// Discrete collision operator on a [`VelocityGrid`].
/// Node values M_j = exp(−(v_j − c)²/(2σ²)) and face weights
/// W_{j+½} = −Σ_{i≤j} h (v_i − c) M_i / σ² of the one-dimensional flux
/// F_{j+½} = W_{j+½}(f_{j+1}/M_{j+1} − f_j/M_j)/h on uniform nodes `v`.
///
/// This choice makes Q_h(M) = 0 and Q_h((v − c)M) = −ζ(v − c)M hold exactly
/// on the grid. Each weight is accumulated from the end of the axis nearer
/// to it, so all terms of a sum share one sign.
pub fn face_weights(v: &[f64], s2: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let h = v[1] - v[0];
    let m: Vec<f64> = v
        .iter()
        .map(|x| (-(x - c) * (x - c) / (2.0 * s2)).exp())
        .collect();
    let split = (0..n - 1).filter(|&j| 0.5 * (v[j] + v[j + 1]) < c).count();
    let mut w = vec![0.0; n - 1];
    let mut acc = 0.0;
    for j in 0..split {
        acc -= h * (v[j] - c) * m[j] / s2;
        w[j] = acc;
    }
    let mut acc = 0.0;
    for j in (split..n - 1).rev() {
        acc += h * (v[j + 1] - c) * m[j + 1] / s2;
        w[j] = acc;
    }
    (m, w)
}

#[derive(Clone, Debug)]
pub struct CollisionOperator {
    spec: MaxwellianSpec,
    grid: VelocityGrid,
    frictions: Vec<f64>,
    // per axis: M at the centres and the face weights W_{j+½}, j = 0..n−2
    m_axis: Vec<Vec<f64>>,
    w_axis: Vec<Vec<f64>>,
    m: Vec<f64>,
}

impl CollisionOperator {
    pub fn new(spec: MaxwellianSpec, grid: VelocityGrid, frictions: Vec<f64>) -> Result<Self> {
        if frictions.len() != grid.dims() {
            return Err(Error::GridMismatch(format!(
                "{} frictions for {} axes",
                frictions.len(),
                grid.dims()
            )));
        }
        if let Some(z) = frictions.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
            return Err(invalid(
                "zeta",
                format!("frictions must be positive, got {z}"),
            ));
        }
        let s2 = spec.variance();
        for ax in grid.axes() {
            if ax.v_max < MIN_THERMAL_WIDTHS * s2.sqrt() * (1.0 - 1e-12) {
                return Err(invalid(
                    "v_max",
                    format!(
                        "{} is below {MIN_THERMAL_WIDTHS} thermal widths ({})",
                        ax.v_max,
                        MIN_THERMAL_WIDTHS * s2.sqrt()
                    ),
                ));
            }
        }
        let mut m_axis = Vec::new();
        let mut w_axis = Vec::new();
        for ax in grid.axes() {
            let (m, w) = face_weights(&ax.centres(), s2, 0.0);
            m_axis.push(m);
            w_axis.push(w);
        }
        let m = grid.sample(|v| spec.eval(v));
        Ok(Self {
            spec,
            grid,
            frictions,
            m_axis,
            w_axis,
            m,
        })
    }

    /// Dumbbell operator: every axis has friction ζ.
    pub fn dumbbell(kbt: f64, zeta: f64, grid: VelocityGrid) -> Result<Self> {
        let dims = grid.dims();
        Self::new(
            MaxwellianSpec::new(Model::Dumbbell, kbt)?,
            grid,
            vec![zeta; dims],
        )
    }

    /// Rod operator: the first `p_axes` axes are translational (ζ_t), the
    /// rest angular (ζ_r).
    pub fn rod(
        kbt: f64,
        zeta_t: f64,
        zeta_r: f64,
        p_axes: usize,
        grid: VelocityGrid,
    ) -> Result<Self> {
        if p_axes > grid.dims() {
            return Err(invalid("p_axes", "more translational axes than grid axes"));
        }
        let f = (0..grid.dims())
            .map(|a| if a < p_axes { zeta_t } else { zeta_r })
            .collect();
        Self::new(MaxwellianSpec::new(Model::Rod, kbt)?, grid, f)
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn spec(&self) -> &MaxwellianSpec {
        &self.spec
    }

    pub fn frictions(&self) -> &[f64] {
        &self.frictions
    }

    /// M sampled at the cell centres.
    pub fn maxwellian(&self) -> &[f64] {
        &self.m
    }

    /// Cell averages of M (8-point Gauss–Legendre per axis and cell).
    pub fn cell_averaged_maxwellian(&self) -> Vec<f64> {
        let (x, w) = gauss_legendre(8).expect("fixed rule");
        let s2 = self.spec.variance();
        let avg: Vec<Vec<f64>> = self
            .grid
            .axes()
            .iter()
            .map(|ax| {
                let h = ax.spacing();
                (0..ax.points)
                    .map(|i| {
                        let c = ax.centre(i);
                        x.iter()
                            .zip(&w)
                            .map(|(xi, wi)| {
                                let v = c + 0.5 * h * xi;
                                0.5 * wi * (-v * v / (2.0 * s2)).exp()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        (0..self.grid.len())
            .map(|k| {
                self.grid
                    .multi_index(k)
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| avg[a][i])
                    .product()
            })
            .collect()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {}",
                f.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Q(f) on the grid.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let g: Vec<f64> = f.iter().zip(&self.m).map(|(f, m)| f / m).collect();
        Ok(self.apply_to_ratio(&g))
    }

    /// Q(gM) for g = f/M given directly; avoids dividing by tiny M twice.
    pub fn apply_to_ratio(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for a in 0..self.grid.dims() {
            let ax = self.grid.axes()[a];
            let n = ax.points;
            let h = ax.spacing();
            let coef = self.frictions[a] * self.spec.variance() / (h * h);
            let stride = self.grid.strides[a];
            let w = &self.w_axis[a];
            let m0 = self.m_axis[a][0];
            let block = stride * n;
            out.par_chunks_mut(block)
                .zip(g.par_chunks(block))
                .zip(self.m.par_chunks(block))
                .for_each(|((o, gb), mb)| {
                    for r in 0..stride {
                        // M of the transverse coordinates, constant along the line
                        let transverse = mb[r] / m0;
                        let mut left_flux = 0.0;
                        for j in 0..n {
                            let right_flux = if j + 1 < n {
                                transverse * w[j] * (gb[r + (j + 1) * stride] - gb[r + j * stride])
                            } else {
                                0.0
                            };
                            o[r + j * stride] += coef * (right_flux - left_flux);
                            left_flux = right_flux;
                        }
                    }
                });
        }
        out
    }

    /// D^Q(f) = ∫ Q(f) f/M, by the grid quadrature.
    pub fn dissipation(&self, f: &[f64]) -> Result<f64> {
        let q = self.apply(f)?;
        let vol = self.grid.cell_volume();
        Ok(neumaier_sum(q.iter().zip(f).zip(&self.m).map(|((q, f), m)| q * f / m)) * vol)
    }

    /// Solves Q(ψ) = g with ∫ψ = 0.
    ///
    /// With u = ψ/√M the operator u ↦ −Q(√M u)/√M is symmetric positive
    /// semidefinite with kernel √M, and ∫g = 0 puts g/√M in its range.
    /// Conjugate gradients restricted to the complement of √M give the
    /// solution with ∫ψ = Σ √M u h = 0 built in.
    pub fn solve_cell_problem(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g)?;
        let vol = self.grid.cell_volume();
        let total = self.grid.integrate(g);
        let scale = neumaier_sum(g.iter().map(|v| v.abs())) * vol;
        if total.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Solvability { integral: total });
        }
        let n = self.grid.len();
        if scale == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let sq: Vec<f64> = self.m.iter().map(|m| m.sqrt()).collect();
        let sq_norm2 = neumaier_sum(sq.iter().map(|s| s * s));
        let project = |v: &mut [f64]| {
            let c = neumaier_sum(v.iter().zip(&sq).map(|(a, b)| a * b)) / sq_norm2;
            v.iter_mut().zip(&sq).for_each(|(a, b)| *a -= c * b);
        };
        // A u = −Q(√M u)/√M = −Q_ratio(u/√M)/√M
        let op = |u: &[f64]| -> Vec<f64> {
            let ratio: Vec<f64> = u.iter().zip(&sq).map(|(u, s)| u / s).collect();
            let q = self.apply_to_ratio(&ratio);
            q.iter().zip(&sq).map(|(q, s)| -q / s).collect()
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut b: Vec<f64> = g.iter().zip(&sq).map(|(g, s)| -g / s).collect();
        project(&mut b);
        let b_norm = dot(&b, &b).sqrt();
        let mut u = vec![0.0; n];
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let tol = 1e-13 * b_norm;
        let max_iter = 20 * n.min(5000) + 100;
        let mut it = 0;
        while rr.sqrt() > tol {
            if it >= max_iter {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: rr.sqrt() / b_norm,
                });
            }
            let mut ap = op(&p);
            project(&mut ap);
            let alpha = rr / dot(&p, &ap);
            u.iter_mut().zip(&p).for_each(|(u, p)| *u += alpha * p);
            r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
            // periodic re-orthogonalization against the kernel
            if it % 50 == 49 {
                project(&mut r);
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
            rr = rr_new;
            it += 1;
        }
        project(&mut u);
        Ok(u.iter().zip(&sq).map(|(u, s)| u * s).collect())
    }

    /// ‖Q(ψ) − g‖₂ / ‖g‖₂.
    pub fn relative_residual(&self, psi: &[f64], g: &[f64]) -> Result<f64> {
        let q = self.apply(psi)?;
        let diff: Vec<f64> = q.iter().zip(g).map(|(a, b)| a - b).collect();
        Ok(self.grid.l2_norm(&diff) / self.grid.l2_norm(g))
    }

    /// A random density of the form M(1 + ½r), r uniform in [−1, 1] per
    /// cell: rough, positive and in the natural weighted space of Q.
    pub fn random_density<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.m
            .iter()
            .map(|m| m * (1.0 + 0.5 * rng.random_range(-1.0..1.0)))
            .collect()
    }
}

pub fn apply_q(f: &[f64], op: &CollisionOperator) -> Result<Vec<f64>> {
    op.apply(f)
}

pub fn dissipation(f: &[f64], op: &CollisionOperator) -> Result<f64> {
    op.dissipation(f)
}

pub fn solve_cell_problem(g: &[f64], op: &CollisionOperator) -> Result<Vec<f64>> {
    op.solve_cell_problem(g)
}

/// Closed-form correctors of the cell problems
///
/// ```text
/// a = −pM/ζ_p,  b = −vM/ζ_v,  c = −a/σ²,  d = −b/σ²
/// ```
///
/// where v is q (dumbbell) or ω (rod) and σ² = 2k_BT or k_BT.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticCellSolutions {
    pub spec: MaxwellianSpec,
    /// ζ (dumbbell) or ζ_t (rod)
    pub zeta_p: f64,
    /// ζ (dumbbell) or ζ_r (rod)
    pub zeta_v: f64,
}

impl AnalyticCellSolutions {
    pub fn dumbbell(kbt: f64, zeta: f64) -> Result<Self> {
        Ok(Self {
            spec: MaxwellianSpec::new(Model::Dumbbell, kbt)?,
            zeta_p: zeta,
            zeta_v: zeta,
        })
    }

    pub fn rod(kbt: f64, zeta_t: f64, zeta_r: f64) -> Result<Self> {
        Ok(Self {
            spec: MaxwellianSpec::new(Model::Rod, kbt)?,
            zeta_p: zeta_t,
            zeta_v: zeta_r,
        })
    }

    fn m(&self, p: &[f64], v: &[f64]) -> f64 {
        let r2: f64 = p.iter().chain(v).map(|x| x * x).sum();
        (-r2 / (2.0 * self.spec.variance())).exp()
    }

    pub fn a(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.m(p, v);
        p.iter().map(|x| -x * m / self.zeta_p).collect()
    }

    pub fn b(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.m(p, v);
        v.iter().map(|x| -x * m / self.zeta_v).collect()
    }

    pub fn c(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let s2 = self.spec.variance();
        self.a(p, v).into_iter().map(|x| -x / s2).collect()
    }

    pub fn d(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let s2 = self.spec.variance();
        self.b(p, v).into_iter().map(|x| -x / s2).collect()
    }

    /// (∫b·p, ∫d·p, ∫a·v, ∫c·v) by tensor Gauss–Hermite quadrature with
    /// `dims` components each of p and v. The rules are exact here.
    pub fn orthogonality_integrals(&self, dims: usize) -> [f64; 4] {
        let (x, w) = gauss_hermite(4).expect("fixed rule");
        let scale = (2.0 * self.spec.variance()).sqrt();
        let total = 2 * dims;
        let count = x.len().pow(total as u32);
        let mut sums = [0.0; 4];
        let mut idx = vec![0usize; total];
        for _ in 0..count {
            let z: Vec<f64> = idx.iter().map(|&i| x[i] * scale).collect();
            // the quadrature weight already carries e^{−x²} = M
            let weight: f64 =
                idx.iter().map(|&i| w[i] * scale).product::<f64>() / self.m(&z[..dims], &z[dims..]);
            let (p, v) = z.split_at(dims);
            let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            sums[0] += weight * dotp(&self.b(p, v), p);
            sums[1] += weight * dotp(&self.d(p, v), p);
            sums[2] += weight * dotp(&self.a(p, v), v);
            sums[3] += weight * dotp(&self.c(p, v), v);
            for k in (0..total).rev() {
                idx[k] += 1;
                if idx[k] < x.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        sums
    }
}

/// Both sides of the Gaussian moment identities for the rod Maxwellian:
///
/// ```text
/// ∫ M (p·A) p dp = k_BT A ∫M dp
/// ∫ M (ω·A) ω d_nω = k_BT (Id − n⊗n) A ∫M d_nω
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMomentCheck {
    pub lhs_p: Vec3,
    pub lhs_omega: Vec3,
    pub rhs_p: Vec3,
    pub rhs_omega: Vec3,
}

impl GaussianMomentCheck {
    /// Largest relative error, measured against k_BT|A|∫M.
    pub fn relative_error(&self, a_norm: f64, kbt: f64) -> f64 {
        let sp = kbt * a_norm * (2.0 * std::f64::consts::PI * kbt).powf(1.5);
        let sw = kbt * a_norm * 2.0 * std::f64::consts::PI * kbt;
        ((self.lhs_p - self.rhs_p).norm() / sp).max((self.lhs_omega - self.rhs_omega).norm() / sw)
    }
}

/// Left sides by Gauss–Hermite quadrature (p over ℝ³, ω over the tangent
/// plane at n through rotate_to_pole), right sides in closed form.
pub fn gaussian_moment_identity(a: &Vec3, n: &UnitVector, kbt: f64) -> Result<GaussianMomentCheck> {
    if !(kbt > 0.0 && kbt.is_finite()) {
        return Err(invalid("kBT", format!("must be positive, got {kbt}")));
    }
    let (x, w) = gauss_hermite(6)?;
    let s = (2.0 * kbt).sqrt();
    let mut lhs_p = Vec3::zeros();
    for (i, wi) in x.iter().zip(&w) {
        for (j, wj) in x.iter().zip(&w) {
            for (k, wk) in x.iter().zip(&w) {
                let p = Vec3::new(i * s, j * s, k * s);
                lhs_p += p * p.dot(a) * (wi * wj * wk * s * s * s);
            }
        }
    }
    let mut lhs_omega = Vec3::zeros();
    for (i, wi) in x.iter().zip(&w) {
        for (j, wj) in x.iter().zip(&w) {
            let om = tangent_point(n, i * s, j * s);
            lhs_omega += om * om.dot(a) * (wi * wj * s * s);
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let rhs_p = a * kbt * (two_pi * kbt).powf(1.5);
    let rhs_omega = n.tangent_projector() * a * kbt * (two_pi * kbt);
    Ok(GaussianMomentCheck {
        lhs_p,
        lhs_omega,
        rhs_p,
        rhs_omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn op2(points: usize) -> CollisionOperator {
        let spec = MaxwellianSpec::new(Model::Dumbbell, 0.5).unwrap();
        CollisionOperator::dumbbell(
            0.5,
            1.3,
            VelocityGrid::uniform(2, points, 6.0, &spec).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn maxwellian_is_in_the_kernel() {
        let op = op2(24);
        let q = op.apply(op.maxwellian()).unwrap();
        assert!(q.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn first_moment_relaxes_at_rate_zeta() {
        let op = op2(24);
        for a in 0..2 {
            let f = op.grid().sample(|v| v[a] * op.spec().eval(v));
            let q = op.apply(&f).unwrap();
            let err = q
                .iter()
                .zip(&f)
                .map(|(q, f)| (q + 1.3 * f).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-13, "{err}");
        }
    }

    #[test]
    fn face_weights_are_positive_and_symmetric() {
        let op = op2(17);
        let w = &op.w_axis[0];
        assert!(w.iter().all(|x| *x > 0.0));
        for j in 0..w.len() {
            assert!((w[j] - w[w.len() - 1 - j]).abs() <= 1e-15 * w[j].max(1e-300));
        }
    }

    #[test]
    fn conservation_and_dissipation() {
        let op = op2(32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let f = op.random_density(&mut rng);
            let norm = op.grid().l2_norm(&f);
            let q = op.apply(&f).unwrap();
            assert!(op.grid().integrate(&q).abs() < 1e-13 * norm);
            assert!(op.dissipation(&f).unwrap() < 0.0);
        }
        let f: Vec<f64> = op.maxwellian().iter().map(|m| 2.5 * m).collect();
        assert!(op.dissipation(&f).unwrap().abs() < 1e-14 * op.grid().l2_norm(&f).powi(2));
    }

    #[test]
    fn dissipation_of_linear_perturbation() {
        let op = op2(48);
        let f = op.grid().sample(|v| (1.0 + 0.1 * v[0]) * op.spec().eval(v));
        // −ζσ² ∫ M |∇(f/M)|² = −ζσ² (0.01) ∫M
        let exact = -1.3 * 1.0 * 0.01 * op.spec().normalization(2);
        assert!((op.dissipation(&f).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn cell_problem_recovers_analytic_corrector() {
        let op = op2(32);
        let g = op.grid().sample(|v| v[0] * op.spec().eval(v));
        let psi = op.solve_cell_problem(&g).unwrap();
        let a = AnalyticCellSolutions::dumbbell(0.5, 1.3).unwrap();
        let exact = op.grid().sample(|v| a.a(&v[..1], &v[1..])[0]);
        let diff: Vec<f64> = psi.iter().zip(&exact).map(|(x, y)| x - y).collect();
        assert!(op.grid().l2_norm(&diff) < 1e-8 * op.grid().l2_norm(&exact));
        assert!(op.relative_residual(&psi, &g).unwrap() < 1e-8);
        assert!(op.grid().integrate(&psi).abs() < 1e-14);
    }

    #[test]
    fn cell_problem_zero_and_unsolvable() {
        let op = op2(16);
        assert!(op
            .solve_cell_problem(&vec![0.0; op.grid().len()])
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let err = op.solve_cell_problem(op.maxwellian()).unwrap_err();
        assert!(matches!(err, Error::Solvability { .. }));
    }

    #[test]
    fn coarse_grids_are_rejected() {
        assert!(Axis::new(7, 1.0).is_err());
        let spec = MaxwellianSpec::new(Model::Rod, 1.0).unwrap();
        let grid = VelocityGrid::uniform(2, 16, 4.0, &spec).unwrap();
        assert!(CollisionOperator::rod(1.0, 1.0, 1.0, 1, grid).is_err());
    }

    #[test]
    fn analytic_solutions_example() {
        let a = AnalyticCellSolutions::dumbbell(1.0, 1.0).unwrap();
        let v = a.a(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert!((v[0] + (-0.25f64).exp()).abs() < 1e-15 && v[1] == 0.0 && v[2] == 0.0);
        let r = AnalyticCellSolutions::rod(0.7, 1.0, 2.0).unwrap();
        let (p, w) = ([0.1, 0.2, 0.3], [0.4, -0.5]);
        for (b, d) in r.b(&p, &w).iter().zip(r.d(&p, &w)) {
            assert!((d - b / -0.7).abs() < 1e-15);
        }
        for s in a
            .orthogonality_integrals(3)
            .iter()
            .chain(r.orthogonality_integrals(2).iter())
        {
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_moments_simple_cases() {
        let n = UnitVector::from_xyz(0.3, -0.2, 0.9).unwrap();
        let c = gaussian_moment_identity(n.as_vec(), &n, 0.8).unwrap();
        assert!(c.rhs_omega.norm() < 1e-15 && c.lhs_omega.norm() < 1e-10);
        let a = tangent_point(&n, 1.0, 2.0);
        let c = gaussian_moment_identity(&a, &n, 0.8).unwrap();
        let target = a * 0.8 * 2.0 * std::f64::consts::PI * 0.8;
        assert!((c.lhs_omega - target).norm() < 1e-12);
        assert!(c.relative_error(a.norm(), 0.8) < 1e-12);
    }

    #[test]
    fn second_order_on_cell_averages() {
        let res = |n: usize| {
            let op = op2(n);
            let q = op.apply(&op.cell_averaged_maxwellian()).unwrap();
            q.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let r: Vec<f64> = [16, 32, 64, 128, 256].iter().map(|&n| res(n)).collect();
        let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        println!("{orders:?}");
        assert!((orders[3] - 2.0).abs() < 0.2, "{orders:?}");
    }
}
