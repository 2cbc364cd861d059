//! Real orthonormal spherical harmonics and transforms on a product grid.
//!
//! Mode `k = l² + l + m` for −l ≤ m ≤ l, with
//! Y_l0 = P̄_l⁰(cos θ), Y_lm = √2 P̄_l^m cos mφ and Y_l,−m = √2 P̄_l^m sin mφ,
//! where P̄_l^m are the associated Legendre functions normalized so that
//! ∫_{𝕊²} Y_k Y_k' = δ_kk' (no Condon–Shortley phase).

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};
use crate::geometry::{spherical_basis, UnitVector, Vec3};
use crate::quadrature::SphereQuadrature;

pub fn mode_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

pub fn mode_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Inverse of [`mode_index`].
pub fn mode_degree(k: usize) -> (usize, i64) {
    let l = (k as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= k { l + 1 } else { l };
    (l, k as i64 - (l * l + l) as i64)
}

fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// P̄_l^m(x) and dP̄_l^m/dθ for 0 ≤ m ≤ l ≤ l_max at x = cos θ, s = sin θ,
/// stored at `l(l+1)/2 + m`.
///
/// The θ-derivative divides by s; it loses accuracy like eps/s² close to
/// the poles and is meant for points with s well away from zero.
pub fn legendre_table(l_max: usize, x: f64, s: f64) -> (Vec<f64>, Vec<f64>) {
    let size = tri(l_max, l_max) + 1;
    let mut p = vec![0.0; size];
    p[0] = 0.5 / PI.sqrt();
    for m in 1..=l_max {
        let r = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        p[tri(m, m)] = r * s * p[tri(m - 1, m - 1)];
    }
    for m in 0..l_max {
        p[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * p[tri(m, m)];
        for l in m + 2..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    let mut dp = vec![0.0; size];
    for l in 1..=l_max {
        for m in 0..=l {
            let (lf, mf) = (l as f64, m as f64);
            let prev = if m < l { p[tri(l - 1, m)] } else { 0.0 };
            let c = ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt();
            dp[tri(l, m)] = (lf * x * p[tri(l, m)] - c * prev) / s;
        }
    }
    (p, dp)
}

/// Ordinary Legendre polynomials P_0..P_{l_max} at x.
pub fn legendre_p(l_max: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0; l_max + 1];
    if l_max >= 1 {
        p[1] = x;
    }
    for l in 2..=l_max {
        let lf = l as f64;
        p[l] = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
    }
    p
}

/// All Y_k(n), k < (l_max+1)².
pub fn real_sph_eval(l_max: usize, n: &UnitVector) -> Vec<f64> {
    eval_inner(l_max, n, false).0
}

/// All Y_k(n) together with ℛY_k(n) in ambient components.
pub fn real_sph_eval_with_gradient(l_max: usize, n: &UnitVector) -> (Vec<f64>, Vec<Vec3>) {
    eval_inner(l_max, n, true)
}

fn eval_inner(l_max: usize, n: &UnitVector, with_grad: bool) -> (Vec<f64>, Vec<Vec3>) {
    let c = n.to_sph();
    let (s, x) = c.theta.sin_cos();
    // keep s away from zero; the harmonics are smooth so the shift is harmless
    let s_safe = s.max(1e-150);
    let (p, dp) = legendre_table(l_max, x, s_safe);
    let basis = spherical_basis(c);
    let mut y = vec![0.0; mode_count(l_max)];
    let mut g = if with_grad {
        vec![Vec3::zeros(); mode_count(l_max)]
    } else {
        Vec::new()
    };
    for l in 0..=l_max {
        for m in 0..=l {
            let t = tri(l, m);
            if m == 0 {
                let k = mode_index(l, 0);
                y[k] = p[t];
                if with_grad {
                    g[k] = basis.e_phi * dp[t];
                }
                continue;
            }
            let (sm, cm) = (m as f64 * c.phi).sin_cos();
            let kc = mode_index(l, m as i64);
            let ks = mode_index(l, -(m as i64));
            y[kc] = SQRT_2 * p[t] * cm;
            y[ks] = SQRT_2 * p[t] * sm;
            if with_grad {
                let mf = m as f64;
                let p_over_s = p[t] / s_safe;
                // ℛY = e_φ ∂_θ Y − e_θ ∂_φ Y / sin θ
                g[kc] = SQRT_2 * (basis.e_phi * dp[t] * cm + basis.e_theta * mf * p_over_s * sm);
                g[ks] = SQRT_2 * (basis.e_phi * dp[t] * sm - basis.e_theta * mf * p_over_s * cm);
            }
        }
    }
    (y, g)
}

/// Spherical-harmonic transforms on a [`SphereQuadrature`] grid.
///
/// Analysis is exact for band-limited data of degree ≤ l_max as long as the
/// grid integrates products of two such functions exactly, which
/// [`SphGrid::new`] enforces. [`SphGrid::for_cubic_products`] sizes the grid
/// so that products of three degree-l_max functions are integrated exactly.
#[derive(Clone, Debug)]
pub struct SphGrid {
    l_max: usize,
    quad: SphereQuadrature,
    // per ring, triangular Legendre tables
    p: Vec<Vec<f64>>,
    dp: Vec<Vec<f64>>,
    sin_theta: Vec<f64>,
    // cos/sin(mφ_j), row m
    cos_m: Vec<Vec<f64>>,
    sin_m: Vec<Vec<f64>>,
    e_theta: Vec<Vec3>,
    e_phi: Vec<Vec3>,
}

impl SphGrid {
    pub fn new(l_max: usize, quad: SphereQuadrature) -> Result<Self> {
        if quad.n_theta() < l_max + 1 || quad.n_phi() < 2 * l_max + 1 {
            return Err(invalid(
                "l_max",
                format!(
                    "degree {l_max} needs at least {}x{} nodes, got {}x{}",
                    l_max + 1,
                    2 * l_max + 1,
                    quad.n_theta(),
                    quad.n_phi()
                ),
            ));
        }
        let mut p = Vec::with_capacity(quad.n_theta());
        let mut dp = Vec::with_capacity(quad.n_theta());
        let mut sin_theta = Vec::with_capacity(quad.n_theta());
        for &x in quad.cos_theta() {
            let s = (1.0 - x * x).sqrt();
            let (pi, dpi) = legendre_table(l_max, x, s);
            p.push(pi);
            dp.push(dpi);
            sin_theta.push(s);
        }
        let nphi = quad.n_phi();
        let cos_m = (0..=l_max)
            .map(|m| (0..nphi).map(|j| (m as f64 * quad.phi(j)).cos()).collect())
            .collect();
        let sin_m = (0..=l_max)
            .map(|m| (0..nphi).map(|j| (m as f64 * quad.phi(j)).sin()).collect())
            .collect();
        let mut e_theta = Vec::with_capacity(quad.len());
        let mut e_phi = Vec::with_capacity(quad.len());
        for n in quad.nodes() {
            let b = spherical_basis(n.to_sph());
            e_theta.push(b.e_theta);
            e_phi.push(b.e_phi);
        }
        Ok(Self {
            l_max,
            quad,
            p,
            dp,
            sin_theta,
            cos_m,
            sin_m,
            e_theta,
            e_phi,
        })
    }

    /// Grid on which triple products of degree-l_max functions (and a cubic
    /// polynomial factor) are integrated exactly.
    pub fn for_cubic_products(l_max: usize) -> Result<Self> {
        let deg = 3 * l_max + 3;
        let quad = SphereQuadrature::new(deg / 2 + 1, deg + 1)?;
        Self::new(l_max, quad)
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn modes(&self) -> usize {
        mode_count(self.l_max)
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        &self.quad
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    /// Unit vectors e_θ at the nodes.
    pub fn e_theta(&self) -> &[Vec3] {
        &self.e_theta
    }

    pub fn e_phi(&self) -> &[Vec3] {
        &self.e_phi
    }

    fn check_modes(&self, c: &[f64]) {
        assert_eq!(c.len(), self.modes(), "coefficient vector length");
    }

    /// Values at the nodes of Σ c_k Y_k.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        self.synthesize_with(c, false).0
    }

    /// ∂_θ f and (∂_φ f)/sin θ at the nodes, so that
    /// ℛf = e_φ·(first) − e_θ·(second).
    pub fn synthesize_derivatives(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (_, dt, dps) = self.synthesize_with(c, true);
        (dt, dps)
    }

    /// ℛf at the nodes, in ambient components.
    pub fn synthesize_rgrad(&self, c: &[f64]) -> Vec<Vec3> {
        let (dt, dps) = self.synthesize_derivatives(c);
        (0..self.len())
            .map(|k| self.e_phi[k] * dt[k] - self.e_theta[k] * dps[k])
            .collect()
    }

    fn synthesize_with(&self, c: &[f64], derivs: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        self.check_modes(c);
        let (nt, np, lmax) = (self.quad.n_theta(), self.quad.n_phi(), self.l_max);
        let mut f = vec![0.0; nt * np];
        let mut ft = if derivs {
            vec![0.0; nt * np]
        } else {
            Vec::new()
        };
        let mut fp = if derivs {
            vec![0.0; nt * np]
        } else {
            Vec::new()
        };
        let mut a = vec![0.0; lmax + 1];
        let mut b = vec![0.0; lmax + 1];
        let mut at = vec![0.0; lmax + 1];
        let mut bt = vec![0.0; lmax + 1];
        for i in 0..nt {
            let (p, dp) = (&self.p[i], &self.dp[i]);
            for m in 0..=lmax {
                let scale = if m == 0 { 1.0 } else { SQRT_2 };
                let (mut sa, mut sb, mut sat, mut sbt) = (0.0, 0.0, 0.0, 0.0);
                for l in m..=lmax {
                    let t = tri(l, m);
                    let cc = c[mode_index(l, m as i64)];
                    sa += cc * p[t];
                    sat += cc * dp[t];
                    if m > 0 {
                        let cs = c[mode_index(l, -(m as i64))];
                        sb += cs * p[t];
                        sbt += cs * dp[t];
                    }
                }
                a[m] = scale * sa;
                b[m] = scale * sb;
                at[m] = scale * sat;
                bt[m] = scale * sbt;
            }
            let s = self.sin_theta[i];
            for j in 0..np {
                let (mut v, mut vt, mut vp) = (a[0], at[0], 0.0);
                for m in 1..=lmax {
                    let (cm, sm) = (self.cos_m[m][j], self.sin_m[m][j]);
                    v += a[m] * cm + b[m] * sm;
                    if derivs {
                        vt += at[m] * cm + bt[m] * sm;
                        vp += m as f64 * (b[m] * cm - a[m] * sm);
                    }
                }
                let k = i * np + j;
                f[k] = v;
                if derivs {
                    ft[k] = vt;
                    fp[k] = vp / s;
                }
            }
        }
        (f, ft, fp)
    }

    /// Quadrature projection c_k = ∫ f Y_k.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "node value vector length");
        let (nt, np, lmax) = (self.quad.n_theta(), self.quad.n_phi(), self.l_max);
        let dphi = 2.0 * PI / np as f64;
        let mut c = vec![0.0; self.modes()];
        let mut fc = vec![0.0; lmax + 1];
        let mut fs = vec![0.0; lmax + 1];
        for i in 0..nt {
            let row = &values[i * np..(i + 1) * np];
            self.ring_fourier(row, &mut fc, &mut fs);
            let w = self.quad.ring_weights()[i] * dphi;
            let p = &self.p[i];
            for m in 0..=lmax {
                let scale = if m == 0 { w } else { w * SQRT_2 };
                for l in m..=lmax {
                    let t = tri(l, m);
                    c[mode_index(l, m as i64)] += scale * p[t] * fc[m];
                    if m > 0 {
                        c[mode_index(l, -(m as i64))] += scale * p[t] * fs[m];
                    }
                }
            }
        }
        c
    }

    /// c_k = ∫ ℛY_k · V for the tangent field V = V_θ e_θ + V_φ e_φ given by
    /// its components at the nodes. By parts this is −∫ Y_k ℛ·V.
    pub fn analyze_rdiv(&self, v_theta: &[f64], v_phi: &[f64]) -> Vec<f64> {
        assert_eq!(v_theta.len(), self.len());
        assert_eq!(v_phi.len(), self.len());
        let (nt, np, lmax) = (self.quad.n_theta(), self.quad.n_phi(), self.l_max);
        let dphi = 2.0 * PI / np as f64;
        let mut c = vec![0.0; self.modes()];
        let (mut tc, mut ts) = (vec![0.0; lmax + 1], vec![0.0; lmax + 1]);
        let (mut pc, mut ps) = (vec![0.0; lmax + 1], vec![0.0; lmax + 1]);
        for i in 0..nt {
            self.ring_fourier(&v_theta[i * np..(i + 1) * np], &mut tc, &mut ts);
            self.ring_fourier(&v_phi[i * np..(i + 1) * np], &mut pc, &mut ps);
            let w = self.quad.ring_weights()[i] * dphi;
            let s = self.sin_theta[i];
            let (p, dp) = (&self.p[i], &self.dp[i]);
            for m in 0..=lmax {
                let mf = m as f64;
                let scale = if m == 0 { w } else { w * SQRT_2 };
                for l in m.max(1)..=lmax {
                    let t = tri(l, m);
                    let pos = p[t] / s;
                    // cos-type: ∂_θY ~ dp cos, ∂_φY/s ~ −m p/s sin
                    c[mode_index(l, m as i64)] += scale * (dp[t] * pc[m] + mf * pos * ts[m]);
                    if m > 0 {
                        // sin-type: ∂_θY ~ dp sin, ∂_φY/s ~ m p/s cos
                        c[mode_index(l, -(m as i64))] += scale * (dp[t] * ps[m] - mf * pos * tc[m]);
                    }
                }
            }
        }
        c
    }

    fn ring_fourier(&self, row: &[f64], fc: &mut [f64], fs: &mut [f64]) {
        for m in 0..=self.l_max {
            let (cm, sm) = (&self.cos_m[m], &self.sin_m[m]);
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..row.len() {
                a += row[j] * cm[j];
                b += row[j] * sm[j];
            }
            fc[m] = a;
            fs[m] = b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotational_gradient, SphCoord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn index_round_trip() {
        for k in 0..mode_count(12) {
            let (l, m) = mode_degree(k);
            assert!(m.unsigned_abs() as usize <= l);
            assert_eq!(mode_index(l, m), k);
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        let n = UnitVector::from_xyz(0.3, -0.4, 0.5).unwrap();
        let v = n.as_vec();
        let y = real_sph_eval(2, &n);
        let c0 = 0.5 / PI.sqrt();
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert!((y[0] - c0).abs() < 1e-15);
        assert!((y[mode_index(1, 0)] - c1 * v.z).abs() < 1e-14);
        assert!((y[mode_index(1, 1)] - c1 * v.x).abs() < 1e-14);
        assert!((y[mode_index(1, -1)] - c1 * v.y).abs() < 1e-14);
        let p2 = 0.5 * (3.0 * v.z * v.z - 1.0);
        assert!((y[mode_index(2, 0)] - (5.0 / (4.0 * PI)).sqrt() * p2).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_on_grid() {
        let g = SphGrid::new(8, SphereQuadrature::new(9, 17).unwrap()).unwrap();
        let vals: Vec<Vec<f64>> = g
            .quadrature()
            .nodes()
            .iter()
            .map(|n| real_sph_eval(8, n))
            .collect();
        for a in 0..g.modes() {
            for b in 0..g.modes() {
                let s: f64 = vals
                    .iter()
                    .zip(g.quadrature().weights())
                    .map(|(y, w)| w * y[a] * y[b])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12, "{a} {b} {s}");
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let g = SphGrid::new(10, SphereQuadrature::new(12, 24).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c: Vec<f64> = (0..g.modes())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let back = g.analyze(&g.synthesize(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_matches_pointwise_evaluation() {
        let g = SphGrid::new(6, SphereQuadrature::new(8, 16).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c: Vec<f64> = (0..g.modes())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f = g.synthesize(&c);
        let rg = g.synthesize_rgrad(&c);
        for (k, n) in g.quadrature().nodes().iter().enumerate() {
            let (y, gy) = real_sph_eval_with_gradient(6, n);
            let v: f64 = y.iter().zip(&c).map(|(a, b)| a * b).sum();
            let r: Vec3 = gy.iter().zip(&c).map(|(a, b)| a * *b).sum();
            assert!((v - f[k]).abs() < 1e-12);
            assert!((r - rg[k]).norm() < 1e-11);
        }
    }

    #[test]
    fn rotational_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let n =
                SphCoord::new(rng.random_range(0.2..3.0), rng.random_range(0.0..6.28)).to_unit();
            let (_, g) = real_sph_eval_with_gradient(5, &n);
            for k in 0..mode_count(5) {
                let fd = rotational_gradient(|m| real_sph_eval(5, m)[k], &n, 1e-5);
                assert!((fd - g[k]).norm() < 1e-7, "mode {k}");
            }
        }
    }

    #[test]
    fn laplacian_eigenvalue_by_parts() {
        // ∫ ℛY_k · ℛY_k' = l(l+1) δ_kk'
        let g = SphGrid::new(6, SphereQuadrature::new(10, 20).unwrap()).unwrap();
        for k in 0..g.modes() {
            let mut e = vec![0.0; g.modes()];
            e[k] = 1.0;
            let (dt, dps) = g.synthesize_derivatives(&e);
            // V = ℛY_k: V_θ = −dps, V_φ = dt
            let vt: Vec<f64> = dps.iter().map(|v| -v).collect();
            let c = g.analyze_rdiv(&vt, &dt);
            let (l, _) = mode_degree(k);
            for (j, cj) in c.iter().enumerate() {
                let want = if j == k { (l * (l + 1)) as f64 } else { 0.0 };
                assert!((cj - want).abs() < 1e-10, "{k} {j} {cj}");
            }
        }
    }

    #[test]
    fn grid_too_small_is_rejected() {
        assert!(SphGrid::new(10, SphereQuadrature::new(6, 30).unwrap()).is_err());
    }
}
