//! Polymer stress τ = ⟨n⊗F(n)⟩ and the Hookean covariance oracles.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forces::SpringModel;
use crate::geometry::Vec3;
use crate::harness::moments::MIN_SAMPLES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressTensor {
    pub tau: Matrix3<f64>,
    pub se: Matrix3<f64>,
    /// Standard errors of τ_ij − τ_ji.
    pub antisymmetric_se: Matrix3<f64>,
    pub samples: usize,
}

impl StressTensor {
    /// max_ij |τ_ij − τ_ji| − 3·SE(τ_ij − τ_ji), rounding slack included.
    /// Non-positive means symmetric within 3 SE.
    pub fn asymmetry_excess(&self) -> f64 {
        let slack = 1e-13 * self.tau.abs().max();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..3 {
            for j in 0..3 {
                let d = (self.tau[(i, j)] - self.tau[(j, i)]).abs();
                worst = worst.max(d - 3.0 * self.antisymmetric_se[(i, j)] - slack);
            }
        }
        worst
    }
}

/// Monte Carlo average of n⊗F(n) over end-to-end vectors.
pub fn stress_tensor(n: &[Vec3], spring: &SpringModel) -> Result<StressTensor> {
    let count = n.len();
    if count < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            got: count,
        });
    }
    let mut sum = Matrix3::zeros();
    let mut sum2 = Matrix3::zeros();
    let mut asym2 = Matrix3::zeros();
    let mut asym = Matrix3::zeros();
    for v in n {
        let t = v * spring.force(v)?.transpose();
        let a = t - t.transpose();
        sum += t;
        sum2 += t.component_mul(&t);
        asym += a;
        asym2 += a.component_mul(&a);
    }
    let c = count as f64;
    let tau = sum / c;
    let sd = |s: Matrix3<f64>, s2: Matrix3<f64>| {
        (s2 / c - (s / c).component_mul(&(s / c))).map(|v| (v.max(0.0) / (c - 1.0)).sqrt())
    };
    Ok(StressTensor {
        tau,
        se: sd(sum, sum2),
        antisymmetric_se: sd(asym, asym2),
        samples: count,
    })
}

/// Solves A C + C Aᵀ + Q = 0 for C through the Kronecker form
/// (I⊗A + A⊗I) vec C = −vec Q.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::GridMismatch(
            "Lyapunov matrices must be square and equal".to_string(),
        ));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let x = k.lu().solve(&rhs).ok_or_else(|| {
        invalid(
            "flow",
            "no stationary covariance for this drift".to_string(),
        )
    })?;
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

fn hookean_h(spring: &SpringModel) -> Result<f64> {
    if spring.is_fene() {
        return Err(invalid(
            "spring",
            "the covariance oracle needs a Hookean spring".to_string(),
        ));
    }
    Ok(spring.h)
}

/// Stationary ⟨n⊗n⟩ of the overdamped Hookean dumbbell:
/// κC + Cκᵀ − (4H/ζ)C + (4k_BT/ζ)Id = 0.
pub fn overdamped_hookean_covariance(
    kappa: &Matrix3<f64>,
    spring: &SpringModel,
    zeta: f64,
    kbt: f64,
) -> Result<Matrix3<f64>> {
    let h = hookean_h(spring)?;
    let a = DMatrix::from_fn(3, 3, |i, j| {
        kappa[(i, j)] - if i == j { 2.0 * h / zeta } else { 0.0 }
    });
    let q = DMatrix::<f64>::identity(3, 3) * (4.0 * kbt / zeta);
    let c = lyapunov(&a, &q)?;
    Ok(Matrix3::from_fn(|i, j| c[(i, j)]))
}

/// Stationary ⟨n⊗n⟩ of the inertial Hookean dumbbell with m = ε², from the
/// 6×6 linear system for (n, q):
///
/// ```text
/// ṅ = q,   q̇ = (ζ/m)κn − (2H/m)n − (ζ/m)q + (√(4k_BTζ)/m) Ẇ
/// ```
pub fn inertial_hookean_covariance(
    kappa: &Matrix3<f64>,
    spring: &SpringModel,
    zeta: f64,
    kbt: f64,
    epsilon: f64,
) -> Result<Matrix3<f64>> {
    let h = hookean_h(spring)?;
    let m = epsilon * epsilon;
    let mut a = DMatrix::zeros(6, 6);
    let mut q = DMatrix::zeros(6, 6);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        a[(3 + i, 3 + i)] = -zeta / m;
        a[(3 + i, i)] -= 2.0 * h / m;
        for j in 0..3 {
            a[(3 + i, j)] += zeta / m * kappa[(i, j)];
        }
        q[(3 + i, 3 + i)] = 4.0 * kbt * zeta / (m * m);
    }
    let c = lyapunov(&a, &q)?;
    Ok(Matrix3::from_fn(|i, j| c[(i, j)]))
}
