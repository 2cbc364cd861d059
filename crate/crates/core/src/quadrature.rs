//! Product quadrature on the unit sphere and Gauss rules on the line.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Result};
use crate::geometry::{SphCoord, UnitVector};

/// Gauss–Legendre nodes and weights on [−1, 1], ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let deg = NonZeroUsize::new(n).ok_or_else(|| invalid("n", "need at least one node"))?;
    let rule = GaussLegendre::new(deg);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Gauss–Hermite rule for ∫ g(x) e^{−x²} dx, ascending.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let deg = NonZeroUsize::new(n)
        .filter(|d| d.get() >= 2)
        .ok_or_else(|| invalid("n", "Gauss-Hermite needs at least two nodes"))?;
    let rule = GaussHermite::new(deg);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Gauss–Legendre in cos θ times the uniform rule in φ.
///
/// Integrates exactly every spherical polynomial whose degree in cos θ is
/// below 2·n_theta and whose azimuthal frequency is below n_phi. Node `k`
/// sits on ring `k / n_phi` (ascending cos θ) at azimuth `k % n_phi`.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    n_theta: usize,
    n_phi: usize,
    cos_theta: Vec<f64>,
    ring_weights: Vec<f64>,
    nodes: Vec<UnitVector>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 {
            return Err(invalid("n_theta", "need at least 2 rings"));
        }
        if n_phi < 3 {
            return Err(invalid("n_phi", "need at least 3 azimuthal nodes"));
        }
        let (x, w) = gauss_legendre(n_theta)?;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let theta = xi.clamp(-1.0, 1.0).acos();
            for j in 0..n_phi {
                nodes.push(SphCoord::new(theta, j as f64 * dphi).to_unit());
                weights.push(wi * dphi);
            }
        }
        Ok(Self {
            n_theta,
            n_phi,
            cos_theta: x,
            ring_weights: w,
            nodes,
            weights,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[UnitVector] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// cos θ of each ring, ascending.
    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    /// Gauss–Legendre weight of each ring (without the 2π/n_phi factor).
    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn integrate<F: Fn(&UnitVector) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| w * f(n))
            .sum()
    }

    /// Weighted sum of values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.n_theta == other.n_theta && self.n_phi == other.n_phi
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self::new(32, 64).expect("default sphere quadrature")
    }
}
