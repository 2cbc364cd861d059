//! Monte Carlo moment estimators with grouped-jackknife standard errors.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dumbbell::{DumbbellState, OverdampedDumbbell};
use crate::error::{Error, Result};
use crate::fp::order_parameter;
use crate::geometry::Vec3;
use crate::rod::{OverdampedRod, RodParams, RodState};

/// Below this ensemble size error bars are refused.
pub const MIN_SAMPLES: usize = 100;
/// Number of jackknife groups (fewer when the ensemble is small).
pub const JACKKNIFE_GROUPS: usize = 50;

/// One trajectory reduced to what the moments need. Fluxes are in physical
/// velocity units: J₁ = ⟨εp⟩/ε and J₂ = ⟨v⟩/ε for the scaled velocities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub n: Vec3,
    pub j1: Vec3,
    pub j2: Vec3,
}

pub fn observe_dumbbells(states: &[DumbbellState], epsilon: f64) -> Vec<Observation> {
    states
        .iter()
        .map(|s| {
            let (p, q) = s.scaled_velocities(epsilon);
            Observation {
                n: s.n,
                j1: p / epsilon,
                j2: q / epsilon,
            }
        })
        .collect()
}

pub fn observe_rods(states: &[RodState], par: &RodParams) -> Vec<Observation> {
    states
        .iter()
        .map(|s| {
            let (p, w) = s.scaled_velocities(par);
            Observation {
                n: *s.n.as_vec(),
                j1: p / par.epsilon,
                j2: w / par.epsilon,
            }
        })
        .collect()
}

/// Overdamped states carry no velocities; their fluxes are zero.
pub fn observe_configurations(n: impl Iterator<Item = Vec3>) -> Vec<Observation> {
    n.map(|n| Observation {
        n,
        j1: Vec3::zeros(),
        j2: Vec3::zeros(),
    })
    .collect()
}

pub fn observe_overdamped_dumbbells(states: &[OverdampedDumbbell]) -> Vec<Observation> {
    observe_configurations(states.iter().map(|s| s.n))
}

pub fn observe_overdamped_rods(states: &[OverdampedRod]) -> Vec<Observation> {
    observe_configurations(states.iter().map(|s| *s.n.as_vec()))
}

/// Index pairs of the six independent entries of a symmetric 3×3 matrix,
/// in CSV column order.
pub const SYM_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mean_n: [f64; 3],
    pub cov_nn: [f64; 6],
    pub j1: [f64; 3],
    pub j2: [f64; 3],
    pub s: f64,
}

/// Configuration moments, scaled fluxes and (for rods) the order parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub samples: usize,
    /// Number density of the ensemble, 1 by normalization.
    pub rho: f64,
    pub mean_n: [f64; 3],
    /// Symmetric entries in [`SYM_INDEX`] order.
    pub cov_nn: [f64; 6],
    pub j1: [f64; 3],
    pub j2: [f64; 3],
    /// Largest eigenvalue of (3⟨n⊗n⟩ − Id)/2; only meaningful for rods.
    pub s: f64,
    pub se: MomentErrors,
}

impl MomentSet {
    pub fn cov_matrix(&self) -> Matrix3<f64> {
        sym_matrix(&self.cov_nn)
    }

    /// ⟨n⊗n⟩ = cov + mean⊗mean.
    pub fn second_moment(&self) -> Matrix3<f64> {
        let m = Vec3::from(self.mean_n);
        self.cov_matrix() + m * m.transpose()
    }

    /// Values in CSV column order: rho, mean, cov, J1, J2, S.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.rho];
        v.extend(self.mean_n);
        v.extend(self.cov_nn);
        v.extend(self.j1);
        v.extend(self.j2);
        v.push(self.s);
        v
    }

    /// Standard errors in the order of [`MomentSet::values`].
    pub fn errors(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        v.extend(self.se.mean_n);
        v.extend(self.se.cov_nn);
        v.extend(self.se.j1);
        v.extend(self.se.j2);
        v.push(self.se.s);
        v
    }

    /// Column names matching [`MomentSet::values`].
    pub fn columns() -> Vec<String> {
        let mut c = vec!["rho".to_string()];
        c.extend((1..=3).map(|i| format!("mean_{i}")));
        c.extend(
            SYM_INDEX
                .iter()
                .map(|(i, j)| format!("cov_{}{}", i + 1, j + 1)),
        );
        c.extend((1..=3).map(|i| format!("J1_{i}")));
        c.extend((1..=3).map(|i| format!("J2_{i}")));
        c.push("S".to_string());
        c
    }
}

impl MomentSet {
    /// Moments of a discretized density from its mass ∫ρ, first moment
    /// ∫nρ and second moment ∫n⊗nρ; the standard errors are zero.
    pub fn from_density(
        cells: usize,
        mass: f64,
        first: Vec3,
        second: &Matrix3<f64>,
        j1: Vec3,
        j2: Vec3,
    ) -> Self {
        let mean = first / mass;
        let m2 = second / mass;
        let cov = m2 - mean * mean.transpose();
        Self {
            samples: cells,
            rho: mass,
            mean_n: mean.into(),
            cov_nn: SYM_INDEX.map(|(i, j)| cov[(i, j)]),
            j1: j1.into(),
            j2: j2.into(),
            s: order_parameter(&m2).0,
            se: MomentErrors {
                mean_n: [0.0; 3],
                cov_nn: [0.0; 6],
                j1: [0.0; 3],
                j2: [0.0; 3],
                s: 0.0,
            },
        }
    }
}

pub fn sym_matrix(e: &[f64; 6]) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for (k, &(i, j)) in SYM_INDEX.iter().enumerate() {
        m[(i, j)] = e[k];
        m[(j, i)] = e[k];
    }
    m
}

// features: n (3), n⊗n (6), j1 (3), j2 (3)
const FEATURES: usize = 15;

fn features(o: &Observation) -> [f64; FEATURES] {
    let mut f = [0.0; FEATURES];
    f[..3].copy_from_slice(o.n.as_slice());
    for (k, &(i, j)) in SYM_INDEX.iter().enumerate() {
        f[3 + k] = o.n[i] * o.n[j];
    }
    f[9..12].copy_from_slice(o.j1.as_slice());
    f[12..15].copy_from_slice(o.j2.as_slice());
    f
}

// statistics as functions of the feature means
fn statistics(m: &[f64; FEATURES]) -> [f64; 19] {
    let mut s = [0.0; 19];
    s[..3].copy_from_slice(&m[..3]);
    let mut second = [0.0; 6];
    for (k, &(i, j)) in SYM_INDEX.iter().enumerate() {
        second[k] = m[3 + k];
        s[3 + k] = m[3 + k] - m[i] * m[j];
    }
    s[9..15].copy_from_slice(&m[9..15]);
    s[15] = order_parameter(&sym_matrix(&second)).0;
    s
}

/// Moments of an ensemble snapshot. Standard errors come from a
/// delete-one-group jackknife over contiguous groups of trajectories, which
/// for the plain means reduces to the usual σ/√N.
pub fn estimate_moments(obs: &[Observation]) -> Result<MomentSet> {
    let n = obs.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            got: n,
        });
    }
    let groups = JACKKNIFE_GROUPS.min(n / 2);
    let mut sums = vec![[0.0; FEATURES]; groups];
    let mut counts = vec![0usize; groups];
    for (i, o) in obs.iter().enumerate() {
        let g = i * groups / n;
        counts[g] += 1;
        for (s, f) in sums[g].iter_mut().zip(features(o)) {
            *s += f;
        }
    }
    let mut total = [0.0; FEATURES];
    for s in &sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let mean = total.map(|t| t / n as f64);
    let full = statistics(&mean);
    let leave_out: Vec<[f64; 19]> = (0..groups)
        .map(|g| {
            let c = (n - counts[g]) as f64;
            let mut m = [0.0; FEATURES];
            for k in 0..FEATURES {
                m[k] = (total[k] - sums[g][k]) / c;
            }
            statistics(&m)
        })
        .collect();
    let gf = groups as f64;
    let mut se = [0.0; 19];
    for k in 0..19 {
        let avg = leave_out.iter().map(|s| s[k]).sum::<f64>() / gf;
        let var = leave_out.iter().map(|s| (s[k] - avg).powi(2)).sum::<f64>();
        se[k] = ((gf - 1.0) / gf * var).sqrt();
    }
    let pick3 = |a: &[f64; 19], o: usize| [a[o], a[o + 1], a[o + 2]];
    let pick6 = |a: &[f64; 19]| [a[3], a[4], a[5], a[6], a[7], a[8]];
    Ok(MomentSet {
        samples: n,
        rho: 1.0,
        mean_n: pick3(&full, 0),
        cov_nn: pick6(&full),
        j1: pick3(&full, 9),
        j2: pick3(&full, 12),
        s: full[15],
        se: MomentErrors {
            mean_n: pick3(&se, 0),
            cov_nn: pick6(&se),
            j1: pick3(&se, 9),
            j2: pick3(&se, 12),
            s: se[15],
        },
    })
}

/// Per-component sample variance of `values[i][k]` with its normal-theory
/// standard error s²√(2/(N−1)).
pub fn component_variances(values: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            got: n,
        });
    }
    let d = values[0].len();
    Ok((0..d)
        .map(|k| {
            let mean = values.iter().map(|v| v[k]).sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (var, var * (2.0 / (n as f64 - 1.0)).sqrt())
        })
        .collect())
}
