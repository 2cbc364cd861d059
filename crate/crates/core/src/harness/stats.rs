//! Histograms, distances and small statistical tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Bins per axis for `n` samples: round(n^{1/3}), at least 4.
pub fn bins_per_axis(n: usize) -> usize {
    ((n as f64).cbrt().round() as usize).max(4)
}

/// Uniform histogram on a box; samples outside the box are counted apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub ranges: Vec<(f64, f64)>,
    pub bins: Vec<usize>,
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl Histogram {
    pub fn new(ranges: Vec<(f64, f64)>, bins: Vec<usize>) -> Result<Self> {
        if ranges.len() != bins.len() || ranges.is_empty() {
            return Err(invalid("bins", "one bin count per range".to_string()));
        }
        if ranges.iter().any(|(a, b)| !(b > a)) || bins.iter().any(|&b| b == 0) {
            return Err(invalid("ranges", "empty range or zero bins".to_string()));
        }
        let total = bins.iter().product();
        Ok(Self {
            ranges,
            bins,
            counts: vec![0; total],
            outside: 0,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    /// Flat index of the bin holding `x`, if inside.
    pub fn index(&self, x: &[f64]) -> Option<usize> {
        let mut k = 0;
        for ((&v, &(a, b)), &n) in x.iter().zip(&self.ranges).zip(&self.bins) {
            if !(v >= a && v < b) {
                return None;
            }
            let i = (((v - a) / (b - a)) * n as f64) as usize;
            k = k * n + i.min(n - 1);
        }
        Some(k)
    }

    pub fn add(&mut self, x: &[f64]) {
        match self.index(x) {
            Some(k) => self.counts[k] += 1,
            None => self.outside += 1,
        }
    }

    /// Bin edges along axis `a`.
    pub fn edges(&self, a: usize) -> Vec<f64> {
        let (lo, hi) = self.ranges[a];
        let n = self.bins[a];
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect()
    }

    /// Empirical bin probabilities, outside mass last.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total() as f64;
        let mut p: Vec<f64> = self.counts.iter().map(|&c| c as f64 / t).collect();
        p.push(self.outside as f64 / t);
        p
    }

    /// Marginal histogram along axis `a`.
    pub fn marginal(&self, a: usize) -> Histogram {
        let mut m = Histogram::new(vec![self.ranges[a]], vec![self.bins[a]]).expect("valid axis");
        m.outside = self.outside;
        for (k, &c) in self.counts.iter().enumerate() {
            let mut rest = k;
            let mut idx = 0;
            for b in (0..self.bins.len()).rev() {
                let i = rest % self.bins[b];
                rest /= self.bins[b];
                if b == a {
                    idx = i;
                }
            }
            m.counts[idx] += c;
        }
        m
    }
}

/// Σ|p̂ − p| over bins plus the outside mass. `reference` lists the bin
/// probabilities with the outside mass last, as [`Histogram::probabilities`].
pub fn l1_distance(h: &Histogram, reference: &[f64]) -> Result<f64> {
    let p = h.probabilities();
    if p.len() != reference.len() {
        return Err(Error::GridMismatch(format!(
            "{} bins against {} reference values",
            p.len(),
            reference.len()
        )));
    }
    Ok(p.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum())
}

/// Expected L¹ distance of an N-sample histogram from its own law,
/// Σ √(2p(1−p)/(πN)), the large-N binomial value.
pub fn noise_floor(reference: &[f64], n: usize) -> f64 {
    let n = n as f64;
    reference
        .iter()
        .map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt())
        .sum()
}

/// L¹ distance between a two-axis histogram and the product of its
/// marginals, with the probabilities of that product.
pub fn independence_distance(h: &Histogram) -> Result<(f64, Vec<f64>)> {
    if h.bins.len() != 2 {
        return Err(invalid("histogram", "needs exactly two axes".to_string()));
    }
    let t = h.total() as f64;
    let inside = (t - h.outside as f64) / t;
    let a = h.marginal(0).probabilities();
    let b = h.marginal(1).probabilities();
    let mut prod = Vec::with_capacity(h.counts.len() + 1);
    for i in 0..h.bins[0] {
        for j in 0..h.bins[1] {
            // marginals renormalized to the inside mass
            prod.push(if inside > 0.0 {
                a[i] * b[j] / inside
            } else {
                0.0
            });
        }
    }
    prod.push(h.outside as f64 / t);
    Ok((l1_distance(h, &prod)?, prod))
}

/// Least-squares slope of log d against log ε.
pub fn fit_order(epsilons: &[f64], distances: &[f64]) -> Result<f64> {
    if epsilons.len() < 2 || epsilons.len() != distances.len() {
        return Err(invalid("epsilons", "need ≥2 epsilons".to_string()));
    }
    if distances.iter().any(|d| !(*d > 0.0)) {
        return Err(invalid(
            "distances",
            "must be positive to fit an order".to_string(),
        ));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Rate r of y(t) = exp(−r t) from values y_k ± se_k at times t_k by
/// weighted least squares on ln y through the origin (y(0) = 1). Returns
/// (r, standard error of r).
pub fn fit_decay_rate(t: &[f64], y: &[f64], se: &[f64]) -> Result<(f64, f64)> {
    if t.len() != y.len() || t.len() != se.len() || t.is_empty() {
        return Err(invalid(
            "samples",
            "times, values and errors must match".to_string(),
        ));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((&t, &y), &s) in t.iter().zip(y).zip(se) {
        if !(y > 0.0) {
            return Err(invalid(
                "samples",
                format!("non-positive value {y} at t = {t}"),
            ));
        }
        // var(ln y) ≈ (se/y)²
        let w = if s > 0.0 { (y / s).powi(2) } else { 1e30 };
        num -= w * t * y.ln();
        den += w * t * t;
    }
    Ok((num / den, 1.0 / den.sqrt()))
}

/// Mardia's multivariate skewness and kurtosis tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MardiaTest {
    pub skewness: f64,
    pub kurtosis: f64,
    pub skewness_p: f64,
    pub kurtosis_p: f64,
}

impl MardiaTest {
    /// Both tests pass at level α/2 each.
    pub fn not_rejected(&self, alpha: f64) -> bool {
        self.skewness_p > 0.5 * alpha && self.kurtosis_p > 0.5 * alpha
    }
}

/// Mardia's tests on rows of `samples` (each of dimension p). The skewness
/// b₁ = Σ_rst m_rst² uses the third moments of the whitened data, which
/// equals the pairwise definition at O(N p³) cost.
pub fn mardia(samples: &[Vec<f64>]) -> Result<MardiaTest> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::TooFewSamples {
            required: 10,
            got: n,
        });
    }
    let p = samples[0].len();
    let mut mean = DVector::zeros(p);
    for s in samples {
        mean += DVector::from_column_slice(s);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(p, p);
    for s in samples {
        let d = DVector::from_column_slice(s) - &mean;
        cov += &d * d.transpose();
    }
    cov /= n as f64;
    let chol = cov
        .cholesky()
        .ok_or_else(|| invalid("samples", "singular sample covariance".to_string()))?;
    let l = chol.l();
    let mut m3 = vec![0.0; p * p * p];
    let mut b2 = 0.0;
    for s in samples {
        let d = DVector::from_column_slice(s) - &mean;
        let z = l.solve_lower_triangular(&d).expect("triangular factor");
        b2 += z.norm_squared().powi(2);
        for r in 0..p {
            for t in 0..p {
                let zrt = z[r] * z[t];
                for u in 0..p {
                    m3[(r * p + t) * p + u] += zrt * z[u];
                }
            }
        }
    }
    let nf = n as f64;
    let b1: f64 = m3.iter().map(|m| (m / nf).powi(2)).sum();
    b2 /= nf;
    let pf = p as f64;
    let dof = pf * (pf + 1.0) * (pf + 2.0) / 6.0;
    let chi = ChiSquared::new(dof).expect("positive dof");
    let skewness_p = 1.0 - chi.cdf(nf * b1 / 6.0);
    let z = (b2 - pf * (pf + 2.0)) / (8.0 * pf * (pf + 2.0) / nf).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let kurtosis_p = 2.0 * (1.0 - normal.cdf(z.abs()));
    Ok(MardiaTest {
        skewness: b1,
        kurtosis: b2,
        skewness_p,
        kurtosis_p,
    })
}

/// Probability of a normal law on [a, b).
pub fn normal_interval(mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    let n = Normal::new(mean, sd).expect("positive sd");
    n.cdf(b) - n.cdf(a)
}

/// Bin probabilities of a one-dimensional normal law on the histogram's
/// axis, outside mass last.
pub fn normal_bins(h: &Histogram, mean: f64, sd: f64) -> Vec<f64> {
    let e = h.edges(0);
    let mut p: Vec<f64> = e
        .windows(2)
        .map(|w| normal_interval(mean, sd, w[0], w[1]))
        .collect();
    let inside: f64 = p.iter().sum();
    p.push((1.0 - inside).max(0.0));
    p
}

/// `[1.234e-2, 5.000e-3]`
pub(crate) fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}
