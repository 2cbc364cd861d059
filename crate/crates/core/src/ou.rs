//! Exact transition of the integrated Ornstein–Uhlenbeck pair
//!
//! ```text
//! dv = −γ (v − c) dt + σ dW,   dy = v dt
//! ```
//!
//! with a frozen centre c. Over a step h the pair is Gaussian:
//!
//! ```text
//! v′ = c + (v − c) e + ξ_v,          e = exp(−γh)
//! y′ = y + c h + (v − c)(1 − e)/γ + ξ_y
//! ```
//!
//! with s² = σ²/(2γ) the stationary variance of v and
//! Var ξ_v = s²(1 − e²), Cov = (s²/γ)(1 − e)²,
//! Var ξ_y = (2s²/γ²)[γh − 2(1 − e) + (1 − e²)/2].

use rand::Rng;
use rand_distr::StandardNormal;

/// Per-step constants of the transition for one scalar component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuStep {
    pub dt: f64,
    pub decay: f64,
    /// (1 − e)/γ
    pub lag: f64,
    /// h − (1 − e)/γ
    pub lead: f64,
    // Cholesky factor of the noise covariance of (ξ_v, ξ_y)
    l11: f64,
    l21: f64,
    l22: f64,
}

// γh − 2(1 − e^{−γh}) + (1 − e^{−2γh})/2, accurate for small γh
fn position_bracket(y: f64) -> f64 {
    if y < 1.0 {
        // Σ_{k≥3} (−1)^{k+1} (2^{k−1} − 2) y^k / k!
        let mut term = y * y / 2.0;
        let mut pow2 = 2.0;
        let mut sum = 0.0;
        for k in 3..40 {
            term *= -y / k as f64;
            pow2 *= 2.0;
            let t = -term * (pow2 - 2.0);
            sum += t;
            if t.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let a = -(-y).exp_m1();
        let b = -(-2.0 * y).exp_m1();
        y - 2.0 * a + 0.5 * b
    }
}

impl OuStep {
    /// `gamma` is the relaxation rate and `s2` the stationary variance of v.
    pub fn new(gamma: f64, s2: f64, dt: f64) -> Self {
        let y = gamma * dt;
        let decay = (-y).exp();
        let one_minus = -(-y).exp_m1();
        let lag = if y > 0.0 { one_minus / gamma } else { dt };
        let lead = if y == 0.0 {
            0.0
        } else if y < 0.5 {
            // Σ_{k≥2} (−1)^k y^k / k! divided by γ
            let mut term = y;
            let mut sum = 0.0;
            for k in 2..30 {
                term *= -y / k as f64;
                sum += term;
            }
            -sum * dt / y
        } else {
            dt - lag
        };
        let var_v = s2 * one_minus * (1.0 + decay);
        let cov = s2 / gamma * one_minus * one_minus;
        let var_y = 2.0 * s2 / (gamma * gamma) * position_bracket(y);
        let (l11, l21, l22) = if var_v > 0.0 {
            let l11 = var_v.sqrt();
            let l21 = cov / l11;
            (l11, l21, (var_y - l21 * l21).max(0.0).sqrt())
        } else {
            (0.0, 0.0, 0.0)
        };
        Self {
            dt,
            decay,
            lag,
            lead,
            l11,
            l21,
            l22,
        }
    }

    /// Draws the correlated noise pair (ξ_v, ξ_y).
    #[inline]
    pub fn noise<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if self.l11 == 0.0 {
            return (0.0, 0.0);
        }
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (self.l11 * z1, self.l21 * z1 + self.l22 * z2)
    }

    /// Deterministic part of the transition for (y, v) about centre c.
    #[inline]
    pub fn mean(&self, y: f64, v: f64, c: f64) -> (f64, f64) {
        (
            y + c * self.dt + (v - c) * self.lag,
            c + (v - c) * self.decay,
        )
    }

    pub fn velocity_variance(&self) -> f64 {
        self.l11 * self.l11
    }

    pub fn position_variance(&self) -> f64 {
        self.l21 * self.l21 + self.l22 * self.l22
    }

    pub fn covariance(&self) -> f64 {
        self.l11 * self.l21
    }
}
