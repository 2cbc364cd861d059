//! Langevin dynamics of a dumbbell with inertia, and its overdamped limit.
//!
//! Inertial system (m = ε²), per component:
//!
//! ```text
//! ẋ = p,  ṗ = −(ζ/m)(p − κx)             + (√(4k_BTζ)/m) Ẇ₁
//! ṅ = q,  q̇ = −(ζ/m)(q − κn) − 2F(n)/m  + (√(4k_BTζ)/m) Ẇ₂
//! ```
//!
//! Each pair (y, v) is advanced by the exact integrated-OU transition about
//! the centre c (κx for the p-pair, κn − 2F(n)/ζ for the q-pair). The centre
//! is averaged over the start and end of the step: the flow part through a
//! predictor, the spring part implicitly, which for FENE springs has a unique
//! solution inside the ball. The friction rate ζ/m never limits the step.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ensemble::Finite;
use crate::error::{invalid, Error, Result};
use crate::forces::{FlowField, SpringModel};
use crate::geometry::Vec3;
use crate::ou::OuStep;

pub const FENE_MARGIN: f64 = 1e-9;
pub const MAX_HALVINGS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumbbellParams {
    pub epsilon: f64,
    pub zeta: f64,
    pub kbt: f64,
    pub spring: SpringModel,
    pub flow: FlowField,
    /// 2 or 3; in two dimensions the third component stays zero.
    pub dim: usize,
    /// Thermal noise on the centre of mass; off keeps x purely advected.
    pub spatial_noise: bool,
}

impl DumbbellParams {
    pub fn new(
        epsilon: f64,
        zeta: f64,
        kbt: f64,
        spring: SpringModel,
        flow: FlowField,
    ) -> Result<Self> {
        let p = Self {
            epsilon,
            zeta,
            kbt,
            spring,
            flow,
            dim: 3,
            spatial_noise: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(invalid(
                "zeta",
                format!("must be positive, got {}", self.zeta),
            ));
        }
        if !(self.kbt >= 0.0 && self.kbt.is_finite()) {
            return Err(invalid(
                "kBT",
                format!("must be non-negative, got {}", self.kbt),
            ));
        }
        if self.dim != 2 && self.dim != 3 {
            return Err(invalid("dim", format!("must be 2 or 3, got {}", self.dim)));
        }
        if self.dim == 2
            && (0..3).any(|i| self.flow.kappa[(2, i)] != 0.0 || self.flow.kappa[(i, 2)] != 0.0)
        {
            return Err(invalid(
                "flow",
                "two-dimensional runs need a velocity gradient in the x1-x2 plane",
            ));
        }
        self.spring.validate()
    }

    pub fn mass(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// √(4 k_BT ζ), fixed by fluctuation–dissipation.
    pub fn noise_amplitude(&self) -> f64 {
        (4.0 * self.kbt * self.zeta).sqrt()
    }

    /// Friction rate ζ/m of the velocity relaxation.
    pub fn relaxation_rate(&self) -> f64 {
        self.zeta / self.mass()
    }

    /// Stationary variance 2k_BT/m of each velocity component.
    pub fn velocity_variance(&self) -> f64 {
        2.0 * self.kbt / self.mass()
    }

    fn check_domain(&self, n: &Vec3) -> bool {
        !self.spring.is_fene() || n.norm() < self.spring.n0 * (1.0 - FENE_MARGIN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumbbellState {
    pub x: Vec3,
    pub n: Vec3,
    pub p: Vec3,
    pub q: Vec3,
}

impl DumbbellState {
    pub fn at_rest(n: Vec3) -> Self {
        Self {
            x: Vec3::zeros(),
            n,
            p: Vec3::zeros(),
            q: Vec3::zeros(),
        }
    }

    /// Velocities in ε-scaled units (εp, εq), whose equilibrium law is
    /// exp(−(p² + q²)/(4k_BT)).
    pub fn scaled_velocities(&self, epsilon: f64) -> (Vec3, Vec3) {
        (self.p * epsilon, self.q * epsilon)
    }

    /// ¼m|q|² + U(n): the relative motion carries the reduced mass m/2.
    /// Without noise and flow this is non-increasing.
    pub fn internal_energy(&self, par: &DumbbellParams) -> Result<f64> {
        Ok(0.25 * par.mass() * self.q.norm_squared() + par.spring.potential(&self.n)?)
    }
}

impl Finite for DumbbellState {
    fn is_finite(&self) -> bool {
        [self.x, self.n, self.p, self.q]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
    }
}

/// Precomputed inertial step for a fixed dt.
#[derive(Clone, Debug)]
pub struct InertialStepper {
    par: DumbbellParams,
    ou: OuStep,
    // OU for the centre of mass; differs only when spatial noise is off
    ou_x: OuStep,
}

impl InertialStepper {
    pub fn new(par: DumbbellParams, dt: f64) -> Result<Self> {
        par.validate()?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be non-negative, got {dt}")));
        }
        let gamma = par.relaxation_rate();
        let s2 = par.velocity_variance();
        let ou = OuStep::new(gamma, s2, dt);
        let ou_x = if par.spatial_noise {
            ou
        } else {
            OuStep::new(gamma, 0.0, dt)
        };
        Ok(Self { par, ou, ou_x })
    }

    pub fn dt(&self) -> f64 {
        self.ou.dt
    }

    pub fn params(&self) -> &DumbbellParams {
        &self.par
    }

    /// One step, halving dt when a FENE extension would leave the ball.
    pub fn step<R: Rng + ?Sized>(&self, s: &mut DumbbellState, rng: &mut R) -> Result<()> {
        self.step_with_halving(s, rng, 0)
    }

    fn step_with_halving<R: Rng + ?Sized>(
        &self,
        s: &mut DumbbellState,
        rng: &mut R,
        depth: u32,
    ) -> Result<()> {
        if self.dt() == 0.0 {
            return Ok(());
        }
        match self.attempt(s, rng) {
            Ok(next) => {
                *s = next;
                Ok(())
            }
            Err(Error::FeneDomain { .. }) => {
                if depth >= MAX_HALVINGS {
                    return Err(Error::StepUnderflow {
                        halvings: depth,
                        dt: self.dt(),
                    });
                }
                let half = InertialStepper::new(self.par, 0.5 * self.dt())?;
                half.step_with_halving(s, rng, depth + 1)?;
                half.step_with_halving(s, rng, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    fn attempt<R: Rng + ?Sized>(&self, s: &DumbbellState, rng: &mut R) -> Result<DumbbellState> {
        let d = self.par.dim;
        let mut xi = [[0.0; 4]; 3];
        for row in xi.iter_mut().take(d) {
            let (vp, yx) = self.ou_x.noise(rng);
            let (vq, yn) = self.ou.noise(rng);
            *row = [yx, vp, yn, vq];
        }
        let kappa = self.par.flow.kappa;
        let zeta = self.par.zeta;
        let f0 = self.par.spring.force(&s.n)?;
        let pred = self.transition(s, &(kappa * s.x), &(kappa * s.n - f0 * (2.0 / zeta)), &xi);

        // centre averaged over the step; the spring half is implicit
        let cx = 0.5 * (kappa * s.x + kappa * pred.x);
        let fixed = 0.5 * (kappa * s.n + kappa * pred.n) - f0 / zeta;
        let mut rhs = Vec3::zeros();
        for k in 0..d {
            rhs[k] = s.n[k] + s.q[k] * self.ou.lag + fixed[k] * self.ou.lead + xi[k][2];
        }
        let n1 = self.par.spring.implicit_solve(&rhs, self.ou.lead / zeta);
        if !self.par.check_domain(&n1) {
            return Err(self.domain_error(&n1));
        }
        let cn = fixed - self.par.spring.force(&n1)? / zeta;

        let mut out = *s;
        for k in 0..d {
            let (x, p) = self.ou_x.mean(s.x[k], s.p[k], cx[k]);
            out.x[k] = x + xi[k][0];
            out.p[k] = p + xi[k][1];
            out.n[k] = n1[k];
            out.q[k] = cn[k] + (s.q[k] - cn[k]) * self.ou.decay + xi[k][3];
        }
        Ok(out)
    }

    fn domain_error(&self, n: &Vec3) -> Error {
        Error::FeneDomain {
            extension: n.norm(),
            n0: self.par.spring.n0,
        }
    }

    fn transition(
        &self,
        s: &DumbbellState,
        cx: &Vec3,
        cn: &Vec3,
        xi: &[[f64; 4]; 3],
    ) -> DumbbellState {
        let mut out = *s;
        for k in 0..self.par.dim {
            let (x, p) = self.ou_x.mean(s.x[k], s.p[k], cx[k]);
            let (n, q) = self.ou.mean(s.n[k], s.q[k], cn[k]);
            out.x[k] = x + xi[k][0];
            out.p[k] = p + xi[k][1];
            out.n[k] = n + xi[k][2];
            out.q[k] = q + xi[k][3];
        }
        out
    }
}

pub fn step_inertial<R: Rng + ?Sized>(
    s: &DumbbellState,
    par: &DumbbellParams,
    dt: f64,
    rng: &mut R,
) -> Result<DumbbellState> {
    let mut next = *s;
    InertialStepper::new(*par, dt)?.step(&mut next, rng)?;
    Ok(next)
}

/// Predictor–corrector step of the overdamped system
///
/// ```text
/// ẋ = κx + √(4k_BT/ζ) Ẇ₁,   ṅ = κn − 2F(n)/ζ + √(4k_BT/ζ) Ẇ₂
/// ```
///
/// The corrector is the trapezoidal rule with the flow term taken from an
/// Euler predictor and the spring term implicit. The noise is additive, so
/// the scheme is consistent with the Itô equation.
#[derive(Clone, Debug)]
pub struct OverdampedStepper {
    par: DumbbellParams,
    dt: f64,
    sd: f64,
}

impl OverdampedStepper {
    pub fn new(par: DumbbellParams, dt: f64) -> Result<Self> {
        par.validate()?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be non-negative, got {dt}")));
        }
        Ok(Self {
            par,
            dt,
            sd: (4.0 * par.kbt / par.zeta * dt).sqrt(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &mut Vec3, n: &mut Vec3, rng: &mut R) -> Result<()> {
        self.step_with_halving(x, n, rng, 0)
    }

    fn step_with_halving<R: Rng + ?Sized>(
        &self,
        x: &mut Vec3,
        n: &mut Vec3,
        rng: &mut R,
        depth: u32,
    ) -> Result<()> {
        if self.dt == 0.0 {
            return Ok(());
        }
        match self.attempt(x, n, rng) {
            Ok((xn, nn)) => {
                *x = xn;
                *n = nn;
                Ok(())
            }
            Err(Error::FeneDomain { .. }) => {
                if depth >= MAX_HALVINGS {
                    return Err(Error::StepUnderflow {
                        halvings: depth,
                        dt: self.dt,
                    });
                }
                let half = OverdampedStepper::new(self.par, 0.5 * self.dt)?;
                half.step_with_halving(x, n, rng, depth + 1)?;
                half.step_with_halving(x, n, rng, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    fn attempt<R: Rng + ?Sized>(&self, x: &Vec3, n: &Vec3, rng: &mut R) -> Result<(Vec3, Vec3)> {
        let d = self.par.dim;
        let mut wx = Vec3::zeros();
        let mut wn = Vec3::zeros();
        for k in 0..d {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            wx[k] = a * self.sd;
            wn[k] = b * self.sd;
        }
        if !self.par.spatial_noise {
            wx = Vec3::zeros();
        }
        let kappa = self.par.flow.kappa;
        let zeta = self.par.zeta;
        let dt = self.dt;
        let f0 = self.par.spring.force(n)?;
        let n_pred = n + (kappa * n - f0 * (2.0 / zeta)) * dt + wn;
        let x_pred = x + kappa * x * dt + wx;
        let rhs = n + (kappa * n + kappa * n_pred) * (0.5 * dt) - f0 * (dt / zeta) + wn;
        let n_new = self.par.spring.implicit_solve(&rhs, dt / zeta);
        if !self.par.check_domain(&n_new) {
            return Err(Error::FeneDomain {
                extension: n_new.norm(),
                n0: self.par.spring.n0,
            });
        }
        let x_new = x + (kappa * x + kappa * x_pred) * (0.5 * dt) + wx;
        Ok((x_new, n_new))
    }
}

pub fn step_overdamped<R: Rng + ?Sized>(
    x: &Vec3,
    n: &Vec3,
    par: &DumbbellParams,
    dt: f64,
    rng: &mut R,
) -> Result<(Vec3, Vec3)> {
    let (mut x, mut n) = (*x, *n);
    OverdampedStepper::new(*par, dt)?.step(&mut x, &mut n, rng)?;
    Ok((x, n))
}

/// Configuration-only state of the overdamped dumbbell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverdampedDumbbell {
    pub x: Vec3,
    pub n: Vec3,
}

impl Finite for OverdampedDumbbell {
    fn is_finite(&self) -> bool {
        self.x.iter().chain(self.n.iter()).all(|c| c.is_finite())
    }
}

/// Samples the equilibrium velocities exp(−m(p² + q²)/(4k_BT)) in
/// physical units.
pub fn thermal_velocities<R: Rng + ?Sized>(par: &DumbbellParams, rng: &mut R) -> (Vec3, Vec3) {
    let sd = par.velocity_variance().sqrt();
    let mut p = Vec3::zeros();
    let mut q = Vec3::zeros();
    for k in 0..par.dim {
        p[k] = sd * rng.sample::<f64, _>(StandardNormal);
        q[k] = sd * rng.sample::<f64, _>(StandardNormal);
    }
    (p, q)
}

/// Samples the configuration Boltzmann law exp(−U(n)/k_BT) in `par.dim`
/// dimensions. FENE draws are accepted from the Hookean Gaussian with the
/// same H, which dominates (1 − |n|²/n0²)^b since 1 − s ≤ e^{−s}.
pub fn equilibrium_configuration<R: Rng + ?Sized>(par: &DumbbellParams, rng: &mut R) -> Vec3 {
    if par.kbt == 0.0 {
        return Vec3::zeros();
    }
    let sd = (par.kbt / par.spring.h).sqrt();
    loop {
        let mut n = Vec3::zeros();
        for k in 0..par.dim {
            n[k] = sd * rng.sample::<f64, _>(StandardNormal);
        }
        if !par.spring.is_fene() {
            return n;
        }
        let n0 = par.spring.n0;
        let s = n.norm_squared() / (n0 * n0);
        if s >= 1.0 - FENE_MARGIN {
            continue;
        }
        let b = par.spring.h * n0 * n0 / (2.0 * par.kbt);
        if rng.random::<f64>() < (b * ((1.0 - s).ln() + s)).exp() {
            return n;
        }
    }
}
