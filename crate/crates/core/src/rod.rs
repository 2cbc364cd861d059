//! Langevin dynamics of a rigid rod with inertia, and its overdamped limit.
//!
//! With m = ε² and moment of inertia j = mL²/12:
//!
//! ```text
//! ẋ = p,   ṗ = −(ζ_t/m)(p − κx) + (√(2k_BTζ_t)/m) Ẇ
//! ṅ = ω × n,   j ω̇ = −ζ_r(ω − n × κn) − ℛU(n) + √(2k_BTζ_r) P_n Ẇ_r
//! ```
//!
//! where P_n = Id − n⊗n. The scaled velocities εp and √j ω then have the
//! equilibrium law exp(−(p² + ω²)/(2k_BT)), with ω restricted to the tangent
//! plane.
//!
//! The rotational step works in an orthonormal tangent frame at n: each of
//! the two frame components of ω, together with the matching component of the
//! rotation vector Θ, follows the exact integrated-OU transition about the
//! centre ω* = n × κn − ℛU/ζ_r. The rod is turned by the rotation with vector
//! Θ, which also carries ω to the new tangent plane. The centre is averaged
//! between the start and the predicted end (Heun).

use nalgebra::Rotation3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ensemble::Finite;
use crate::error::{invalid, Result};
use crate::forces::{FlowField, PotentialField};
use crate::geometry::{exp_map, rotate_to_pole, tangent_project, UnitVector, Vec3};
use crate::ou::OuStep;

#[derive(Clone, Debug, PartialEq)]
pub struct RodParams {
    pub epsilon: f64,
    pub zeta_t: f64,
    pub zeta_r: f64,
    pub kbt: f64,
    /// Rod length; the default √12 makes j = m.
    pub length: f64,
    pub flow: FlowField,
    /// External or frozen mean-field potential U(n).
    pub potential: Option<PotentialField>,
    pub spatial_noise: bool,
}

impl RodParams {
    pub fn new(epsilon: f64, zeta_t: f64, zeta_r: f64, kbt: f64, flow: FlowField) -> Result<Self> {
        let p = Self {
            epsilon,
            zeta_t,
            zeta_r,
            kbt,
            length: 12f64.sqrt(),
            flow,
            potential: None,
            spatial_noise: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("zeta_t", self.zeta_t),
            ("zeta_r", self.zeta_r),
            ("L", self.length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.kbt >= 0.0 && self.kbt.is_finite()) {
            return Err(invalid(
                "kBT",
                format!("must be non-negative, got {}", self.kbt),
            ));
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// j = mL²/12.
    pub fn inertia(&self) -> f64 {
        self.mass() * self.length * self.length / 12.0
    }

    /// D_r = k_BT/ζ_r.
    pub fn rotational_diffusivity(&self) -> f64 {
        self.kbt / self.zeta_r
    }

    pub fn translational_diffusivity(&self) -> f64 {
        self.kbt / self.zeta_t
    }

    /// ω* = n × κn − ℛU/ζ_r, the angular velocity the friction relaxes to.
    pub fn rotation_centre(&self, n: &UnitVector) -> Vec3 {
        let v = n.as_vec();
        let mut c = v.cross(&(self.flow.kappa * v));
        if let Some(u) = &self.potential {
            c -= u.rotational_gradient(n) / self.zeta_r;
        }
        c
    }
}

/// −ζ_r(ω − n × (κn)): friction against the local rotation of the fluid.
pub fn friction_torque(
    n: &UnitVector,
    omega: &Vec3,
    grad_u: &nalgebra::Matrix3<f64>,
    zeta_r: f64,
) -> Vec3 {
    let v = n.as_vec();
    -zeta_r * (omega - v.cross(&(grad_u * v)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RodState {
    pub x: Vec3,
    pub p: Vec3,
    pub n: UnitVector,
    /// Angular velocity, tangent at n.
    pub omega: Vec3,
}

impl RodState {
    pub fn at_rest(n: UnitVector) -> Self {
        Self {
            x: Vec3::zeros(),
            p: Vec3::zeros(),
            n,
            omega: Vec3::zeros(),
        }
    }

    /// (εp, √j ω), whose equilibrium law is exp(−(p² + ω²)/(2k_BT)).
    pub fn scaled_velocities(&self, par: &RodParams) -> (Vec3, Vec3) {
        (self.p * par.epsilon, self.omega * par.inertia().sqrt())
    }

    /// max(||n| − 1|, |ω·n|/max(|ω|, 1)).
    pub fn constraint_residual(&self) -> f64 {
        let v = self.n.as_vec();
        (v.norm() - 1.0)
            .abs()
            .max(self.omega.dot(v).abs() / self.omega.norm().max(1.0))
    }
}

impl Finite for RodState {
    fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.p.iter())
            .chain(self.n.as_vec().iter())
            .chain(self.omega.iter())
            .all(|c| c.is_finite())
    }
}

// Rotation by the vector θ (axis θ/|θ|, angle |θ|).
fn rotation(theta: &Vec3) -> Rotation3<f64> {
    Rotation3::new(*theta)
}

#[derive(Clone, Debug)]
pub struct InertialRodStepper {
    par: RodParams,
    ou_t: OuStep,
    ou_r: OuStep,
}

impl InertialRodStepper {
    pub fn new(par: RodParams, dt: f64) -> Result<Self> {
        par.validate()?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be non-negative, got {dt}")));
        }
        let m = par.mass();
        let j = par.inertia();
        let s2_t = if par.spatial_noise { par.kbt / m } else { 0.0 };
        Ok(Self {
            ou_t: OuStep::new(par.zeta_t / m, s2_t, dt),
            ou_r: OuStep::new(par.zeta_r / j, par.kbt / j, dt),
            par,
        })
    }

    pub fn dt(&self) -> f64 {
        self.ou_t.dt
    }

    pub fn params(&self) -> &RodParams {
        &self.par
    }

    pub fn step<R: Rng + ?Sized>(&self, s: &mut RodState, rng: &mut R) {
        if self.dt() == 0.0 {
            return;
        }
        // translation
        let mut xi_t = [(0.0, 0.0); 3];
        for v in xi_t.iter_mut() {
            *v = self.ou_t.noise(rng);
        }
        let kappa = self.par.flow.kappa;
        let translate = |c: &Vec3| {
            let mut x = s.x;
            let mut p = s.p;
            for k in 0..3 {
                let (xk, pk) = self.ou_t.mean(s.x[k], s.p[k], c[k]);
                x[k] = xk + xi_t[k].1;
                p[k] = pk + xi_t[k].0;
            }
            (x, p)
        };
        let c0 = kappa * s.x;
        let (x_pred, _) = translate(&c0);
        let (x, p) = translate(&(0.5 * (c0 + kappa * x_pred)));

        // rotation in the frame (t1, t2) at n
        let k = rotate_to_pole(&s.n);
        let t1 = k * Vec3::x();
        let t2 = k * Vec3::y();
        let (a1, a2) = (self.ou_r.noise(rng), self.ou_r.noise(rng));
        let w = [s.omega.dot(&t1), s.omega.dot(&t2)];
        let turn = |c: &Vec3| {
            let cc = [c.dot(&t1), c.dot(&t2)];
            let (th1, w1) = self.ou_r.mean(0.0, w[0], cc[0]);
            let (th2, w2) = self.ou_r.mean(0.0, w[1], cc[1]);
            let theta = t1 * (th1 + a1.1) + t2 * (th2 + a2.1);
            let omega = t1 * (w1 + a1.0) + t2 * (w2 + a2.0);
            (rotation(&theta), omega)
        };
        let c0 = self.par.rotation_centre(&s.n);
        let (r_pred, _) = turn(&c0);
        let n_pred = UnitVector::renormalized(r_pred * s.n.as_vec());
        let c1 = r_pred.inverse_transform_vector(&self.par.rotation_centre(&n_pred));
        let (r, omega) = turn(&(0.5 * (c0 + c1)));

        let n = UnitVector::renormalized(r * s.n.as_vec());
        s.x = x;
        s.p = p;
        s.omega = tangent_project(&(r * omega), &n).into_inner();
        s.n = n;
    }
}

pub fn step_inertial_rod<R: Rng + ?Sized>(
    s: &RodState,
    par: &RodParams,
    dt: f64,
    rng: &mut R,
) -> Result<RodState> {
    let mut next = *s;
    InertialRodStepper::new(par.clone(), dt)?.step(&mut next, rng);
    Ok(next)
}

/// Configuration-only state of the overdamped rod.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverdampedRod {
    pub x: Vec3,
    pub n: UnitVector,
}

impl Finite for OverdampedRod {
    fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.n.as_vec().iter())
            .all(|c| c.is_finite())
    }
}

/// Geodesic Euler–Maruyama step of
///
/// ```text
/// ẋ = κx + √(2D_t) Ẇ,   ṅ = P_n κn + (1/ζ_r) n × ℛU + √(2D_r) P_n Ẇ_r
/// ```
///
/// The tangent increment is applied through the exponential map, so |n| = 1
/// holds to rounding. Its density solves the Doi equation as dt → 0.
#[derive(Clone, Debug)]
pub struct OverdampedRodStepper {
    par: RodParams,
    dt: f64,
    sd_t: f64,
    sd_r: f64,
}

impl OverdampedRodStepper {
    pub fn new(par: RodParams, dt: f64) -> Result<Self> {
        par.validate()?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be non-negative, got {dt}")));
        }
        let sd_t = if par.spatial_noise {
            (2.0 * par.translational_diffusivity() * dt).sqrt()
        } else {
            0.0
        };
        let sd_r = (2.0 * par.rotational_diffusivity() * dt).sqrt();
        Ok(Self {
            par,
            dt,
            sd_t,
            sd_r,
        })
    }

    pub fn drift(&self, n: &UnitVector) -> Vec3 {
        let v = n.as_vec();
        let mut b = tangent_project(&(self.par.flow.kappa * v), n).into_inner();
        if let Some(u) = &self.par.potential {
            b += v.cross(&u.rotational_gradient(n)) / self.par.zeta_r;
        }
        b
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &mut Vec3, n: &mut UnitVector, rng: &mut R) {
        if self.dt == 0.0 {
            return;
        }
        let mut w = Vec3::zeros();
        for k in 0..3 {
            w[k] = rng.sample::<f64, _>(StandardNormal) * self.sd_t;
        }
        let k = rotate_to_pole(n);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let noise = k * Vec3::new(z1 * self.sd_r, z2 * self.sd_r, 0.0);
        let step = self.drift(n) * self.dt + noise;
        *x += self.par.flow.kappa * *x * self.dt + w;
        *n = exp_map(n, &tangent_project(&step, n).into_inner());
    }
}

pub fn step_overdamped_rod<R: Rng + ?Sized>(
    x: &Vec3,
    n: &UnitVector,
    par: &RodParams,
    dt: f64,
    rng: &mut R,
) -> Result<(Vec3, UnitVector)> {
    let (mut x, mut n) = (*x, *n);
    OverdampedRodStepper::new(par.clone(), dt)?.step(&mut x, &mut n, rng);
    Ok((x, n))
}

/// Draws (p, ω) from the equilibrium law at orientation n, in physical units.
pub fn thermal_rod_velocities<R: Rng + ?Sized>(
    par: &RodParams,
    n: &UnitVector,
    rng: &mut R,
) -> (Vec3, Vec3) {
    let sp = (par.kbt / par.mass()).sqrt();
    let sw = (par.kbt / par.inertia()).sqrt();
    let mut p = Vec3::zeros();
    for k in 0..3 {
        p[k] = sp * rng.sample::<f64, _>(StandardNormal);
    }
    let k = rotate_to_pole(n);
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (p, k * Vec3::new(sw * a, sw * b, 0.0))
}

/// Uniformly distributed orientation.
pub fn uniform_orientation<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if v.norm() > 1e-12 {
            return UnitVector::renormalized(v);
        }
    }
}
