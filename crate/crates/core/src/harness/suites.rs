//! Named verification batteries with machine-readable verdicts.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::equilibrium::{dumbbell_equilibrium, hookean_stress, rod_equilibrium, EquilibriumRun};
use super::stats::{fit_decay_rate, sci};
use super::sweep::{DumbbellSweep, ReducedSweep, RodSweep};
use crate::collision::{
    gaussian_moment_identity, AnalyticCellSolutions, CollisionOperator, MaxwellianSpec, Model,
    VelocityGrid,
};
use crate::ensemble::Ensemble;
use crate::error::{invalid, Result};
use crate::forces::{FlowField, SpringModel};
use crate::fp::{BallGeometry, DoiParams, DoiSolver, LimitParams, LimitSolver};
use crate::geometry::identities::polynomial_battery;
use crate::geometry::{
    bundle_change_of_variables_check, cross_chain_identity_check, rotational_gradient,
    tangent_project, UnitVector, Vec3, DEFAULT_FD_STEP,
};
use crate::rod::{uniform_orientation, OverdampedRod, OverdampedRodStepper, RodParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when value < threshold.
    pub fn below(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geometry,
    Collision,
    Equilibrium,
    Limits,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometry" => Ok(Self::Geometry),
            "collision" => Ok(Self::Collision),
            "equilibrium" => Ok(Self::Equilibrium),
            "limits" => Ok(Self::Limits),
            _ => Err(invalid(
                "suite",
                format!("unknown suite `{s}`; expected geometry, collision, equilibrium or limits"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub quick: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

pub fn run_suite(suite: Suite, quick: bool) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Geometry => geometry_checks(),
        Suite::Collision => collision_checks(if quick { 32 } else { 64 })?,
        Suite::Equilibrium => equilibrium_checks(if quick { 10_000 } else { 100_000 })?,
        Suite::Limits => limit_checks(quick)?,
    };
    Ok(SuiteReport {
        suite,
        quick,
        checks,
    })
}

fn random_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

/// Chain-rule identities on the fixed 20-field battery, and ℛ(n·a) = n × a.
pub fn geometry_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e0);
    let (mut cross, mut bundle) = (0.0f64, 0.0f64);
    for field in polynomial_battery() {
        let a = random_vec(&mut rng);
        let y = random_vec(&mut rng);
        let c = random_vec(&mut rng);
        let r = cross_chain_identity_check(&a, |x| field.scalar.eval2(x, &c), &y, DEFAULT_FD_STEP);
        cross = cross.max(r.max());
        let n = uniform_orientation(&mut rng);
        let w = tangent_project(&random_vec(&mut rng), &n).into_inner();
        let r = bundle_change_of_variables_check(
            &n,
            &w,
            |m, v| field.scalar.eval2(m, v),
            |m, v| field.vector_at(m, v),
            DEFAULT_FD_STEP,
        );
        bundle = bundle.max(r.max());
    }
    let mut rgrad = 0.0f64;
    for _ in 0..100 {
        let a = random_vec(&mut rng);
        let n = uniform_orientation(&mut rng);
        let g = rotational_gradient(|m| m.dot(&a), &n, DEFAULT_FD_STEP);
        rgrad = rgrad.max((g - n.as_vec().cross(&a)).norm());
    }
    vec![
        Check::below(
            "cross-product chain rule",
            cross,
            1e-6,
            "max residual over the battery",
        ),
        Check::below(
            "tangent-bundle change of variables",
            bundle,
            1e-6,
            "max of gradient and divergence residuals over the battery",
        ),
        Check::below(
            "rotational gradient of n.a",
            rgrad,
            1e-8,
            "|R(n.a) - n x a|, 100 random (n, a)",
        ),
    ]
}

/// Conservation, dissipation, the Q(M) order, cell problems at `points`
/// per axis, orthogonality and the Gaussian moment identities.
pub fn collision_checks(points: usize) -> Result<Vec<Check>> {
    let kbt = 0.8;
    let spec = MaxwellianSpec::new(Model::Dumbbell, kbt)?;
    let op = CollisionOperator::dumbbell(kbt, 1.3, VelocityGrid::uniform(2, 32, 6.0, &spec)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc011);
    let (mut cons, mut diss) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..50 {
        let f = op.random_density(&mut rng);
        let norm = op.grid().l2_norm(&f);
        let q = op.apply(&f)?;
        cons = cons.max(op.grid().integrate(&q).abs() / norm);
        diss = diss.max(op.dissipation(&f)? / (norm * norm));
    }
    let residual = |n: usize| -> Result<f64> {
        let op = CollisionOperator::dumbbell(kbt, 1.3, VelocityGrid::uniform(2, n, 6.0, &spec)?)?;
        let q = op.apply(&op.cell_averaged_maxwellian())?;
        Ok(q.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    };
    let (r1, r2) = (residual(128)?, residual(256)?);
    let order = (r1 / r2).log2();

    // dumbbell: axes (p₁, q₁)
    let dumb = AnalyticCellSolutions::dumbbell(kbt, 1.3)?;
    let op = CollisionOperator::dumbbell(kbt, 1.3, VelocityGrid::uniform(2, points, 6.0, &spec)?)?;
    let g = op.grid().sample(|v| v[0] * op.spec().eval(v));
    let psi = op.solve_cell_problem(&g)?;
    let exact = op.grid().sample(|v| dumb.a(&v[..1], &v[1..])[0]);
    let err_dumbbell = relative_l2(&op, &psi, &exact);

    // rod: axes (p₁, ω₁, ω₂) with frictions (ζ_t, ζ_r, ζ_r)
    let (zt, zr) = (1.0, 2.5);
    let rspec = MaxwellianSpec::new(Model::Rod, kbt)?;
    let rod = AnalyticCellSolutions::rod(kbt, zt, zr)?;
    let rop = CollisionOperator::rod(
        kbt,
        zt,
        zr,
        1,
        VelocityGrid::uniform(3, points, 6.0, &rspec)?,
    )?;
    let mut err_rod = 0.0f64;
    for axis in 0..3 {
        let g = rop.grid().sample(|v| v[axis] * rop.spec().eval(v));
        let psi = rop.solve_cell_problem(&g)?;
        let exact = rop.grid().sample(|v| {
            if axis == 0 {
                rod.a(&v[..1], &v[1..])[0]
            } else {
                rod.b(&v[..1], &v[1..])[axis - 1]
            }
        });
        err_rod = err_rod.max(relative_l2(&rop, &psi, &exact));
    }
    let orth = dumb
        .orthogonality_integrals(3)
        .iter()
        .chain(rod.orthogonality_integrals(2).iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let mut gm = 0.0f64;
    for _ in 0..100 {
        let a = random_vec(&mut rng) * 3.0;
        let n = uniform_orientation(&mut rng);
        let k = rng.random_range(0.2..2.0);
        gm = gm.max(gaussian_moment_identity(&a, &n, k)?.relative_error(a.norm(), k));
    }
    Ok(vec![
        Check::below("conservation", cons, 1e-13, "max |integral Q(f)|/||f|| over 50 random f"),
        Check::below("dissipation", diss, 1e-12, "max D(f)/||f||^2 over 50 random f"),
        Check::below(
            "Q(M) residual order",
            (order - 2.0).abs(),
            0.2,
            format!("observed order {order:.3} between 128 and 256 points"),
        ),
        Check::below(
            "dumbbell cell problem",
            err_dumbbell,
            1e-4,
            format!("relative L2 error against -pM/zeta at {points} points per axis"),
        ),
        Check::below(
            "rod cell problems",
            err_rod,
            1e-4,
            format!("relative L2 error against -pM/zeta_t and -omega M/zeta_r at {points} points per axis"),
        ),
        Check::below("orthogonality", orth, 1e-10, "integrals of {b,d}.p and {a,c}.q"),
        Check::below("Gaussian moments", gm, 1e-8, "relative error over 100 random (A, n)"),
    ])
}

fn relative_l2(op: &CollisionOperator, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    op.grid().l2_norm(&d) / op.grid().l2_norm(b)
}

/// Maxwellian equilibria of both inertial engines and the Hookean stress.
pub fn equilibrium_checks(samples: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let run = EquilibriumRun::new(0.2, samples, 11);
    let d = dumbbell_equilibrium(&run, 1.0, 1.0, 1.0)?;
    out.push(Check::below(
        "dumbbell velocity variance",
        d.worst_z(),
        3.0,
        format!("max |s^2 - 2kBT|/SE over scaled (p, q) components, N = {samples}"),
    ));
    out.push(Check::flag(
        "dumbbell velocity normality",
        d.mardia.not_rejected(0.01),
        format!(
            "Mardia p-values {:.3}, {:.3}",
            d.mardia.skewness_p, d.mardia.kurtosis_p
        ),
    ));
    let r = rod_equilibrium(&run, 1.0, 1.0, 1.0)?;
    out.push(Check::below(
        "rod velocity variance",
        r.worst_z(),
        3.0,
        format!("max |s^2 - kBT|/SE over scaled p and tangent omega, N = {samples}"),
    ));
    out.push(Check::below(
        "rod omega.n",
        r.max_normal_omega,
        1e-8,
        "max |omega.n|",
    ));
    out.push(Check::flag(
        "rod velocity normality",
        r.mardia.not_rejected(0.01),
        format!(
            "Mardia p-values {:.3}, {:.3}",
            r.mardia.skewness_p, r.mardia.kurtosis_p
        ),
    ));
    for (name, rate) in [("equilibrium stress", 0.0), ("shear stress", 0.5)] {
        let s = hookean_stress(&run, 1.0, 1.0, 1.0, rate)?;
        let z = stress_z(&s.stress.tau, &s.stress.se, &s.oracle);
        out.push(Check::below(
            name,
            z,
            3.0,
            format!("max |tau - H C|/SE against the Lyapunov covariance, shear rate {rate}"),
        ));
        out.push(Check::flag(
            &format!("{name} symmetry"),
            s.stress.asymmetry_excess() <= 0.0,
            "|tau - tau^T| within 3 SE",
        ));
    }
    Ok(out)
}

fn stress_z(tau: &Matrix3<f64>, se: &Matrix3<f64>, oracle: &Matrix3<f64>) -> f64 {
    let mut z: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = (tau[(i, j)] - oracle[(i, j)]).abs();
            z = z.max(if se[(i, j)] > 0.0 {
                d / se[(i, j)]
            } else if d > 1e-12 {
                f64::INFINITY
            } else {
                0.0
            });
        }
    }
    z
}

/// L¹ distances of the inertia-free steady states from the Boltzmann
/// densities: Hookean against the exact Gaussian, FENE against the
/// normalized (1 − |n|²/n0²)^{Hn0²/(2k_BT)}.
pub fn steady_state_distances() -> Result<(f64, f64)> {
    let q = FlowField::quiescent();
    let hook = LimitParams::new(1.0, 1.0, SpringModel::hookean(1.0)?, q)?;
    let mut worst_h = 0.0f64;
    for g in [
        BallGeometry::Interval { cells: 32 },
        BallGeometry::Square { cells: 32 },
    ] {
        let s = LimitSolver::new(hook.clone(), g.refined(2))?;
        let rho = s.steady_state()?;
        let d = g.dim() as f64;
        let exact = s.grid().sample(|n| {
            (-0.5 * n.norm_squared()).exp() / (2.0 * std::f64::consts::PI).powf(0.5 * d)
        });
        worst_h = worst_h.max(s.grid().l1_distance(&rho, &exact));
    }
    let (h, n0, kbt) = (1.0, 3.0, 1.0);
    let fene = LimitParams::new(1.0, kbt, SpringModel::fene(h, n0)?, q)?;
    let b = h * n0 * n0 / (2.0 * kbt);
    let mut worst_f = 0.0f64;
    for g in [
        BallGeometry::Interval { cells: 64 },
        BallGeometry::Disk {
            radial: 32,
            angular: 32,
        },
        BallGeometry::Shells { radial: 64 },
    ] {
        let s = LimitSolver::new(fene.clone(), g)?;
        let rho = s.steady_state()?;
        let exact = s.project(|n| (1.0 - n.norm_squared() / (n0 * n0)).powf(b))?;
        worst_f = worst_f.max(s.grid().l1_distance(&rho, &exact));
    }
    Ok((worst_h, worst_f))
}

/// ⟨P₂⟩ decay rate of the spectral Doi solver from a concentrated start,
/// fitted over one decade. Returns (rate, 6D_r).
pub fn doi_rate_spectral(d_r: f64, l_max: usize) -> Result<(f64, f64)> {
    let solver = DoiSolver::new(DoiParams::free(d_r), l_max)?;
    let c0 = solver.project(|n| (8.0 * (n.as_vec().z - 1.0)).exp())?;
    let p0 = solver.zonal_moment(&c0, 2);
    let decade = 10f64.ln() / (6.0 * d_r);
    let times: Vec<f64> = (1..=16).map(|k| decade * k as f64 / 16.0).collect();
    let dt = decade / 160.0;
    let mut c = c0.clone();
    let mut prev = 0.0;
    let mut y = Vec::new();
    for &t in &times {
        c = solver.advance(&c, t - prev, dt)?;
        prev = t;
        y.push(solver.zonal_moment(&c, 2) / p0);
    }
    let (rate, _) = fit_decay_rate(&times, &y, &vec![1e-12; y.len()])?;
    Ok((rate, 6.0 * d_r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeDecay {
    pub rate: f64,
    pub rate_se: f64,
    pub target: f64,
    pub times: Vec<f64>,
    pub p2: Vec<f64>,
    pub p2_se: Vec<f64>,
}

/// ⟨P₂(n·e₃)⟩ of overdamped rods started at e₃, sampled over one decade
/// and fitted by weighted least squares through ⟨P₂⟩(0) = 1.
pub fn doi_rate_sde(d_r: f64, samples: usize, dt: f64, seed: u64) -> Result<SdeDecay> {
    let mut par = RodParams::new(1.0, 1.0, 1.0 / d_r, 1.0, FlowField::quiescent())?;
    par.spatial_noise = false;
    let stepper = OverdampedRodStepper::new(par, dt)?;
    let decade = 10f64.ln() / (6.0 * d_r);
    let times: Vec<f64> = (1..=16).map(|k| decade * k as f64 / 16.0).collect();
    let mut ens = Ensemble::from_states(
        vec![
            OverdampedRod {
                x: Vec3::zeros(),
                n: UnitVector::e3(),
            };
            samples
        ],
        seed,
    );
    let (mut p2, mut p2_se, mut at) = (Vec::new(), Vec::new(), Vec::new());
    ens.simulate(
        dt,
        decade,
        &times,
        |s, rng| {
            stepper.step(&mut s.x, &mut s.n, rng);
            Ok(())
        },
        |e| {
            if e.steps == 0 {
                return;
            }
            let v: Vec<f64> = e
                .states
                .iter()
                .map(|s| {
                    let z = s.n.as_vec().z;
                    1.5 * z * z - 0.5
                })
                .collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            at.push(e.time);
            p2.push(mean);
            p2_se.push((var / n).sqrt());
        },
    )?;
    let (rate, rate_se) = fit_decay_rate(&at, &p2, &p2_se)?;
    Ok(SdeDecay {
        rate,
        rate_se,
        target: 6.0 * d_r,
        times: at,
        p2,
        p2_se,
    })
}

/// Steady states, Doi decay and ε-sweeps. Quick mode keeps the sweeps to
/// ε ∈ {0.4, 0.2} on coarse grids and small ensembles.
pub fn limit_checks(quick: bool) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let (dh, df) = steady_state_distances()?;
    out.push(Check::below(
        "Hookean steady state",
        dh,
        1e-6,
        "L1 against the Gaussian",
    ));
    out.push(Check::below(
        "FENE steady state",
        df,
        1e-5,
        "L1 against the normalized Boltzmann factor",
    ));
    let (rate, target) = doi_rate_spectral(0.5, 24)?;
    out.push(Check::below(
        "Doi P2 decay (spectral)",
        (rate / target - 1.0).abs(),
        1e-3,
        format!("rate {rate:.8} against 6 D_r = {target}"),
    ));
    let samples = if quick { 10_000 } else { 100_000 };
    let sde = doi_rate_sde(0.5, samples, 2e-3, 21)?;
    out.push(Check::below(
        "Doi P2 decay (SDE)",
        (sde.rate / sde.target - 1.0).abs(),
        if quick { 0.05 } else { 0.01 },
        format!(
            "rate {:.5} +- {:.5} against {}, N = {samples}",
            sde.rate, sde.rate_se, sde.target
        ),
    ));
    let reduced = if quick {
        ReducedSweep {
            epsilons: vec![0.4, 0.2],
            n_cells: 200,
            ..ReducedSweep::default()
        }
    } else {
        ReducedSweep::default()
    }
    .run()?;
    out.push(Check::flag(
        "reduced kinetic sweep",
        reduced.passed(),
        format!(
            "L1 {}, order {:.3}",
            sci(&reduced.distances),
            reduced.fitted_order
        ),
    ));
    let (eps, n) = if quick {
        (vec![0.4, 0.2], 20_000)
    } else {
        (vec![0.4, 0.2, 0.1], 400_000)
    };
    let dumb = DumbbellSweep {
        epsilons: eps.clone(),
        samples: n,
        ..DumbbellSweep::default()
    }
    .run()?;
    out.push(Check::flag(
        "dumbbell SDE sweep",
        dumb.passed(),
        format!(
            "L1 {}, factorization {}",
            sci(&dumb.distances),
            sci(&dumb
                .points
                .iter()
                .map(|p| p.factorization)
                .collect::<Vec<_>>())
        ),
    ));
    let rod = RodSweep {
        epsilons: eps,
        samples: n,
        ..RodSweep::default()
    }
    .run()?;
    out.push(Check::flag(
        "rod SDE sweep",
        rod.passed(),
        format!(
            "L1 {}, factorization {}",
            sci(&rod.distances),
            sci(&rod
                .points
                .iter()
                .map(|p| p.factorization)
                .collect::<Vec<_>>())
        ),
    ));
    Ok(out)
}
