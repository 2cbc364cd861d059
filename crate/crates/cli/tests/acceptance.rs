//! Acceptance criteria, one PASS/FAIL line each. Reference values are
//! computed here, independently of the library code under test.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Matrix6, Vector3};
use rand::{Rng, SeedableRng};
use statrs::function::erf::erf;

use polykin::collision::{CollisionOperator, MaxwellianSpec, Model, VelocityGrid};
use polykin::collision::gaussian_moment_identity;
use polykin::dumbbell::{DumbbellParams, DumbbellState, InertialStepper};
use polykin::ensemble::{Ensemble, TrajectoryRng};
use polykin::forces::{FlowField, SpringModel};
use polykin::fp::{BallGeometry, DoiParams, DoiSolver, LimitParams, LimitSolver};
use polykin::geometry::identities::{
    bundle_change_of_variables_check, cross_chain_identity_check, polynomial_battery,
};
use polykin::geometry::{rotational_gradient, tangent_project, UnitVector, Vec3, DEFAULT_FD_STEP};
use polykin::harness::stats::mardia;
use polykin::harness::suites::doi_rate_sde;
use polykin::harness::{ConvergenceReport, DumbbellSweep, ReducedSweep, RodSweep};
use polykin::rod::{uniform_orientation, InertialRodStepper, RodParams, RodState};

type Verdict = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// --- small statistics, written out here -------------------------------------

/// Sample variance and its standard error sqrt((m4 - s^4)/N).
fn variance_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (s2, ((m4 - s2 * s2) / n).sqrt())
}

fn mean_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (s2 / n).sqrt())
}

/// Least-squares slope of log d against log eps.
fn loglog_slope(eps: &[f64], d: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let e = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&e).normalize();
    (t1, n.cross(&t1))
}

fn random_vec(rng: &mut TrajectoryRng) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

// --- 1, 2: equilibrium laws --------------------------------------------------

fn dumbbell_equilibrium() -> Verdict {
    let (eps, zeta, kbt, h) = (0.2, 1.3, 0.7, 1.1);
    let (samples, dt) = (100_000, 0.01);
    let par = DumbbellParams::new(eps, zeta, kbt, SpringModel::hookean(h).map_err(err)?, FlowField::quiescent())
        .map_err(err)?;
    let stepper = InertialStepper::new(par, dt).map_err(err)?;
    let t_final = 20.0 * zeta / (2.0 * h);
    let mut ens = Ensemble::from_states(vec![DumbbellState::at_rest(Vec3::zeros()); samples], 101);
    ens.simulate(dt, t_final, &[], |s, rng| stepper.step(s, rng), |_| {})
        .map_err(err)?;
    let rows: Vec<Vec<f64>> = ens
        .states
        .iter()
        .map(|s| {
            let (p, q) = (s.p * eps, s.q * eps);
            vec![p.x, p.y, p.z, q.x, q.y, q.z]
        })
        .collect();
    let target = 2.0 * kbt;
    let mut worst: f64 = 0.0;
    for c in 0..6 {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let (s2, se) = variance_with_se(&col);
        worst = worst.max((s2 - target).abs() / se);
    }
    let m = mardia(&rows).map_err(err)?;
    Ok((
        worst < 3.0 && m.not_rejected(0.01),
        format!(
            "max |s^2 - 2kBT|/SE = {worst:.2} over 6 components; Mardia p = {:.3}, {:.3}",
            m.skewness_p, m.kurtosis_p
        ),
    ))
}

fn rod_equilibrium() -> Verdict {
    let (eps, zeta_t, zeta_r, kbt) = (0.2, 1.3, 0.9, 0.7);
    let (samples, dt) = (100_000, 0.002);
    let par = RodParams::new(eps, zeta_t, zeta_r, kbt, FlowField::quiescent()).map_err(err)?;
    let (m, j) = (eps * eps, eps * eps * par.length * par.length / 12.0);
    let stepper = InertialRodStepper::new(par, dt).map_err(err)?;
    let t_final = 20.0 * (m / zeta_t).max(j / zeta_r);
    let mut ens = Ensemble::from_fn(samples, 102, |_, rng| RodState::at_rest(uniform_orientation(rng)));
    ens.simulate(
        dt,
        t_final,
        &[],
        |s, rng| {
            stepper.step(s, rng);
            Ok(())
        },
        |_| {},
    )
    .map_err(err)?;
    let mut normal: f64 = 0.0;
    let rows: Vec<Vec<f64>> = ens
        .states
        .iter()
        .map(|s| {
            let n = s.n.as_vec();
            normal = normal.max(s.omega.dot(n).abs());
            let (p, w) = (s.p * eps, s.omega * j.sqrt());
            let (t1, t2) = tangent_frame(n);
            vec![p.x, p.y, p.z, w.dot(&t1), w.dot(&t2)]
        })
        .collect();
    let mut worst: f64 = 0.0;
    for c in 0..5 {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let (s2, se) = variance_with_se(&col);
        worst = worst.max((s2 - kbt).abs() / se);
    }
    let mt = mardia(&rows).map_err(err)?;
    Ok((
        worst < 3.0 && normal < 1e-8 && mt.not_rejected(0.01),
        format!(
            "max |s^2 - kBT|/SE = {worst:.2} over p and 2 tangent omega components; max |omega.n| = {normal:.1e}; Mardia p = {:.3}, {:.3}",
            mt.skewness_p, mt.kurtosis_p
        ),
    ))
}

// --- 3, 4, 5: collision operator ---------------------------------------------

fn maxwellian(v: &[f64], variance: f64) -> f64 {
    (-v.iter().map(|x| x * x).sum::<f64>() / (2.0 * variance)).exp()
}

fn dumbbell_operator(kbt: f64, zeta: f64, points: usize) -> Result<CollisionOperator, String> {
    let spec = MaxwellianSpec::new(Model::Dumbbell, kbt).map_err(err)?;
    CollisionOperator::dumbbell(kbt, zeta, VelocityGrid::uniform(2, points, 6.0, &spec).map_err(err)?)
        .map_err(err)
}

fn collision_certificate() -> Verdict {
    let (kbt, zeta) = (0.6, 1.7);
    let var = 2.0 * kbt;
    let op = dumbbell_operator(kbt, zeta, 48)?;
    let vol = op.grid().cell_volume();
    let pts: Vec<Vec<f64>> = (0..op.grid().len()).map(|k| op.grid().point(k)).collect();
    let m: Vec<f64> = pts.iter().map(|v| maxwellian(v, var)).collect();
    let mut rng = TrajectoryRng::seed_from_u64(303);
    let (mut cons, mut diss): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for _ in 0..50 {
        let f: Vec<f64> = m.iter().map(|m| m * (1.0 + 0.5 * rng.random_range(-1.0..1.0))).collect();
        let norm2 = f.iter().map(|x| x * x).sum::<f64>() * vol;
        let q = op.apply(&f).map_err(err)?;
        cons = cons.max((q.iter().sum::<f64>() * vol).abs() / norm2.sqrt());
        let d = q.iter().zip(&f).zip(&m).map(|((q, f), m)| q * f / m).sum::<f64>() * vol;
        diss = diss.max(d / norm2);
    }
    // exact cell averages of M via erf
    let residual = |points: usize| -> Result<f64, String> {
        let op = dumbbell_operator(kbt, zeta, points)?;
        let axis = op.grid().axes()[0];
        let hh = axis.spacing();
        let s = (2.0 * var).sqrt();
        let avg: Vec<f64> = (0..points)
            .map(|i| {
                let c = axis.centre(i);
                (PI * var / 2.0).sqrt() * (erf((c + 0.5 * hh) / s) - erf((c - 0.5 * hh) / s)) / hh
            })
            .collect();
        let f: Vec<f64> = (0..points * points).map(|k| avg[k / points] * avg[k % points]).collect();
        let q = op.apply(&f).map_err(err)?;
        Ok(q.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
    };
    let (r1, r2) = (residual(128)?, residual(256)?);
    let order = (r1 / r2).log2();
    Ok((
        cons < 1e-13 && diss <= 1e-12 && (order - 2.0).abs() <= 0.2,
        format!(
            "max |int Q(f)|/||f|| = {cons:.1e}; max D(f)/||f||^2 = {diss:.2e}; Q(M) order {order:.3} (residuals {r1:.2e}, {r2:.2e})"
        ),
    ))
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn cell_problems() -> Verdict {
    let points = 64;
    // dumbbell on axes (p1, q1)
    let (kbt, zeta) = (0.8, 1.3);
    let op = dumbbell_operator(kbt, zeta, points)?;
    let vol = op.grid().cell_volume();
    let pts: Vec<Vec<f64>> = (0..op.grid().len()).map(|k| op.grid().point(k)).collect();
    let m: Vec<f64> = pts.iter().map(|v| maxwellian(v, 2.0 * kbt)).collect();
    let mut worst: f64 = 0.0;
    let mut correctors = Vec::new();
    for axis in 0..2 {
        let g: Vec<f64> = pts.iter().zip(&m).map(|(v, m)| v[axis] * m).collect();
        let psi = op.solve_cell_problem(&g).map_err(err)?;
        let exact: Vec<f64> = g.iter().map(|g| -g / zeta).collect();
        worst = worst.max(relative_l2(&psi, &exact));
        correctors.push(psi);
    }
    let integral = |psi: &[f64], axis: usize| -> f64 {
        psi.iter().zip(&pts).map(|(f, v)| f * v[axis]).sum::<f64>() * vol
    };
    let mut orth = integral(&correctors[0], 1).abs().max(integral(&correctors[1], 0).abs());

    // rod on axes (p1, omega1, omega2)
    let (zt, zr) = (0.7, 2.5);
    let spec = MaxwellianSpec::new(Model::Rod, kbt).map_err(err)?;
    let rop = CollisionOperator::rod(kbt, zt, zr, 1, VelocityGrid::uniform(3, points, 6.0, &spec).map_err(err)?)
        .map_err(err)?;
    let vol = rop.grid().cell_volume();
    let pts: Vec<Vec<f64>> = (0..rop.grid().len()).map(|k| rop.grid().point(k)).collect();
    let m: Vec<f64> = pts.iter().map(|v| maxwellian(v, kbt)).collect();
    let mut rod_corr = Vec::new();
    for axis in 0..3 {
        let friction = if axis == 0 { zt } else { zr };
        let g: Vec<f64> = pts.iter().zip(&m).map(|(v, m)| v[axis] * m).collect();
        let psi = rop.solve_cell_problem(&g).map_err(err)?;
        let exact: Vec<f64> = g.iter().map(|g| -g / friction).collect();
        worst = worst.max(relative_l2(&psi, &exact));
        rod_corr.push(psi);
    }
    for (c, psi) in rod_corr.iter().enumerate() {
        for axis in 0..3 {
            if axis != c {
                let i: f64 = psi.iter().zip(&pts).map(|(f, v)| f * v[axis]).sum::<f64>() * vol;
                orth = orth.max(i.abs());
            }
        }
    }
    Ok((
        worst < 1e-4 && orth < 1e-10,
        format!("max relative L2 error {worst:.2e} at {points} points per axis; max cross integral {orth:.1e}"),
    ))
}

fn gaussian_moments() -> Verdict {
    let mut rng = TrajectoryRng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_vec(&mut rng) * 3.0;
        let n = uniform_orientation(&mut rng);
        let kbt = rng.random_range(0.2..2.0);
        let g = gaussian_moment_identity(&a, &n, kbt).map_err(err)?;
        let nv = n.as_vec();
        let p_closed = a * kbt * (2.0 * PI * kbt).powf(1.5);
        let w_closed = (a - nv * nv.dot(&a)) * kbt * (2.0 * PI * kbt);
        let scale_p = kbt * a.norm() * (2.0 * PI * kbt).powf(1.5);
        let scale_w = kbt * a.norm() * 2.0 * PI * kbt;
        worst = worst
            .max((g.lhs_p - p_closed).norm() / scale_p)
            .max((g.lhs_omega - w_closed).norm() / scale_w);
    }
    Ok((worst < 1e-8, format!("max relative error {worst:.1e} over 100 random (A, n, kBT)")))
}

// --- 6, 7: inertia-free solvers ----------------------------------------------

fn steady_states() -> Verdict {
    let q = FlowField::quiescent();
    let (kbt, h) = (0.7, 1.3);
    let hook = LimitParams::new(1.0, kbt, SpringModel::hookean(h).map_err(err)?, q).map_err(err)?;
    let mut worst_h: f64 = 0.0;
    for g in [BallGeometry::Interval { cells: 128 }, BallGeometry::Square { cells: 128 }] {
        let d = if matches!(g, BallGeometry::Interval { .. }) { 1.0 } else { 2.0 };
        let s = LimitSolver::new(hook.clone(), g).map_err(err)?;
        let rho = s.steady_state().map_err(err)?;
        let var = kbt / h;
        let l1: f64 = s
            .grid()
            .centres()
            .iter()
            .zip(s.grid().volumes())
            .zip(&rho)
            .map(|((c, v), r)| {
                let exact = (-c.norm_squared() / (2.0 * var)).exp() / (2.0 * PI * var).powf(0.5 * d);
                v * (r - exact).abs()
            })
            .sum();
        worst_h = worst_h.max(l1);
    }
    let (h, n0, kbt) = (1.0, 3.0, 1.0);
    let fene = LimitParams::new(1.0, kbt, SpringModel::fene(h, n0).map_err(err)?, q).map_err(err)?;
    let b = h * n0 * n0 / (2.0 * kbt);
    let mut worst_f: f64 = 0.0;
    for g in [
        BallGeometry::Interval { cells: 64 },
        BallGeometry::Disk { radial: 32, angular: 32 },
        BallGeometry::Shells { radial: 64 },
    ] {
        let s = LimitSolver::new(fene.clone(), g).map_err(err)?;
        let rho = s.steady_state().map_err(err)?;
        let (c, v) = (s.grid().centres(), s.grid().volumes());
        let w: Vec<f64> = c.iter().map(|c| (1.0 - c.norm_squared() / (n0 * n0)).powf(b)).collect();
        let z: f64 = w.iter().zip(v).map(|(w, v)| w * v).sum();
        let l1: f64 = rho.iter().zip(&w).zip(v).map(|((r, w), v)| v * (r - w / z).abs()).sum();
        worst_f = worst_f.max(l1);
    }
    Ok((
        worst_h < 1e-6 && worst_f < 1e-5,
        format!("Hookean L1 {worst_h:.1e} (1D, 2D); FENE L1 {worst_f:.1e} (1D, disk, shells)"),
    ))
}

fn doi_decay() -> Verdict {
    let d_r = 0.5;
    let target = 6.0 * d_r;
    let solver = DoiSolver::new(DoiParams::free(d_r), 24).map_err(err)?;
    let mut c = solver.project(|n| (8.0 * (n.as_vec().z - 1.0)).exp()).map_err(err)?;
    let p0 = solver.zonal_moment(&c, 2);
    let decade = 10f64.ln() / target;
    let (mut t, mut ts, mut ys) = (0.0, Vec::new(), Vec::new());
    for k in 1..=16 {
        let next = decade * k as f64 / 16.0;
        c = solver.advance(&c, next - t, decade / 160.0).map_err(err)?;
        t = next;
        ts.push(t);
        ys.push((solver.zonal_moment(&c, 2) / p0).ln());
    }
    let n = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&ys).map(|(a, b)| (a - mt) * (b - my)).sum::<f64>()
        / ts.iter().map(|a| (a - mt).powi(2)).sum::<f64>();
    let spectral = -slope;

    let sde = doi_rate_sde(d_r, 100_000, 2e-3, 21).map_err(err)?;
    // weighted fit of -ln P2 = k t through the origin
    let (mut num, mut den) = (0.0, 0.0);
    for ((t, y), se) in sde.times.iter().zip(&sde.p2).zip(&sde.p2_se) {
        let w = (y / se).powi(2);
        num += w * t * (-y.ln());
        den += w * t * t;
    }
    let sde_rate = num / den;
    let (e1, e2) = ((spectral / target - 1.0).abs(), (sde_rate / target - 1.0).abs());
    Ok((
        e1 < 1e-3 && e2 < 1e-2,
        format!(
            "spectral rate {spectral:.8} ({e1:.1e} rel.); SDE rate {sde_rate:.4} ({e2:.1e} rel., N = 1e5); 6 D_r = {target}"
        ),
    ))
}

// --- 8: epsilon to zero --------------------------------------------------------

fn distances(r: &ConvergenceReport) -> (Vec<f64>, Vec<f64>) {
    (r.points.iter().map(|p| p.epsilon).collect(), r.points.iter().map(|p| p.l1).collect())
}

fn strictly_decreasing(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[1] < w[0])
}

fn factorization_ratio(r: &ConvergenceReport) -> f64 {
    let at = |e: f64| r.points.iter().find(|p| (p.epsilon - e).abs() < 1e-12).map(|p| p.factorization);
    match (at(0.1), at(0.4)) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    }
}

fn epsilon_limit() -> Verdict {
    let reduced = ReducedSweep::default().run().map_err(err)?;
    let (eps, d) = distances(&reduced);
    let order = loglog_slope(&eps, &d);
    let reduced_ok = eps == [0.4, 0.2, 0.1, 0.05] && strictly_decreasing(&d) && order >= 0.8;

    let sde_eps = vec![0.4, 0.2, 0.1];
    let dumb = DumbbellSweep {
        epsilons: sde_eps.clone(),
        samples: 100_000,
        ..DumbbellSweep::default()
    }
    .run()
    .map_err(err)?;
    let rod = RodSweep {
        epsilons: sde_eps,
        samples: 100_000,
        ..RodSweep::default()
    }
    .run()
    .map_err(err)?;
    let (_, dd) = distances(&dumb);
    let (_, dr) = distances(&rod);
    let (fd, fr) = (factorization_ratio(&dumb), factorization_ratio(&rod));
    let sde_ok = strictly_decreasing(&dd) && strictly_decreasing(&dr) && fd < 0.5 && fr < 0.5;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
    Ok((
        reduced_ok && sde_ok,
        format!(
            "reduced FP L1 [{}] order {order:.3}; SDE dumbbell L1 [{}] factorization ratio {fd:.3}; SDE rod L1 [{}] factorization ratio {fr:.3}",
            fmt(&d),
            fmt(&dd),
            fmt(&dr)
        ),
    ))
}

// --- 9: stress ------------------------------------------------------------------

/// Stationary second moments of the linear system z = (n, q):
/// dn = q dt, dq = [-(zeta/m)(q - kappa n) - (2H/m) n] dt + sqrt(4 kBT zeta)/m dW,
/// by RK4 on dC/dt = AC + CA^T + BB^T.
fn stationary_nn(kappa: &Matrix3<f64>, zeta: f64, kbt: f64, h: f64, eps: f64) -> Matrix3<f64> {
    let m = eps * eps;
    let mut a = Matrix6::<f64>::zeros();
    let mut bb = Matrix6::<f64>::zeros();
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
        a[(i + 3, i + 3)] = -zeta / m;
        a[(i + 3, i)] = -2.0 * h / m;
        bb[(i + 3, i + 3)] = 4.0 * kbt * zeta / (m * m);
        for j in 0..3 {
            a[(i + 3, j)] += zeta / m * kappa[(i, j)];
        }
    }
    let rhs = |c: &Matrix6<f64>| a * c + c * a.transpose() + bb;
    let dt = 0.1 * m / zeta;
    let mut c = Matrix6::<f64>::zeros();
    let mut t = 0.0;
    while t < 40.0 * zeta / (2.0 * h) {
        let k1 = rhs(&c);
        let k2 = rhs(&(c + k1 * (0.5 * dt)));
        let k3 = rhs(&(c + k2 * (0.5 * dt)));
        let k4 = rhs(&(c + k3 * dt));
        c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        t += dt;
    }
    c.fixed_view::<3, 3>(0, 0).into_owned()
}

fn stress_run(rate: f64, seed: u64) -> Result<(Matrix3<f64>, Matrix3<f64>, Matrix3<f64>), String> {
    let (eps, zeta, kbt, h, samples, dt) = (0.2, 1.0, 1.0, 1.0, 100_000, 0.01);
    let spring = SpringModel::hookean(h).map_err(err)?;
    let flow = FlowField::simple_shear(rate);
    let mut par = DumbbellParams::new(eps, zeta, kbt, spring, flow).map_err(err)?;
    par.spatial_noise = false;
    let stepper = InertialStepper::new(par, dt).map_err(err)?;
    let mut ens = Ensemble::from_states(vec![DumbbellState::at_rest(Vec3::zeros()); samples], seed);
    ens.simulate(dt, 20.0 * zeta / (2.0 * h), &[], |s, rng| stepper.step(s, rng), |_| {})
        .map_err(err)?;
    let (mut tau, mut se) = (Matrix3::zeros(), Matrix3::zeros());
    for i in 0..3 {
        for j in 0..3 {
            let v: Vec<f64> = ens.states.iter().map(|s| h * s.n[i] * s.n[j]).collect();
            let (m, e) = mean_with_se(&v);
            tau[(i, j)] = m;
            se[(i, j)] = e;
        }
    }
    let oracle = stationary_nn(&flow.kappa, zeta, kbt, h, eps) * h;
    Ok((tau, se, oracle))
}

fn stress_oracle() -> Verdict {
    let (tau, se, _) = stress_run(0.0, 909)?;
    let kbt = 1.0;
    let mut z_eq: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { kbt } else { 0.0 };
            z_eq = z_eq.max((tau[(i, j)] - target).abs() / se[(i, j)]);
        }
    }
    let rate = 0.5;
    let (tau, se, oracle) = stress_run(rate, 910)?;
    let z_shear = (tau[(0, 1)] - oracle[(0, 1)]).abs() / se[(0, 1)];
    Ok((
        z_eq < 3.0 && z_shear < 3.0,
        format!(
            "equilibrium max |tau - kBT Id|/SE = {z_eq:.2}; shear tau12/rate = {:.4} +- {:.4} against Lyapunov {:.4} (z = {z_shear:.2})",
            tau[(0, 1)] / rate,
            se[(0, 1)] / rate,
            oracle[(0, 1)] / rate
        ),
    ))
}

// --- 10: geometry -----------------------------------------------------------------

fn ambient_gradient<F: Fn(&Vec3) -> f64>(f: F, at: &Vec3, h: f64) -> Vec3 {
    Vector3::from_fn(|i, _| {
        let mut e = Vec3::zeros();
        e[i] = h;
        (f(&(at + e)) - f(&(at - e))) / (2.0 * h)
    })
}

fn geometry_battery() -> Verdict {
    let mut rng = TrajectoryRng::seed_from_u64(1010);
    let battery = polynomial_battery();
    let mut worst: f64 = 0.0;
    for field in &battery {
        let (a, y, c) = (random_vec(&mut rng), random_vec(&mut rng), random_vec(&mut rng));
        let r = cross_chain_identity_check(&a, |x| field.scalar.eval2(x, &c), &y, DEFAULT_FD_STEP);
        worst = worst.max(r.max());
        let n = uniform_orientation(&mut rng);
        let w = tangent_project(&random_vec(&mut rng), &n).into_inner();
        let r = bundle_change_of_variables_check(
            &n,
            &w,
            |m, v| field.scalar.eval2(m, v),
            |m, v| field.vector_at(m, v),
            DEFAULT_FD_STEP,
        );
        worst = worst.max(r.max());
        // R f = n x grad f for the ambient extension
        let f = |m: &Vec3| field.scalar.eval2(m, &c);
        let rg = rotational_gradient(|m: &UnitVector| f(m.as_vec()), &n, DEFAULT_FD_STEP);
        let ambient = n.as_vec().cross(&ambient_gradient(f, n.as_vec(), 1e-6));
        worst = worst.max((rg - ambient).norm());
    }
    let mut rgrad: f64 = 0.0;
    for _ in 0..100 {
        let a = random_vec(&mut rng);
        let n = uniform_orientation(&mut rng);
        let g = rotational_gradient(|m| m.dot(&a), &n, DEFAULT_FD_STEP);
        rgrad = rgrad.max((g - n.as_vec().cross(&a)).norm());
    }
    Ok((
        battery.len() == 20 && worst < 1e-6 && rgrad < 1e-8,
        format!(
            "max identity residual {worst:.1e} over {} fields; max |R(n.a) - n x a| = {rgrad:.1e}",
            battery.len()
        ),
    ))
}

// --- 11: determinism ----------------------------------------------------------------

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = dir.path().join("config.toml");
    std::fs::write(
        &cfg,
        "model = \"dumbbell\"\nengine = \"sde-inertial\"\nseed = 42\n\
[physics]\nepsilon = 0.2\nspring = \"fene\"\nn0 = 3.0\nflow = \"simple-shear\"\nrate = 1.0\n\
[numerics]\ndt = 0.005\nt_final = 1.0\nsamples = 20000\nsample_interval = 0.25\n",
    )
    .map_err(err)?;
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("threads{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_polykin"))
            .args(["--threads", threads, "simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(err)?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        std::fs::read(out.join("moments.csv")).map_err(err)
    };
    let (a, b) = (run("1")?, run("4")?);
    let rows = a.iter().filter(|c| **c == b'\n').count();
    Ok((a == b, format!("moments.csv with --threads 1 and 4: {} bytes, {rows} lines, identical: {}", a.len(), a == b)))
}

// --------------------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Verdict); 11] = [
        ("equilibrium law, dumbbell", 120, dumbbell_equilibrium),
        ("equilibrium law, rod", 180, rod_equilibrium),
        ("collision-operator certificate", 60, collision_certificate),
        ("cell-problem oracle", 120, cell_problems),
        ("Gaussian-moment identities", 10, gaussian_moments),
        ("limit-equation steady states", 120, steady_states),
        ("Doi rotational diffusion", 180, doi_decay),
        ("epsilon to zero convergence", 900, epsilon_limit),
        ("stress oracle", 120, stress_oracle),
        ("geometry identity battery", 10, geometry_battery),
        ("determinism across thread counts", 60, determinism),
    ];
    let mut failures = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = f();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*budget);
        let (ok, detail) = match verdict {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s, budget {budget} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
