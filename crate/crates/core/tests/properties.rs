use std::f64::consts::PI;

use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use polykin::collision::{CollisionOperator, MaxwellianSpec, Model, VelocityGrid};
use polykin::dumbbell::{DumbbellParams, DumbbellState, InertialStepper};
use polykin::ensemble::{Ensemble, TrajectoryRng};
use polykin::forces::{FlowField, SpringModel};
use polykin::fp::inertial::{
    normal_cell_averages, InertialDensity, ReducedInertialGrid, ReducedInertialSolver,
    ReducedOptions, ReducedParams,
};
use polykin::fp::{BallGeometry, DoiParams, DoiSolver, LimitParams, LimitSolver};
use polykin::geometry::{
    exp_map, rotate_to_pole, rotational_divergence, rotational_gradient, tangent_project,
    SphCoord, UnitVector, Vec3, DEFAULT_FD_STEP,
};
use polykin::harness::stats::fit_order;
use polykin::harness::{estimate_moments, stress_tensor, Observation};
use polykin::quadrature::SphereQuadrature;
use polykin::rod::{thermal_rod_velocities, uniform_orientation, InertialRodStepper, RodParams, RodState};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = UnitVector> {
    vec3(1.0)
        .prop_filter("away from zero", |v| v.norm() > 1e-3)
        .prop_map(|v| UnitVector::new(v).unwrap())
}

fn matrix(r: f64) -> impl Strategy<Value = Matrix3<f64>> {
    proptest::collection::vec(-r..r, 9).prop_map(|v| Matrix3::from_row_slice(&v))
}

// geometry

proptest! {
    #[test]
    fn normalization_gives_unit_length(v in vec3(1e3).prop_filter("nonzero", |v| v.norm() > 1e-6)) {
        let n = UnitVector::new(v).unwrap();
        prop_assert!((n.as_vec().norm() - 1.0).abs() < 1e-12);
        let m = UnitVector::renormalized(*n.as_vec() * (1.0 + 1e-9));
        prop_assert!((m.as_vec().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_projection_is_tangent(n in unit(), v in vec3(10.0)) {
        let t = tangent_project(&v, &n);
        prop_assert!(t.as_vec().dot(n.as_vec()).abs() < 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn spherical_coordinates_round_trip(theta in 0.01..PI - 0.01, phi in 0.0..2.0 * PI) {
        let back = SphCoord::new(theta, phi).to_unit().to_sph();
        prop_assert!((back.theta - theta).abs() < 1e-10);
        let dphi = (back.phi - phi).rem_euclid(2.0 * PI);
        prop_assert!(dphi.min(2.0 * PI - dphi) < 1e-10);
    }

    #[test]
    fn rotational_gradient_of_linear_functions(n in unit(), a in vec3(2.0)) {
        let g = rotational_gradient(|m| m.dot(&a), &n, DEFAULT_FD_STEP);
        prop_assert!((g - n.as_vec().cross(&a)).norm() < 1e-8);
        prop_assert!(g.dot(n.as_vec()).abs() < 1e-8);
    }

    #[test]
    fn rotational_gradient_is_tangent(n in unit(), m in matrix(1.0), c in vec3(1.0)) {
        let f = |x: &UnitVector| {
            let v = x.as_vec();
            v.dot(&(m * v)) + c.dot(v).powi(3)
        };
        let g = rotational_gradient(f, &n, DEFAULT_FD_STEP);
        prop_assert!(g.dot(n.as_vec()).abs() < 1e-8);
    }

    #[test]
    fn rotate_to_pole_is_a_proper_rotation(n in unit()) {
        let k = rotate_to_pole(&n);
        let m = k.matrix();
        prop_assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        prop_assert!((k * Vec3::z() - n.as_vec()).norm() < 1e-12);
    }

    #[test]
    fn exp_map_stays_on_the_sphere(n in unit(), v in vec3(5.0)) {
        let t = tangent_project(&v, &n).into_inner();
        let m = exp_map(&n, &t);
        prop_assert!((m.as_vec().norm() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rotational_divergence_integrates_to_zero(m in matrix(1.0), c in vec3(1.0)) {
        let quad = SphereQuadrature::new(16, 32).unwrap();
        let field = |n: &UnitVector| {
            let v = n.as_vec();
            v.cross(&(c + m * v))
        };
        let total = quad.integrate(|n| rotational_divergence(field, n, DEFAULT_FD_STEP));
        prop_assert!(total.abs() < 1e-6, "{total}");
    }
}

// forces

fn fd_gradient(s: &SpringModel, n: &Vec3) -> Vec3 {
    let h = 1e-6 * n.norm().max(1.0);
    Vec3::from_fn(|i, _| {
        let mut e = Vec3::zeros();
        e[i] = h;
        (s.potential(&(n + e)).unwrap() - s.potential(&(n - e)).unwrap()) / (2.0 * h)
    })
}

proptest! {
    #[test]
    fn spring_force_is_the_potential_gradient(
        h in 0.1..5.0f64,
        n0 in 1.0..5.0f64,
        dir in unit(),
        frac in 0.05..0.9f64,
    ) {
        for s in [SpringModel::hookean(h).unwrap(), SpringModel::fene(h, n0).unwrap()] {
            let n = dir.as_vec() * (frac * n0);
            let f = s.force(&n).unwrap();
            let g = fd_gradient(&s, &n);
            prop_assert!((f - g).norm() < 1e-7 * f.norm(), "{f:?} {g:?}");
        }
    }

    #[test]
    fn fene_force_diverges_at_the_rim(h in 0.1..5.0f64, n0 in 1.0..5.0f64, dir in unit()) {
        let s = SpringModel::fene(h, n0).unwrap();
        let mag = |k: i32| s.force(&(dir.as_vec() * (n0 * (1.0 - 10f64.powi(-k))))).unwrap().norm();
        for k in 2..6 {
            let ratio = mag(k + 1) / mag(k);
            prop_assert!((ratio - 10.0).abs() < 0.6, "k = {k}: {ratio}");
        }
    }

    #[test]
    fn flow_is_exactly_linear(
        kappa in matrix(3.0),
        x in vec3(10.0),
        y in vec3(10.0),
        a in -4.0..4.0f64,
        b in -4.0..4.0f64,
    ) {
        let flow = FlowField::general(kappa);
        let lhs = flow.velocity(&(x * a + y * b));
        let rhs = flow.velocity(&x) * a + flow.velocity(&y) * b;
        prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + lhs.norm()));
        prop_assert_eq!(flow.eval(&x).1, kappa);
    }

    #[test]
    fn incompressible_presets_are_traceless(rate in -5.0..5.0f64) {
        for f in [FlowField::simple_shear(rate), FlowField::planar_extension(rate)] {
            prop_assert!(f.kappa.trace() == 0.0);
            prop_assert!(f.is_incompressible(0.0));
        }
    }
}

// stochastic engines

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fene_dumbbells_stay_inside_the_ball(
        seed in any::<u64>(),
        eps in 0.05..1.0f64,
        rate in 0.0..20.0f64,
        start in 0.5..0.999f64,
    ) {
        let n0 = 2.0;
        let spring = SpringModel::fene(1.0, n0).unwrap();
        let par = DumbbellParams::new(eps, 1.0, 1.0, spring, FlowField::planar_extension(rate)).unwrap();
        let stepper = InertialStepper::new(par, 0.01).unwrap();
        let mut ens = Ensemble::from_states(
            vec![DumbbellState::at_rest(Vec3::new(start * n0, 0.0, 0.0)); 40],
            seed,
        );
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            ens.advance(4, 0.01, |s, rng| stepper.step(s, rng)).unwrap();
            worst = ens.states.iter().fold(worst, |w, s| w.max(s.n.norm() / n0));
        }
        prop_assert!(worst < 1.0, "{worst}");
    }

    #[test]
    fn trajectory_noise_ignores_ensemble_size_and_threads(seed in any::<u64>(), extra in 1usize..20) {
        let par = DumbbellParams::new(0.3, 1.0, 1.0, SpringModel::hookean(1.0).unwrap(), FlowField::simple_shear(1.0)).unwrap();
        let stepper = InertialStepper::new(par, 0.01).unwrap();
        let run = |n: usize, threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut ens = Ensemble::from_states(vec![DumbbellState::at_rest(Vec3::x()); n], seed);
                ens.advance(20, 0.01, |s, rng| stepper.step(s, rng)).unwrap();
                ens.states
            })
        };
        let small = run(30, 1);
        let large = run(30 + extra, 3);
        prop_assert_eq!(&small[..], &large[..30]);
    }

    #[test]
    fn rods_keep_their_constraints(
        seed in any::<u64>(),
        eps in 0.05..1.0f64,
        kbt in 0.0..3.0f64,
        zeta_r in 0.2..5.0f64,
        rate in 0.0..10.0f64,
    ) {
        let par = RodParams::new(eps, 1.0, zeta_r, kbt, FlowField::simple_shear(rate)).unwrap();
        let stepper = InertialRodStepper::new(par.clone(), 0.005).unwrap();
        let mut rng = TrajectoryRng::seed_from_u64(seed);
        let mut states: Vec<RodState> = (0..20)
            .map(|_| {
                let n = uniform_orientation(&mut rng);
                let mut s = RodState::at_rest(n);
                if kbt > 0.0 {
                    let (p, w) = thermal_rod_velocities(&par, &n, &mut rng);
                    s.p = p;
                    s.omega = w;
                }
                s
            })
            .collect();
        for _ in 0..100 {
            for s in states.iter_mut() {
                stepper.step(s, &mut rng);
                prop_assert!((s.n.as_vec().norm() - 1.0).abs() < 1e-10);
                prop_assert!(s.omega.dot(s.n.as_vec()).abs() < 1e-10 * s.omega.norm().max(1.0));
            }
        }
    }
}

// collision operator

fn operator(model: Model, kbt: f64, points: usize) -> CollisionOperator {
    let spec = MaxwellianSpec::new(model, kbt).unwrap();
    let grid = VelocityGrid::uniform(2, points, 6.0, &spec).unwrap();
    match model {
        Model::Dumbbell => CollisionOperator::dumbbell(kbt, 1.3, grid).unwrap(),
        Model::Rod => CollisionOperator::rod(kbt, 0.8, 2.0, 1, grid).unwrap(),
    }
}

fn perturbed(op: &CollisionOperator, rng: &mut TrajectoryRng) -> Vec<f64> {
    op.maxwellian()
        .iter()
        .map(|m| m * (1.0 + 0.5 * rng.random_range(-1.0..1.0)))
        .collect()
}

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::Dumbbell), Just(Model::Rod)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn collisions_conserve_mass(m in model(), kbt in 0.2..3.0f64, seed in any::<u64>()) {
        let op = operator(m, kbt, 24);
        let f = perturbed(&op, &mut TrajectoryRng::seed_from_u64(seed));
        let q = op.apply(&f).unwrap();
        prop_assert!(op.grid().integrate(&q).abs() < 1e-13 * op.grid().l2_norm(&f));
        prop_assert!(op.dissipation(&f).unwrap() <= 0.0);
    }

    #[test]
    fn collisions_are_self_adjoint_in_the_weighted_product(m in model(), kbt in 0.2..3.0f64, seed in any::<u64>()) {
        let op = operator(m, kbt, 24);
        let mut rng = TrajectoryRng::seed_from_u64(seed);
        let (f, g) = (perturbed(&op, &mut rng), perturbed(&op, &mut rng));
        let (qf, qg) = (op.apply(&f).unwrap(), op.apply(&g).unwrap());
        let mw = op.maxwellian();
        let lhs = op.grid().integrate(&qf.iter().zip(&g).zip(mw).map(|((q, g), m)| q * g / m).collect::<Vec<_>>());
        let rhs = op.grid().integrate(&qg.iter().zip(&f).zip(mw).map(|((q, f), m)| q * f / m).collect::<Vec<_>>());
        let scale = op.grid().l2_norm(&f) * op.grid().l2_norm(&g);
        prop_assert!((lhs - rhs).abs() < 1e-10 * scale, "{lhs} {rhs}");
    }

    #[test]
    fn maxwellian_multiples_are_the_null_space(m in model(), kbt in 0.2..3.0f64, c in 0.1..10.0f64) {
        let op = operator(m, kbt, 24);
        let f: Vec<f64> = op.maxwellian().iter().map(|x| c * x).collect();
        let q = op.apply(&f).unwrap();
        let norm = op.grid().l2_norm(&f);
        prop_assert!(op.grid().l2_norm(&q) < 1e-12 * norm);
        prop_assert!(op.dissipation(&f).unwrap().abs() < 1e-12 * norm * norm);
    }

    #[test]
    fn maxwellians_are_unnormalized_gaussians(kbt in 0.1..5.0f64, p in -5.0..5.0f64, q in -5.0..5.0f64) {
        let d = MaxwellianSpec::new(Model::Dumbbell, kbt).unwrap();
        let r = MaxwellianSpec::new(Model::Rod, kbt).unwrap();
        let s = p * p + q * q;
        prop_assert!((d.eval(&[p, q]) - (-s / (4.0 * kbt)).exp()).abs() < 1e-15);
        prop_assert!((r.eval(&[p, q]) - (-s / (2.0 * kbt)).exp()).abs() < 1e-15);
        prop_assert!((d.normalization(2) - 4.0 * PI * kbt).abs() < 1e-12 * kbt);
    }
}

// inertia-free and reduced solvers

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn limit_solver_conserves_mass_and_positivity(
        fene in any::<bool>(),
        two_d in any::<bool>(),
        rate in 0.0..3.0f64,
        centre in -0.5..0.5f64,
    ) {
        let spring = if fene { SpringModel::fene(1.0, 3.0).unwrap() } else { SpringModel::hookean(1.0).unwrap() };
        let flow = if two_d {
            FlowField::planar_extension(rate)
        } else {
            FlowField::general(Matrix3::new(rate, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))
        };
        let par = LimitParams::new(1.0, 1.0, spring, flow).unwrap();
        let geometry = match (two_d, fene) {
            (false, _) => BallGeometry::Interval { cells: 64 },
            (true, false) => BallGeometry::Square { cells: 32 },
            (true, true) => BallGeometry::Disk { radial: 16, angular: 32 },
        };
        let solver = LimitSolver::new(par, geometry).unwrap();
        let c = Vec3::new(centre, 0.5 * centre, 0.0);
        let mut rho = solver.project(|x| (-(x - c).norm_squared() / 0.2).exp()).unwrap();
        let m0 = solver.grid().mass(&rho);
        solver.stepper(0.01).unwrap().advance(&mut rho, 1.0).unwrap();
        prop_assert!((solver.grid().mass(&rho) - m0).abs() < 1e-10);
        prop_assert!(rho.iter().all(|r| *r >= -1e-12));
    }

    #[test]
    fn free_doi_conserves_mass_and_dissipates_entropy(k in 0.5..10.0f64, d in unit()) {
        let solver = DoiSolver::new(DoiParams::free(0.7), 12).unwrap();
        let mut c = solver.project(|n| (k * (n.dot(d.as_vec()) - 1.0)).exp()).unwrap();
        let m0 = solver.mass(&c);
        let mut h = solver.entropy_functional(&c);
        for _ in 0..20 {
            c = solver.step(&c, 0.02);
            let next = solver.entropy_functional(&c);
            prop_assert!(next <= h + 1e-12, "{next} > {h}");
            h = next;
        }
        prop_assert!((solver.mass(&c) - m0).abs() < 1e-10);
    }

    #[test]
    fn reduced_inertial_solver_conserves_mass(
        eps in 0.1..0.5f64,
        mean in -1.0..1.0f64,
        var in 0.2..0.5f64,
        kappa in 0.0..0.5f64,
    ) {
        let params = ReducedParams { zeta: 1.0, kbt: 1.0, spring: SpringModel::hookean(1.0).unwrap(), kappa };
        let grid = ReducedInertialGrid::for_params(&params, 200, 30).unwrap();
        let rho = normal_cell_averages(&grid, mean, var);
        let mut f = InertialDensity::local_equilibrium(&grid, &rho, params.variance()).unwrap();
        let solver = ReducedInertialSolver::new(params, grid.clone(), eps, ReducedOptions::default()).unwrap();
        let m0 = f.mass(&grid);
        solver.advance(&mut f, 0.1).unwrap();
        prop_assert!((f.mass(&grid) - m0).abs() < 1e-10);
        prop_assert!(f.min() >= -1e-12);
    }
}

// harness

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn moment_covariances_are_symmetric_psd(seed in any::<u64>(), n in 100usize..400, scale in 0.01..10.0f64) {
        let mut rng = TrajectoryRng::seed_from_u64(seed);
        let obs: Vec<Observation> = (0..n)
            .map(|_| {
                let a = rng.random_range(-1.0..1.0) * scale;
                Observation {
                    n: Vec3::new(a, 2.0 * a + rng.random_range(-0.01..0.01), rng.random_range(-1.0..1.0)),
                    j1: Vec3::zeros(),
                    j2: Vec3::zeros(),
                }
            })
            .collect();
        let m = estimate_moments(&obs).unwrap();
        let c = m.cov_nn;
        let cov = Matrix3::new(c[0], c[1], c[2], c[1], c[3], c[4], c[2], c[4], c[5]);
        let eig = cov.symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-12 * cov.norm());
    }

    #[test]
    fn rod_second_moments_have_unit_trace(seed in any::<u64>()) {
        let mut rng = TrajectoryRng::seed_from_u64(seed);
        let obs: Vec<Observation> = (0..500)
            .map(|_| Observation { n: *uniform_orientation(&mut rng).as_vec(), j1: Vec3::zeros(), j2: Vec3::zeros() })
            .collect();
        let m = estimate_moments(&obs).unwrap();
        let c = m.cov_nn;
        let trace = c[0] + c[3] + c[5] + m.mean_n.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((trace - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stress_is_symmetric(seed in any::<u64>(), fene in any::<bool>()) {
        let spring = if fene { SpringModel::fene(1.0, 2.0).unwrap() } else { SpringModel::hookean(1.5).unwrap() };
        let mut rng = TrajectoryRng::seed_from_u64(seed);
        let n: Vec<Vec3> = (0..300)
            .map(|_| *uniform_orientation(&mut rng).as_vec() * rng.random_range(0.0..1.9))
            .collect();
        let s = stress_tensor(&n, &spring).unwrap();
        prop_assert!((s.tau - s.tau.transpose()).norm() < 1e-14 * s.tau.norm());
    }

    #[test]
    fn fitted_order_recovers_power_laws(k in 0.2..3.0f64, c in 1e-3..10.0f64, e0 in 0.2..1.0f64) {
        let eps = [e0, e0 / 2.0, e0 / 4.0, e0 / 8.0];
        let d: Vec<f64> = eps.iter().map(|e| c * e.powf(k)).collect();
        prop_assert!((fit_order(&eps, &d).unwrap() - k).abs() < 1e-10);
    }
}
