//! Runs the engine a config selects and collects moments and snapshots.

use polykin::dumbbell::{
    equilibrium_configuration, thermal_velocities, DumbbellParams, DumbbellState,
    InertialStepper, OverdampedDumbbell, OverdampedStepper,
};
use polykin::ensemble::{Ensemble, Finite, TrajectoryRng};
use polykin::forces::{FlowField, PotentialField, SpringModel};
use polykin::fp::inertial::normal_cell_averages;
use polykin::fp::{
    flux_moments, onsager_steady_state, BallGeometry, DoiParams, DoiPotential, DoiSolver,
    InertialDensity, LimitParams, LimitSolver, ReducedInertialGrid, ReducedInertialSolver,
    ReducedOptions, ReducedParams,
};
use polykin::geometry::{Mat3, UnitVector, Vec3};
use polykin::harness::moments::{
    estimate_moments, observe_dumbbells, observe_overdamped_dumbbells, observe_overdamped_rods,
    observe_rods, Observation,
};
use polykin::harness::MomentSet;
use polykin::rod::{
    thermal_rod_velocities, uniform_orientation, InertialRodStepper, OverdampedRod,
    OverdampedRodStepper, RodParams, RodState,
};

use crate::config::{Engine, ExperimentConfig, Flow, Model, Potential, Spring, Velocities};
use crate::error::CliError;

/// Dense density values at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub values: Vec<f64>,
}

/// The points the frame values live on, one row per value.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinates {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<(f64, MomentSet)>,
    pub coordinates: Option<Coordinates>,
    pub frames: Vec<Frame>,
}

pub fn flow_field(cfg: &ExperimentConfig) -> FlowField {
    let r = cfg.physics.rate;
    match cfg.physics.flow {
        Flow::Quiescent => FlowField::quiescent(),
        Flow::SimpleShear => FlowField::simple_shear(r),
        Flow::PlanarExtension => FlowField::planar_extension(r),
    }
}

pub fn spring_model(cfg: &ExperimentConfig) -> Result<SpringModel, CliError> {
    let p = &cfg.physics;
    Ok(match p.spring {
        Spring::Hookean => SpringModel::hookean(p.h)?,
        Spring::Fene => SpringModel::fene(p.h, p.n0)?,
    })
}

fn unit(v: [f64; 3]) -> UnitVector {
    UnitVector::renormalized(Vec3::from(v))
}

fn dumbbell_params(cfg: &ExperimentConfig) -> Result<DumbbellParams, CliError> {
    let p = &cfg.physics;
    let mut par = DumbbellParams::new(p.epsilon, p.zeta, p.kbt, spring_model(cfg)?, flow_field(cfg))?;
    par.dim = p.dim;
    par.validate()?;
    Ok(par)
}

fn rod_params(cfg: &ExperimentConfig) -> Result<RodParams, CliError> {
    let p = &cfg.physics;
    let mut par = RodParams::new(p.epsilon, p.zeta_t, p.zeta_r, p.kbt, flow_field(cfg))?;
    if p.potential == Potential::Aligning {
        par.potential = Some(PotentialField::aligning(p.potential_strength, &unit(p.director)));
    }
    Ok(par)
}

/// Runs the SDE ensemble and records moments at every sample time.
fn sde<S, Step, Obs>(
    cfg: &ExperimentConfig,
    mut ens: Ensemble<S>,
    step: Step,
    observe: Obs,
) -> Result<RunOutput, CliError>
where
    S: Finite + Clone + Send + Sync,
    Step: Fn(&mut S, &mut TrajectoryRng) -> polykin::Result<()> + Sync,
    Obs: Fn(&[S]) -> Vec<Observation>,
{
    let mut rows = Vec::new();
    let mut failure = None;
    ens.simulate(
        cfg.numerics.dt,
        cfg.numerics.t_final,
        &cfg.sample_times(),
        step,
        |e| {
            if failure.is_some() {
                return;
            }
            match estimate_moments(&observe(&e.states)) {
                Ok(m) => rows.push((e.time, m)),
                Err(err) => failure = Some(err),
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(RunOutput {
        rows,
        coordinates: None,
        frames: Vec::new(),
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let n = cfg.numerics.samples;
    let seed = cfg.seed;
    match (cfg.model, cfg.engine) {
        (Model::Dumbbell, Engine::SdeInertial) => {
            let par = dumbbell_params(cfg)?;
            let stepper = InertialStepper::new(par, cfg.numerics.dt)?;
            let start = cfg.initial.n.map(Vec3::from);
            let thermal = cfg.initial.velocities == Velocities::Thermal;
            let ens = Ensemble::from_fn(n, seed, |_, rng| {
                let n = start.unwrap_or_else(|| equilibrium_configuration(&par, rng));
                let mut s = DumbbellState::at_rest(n);
                if thermal {
                    (s.p, s.q) = thermal_velocities(&par, rng);
                }
                s
            });
            let eps = par.epsilon;
            sde(cfg, ens, |s, rng| stepper.step(s, rng), |st| observe_dumbbells(st, eps))
        }
        (Model::Dumbbell, Engine::SdeOverdamped) => {
            let par = dumbbell_params(cfg)?;
            let stepper = OverdampedStepper::new(par, cfg.numerics.dt)?;
            let start = cfg.initial.n.map(Vec3::from);
            let ens = Ensemble::from_fn(n, seed, |_, rng| OverdampedDumbbell {
                x: Vec3::zeros(),
                n: start.unwrap_or_else(|| equilibrium_configuration(&par, rng)),
            });
            sde(
                cfg,
                ens,
                |s, rng| stepper.step(&mut s.x, &mut s.n, rng),
                observe_overdamped_dumbbells,
            )
        }
        (Model::Rod, Engine::SdeInertial) => {
            let par = rod_params(cfg)?;
            let stepper = InertialRodStepper::new(par.clone(), cfg.numerics.dt)?;
            let start = cfg.initial.director.map(unit);
            let thermal = cfg.initial.velocities == Velocities::Thermal;
            let ens = Ensemble::from_fn(n, seed, |_, rng| {
                let n = start.unwrap_or_else(|| uniform_orientation(rng));
                let mut s = RodState::at_rest(n);
                if thermal {
                    (s.p, s.omega) = thermal_rod_velocities(&par, &n, rng);
                }
                s
            });
            sde(
                cfg,
                ens,
                |s, rng| {
                    stepper.step(s, rng);
                    Ok(())
                },
                |st| observe_rods(st, &par),
            )
        }
        (Model::Rod, Engine::SdeOverdamped) => {
            let par = rod_params(cfg)?;
            let stepper = OverdampedRodStepper::new(par, cfg.numerics.dt)?;
            let start = cfg.initial.director.map(unit);
            let ens = Ensemble::from_fn(n, seed, |_, rng| OverdampedRod {
                x: Vec3::zeros(),
                n: start.unwrap_or_else(|| uniform_orientation(rng)),
            });
            sde(
                cfg,
                ens,
                |s, rng| {
                    stepper.step(&mut s.x, &mut s.n, rng);
                    Ok(())
                },
                observe_overdamped_rods,
            )
        }
        (Model::Dumbbell, Engine::FpLimit) => limit_dumbbell(cfg),
        (Model::Rod, Engine::FpLimit) => doi_rod(cfg),
        (Model::Dumbbell, Engine::FpInertialReduced) => reduced(cfg),
        (Model::Rod, Engine::FpInertialReduced) => Err(CliError::Config {
            field: "engine".into(),
            message: "the reduced inertial solver is dumbbell-only".into(),
        }),
    }
}

fn limit_solver(cfg: &ExperimentConfig) -> Result<LimitSolver, CliError> {
    let p = &cfg.physics;
    let params = LimitParams::new(p.zeta, p.kbt, spring_model(cfg)?, flow_field(cfg))?;
    let geometry = BallGeometry::base(p.dim, p.spring == Spring::Fene)?.refined(cfg.numerics.grid_level);
    Ok(LimitSolver::new(params, geometry)?)
}

fn ball_moments(solver: &LimitSolver, rho: &[f64]) -> MomentSet {
    let grid = solver.grid();
    let mut first = Vec3::zeros();
    if !matches!(grid.geometry(), BallGeometry::Shells { .. }) {
        for ((c, v), r) in grid.centres().iter().zip(grid.volumes()).zip(rho) {
            first += c * (v * r);
        }
    }
    MomentSet::from_density(
        grid.len(),
        grid.mass(rho),
        first,
        &grid.second_moments(rho),
        Vec3::zeros(),
        Vec3::zeros(),
    )
}

fn ball_coordinates(solver: &LimitSolver) -> Coordinates {
    let grid = solver.grid();
    let shells = matches!(grid.geometry(), BallGeometry::Shells { .. });
    let columns = if shells {
        vec!["r", "volume"]
    } else {
        vec!["n1", "n2", "n3", "volume"]
    };
    let rows = grid
        .centres()
        .iter()
        .zip(grid.volumes())
        .map(|(c, v)| {
            if shells {
                vec![c.norm(), *v]
            } else {
                vec![c.x, c.y, c.z, *v]
            }
        })
        .collect();
    Coordinates {
        kind: match grid.geometry() {
            BallGeometry::Interval { cells } => format!("interval of {cells} cells"),
            BallGeometry::Square { cells } => format!("square grid of {cells}x{cells} cells"),
            BallGeometry::Disk { radial, angular } => {
                format!("polar grid of {radial} rings by {angular} sectors")
            }
            BallGeometry::Shells { radial } => format!("{radial} spherical shells"),
        },
        columns: columns.into_iter().map(String::from).collect(),
        rows,
    }
}

fn limit_dumbbell(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let solver = limit_solver(cfg)?;
    let mut rho = match cfg.initial.n {
        None => solver.boltzmann_density()?,
        Some(n) => {
            let c = Vec3::from(n);
            let v = cfg.initial.variance.unwrap_or(cfg.physics.kbt / cfg.physics.h);
            solver.project(|x| (-(x - c).norm_squared() / (2.0 * v)).exp())?
        }
    };
    let mut stepper = solver.stepper(cfg.numerics.dt)?;
    let mut out = RunOutput {
        rows: vec![(0.0, ball_moments(&solver, &rho))],
        coordinates: Some(ball_coordinates(&solver)),
        frames: vec![Frame {
            t: 0.0,
            values: rho.clone(),
        }],
    };
    let mut now = 0.0;
    for t in cfg.sample_times() {
        stepper.advance(&mut rho, t - now)?;
        now = t;
        out.rows.push((t, ball_moments(&solver, &rho)));
        out.frames.push(Frame {
            t,
            values: rho.clone(),
        });
    }
    Ok(out)
}

fn doi_solver(cfg: &ExperimentConfig) -> Result<DoiSolver, CliError> {
    let p = &cfg.physics;
    let potential = match p.potential {
        Potential::None => DoiPotential::None,
        Potential::Aligning => {
            DoiPotential::Fixed(PotentialField::aligning(p.potential_strength, &unit(p.director)))
        }
        Potential::Onsager => DoiPotential::Onsager {
            strength: p.potential_strength,
        },
    };
    let params = DoiParams {
        d_r: p.kbt / p.zeta_r,
        kbt: p.kbt,
        flow: flow_field(cfg),
        potential,
    };
    Ok(DoiSolver::new(params, cfg.numerics.l_max)?)
}

fn sphere_moments(solver: &DoiSolver, c: &[f64]) -> MomentSet {
    let values = solver.values(c);
    let q = solver.grid().quadrature();
    let mut first = Vec3::zeros();
    for ((n, w), r) in q.nodes().iter().zip(q.weights()).zip(&values) {
        first += n.as_vec() * (w * r);
    }
    MomentSet::from_density(
        values.len(),
        solver.mass(c),
        first,
        &solver.second_moment(c),
        Vec3::zeros(),
        Vec3::zeros(),
    )
}

fn sphere_coordinates(solver: &DoiSolver) -> Coordinates {
    let q = solver.grid().quadrature();
    Coordinates {
        kind: format!("sphere quadrature, l_max {}", solver.l_max()),
        columns: ["n1", "n2", "n3", "weight"].map(String::from).to_vec(),
        rows: q
            .nodes()
            .iter()
            .zip(q.weights())
            .map(|(n, w)| {
                let v = n.as_vec();
                vec![v.x, v.y, v.z, *w]
            })
            .collect(),
    }
}

fn doi_initial(cfg: &ExperimentConfig, solver: &DoiSolver) -> Result<Vec<f64>, CliError> {
    Ok(match cfg.initial.director {
        None => solver.uniform(),
        Some(d) => {
            let d = unit(d);
            let k = cfg.initial.concentration.unwrap_or(8.0);
            solver.project(|n| (k * (n.dot(d.as_vec()) - 1.0)).exp())?
        }
    })
}

fn doi_rod(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let solver = doi_solver(cfg)?;
    let mut c = doi_initial(cfg, &solver)?;
    let mut out = RunOutput {
        rows: vec![(0.0, sphere_moments(&solver, &c))],
        coordinates: Some(sphere_coordinates(&solver)),
        frames: vec![Frame {
            t: 0.0,
            values: solver.values(&c),
        }],
    };
    let mut now = 0.0;
    for t in cfg.sample_times() {
        c = solver.advance(&c, t - now, cfg.numerics.dt)?;
        now = t;
        out.rows.push((t, sphere_moments(&solver, &c)));
        out.frames.push(Frame {
            t,
            values: solver.values(&c),
        });
    }
    Ok(out)
}

fn reduced(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let p = &cfg.physics;
    let kappa = match p.flow {
        Flow::PlanarExtension => p.rate,
        _ => 0.0,
    };
    let params = ReducedParams {
        zeta: p.zeta,
        kbt: p.kbt,
        spring: spring_model(cfg)?,
        kappa,
    };
    let grid = ReducedInertialGrid::for_params(&params, cfg.numerics.n_cells, cfg.numerics.v_points)?;
    let eps = p.epsilon;
    let solver = ReducedInertialSolver::new(params.clone(), grid.clone(), eps, ReducedOptions::default())?;
    let rho0 = match cfg.initial.n {
        None => solver.reference_density(),
        Some(n) => normal_cell_averages(&grid, n[0], cfg.initial.variance.unwrap_or(p.kbt / p.h)),
    };
    let mut f = InertialDensity::local_equilibrium(&grid, &rho0, params.variance())?;
    let h = grid.n_spacing();
    let record = |f: &InertialDensity| -> Result<(MomentSet, Vec<f64>), CliError> {
        let m = flux_moments(f, &grid, eps)?;
        let (mut mass, mut first, mut second, mut j1, mut j2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..grid.n_cells {
            let x = grid.n_centre(i);
            mass += h * m.rho[i];
            first += h * x * m.rho[i];
            second += h * x * x * m.rho[i];
            j1 += h * m.j1[i];
            j2 += h * m.j2[i];
        }
        let mut m2 = Mat3::zeros();
        m2[(0, 0)] = second;
        let set = MomentSet::from_density(
            grid.n_cells,
            mass,
            Vec3::new(first, 0.0, 0.0),
            &m2,
            Vec3::new(j1, 0.0, 0.0),
            Vec3::new(j2, 0.0, 0.0),
        );
        Ok((set, m.rho))
    };
    let coordinates = Coordinates {
        kind: format!("interval of {} cells", grid.n_cells),
        columns: vec!["n1".into(), "width".into()],
        rows: (0..grid.n_cells).map(|i| vec![grid.n_centre(i), h]).collect(),
    };
    let (m, rho) = record(&f)?;
    let mut out = RunOutput {
        rows: vec![(0.0, m)],
        coordinates: Some(coordinates),
        frames: vec![Frame { t: 0.0, values: rho }],
    };
    let mut now = 0.0;
    for t in cfg.sample_times() {
        solver.advance(&mut f, t - now)?;
        now = t;
        let (m, rho) = record(&f)?;
        out.rows.push((t, m));
        out.frames.push(Frame { t, values: rho });
    }
    Ok(out)
}

/// Stationary density of the inertia-free equation.
#[derive(Clone, Debug)]
pub struct SteadyOutput {
    pub moments: MomentSet,
    pub coordinates: Coordinates,
    pub density: Vec<f64>,
    /// L¹ distance to exp(−U/k_BT)/Z (dumbbells).
    pub boltzmann_l1: Option<f64>,
    /// Self-consistency and iterations of the Onsager fixed point (rods).
    pub onsager: Option<(f64, usize)>,
}

pub fn steady(cfg: &ExperimentConfig) -> Result<SteadyOutput, CliError> {
    match cfg.model {
        Model::Dumbbell => {
            let solver = limit_solver(cfg)?;
            let rho = solver.steady_state()?;
            let l1 = if cfg.physics.flow == Flow::Quiescent {
                Some(solver.grid().l1_distance(&rho, &solver.boltzmann_density()?))
            } else {
                None
            };
            Ok(SteadyOutput {
                moments: ball_moments(&solver, &rho),
                coordinates: ball_coordinates(&solver),
                density: rho,
                boltzmann_l1: l1,
                onsager: None,
            })
        }
        Model::Rod => {
            if cfg.physics.flow != Flow::Quiescent {
                return Err(CliError::Config {
                    field: "physics.flow".into(),
                    message: "the direct rod steady solve needs quiescent flow".into(),
                });
            }
            let solver = doi_solver(cfg)?;
            let (c, onsager) = match cfg.physics.potential {
                Potential::Onsager => {
                    let d = unit(cfg.physics.director);
                    let init: Vec<f64> = solver
                        .values(&doi_initial(cfg, &solver)?)
                        .iter()
                        .zip(solver.grid().quadrature().nodes())
                        .map(|(v, n)| {
                            let x = n.dot(d.as_vec());
                            v * (1.0 + 1e-3 * (1.5 * x * x - 0.5))
                        })
                        .collect();
                    let s = onsager_steady_state(&solver, &init, 0.5, 1e-12, 100_000)?;
                    (s.coeffs, Some((s.self_consistency, s.iterations)))
                }
                Potential::Aligning => {
                    let field = PotentialField::aligning(
                        cfg.physics.potential_strength,
                        &unit(cfg.physics.director),
                    );
                    let kbt = cfg.physics.kbt;
                    (solver.project(|n| (-field.value(n) / kbt).exp())?, None)
                }
                Potential::None => (solver.uniform(), None),
            };
            Ok(SteadyOutput {
                moments: sphere_moments(&solver, &c),
                coordinates: sphere_coordinates(&solver),
                density: solver.values(&c),
                boltzmann_l1: None,
                onsager,
            })
        }
    }
}
