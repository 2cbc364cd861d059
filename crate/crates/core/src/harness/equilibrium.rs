//! Long equilibrium and steady-shear runs of the inertial engines.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::moments::component_variances;
use super::stats::{mardia, MardiaTest};
use super::stress::{inertial_hookean_covariance, stress_tensor, StressTensor};
use crate::dumbbell::{DumbbellParams, DumbbellState, InertialStepper};
use crate::ensemble::Ensemble;
use crate::error::Result;
use crate::forces::{FlowField, SpringModel};
use crate::geometry::{rotate_to_pole, Vec3};
use crate::rod::{uniform_orientation, InertialRodStepper, RodParams, RodState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRun {
    pub epsilon: f64,
    pub samples: usize,
    pub dt: f64,
    pub seed: u64,
    /// Multiples of the slowest relaxation time to run for.
    pub relaxation_times: f64,
}

impl EquilibriumRun {
    pub fn new(epsilon: f64, samples: usize, seed: u64) -> Self {
        Self {
            epsilon,
            samples,
            dt: 0.01,
            seed,
            relaxation_times: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentVariance {
    pub label: String,
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub t_final: f64,
    /// The Maxwellian variance each scaled component should show.
    pub target: f64,
    pub variances: Vec<ComponentVariance>,
    pub mardia: MardiaTest,
    /// Largest |ω·n| over the final ensemble (rods; zero for dumbbells).
    pub max_normal_omega: f64,
}

impl EquilibriumReport {
    /// Largest |s² − target|/SE over the components.
    pub fn worst_z(&self) -> f64 {
        self.variances
            .iter()
            .map(|v| (v.value - self.target).abs() / v.se)
            .fold(0.0, f64::max)
    }
}

fn summarize(
    rows: Vec<Vec<f64>>,
    labels: &[&str],
    target: f64,
    t_final: f64,
    max_normal_omega: f64,
) -> Result<EquilibriumReport> {
    let variances = component_variances(&rows)?
        .into_iter()
        .zip(labels)
        .map(|((value, se), l)| ComponentVariance {
            label: l.to_string(),
            value,
            se,
        })
        .collect();
    Ok(EquilibriumReport {
        t_final,
        target,
        variances,
        mardia: mardia(&rows)?,
        max_normal_omega,
    })
}

/// Hookean dumbbells at rest at n = 0 and u = 0, run for the given number of
/// configuration relaxation times ζ/(2H). Reports the scaled (p, q)
/// components, whose law should be N(0, 2k_BT).
pub fn dumbbell_equilibrium(
    run: &EquilibriumRun,
    zeta: f64,
    kbt: f64,
    h: f64,
) -> Result<EquilibriumReport> {
    let spring = SpringModel::hookean(h)?;
    let par = DumbbellParams::new(run.epsilon, zeta, kbt, spring, FlowField::quiescent())?;
    let stepper = InertialStepper::new(par, run.dt)?;
    let t_final = run.relaxation_times * zeta / (2.0 * h);
    let mut ens = Ensemble::from_states(
        vec![DumbbellState::at_rest(Vec3::zeros()); run.samples],
        run.seed,
    );
    ens.simulate(run.dt, t_final, &[], |s, rng| stepper.step(s, rng), |_| {})?;
    let rows = ens
        .states
        .iter()
        .map(|s| {
            let (p, q) = s.scaled_velocities(run.epsilon);
            p.iter().chain(q.iter()).copied().collect()
        })
        .collect();
    summarize(
        rows,
        &["p1", "p2", "p3", "q1", "q2", "q3"],
        2.0 * kbt,
        t_final,
        0.0,
    )
}

/// Rods with uniform orientations at rest, run for the given number of
/// velocity relaxation times max(m/ζ_t, j/ζ_r). Reports the scaled p and
/// the two tangent-frame components of the scaled ω, whose law should be
/// N(0, k_BT).
pub fn rod_equilibrium(
    run: &EquilibriumRun,
    zeta_t: f64,
    zeta_r: f64,
    kbt: f64,
) -> Result<EquilibriumReport> {
    let par = RodParams::new(run.epsilon, zeta_t, zeta_r, kbt, FlowField::quiescent())?;
    let stepper = InertialRodStepper::new(par.clone(), run.dt)?;
    let tau = (par.mass() / zeta_t).max(par.inertia() / zeta_r);
    let t_final = run.relaxation_times * tau;
    let mut ens = Ensemble::from_fn(run.samples, run.seed, |_, rng| {
        RodState::at_rest(uniform_orientation(rng))
    });
    ens.simulate(
        run.dt,
        t_final,
        &[],
        |s, rng| {
            stepper.step(s, rng);
            Ok(())
        },
        |_| {},
    )?;
    let mut worst: f64 = 0.0;
    let rows = ens
        .states
        .iter()
        .map(|s| {
            let (p, w) = s.scaled_velocities(&par);
            worst = worst.max(w.dot(s.n.as_vec()).abs());
            let k = rotate_to_pole(&s.n);
            let (t1, t2) = (k * Vec3::x(), k * Vec3::y());
            vec![p.x, p.y, p.z, w.dot(&t1), w.dot(&t2)]
        })
        .collect();
    summarize(
        rows,
        &["p1", "p2", "p3", "omega_t1", "omega_t2"],
        kbt,
        t_final,
        worst,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressRun {
    pub stress: StressTensor,
    /// H·C from the stationary covariance of the linear inertial system.
    pub oracle: Matrix3<f64>,
    pub shear_rate: f64,
    pub t_final: f64,
}

/// Stationary stress of inertial Hookean dumbbells in simple shear (rate 0
/// is equilibrium), started from the equilibrium configuration law.
pub fn hookean_stress(
    run: &EquilibriumRun,
    zeta: f64,
    kbt: f64,
    h: f64,
    shear_rate: f64,
) -> Result<StressRun> {
    let spring = SpringModel::hookean(h)?;
    let flow = FlowField::simple_shear(shear_rate);
    let mut par = DumbbellParams::new(run.epsilon, zeta, kbt, spring, flow)?;
    par.spatial_noise = false;
    let stepper = InertialStepper::new(par, run.dt)?;
    let t_final = run.relaxation_times * zeta / (2.0 * h);
    let mut ens = Ensemble::from_states(
        vec![DumbbellState::at_rest(Vec3::zeros()); run.samples],
        run.seed,
    );
    ens.simulate(run.dt, t_final, &[], |s, rng| stepper.step(s, rng), |_| {})?;
    let n: Vec<Vec3> = ens.states.iter().map(|s| s.n).collect();
    let stress = stress_tensor(&n, &spring)?;
    let oracle = inertial_hookean_covariance(&flow.kappa, &spring, zeta, kbt, run.epsilon)? * h;
    Ok(StressRun {
        stress,
        oracle,
        shear_rate,
        t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_dumbbell_equilibrium() {
        let run = EquilibriumRun {
            relaxation_times: 6.0,
            ..EquilibriumRun::new(0.3, 5000, 3)
        };
        let r = dumbbell_equilibrium(&run, 1.0, 0.5, 1.0).unwrap();
        assert!(r.worst_z() < 4.0, "{r:?}");
        assert!(r.mardia.not_rejected(0.001), "{:?}", r.mardia);
    }

    #[test]
    fn small_rod_equilibrium() {
        let run = EquilibriumRun::new(0.3, 5000, 4);
        let r = rod_equilibrium(&run, 1.0, 2.0, 0.7).unwrap();
        assert!(r.worst_z() < 4.0, "{r:?}");
        assert!(r.max_normal_omega < 1e-8);
    }

    #[test]
    fn relaxed_dumbbells_without_noise_carry_no_stress() {
        let run = EquilibriumRun::new(0.3, 200, 5);
        let r = hookean_stress(&run, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(r.stress.tau, Matrix3::zeros());
    }
}
