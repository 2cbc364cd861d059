//! Deterministic Fokker–Planck solvers: the inertia-free dumbbell equation on
//! the ball, the Doi equation on the sphere and the full inertial equation
//! in a one-dimensional reduction.

mod banded;
pub mod doi;
pub mod inertial;
pub mod limit;

pub use banded::BandedMatrix;
pub use doi::{
    onsager_steady_state, onsager_sweep, order_parameter, solve_doi_limit, DoiParams, DoiPotential,
    DoiSolver, OnsagerState,
};
pub use inertial::{
    flux_moments, solve_inertial_reduced, FluxMoments, InertialDensity, ReducedInertialGrid,
    ReducedInertialSolver, ReducedOptions, ReducedParams,
};
pub use limit::{solve_fene_limit, BallGeometry, BallGrid, LimitParams, LimitSolver, LimitStepper};

/// TR-BDF2 stage fraction 2 − √2; both implicit stages then share one matrix.
pub const TRBDF2_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

/// B(x) = x / (eˣ − 1), with B(0) = 1.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        1.0 - 0.5 * x + x * x / 12.0 - x.powi(4) / 720.0
    } else {
        x / x.exp_m1()
    }
}
