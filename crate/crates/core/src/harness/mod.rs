//! Verification experiments: moments and stress of ensembles, statistical
//! distances, equilibrium runs, ε-sweeps and named check batteries.

pub mod equilibrium;
pub mod moments;
pub mod stats;
pub mod stress;
pub mod suites;
pub mod sweep;

pub use equilibrium::{
    dumbbell_equilibrium, hookean_stress, rod_equilibrium, EquilibriumReport, EquilibriumRun,
};
pub use moments::{estimate_moments, MomentSet, Observation};
pub use stress::{stress_tensor, StressTensor};
pub use suites::{run_suite, Check, Suite, SuiteReport};
pub use sweep::{ConvergenceReport, DumbbellSweep, ReducedSweep, RodSweep};
